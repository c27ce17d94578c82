"""fractalcyl: fractal Poisson cylinder processes and their subspace slices.

Simulation and exact-formula library for Poisson processes of infinite
cylinders with power-law radii, the ellipsoid processes they induce on
axis-aligned subspaces, vacancy/box-counting statistics of the fractal
vacant set, and connectivity censuses on planar slices.  The `fractalcyl`
console script runs the packaged experiments and emits pass/fail reports.
"""

from __future__ import annotations

from .connectivity import (
    arm_event,
    connectivity_trend,
    covered_crossing,
    lr1_census,
    lr1_expected,
    lr1_experiment,
    rasterize,
    vacant_crossing,
)
from .fractal import (
    BoxSurvey,
    VacancyEstimate,
    ZetaEstimate,
    box_survey,
    dimension_fit,
    vacancy_mc,
    zeta_estimates,
)
from .geom import (
    Cylinder,
    DyadicBox,
    Ellipsoid,
    LineParam,
    cylinder_subspace_ellipse,
    ellipse_contains,
    ellipse_stats,
    line_box_distance,
    point_line_distance,
)
from .measures import (
    CoveringConstants,
    ball_volume,
    beta_factor,
    constants,
    diam_moment,
    estimate_c2,
    idk_quadrature,
    nu_ball,
    psi,
    upsilon,
    vacancy_prob,
    xi_tv,
)
from .samplers import (
    Ball,
    ProcessSample,
    WindowSpec,
    induced_ball_process,
    induced_ellipse_process,
    regular_ball_process,
    sample_fractal_cylinders,
    sample_lines_ball,
    stream_rng,
    thinning_coupling,
)

__version__ = "1.0.0"

__all__ = [
    "Ball", "BoxSurvey", "CoveringConstants", "Cylinder", "DyadicBox",
    "Ellipsoid", "LineParam", "ProcessSample", "VacancyEstimate",
    "WindowSpec", "ZetaEstimate", "arm_event", "ball_volume", "beta_factor",
    "box_survey", "connectivity_trend", "constants", "covered_crossing",
    "cylinder_subspace_ellipse", "diam_moment", "dimension_fit",
    "ellipse_contains", "ellipse_stats", "estimate_c2", "idk_quadrature",
    "induced_ball_process", "induced_ellipse_process", "line_box_distance",
    "lr1_census", "lr1_expected", "lr1_experiment", "nu_ball",
    "point_line_distance", "psi", "rasterize", "regular_ball_process",
    "sample_fractal_cylinders", "sample_lines_ball", "stream_rng",
    "thinning_coupling", "upsilon", "vacancy_mc", "vacancy_prob",
    "vacant_crossing", "xi_tv", "zeta_estimates",
]
