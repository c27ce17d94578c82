"""Experiment runner CLI.

Each subcommand validates a parameter map (merged from an optional JSON
config file and command-line flags, flags winning), runs a seeded experiment,
and emits a report whose rows follow the fixed schema

    metric,estimate,std_error,target,target_kind,z,pass

target_kind is 'closed-form' (pass iff |z| <= 3), 'bound' (z measures the
standardized violation of the inequality; pass iff z <= 3), or 'trend'
(informational, always passes).  The process exits 0 iff every closed-form
row passes.  Numbers are reported to 12 significant digits; rows are rounded
at construction so emit/parse round-trips are exact.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import subprocess
import sys
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import connectivity, fractal, geom, measures, samplers

THREADS_ENV = "FRACTALCYL_THREADS"

EXPERIMENTS = (
    "vacancy", "boxcount", "dimension", "ellipse-stats", "measures-selftest",
    "lr1", "coupling", "connectivity-trend", "sample-dump",
)


class ConfigError(Exception):
    """Invalid experiment configuration (reported without partial output)."""


# =========================================================================
# report model
# =========================================================================

def _round12(x):
    if x is None:
        return None
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return x
    return float(f"{x:.12g}")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    return f"{float(x):.12g}"


@dataclass(frozen=True)
class ReportRow:
    metric: str
    estimate: float
    std_error: float
    target: float | None
    target_kind: str
    z: float | None
    passed: bool

    def __post_init__(self):
        if self.target_kind not in ("closed-form", "bound", "trend"):
            raise ValueError(f"bad target_kind {self.target_kind!r}")
        object.__setattr__(self, "estimate", _round12(self.estimate))
        object.__setattr__(self, "std_error", _round12(self.std_error))
        object.__setattr__(self, "target", _round12(self.target))
        object.__setattr__(self, "z", _round12(self.z))
        object.__setattr__(self, "passed", bool(self.passed))


def closed_form_row(metric: str, estimate: float, se: float,
                    target: float) -> ReportRow:
    if se > 0:
        z = (estimate - target) / se
    else:
        z = 0.0 if estimate == target else math.copysign(math.inf,
                                                         estimate - target)
    return ReportRow(metric, estimate, se, target, "closed-form", z,
                     abs(z) <= 3.0)


def deterministic_row(metric: str, estimate: float, target: float,
                      atol: float) -> ReportRow:
    """Closed-form row for a deterministic check: std_error = atol/3 so the
    3-sigma gate coincides with |estimate - target| <= atol."""
    return closed_form_row(metric, estimate, atol / 3.0, target)


def bound_row(metric: str, estimate: float, se: float, target: float,
              side: str) -> ReportRow:
    """side='upper': require estimate <= target; side='lower': >=."""
    diff = estimate - target if side == "upper" else target - estimate
    if se > 0:
        z = diff / se
    else:
        z = 0.0 if diff <= 0 else math.inf
    return ReportRow(metric, estimate, se, target, "bound", z, z <= 3.0)


def trend_row(metric: str, estimate: float, se: float = 0.0,
              target: float | None = None) -> ReportRow:
    z = (estimate - target) / se if (target is not None and se > 0) else None
    return ReportRow(metric, estimate, se, target, "trend", z, True)


@dataclass
class ExperimentReport:
    rows: list[ReportRow]
    provenance: dict

    @property
    def all_closed_form_pass(self) -> bool:
        return all(r.passed for r in self.rows if r.target_kind == "closed-form")


REPORT_HEADER = "metric,estimate,std_error,target,target_kind,z,pass"


def emit_csv(report: ExperimentReport, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(REPORT_HEADER.split(","))
    for r in report.rows:
        writer.writerow([r.metric, _fmt(r.estimate), _fmt(r.std_error),
                         _fmt(r.target), r.target_kind, _fmt(r.z),
                         _fmt(r.passed)])


def emit_json(report: ExperimentReport, fh) -> None:
    payload = {
        "rows": [
            {"metric": r.metric, "estimate": r.estimate,
             "std_error": r.std_error, "target": r.target,
             "target_kind": r.target_kind, "z": r.z, "pass": r.passed}
            for r in report.rows
        ],
        "provenance": report.provenance,
    }
    json.dump(payload, fh, indent=2, allow_nan=True)
    fh.write("\n")


def _parse_field(s: str):
    if s == "":
        return None
    if s in ("true", "false"):
        return s == "true"
    return float(s)


def parse_report_csv(path) -> list[ReportRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if ",".join(header) != REPORT_HEADER:
            raise ValueError(f"unexpected report header {header!r}")
        rows = []
        for rec in reader:
            rows.append(ReportRow(
                metric=rec[0], estimate=_parse_field(rec[1]),
                std_error=_parse_field(rec[2]), target=_parse_field(rec[3]),
                target_kind=rec[4], z=_parse_field(rec[5]),
                passed=_parse_field(rec[6])))
    return rows


def parse_report_json(path) -> ExperimentReport:
    with open(path) as fh:
        payload = json.load(fh)
    rows = [ReportRow(metric=r["metric"], estimate=r["estimate"],
                      std_error=r["std_error"], target=r["target"],
                      target_kind=r["target_kind"], z=r["z"],
                      passed=r["pass"]) for r in payload["rows"]]
    return ExperimentReport(rows=rows, provenance=payload["provenance"])


# =========================================================================
# parameter parsing / validation
# =========================================================================

def _want_int(name, v):
    if isinstance(v, bool):
        raise ConfigError(f"{name} must be an integer, got {v!r}")
    if isinstance(v, int):
        return v
    if isinstance(v, float) and v == int(v):
        return int(v)
    if isinstance(v, str):
        try:
            return int(v)
        except ValueError as exc:
            raise ConfigError(f"{name} must be an integer, got {v!r}") from exc
    raise ConfigError(f"{name} must be an integer, got {v!r}")


def _want_float(name, v):
    if isinstance(v, bool):
        raise ConfigError(f"{name} must be a number, got {v!r}")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError as exc:
            raise ConfigError(f"{name} must be a number, got {v!r}") from exc
    raise ConfigError(f"{name} must be a number, got {v!r}")


def _want_int_list(name, v):
    if isinstance(v, str):
        v = [part for part in v.split(",") if part.strip() != ""]
    if isinstance(v, (int, float)):
        v = [v]
    if not isinstance(v, (list, tuple)) or not v:
        raise ConfigError(f"{name} must be a nonempty list of integers")
    return [_want_int(name, x) for x in v]


def _want_float_list(name, v):
    if isinstance(v, str):
        v = [part for part in v.split(",") if part.strip() != ""]
    if isinstance(v, (int, float)):
        v = [v]
    if not isinstance(v, (list, tuple)) or not v:
        raise ConfigError(f"{name} must be a nonempty list of numbers")
    return [_want_float(name, x) for x in v]


def _want_points(name, v, k):
    if isinstance(v, str):
        try:
            v = json.loads(v)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{name} must be JSON like [[0,0],[1,0]]") from exc
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a list of {k}-coordinate points") from exc
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != k or arr.shape[0] == 0:
        raise ConfigError(f"{name} must be a nonempty list of {k}-coordinate points")
    return arr


_SCHEMAS: dict[str, dict[str, tuple]] = {
    # name -> {param: (kind, required, default)}
    "vacancy": {"d": ("int", True, None), "k": ("int", False, 2),
                "lambda": ("float", True, None), "n": ("int", True, None),
                "replicas": ("int", True, None),
                "points": ("points", False, None)},
    "boxcount": {"d": ("int", True, None), "k": ("int", False, 2),
                 "lambda": ("float", True, None), "n": ("int", True, None),
                 "replicas": ("int", True, None)},
    "dimension": {"d": ("int", True, None), "k": ("int", False, 2),
                  "lambda": ("float", True, None), "n": ("int", True, None),
                  "replicas": ("int", True, None),
                  "fit_range": ("int_list", False, None)},
    "ellipse-stats": {"d": ("int", True, None), "k": ("int", False, 2),
                      "lambda": ("float", True, None),
                      "r": ("float", False, 1.0),
                      "replicas": ("int", True, None),
                      "mc_points": ("int", False, 200_000)},
    "measures-selftest": {},
    "lr1": {"lambda": ("float", True, None), "epsilon": ("float", True, None),
            "r_min": ("float_list", True, None),
            "replicas": ("int", True, None)},
    "coupling": {"d": ("int", False, 4), "k": ("int", False, 2),
                 "lambda": ("float", True, None), "r": ("float", False, 1.0),
                 "replicas": ("int", True, None),
                 "mc_points": ("int", False, 200_000)},
    "connectivity-trend": {"d": ("int", True, None), "k": ("int", False, 2),
                           "lambda": ("float", True, None),
                           "n": ("int_list", True, None),
                           "replicas": ("int", True, None),
                           "delta": ("float", False, None)},
    "sample-dump": {"d": ("int", True, None), "k": ("int", False, 2),
                    "lambda": ("float", True, None),
                    "kind": ("str", True, None), "n": ("int", False, 4),
                    "r": ("float", False, 1.0)},
}


def validate_params(experiment: str, raw: dict) -> dict:
    if experiment not in _SCHEMAS:
        raise ConfigError(f"unknown experiment {experiment!r}; "
                          f"choose one of {', '.join(EXPERIMENTS)}")
    schema = _SCHEMAS[experiment]
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown parameter(s) for {experiment}: "
                          f"{', '.join(unknown)}")
    out = {}
    for name, (kind, required, default) in schema.items():
        if name not in raw or raw[name] is None:
            if required:
                raise ConfigError(f"{experiment} requires parameter {name!r}")
            out[name] = default
            continue
        v = raw[name]
        if kind == "int":
            out[name] = _want_int(name, v)
        elif kind == "float":
            out[name] = _want_float(name, v)
        elif kind == "int_list":
            out[name] = _want_int_list(name, v)
        elif kind == "float_list":
            out[name] = _want_float_list(name, v)
        elif kind == "str":
            out[name] = str(v)
        elif kind == "points":
            out[name] = v  # validated against k below
        else:  # pragma: no cover - schema typo guard
            raise AssertionError(kind)

    if "replicas" in out and out["replicas"] is not None and out["replicas"] < 1:
        raise ConfigError("replicas must be >= 1")
    if "lambda" in out and out["lambda"] < 0:
        raise ConfigError("lambda must be >= 0")
    if experiment == "vacancy":
        k = out["k"]
        out["points"] = _want_points("points", out["points"], k) \
            if out["points"] is not None else np.zeros((1, k))
    if experiment == "dimension" and out["fit_range"] is not None:
        if len(out["fit_range"]) != 2 or out["fit_range"][0] >= out["fit_range"][1]:
            raise ConfigError("fit_range must be [lo, hi] with lo < hi")
    if experiment == "sample-dump" and out["kind"] not in (
            "lines", "cylinders", "ellipses", "balls"):
        raise ConfigError("kind must be one of lines, cylinders, ellipses, balls")
    return out


# =========================================================================
# experiment implementations
# =========================================================================

def _run_vacancy(p: dict, seed: int):
    est = fractal.vacancy_mc(p["d"], p["k"], p["lambda"], p["n"], p["points"],
                             p["replicas"], seed)
    target = measures.vacancy_prob(p["lambda"], p["n"])
    rows = [closed_form_row(f"vacancy_point{i}", est.estimates[i],
                            est.std_errors[i], target)
            for i in range(est.points.shape[0])]
    return rows, None


def _run_boxcount(p: dict, seed: int, survey: fractal.BoxSurvey | None = None):
    d, k, lam = p["d"], p["k"], p["lambda"]
    if survey is None:
        survey = fractal.box_survey(d, k, lam, p["n"], p["replicas"], seed)
    cc = measures.constants(d, measures.estimate_c2(d))
    m_means, m_ses = survey.level_means("untouched")
    big_means, big_ses = survey.level_means("uncovered")
    rows = []
    levels = []
    for i, n in enumerate(survey.levels):
        tot = 2.0 ** (k * n)
        low = math.exp(-lam * cc.C1) * 2.0 ** (-lam * n)
        rows.append(bound_row(f"mn_fraction_n{n}", m_means[i] / tot,
                              m_ses[i] / tot, low, side="lower"))
        if 2.0 ** (-n) * math.sqrt(d) <= 1.0:
            high = math.exp(lam * cc.C3) * 2.0 ** (-lam * n)
            rows.append(bound_row(f"Mn_fraction_n{n}", big_means[i] / tot,
                                  big_ses[i] / tot, high, side="upper"))
        levels.append((d, k, lam, n, m_means[i], m_ses[i], big_means[i],
                       big_ses[i], survey.replicas))
    return rows, ("levels", levels)


def _run_dimension(p: dict, seed: int):
    d, k, lam = p["d"], p["k"], p["lambda"]
    survey = fractal.box_survey(d, k, lam, p["n"], p["replicas"], seed)
    fit = p["fit_range"] or [max(1, p["n"] - 5), p["n"]]
    levels = range(fit[0], fit[1] + 1)
    slope, stderr = fractal.dimension_fit(survey, levels)
    rows = [trend_row("boxcount_slope", slope, stderr, k - lam)]
    return rows, None


def _run_ellipse_stats(p: dict, seed: int):
    d, k, lam, r = p["d"], p["k"], p["lambda"], p["r"]
    if not 0.0 < r <= 1.0:
        raise ConfigError("r must lie in (0, 1]")
    intensity_target = lam * measures.xi_tv(d, k, r)
    patch = samplers.WindowSpec.patch_window(k, np.zeros(k), np.ones(k))
    counts = np.empty(p["replicas"])
    for rep in range(p["replicas"]):
        rng = samplers.stream_rng(seed, rep)
        sample = samplers.induced_ellipse_process(d, k, patch, ("fixed", r),
                                                 lam, rng)
        counts[rep] = sum(
            1 for e in sample.items
            if np.all(e.center >= 0.0) and np.all(e.center <= 1.0))
    se = counts.std(ddof=1) / math.sqrt(p["replicas"]) if p["replicas"] > 1 else 0.0
    rows = [closed_form_row("ellipse_center_intensity", counts.mean(), se,
                            intensity_target)]

    rng = samplers.stream_rng(seed, p["replicas"])
    diam = samplers.sample_shape_diameters(d, k, r, p["mc_points"], rng)
    for mom in (1, 2):
        target = measures.diam_moment(d, k, mom, r)
        if math.isfinite(target):
            vals = diam ** mom
            rows.append(closed_form_row(
                f"diam_moment_{mom}", vals.mean(),
                vals.std(ddof=1) / math.sqrt(vals.size), target))
    # first infinite moment: report the growth ratio across a x10 size step
    mom_inf = next(m for m in range(1, 10)
                   if not math.isfinite(measures.diam_moment(d, k, m, r)))
    small = diam[:max(1, diam.size // 10)] ** mom_inf
    ratio = float((diam ** mom_inf).mean() / small.mean())
    rows.append(trend_row(f"diam_moment_{mom_inf}_growth_x10", ratio))
    return rows, None


def _run_measures_selftest(p: dict, seed: int):
    del p, seed
    rows = []
    resid = max(abs(measures.psi(m + 1) - 2.0 * math.pi / m * measures.psi(m - 1))
                for m in range(1, 13))
    rows.append(deterministic_row("psi_recursion_resid", resid, 0.0, 1e-12))
    rows.append(deterministic_row("upsilon_3", measures.upsilon(3),
                                  1.0 / (2.0 * math.pi ** 2), 1e-12))
    rows.append(deterministic_row("ball_volume_2", measures.ball_volume(2),
                                  math.pi, 1e-12))
    rows.append(deterministic_row("nu_ball_5", measures.nu_ball(5, 0.37),
                                  0.37 ** 4, 1e-12))
    rows.append(deterministic_row("xi_tv_4_2", measures.xi_tv(4, 2, 1.0),
                                  1.0 / math.pi, 1e-12))
    rows.append(deterministic_row("xi_tv_3_2_rfree",
                                  measures.xi_tv(3, 2, 0.3),
                                  1.0 / (2.0 * math.pi), 1e-12))
    rows.append(deterministic_row("diam_moment_4_2_1",
                                  measures.diam_moment(4, 2, 1, 1.0),
                                  0.75 * math.pi, 1e-12))
    rows.append(deterministic_row("diam_moment_4_2_2",
                                  measures.diam_moment(4, 2, 2, 1.0),
                                  8.0, 1e-12))
    worst = 0.0
    for d in range(5, 9):
        for k in range(2, d - 2):
            closed = measures.psi(d - k - 1) * measures.psi(d - k - 2) / 2.0
            q = measures.idk_quadrature(d, k)
            worst = max(worst, abs(q - closed) / closed)
    rows.append(deterministic_row("idk_quadrature_rel_resid", worst, 0.0, 1e-6))
    for d in (2, 3, 4):
        cc = measures.constants(d, measures.estimate_c2(d))
        rows.append(trend_row(f"c1_d{d}", cc.C1))
        rows.append(trend_row(f"c2_d{d}", cc.C2))
        rows.append(trend_row(f"c3_d{d}", cc.C3))
    return rows, None


def _run_lr1(p: dict, seed: int):
    lam, eps = p["lambda"], p["epsilon"]
    rows = []
    events = []
    means, logs = [], []
    for i, r_min in enumerate(p["r_min"]):
        res = connectivity.lr1_experiment(lam, eps, r_min, p["replicas"],
                                          seed + i)
        rows.append(closed_form_row(f"lr1_census_rmin_{_fmt(r_min)}",
                                    res.mean, res.se, res.expected))
        events.append(("lr1_census", 3, 2, lam, eps, r_min, res.mean, res.se,
                       res.expected, res.z))
        means.append(res.mean)
        logs.append(math.log(1.0 / r_min))
    if len(means) >= 3:
        coef = np.polyfit(logs, means, 1)
        pred = np.polyval(coef, logs)
        ss_res = float(((np.asarray(means) - pred) ** 2).sum())
        ss_tot = float(((np.asarray(means) - np.mean(means)) ** 2).sum())
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
        rows.append(trend_row("lr1_log_regression_r2", r2, 0.0, 1.0))
    return rows, ("events", events)


def _run_coupling(p: dict, seed: int):
    d, k, lam, r = p["d"], p["k"], p["lambda"], p["r"]
    if d < 4 or 2 * k > d:
        raise ConfigError("coupling needs d >= 4 and k <= d/2")
    patch = samplers.WindowSpec.patch_window(k, np.zeros(k), np.ones(k))
    subset_ok = 0
    cover_violations = 0
    phis = np.linspace(0.0, 2.0 * math.pi, 32, endpoint=False)
    for rep in range(p["replicas"]):
        rng = samplers.stream_rng(seed, rep)
        ells = samplers.induced_ellipse_process(d, k, patch, ("fixed", r),
                                                lam, rng)
        balls = samplers.induced_ball_process(ells)
        thinned, dominating = samplers.thinning_coupling(balls, rng)
        dom_ids = {id(b) for b in dominating.items}
        if all(id(b) in dom_ids for b in thinned.items):
            subset_ok += 1
        for e, b in zip(ells.items, balls.items):
            if e.k != 2:
                continue
            perp = np.array([-e.major_dir[1], e.major_dir[0]])
            bd = (e.center[None, :]
                  + np.cos(phis)[:, None] * e.major_len * e.major_dir[None, :]
                  + np.sin(phis)[:, None] * e.minor_len * perp[None, :])
            if np.any(np.linalg.norm(bd - b.center[None, :], axis=1)
                      > b.radius + 1e-12):
                cover_violations += 1
                break
    rows = [
        closed_form_row("thinned_subset_rate", subset_ok / p["replicas"],
                        0.0, 1.0),
        closed_form_row("ellipse_cover_violations", float(cover_violations),
                        0.0, 0.0),
    ]
    # Thinning acceptance ratio beta_R/beta_0 via the bounded-weight head
    # estimator 1 - E[diam^k; diam < 2R]/beta_0 (the tail-side estimator has
    # infinite variance when 2k >= d - k + 1).  Two independent passes are
    # pooled; beta_0 comes from the closed form.
    half = max(1, p["mc_points"] // 2)
    beta0_r = measures.diam_moment(d, k, k, r)
    beta0_unit = measures.beta_factor(d, k, 0.0)
    diam = np.concatenate([
        samplers.sample_shape_diameters(
            d, k, r, half, samplers.stream_rng(seed, p["replicas"])),
        samplers.sample_shape_diameters(
            d, k, r, half, samplers.stream_rng(seed, p["replicas"] + 1)),
    ])
    for radius in (0.5, 1.0, 2.0):
        head = diam ** k * (diam < 2.0 * radius)
        est = 1.0 - head.mean() / beta0_r
        se = head.std(ddof=1) / math.sqrt(head.size) / beta0_r
        target = measures.beta_factor(d, k, radius / r) / beta0_unit
        rows.append(closed_form_row(f"beta_ratio_R{_fmt(radius)}", est, se,
                                    target))
    return rows, None


def _run_connectivity_trend(p: dict, seed: int):
    d, k, lam = p["d"], p["k"], p["lambda"]
    trend = connectivity.connectivity_trend(d, lam, p["n"], p["replicas"],
                                            seed, k=k, delta=p["delta"])
    rows = []
    events = []
    for lvl in trend:
        for name, rep in lvl.reports.items():
            rows.append(trend_row(f"{name}_n{lvl.n}", rep.frequency, rep.se))
            events.append((name, d, k, lam, lvl.n, lvl.delta, rep.frequency,
                           rep.se, None, None))
        rows.append(closed_form_row(f"monotone_violations_n{lvl.n}",
                                    float(lvl.monotone_violations), 0.0, 0.0))
        if "dominating_crossing" in lvl.reports:
            rows.append(closed_form_row(f"domination_violations_n{lvl.n}",
                                        float(lvl.domination_violations),
                                        0.0, 0.0))
    return rows, ("events", events)


def _run_sample_dump(p: dict, seed: int, out_path: str):
    d, k, lam, kind = p["d"], p["k"], p["lambda"], p["kind"]
    rng = samplers.stream_rng(seed, 0)
    if kind == "lines":
        sample = samplers.sample_lines_ball(d, np.zeros(d), p["r"], lam, rng,
                                            seed=seed)
    elif kind == "cylinders":
        window = samplers.WindowSpec.ball_window(d, np.zeros(d), 1.0)
        sample = samplers.sample_fractal_cylinders(d, window, p["n"], lam,
                                                   rng, seed=seed)
    else:
        patch = samplers.WindowSpec.patch_window(k, np.zeros(k), np.ones(k))
        sample = samplers.induced_ellipse_process(d, k, patch,
                                                  ("fractal", p["n"]), lam,
                                                  rng, seed=seed)
        if kind == "balls":
            sample = samplers.induced_ball_process(sample)
    samplers.dump_sample_csv(sample, out_path)
    return [trend_row("sample_count", float(len(sample)))], None


# =========================================================================
# driver
# =========================================================================

def _git_commit() -> str | None:
    try:
        out = subprocess.run(
            ["git", "-C", os.path.dirname(os.path.abspath(__file__)),
             "rev-parse", "HEAD"],
            capture_output=True, text=True, timeout=10)
    except (OSError, subprocess.TimeoutExpired):
        return None
    return out.stdout.strip() if out.returncode == 0 else None


def _set_threads(threads: int) -> None:
    # Thread count only affects kernel scheduling, never estimates: replica
    # loops are sequential and seeded per stream.
    if threads == 1:
        return
    try:
        import numba
        numba.set_num_threads(max(1, min(threads, numba.config.NUMBA_NUM_THREADS)))
    except Exception:
        pass


def _json_safe(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


_EVENTS_HEADER = ("event,d,k,lambda,epsilon_or_n,r_min_or_delta,"
                  "frequency_or_count,se,target,z")


def _write_events(path: str, events: list[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_EVENTS_HEADER.split(","))
        for ev in events:
            writer.writerow([ev[0]] + [
                _fmt(x) if isinstance(x, (int, float)) or x is None else str(x)
                for x in ev[1:]])


def _write_levels(path: str, levels: list[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["d", "k", "lambda", "n", "mean_mn", "se_mn",
                         "mean_Mn", "se_Mn", "replicas"])
        for rec in levels:
            writer.writerow([_fmt(x) if isinstance(x, float) else x
                             for x in rec])


def run_experiment(experiment: str, params: dict, seed: int,
                   out_path: str | None = None):
    """Validated dispatch; returns (report, side_outputs)."""
    t0 = time.perf_counter()
    if experiment == "vacancy":
        rows, extra = _run_vacancy(params, seed)
    elif experiment == "boxcount":
        rows, extra = _run_boxcount(params, seed)
    elif experiment == "dimension":
        rows, extra = _run_dimension(params, seed)
    elif experiment == "ellipse-stats":
        rows, extra = _run_ellipse_stats(params, seed)
    elif experiment == "measures-selftest":
        rows, extra = _run_measures_selftest(params, seed)
    elif experiment == "lr1":
        rows, extra = _run_lr1(params, seed)
    elif experiment == "coupling":
        rows, extra = _run_coupling(params, seed)
    elif experiment == "connectivity-trend":
        rows, extra = _run_connectivity_trend(params, seed)
    elif experiment == "sample-dump":
        if out_path is None:
            raise ConfigError("sample-dump requires --out for the sample file")
        rows, extra = _run_sample_dump(params, seed, out_path)
    else:  # pragma: no cover - validated upstream
        raise ConfigError(f"unknown experiment {experiment!r}")
    runtime = time.perf_counter() - t0
    provenance = {
        "experiment": experiment,
        "seed": seed,
        "commit": _git_commit(),
        "parameters": {k: _json_safe(v) for k, v in params.items()},
        "runtime_seconds": _round12(runtime),
    }
    return ExperimentReport(rows=rows, provenance=provenance), extra


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fractalcyl",
        description="Fractal cylinder process experiments")
    sub = parser.add_subparsers(dest="experiment", metavar="EXPERIMENT")
    flag_names = ["d", "k", "lambda", "n", "epsilon", "r", "r-min",
                  "replicas", "mc-points", "delta", "fit-range", "points",
                  "kind"]
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", help="JSON file with parameters")
        sp.add_argument("--seed", type=int, help="RNG seed (required)")
        sp.add_argument("--out", help="report output path")
        sp.add_argument("--format", choices=("csv", "json"), default=None)
        sp.add_argument("--threads", type=int, default=None)
        for flag in flag_names:
            sp.add_argument(f"--{flag}", dest=flag.replace("-", "_"),
                            default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.experiment is None:
        parser.print_help()
        return 2
    try:
        file_cfg = {}
        if args.config:
            try:
                with open(args.config) as fh:
                    file_cfg = json.load(fh)
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from exc
            if not isinstance(file_cfg, dict):
                raise ConfigError("config must be a JSON object")

        reserved = {"experiment", "seed", "out", "format", "threads"}
        raw_params = {k: v for k, v in file_cfg.items() if k not in reserved}
        if "experiment" in file_cfg and file_cfg["experiment"] != args.experiment:
            raise ConfigError(
                f"config is for {file_cfg['experiment']!r}, not "
                f"{args.experiment!r}")
        for flag in ("d", "k", "lambda", "n", "epsilon", "r", "r_min",
                     "replicas", "mc_points", "delta", "fit_range", "points",
                     "kind"):
            v = getattr(args, flag, None)
            if v is not None:
                raw_params[flag] = v

        seed = args.seed if args.seed is not None else file_cfg.get("seed")
        if seed is None:
            raise ConfigError("seed is mandatory (--seed or config 'seed')")
        seed = _want_int("seed", seed)
        fmt = args.format or file_cfg.get("format") or "csv"
        if fmt not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        out_path = args.out or file_cfg.get("out")
        threads = args.threads if args.threads is not None \
            else file_cfg.get("threads", os.environ.get(THREADS_ENV))
        threads = _want_int("threads", threads) if threads is not None else 1
        if threads < 1:
            raise ConfigError("threads must be >= 1")

        params = validate_params(args.experiment, raw_params)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    _set_threads(threads)
    try:
        report, extra = run_experiment(args.experiment, params, seed,
                                       out_path=out_path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report.provenance["threads"] = threads

    if args.experiment != "sample-dump":
        if out_path:
            with open(out_path, "w", newline="") as fh:
                (emit_csv if fmt == "csv" else emit_json)(report, fh)
        (emit_csv if fmt == "csv" else emit_json)(report, sys.stdout)
    else:
        # the sample CSV went to --out; the one-row count report to stdout
        (emit_csv if fmt == "csv" else emit_json)(report, sys.stdout)
    if extra is not None and out_path:
        kind, payload = extra
        if kind == "events":
            _write_events(f"{out_path}.events.csv", payload)
        elif kind == "levels":
            _write_levels(f"{out_path}.levels.csv", payload)

    return 0 if report.all_closed_form_pass else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
