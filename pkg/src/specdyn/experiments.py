"""Reproducible experiment harness.

Each experiment id wires the library modules into one figure or property
suite: a data CSV, an SVG rendering of exactly those numbers, a manifest
echoing the configuration, and (where bounds are involved) a plain-text
bounds block.  Runs are deterministic: the same configuration produces a
byte-identical CSV.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .harmonics import operator_eigs
from .kernels import (capture_gram_run, empirical_kernel_matrix, h_matrix,
                      perturbation_norms, sandwich_check)
from .plotting import AxesSpec, Series, render_plot
from .relu_net import init_network, predictions, design_matrix, train
from .spectral import (concentration_check, lambda_min_sweep,
                       linearized_error_curve, sym_eig)
from .sphere_data import build_dataset, make_polynomial_target, sample_uniform_sphere
from . import theory

EXPERIMENT_IDS = ("fig1a", "fig1b", "fig2a", "fig2b", "figA1", "sandwich", "bounds")

_LIST_KEYS = {"n_list", "d_list", "seeds"}
_INT_KEYS = {"d", "n", "m", "T", "seed", "ell", "ell_max", "degree"}
_FLOAT_KEYS = {"eta", "nu", "delta"}
_BOOL_KEYS = {"biased"}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    outdir: str = "out"
    d: int = 10
    n: int = 500
    m: int | None = None          # None -> m = 2n where a width is needed
    T: int = 200
    eta: float = 1.0
    nu: float | None = None       # None -> 1/sqrt(n)
    delta: float = 0.05
    seed: int = 1
    seeds: tuple = (1, 2, 3)
    n_list: tuple = (100, 200, 400, 800)
    d_list: tuple = (5, 10, 20)
    ell: int = 2
    ell_max: int = 10
    degree: int = 1
    biased: bool = True

    def resolved_nu(self) -> float:
        return self.nu if self.nu is not None else 1.0 / math.sqrt(self.n)


_DEFAULT_OVERRIDES = {
    "fig1b": {"d": 10, "n": 500, "ell_max": 6},
    "fig2b": {"n": 1000, "m": 2000, "d": 10, "eta": 1.0, "T": 200},
    "sandwich": {"n": 50, "m": 500, "d": 5, "eta": 0.5, "T": 20},
    "bounds": {"d": 10, "ell": 2, "ell_max": 4},
}


def default_config(experiment: str, outdir: str = "out") -> ExperimentConfig:
    if experiment not in EXPERIMENT_IDS:
        raise ValueError(f"unknown experiment {experiment!r}; choose from {EXPERIMENT_IDS}")
    cfg = ExperimentConfig(experiment=experiment, outdir=outdir)
    return replace(cfg, **_DEFAULT_OVERRIDES.get(experiment, {}))


def parse_config_value(key: str, raw: str):
    if key in _LIST_KEYS:
        return tuple(int(v) for v in raw.split(",") if v.strip())
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _BOOL_KEYS:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"cannot parse boolean {key}={raw!r}")
    if key in ("outdir", "experiment"):
        return raw
    raise KeyError(f"unknown configuration key {key!r}")


def load_config_file(path) -> dict:
    """Parse a plain-text key=value configuration file ('#' starts a comment)."""
    out = {}
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{line_no}: expected key=value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        out[key] = parse_config_value(key, raw)
    return out


@dataclass
class ExperimentResult:
    experiment: str
    outdir: Path
    violations: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations


def _fmt(v) -> str:
    if isinstance(v, float) or isinstance(v, np.floating):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path, header: list, rows: list) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path) -> tuple[list, np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def _write_manifest(outdir: Path, config: ExperimentConfig, elapsed: float) -> None:
    lines = [f"library_version={__version__}",
             f"wall_clock_seconds={elapsed:.3f}"]
    for key, value in vars(config).items():
        if isinstance(value, tuple):
            lines.append(f"{key}={','.join(str(v) for v in value)}")
        elif value is not None:
            lines.append(f"{key}={value}")
    (outdir / "manifest.txt").write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# individual experiments
# ---------------------------------------------------------------------------

def _median_by_n(rows, n_list) -> dict:
    by_n = {n: [] for n in n_list}
    for r in rows:
        by_n[r.n].append(r.lam_min)
    return {n: float(np.median(v)) for n, v in by_n.items()}


def run_fig1a(config: ExperimentConfig, outdir: Path) -> ExperimentResult:
    """Smallest eigenvalue of the initial Gram matrix vs sample size."""
    result = ExperimentResult("fig1a", outdir)
    rows, series = [], []
    for d in config.d_list:
        entries = lambda_min_sweep(d, config.n_list, 2, config.seeds)
        rows += [(e.d, e.n, e.m, e.seed, e.lam_min) for e in entries]
        medians = _median_by_n(entries, config.n_list)
        series.append(Series(label=f"d={d}", x=tuple(config.n_list),
                             y=tuple(medians[n] for n in config.n_list)))
        if any(e.lam_min < -1e-10 for e in entries):
            result.violations.append(f"negative lambda_min beyond tolerance at d={d}")
        med = [medians[n] for n in config.n_list]
        if not all(a > b for a, b in zip(med, med[1:])):
            result.violations.append(f"median lambda_min not strictly decreasing for d={d}")
        result.summary[f"medians_d{d}"] = med
    write_csv(outdir / "data.csv", ["d", "n", "m", "seed", "lam_min"], rows)
    render_plot(series, AxesSpec(xlabel="n", ylabel="smallest eigenvalue of H",
                                 ylog=True, title="Gram matrix minimum eigenvalue"),
                outdir / "plot.svg")
    return result


def run_figA1(config: ExperimentConfig, outdir: Path) -> ExperimentResult:
    """(lambda_min(n H))^(-1/2) vs sample size (single d)."""
    result = ExperimentResult("figA1", outdir)
    entries = lambda_min_sweep(config.d, config.n_list, 2, config.seeds)
    rows = [(e.d, e.n, e.m, e.seed, e.lam_min,
             1.0 / math.sqrt(e.n * e.lam_min)) for e in entries]
    medians = _median_by_n(entries, config.n_list)
    curve = [1.0 / math.sqrt(n * medians[n]) for n in config.n_list]
    result.summary["curve"] = curve
    if any(v <= 0 for v in curve):
        result.violations.append("non-positive scaled eigenvalue")
    if min(curve) < 0.5 * curve[0]:
        result.violations.append("curve fell below half its first value")
    write_csv(outdir / "data.csv",
              ["d", "n", "m", "seed", "lam_min", "inv_sqrt_scaled"], rows)
    render_plot([Series(label=f"d={config.d}", x=tuple(config.n_list), y=tuple(curve))],
                AxesSpec(xlabel="n", ylabel="(lambda_min(nH))^(-1/2)",
                         title="Scaled inverse minimum eigenvalue"),
                outdir / "plot.svg")
    return result


def run_fig1b(config: ExperimentConfig, outdir: Path) -> ExperimentResult:
    """Empirical kernel spectrum against the operator spectrum."""
    result = ExperimentResult("fig1b", outdir)
    feats = sample_uniform_sphere(config.n, config.d, config.seed)
    km = empirical_kernel_matrix(feats, biased=config.biased)
    spec = sym_eig(km.entries, want_vectors=False, source="K")
    eigs = operator_eigs(config.d, config.ell_max, biased=config.biased)
    lam_op, degs = eigs.expanded(count=config.n)
    report = concentration_check(spec, eigs, config.n, config.delta)
    top_gap = abs(spec.eigenvalues[0] - eigs.betas[0])
    result.summary.update(sup_deviation=report.sup_deviation, bound=report.bound,
                          top_gap=top_gap)
    if not report.passed:
        result.violations.append(
            f"sup deviation {report.sup_deviation:.4g} exceeds bound {report.bound:.4g}")
    if top_gap > 0.05:
        result.violations.append(f"top eigenvalue off by {top_gap:.4g} > 0.05")
    rows = [(i + 1, spec.eigenvalues[i], lam_op[i], degs[i]) for i in range(config.n)]
    write_csv(outdir / "data.csv",
              ["rank", "empirical", "operator", "operator_degree"], rows)
    ranks = tuple(range(1, config.n + 1))
    render_plot([Series("empirical kernel matrix", ranks, tuple(spec.eigenvalues), marker=""),
                 Series("integral operator", ranks, tuple(lam_op), marker="")],
                AxesSpec(xlabel="rank", ylabel="eigenvalue", ylog=True,
                         title=f"Spectrum concentration (d={config.d}, n={config.n})"),
                outdir / "plot.svg")
    return result


def run_fig2a(config: ExperimentConfig, outdir: Path) -> ExperimentResult:
    """Operator eigenvalues beta_ell vs degree, one curve per dimension."""
    result = ExperimentResult("fig2a", outdir)
    rows, series = [], []
    for d in config.d_list:
        eigs = operator_eigs(d, config.ell_max, biased=config.biased)
        betas = eigs.betas
        rows += [(d, ell, betas[ell], eigs.multiplicities[ell], eigs.entries[ell][3])
                 for ell in range(config.ell_max + 1)]
        series.append(Series(label=f"d={d}", x=tuple(range(config.ell_max + 1)),
                             y=tuple(betas)))
        if np.any(betas <= 0):
            result.violations.append(f"non-positive eigenvalue at d={d}")
        if not np.all(np.diff(betas) < 0):
            result.violations.append(f"eigenvalues not strictly decreasing at d={d}")
    write_csv(outdir / "data.csv", ["d", "ell", "beta", "N", "alpha"], rows)
    render_plot(series, AxesSpec(xlabel="degree", ylabel="beta", ylog=True,
                                 title="Operator eigenvalues by harmonic degree"),
                outdir / "plot.svg")
    return result


def run_fig2b(config: ExperimentConfig, outdir: Path) -> ExperimentResult:
    """Training error vs iteration for a linear and a quadratic target,
    together with the kernel-linearized predictor."""
    result = ExperimentResult("fig2b", outdir)
    nu = config.resolved_nu()
    feats = sample_uniform_sphere(config.n, config.d, config.seed)
    km = empirical_kernel_matrix(feats, biased=True)
    curves = {}
    for degree in (1, 2):
        target = make_polynomial_target(degree, config.d, config.seed + 10 * degree)
        data = build_dataset(target, feats)
        net = init_network(config.m, config.d, nu, bias_mode=True,
                           seed=config.seed + degree)
        X = design_matrix(feats, bias_mode=True)
        yhat0 = predictions(net, X)
        _, trace = train(net, data, config.eta, config.T)
        pred = linearized_error_curve(km, data.responses, yhat0, config.eta, config.T)
        curves[degree] = (trace, pred)
        if trace.err_norm[-1] >= trace.err_norm[0]:
            result.violations.append(f"degree-{degree} error did not decrease")
        horizon = min(50, config.T)
        gap = float(np.max(np.abs(trace.err_norm[: horizon + 1] - pred[: horizon + 1])))
        result.summary[f"linearization_gap_deg{degree}"] = gap
        if gap > 0.1:
            result.violations.append(
                f"degree-{degree} error strays {gap:.3g} > 0.1 from the linearized curve")

    slopes = {}
    if config.T >= 60:
        for degree, (trace, _) in curves.items():
            window = np.arange(10, 61)
            slopes[degree] = float(np.polyfit(window, np.log(trace.err_norm[10:61]), 1)[0])
        result.summary["slopes"] = slopes
        if not slopes[1] < slopes[2]:
            result.violations.append(
                "log-error slope for the linear target is not steeper than the quadratic one")

    # certified rate/floor for the linear run, from the operator spectrum
    eigs = operator_eigs(config.d, config.ell_max, biased=True)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        c0, c1 = theory.rate_constants(eigs, ell=2, eps_approx=0.0, nu=nu,
                                       n=config.n, delta=config.delta)
    if caught:
        result.summary["constant_caveat"] = str(caught[0].message)
    verdict = theory.bound_vs_trace(curves[1][0], c0, c1, config.eta)
    result.summary["bound_pass"] = verdict.passed
    if not verdict.passed:
        result.violations.append(
            f"linear-target error exceeded its certified envelope at t={verdict.first_violation}")
    bounds = theory.TheoryBounds(
        c0=c0, c1=c1,
        m_min=theory.overparam_floor(c0, c1, config.eta, config.T, nu,
                                     config.n, config.delta),
        T=theory.early_stop_T(c0, min(c1, 0.999), config.eta),
        eps_conc=theory.concentration_eps(config.n, config.m, config.delta),
        inputs={"n": config.n, "m": config.m, "eta": config.eta, "nu": nu,
                "delta": config.delta, "ell": 2},
    )
    (outdir / "bounds.txt").write_text(theory.bounds_report(bounds))

    rows = [(t,
             curves[1][0].err_norm[t], curves[1][1][t],
             curves[2][0].err_norm[t], curves[2][1][t],
             int(curves[1][0].flip_counts[t].max()),
             int(curves[2][0].flip_counts[t].max()))
            for t in range(config.T + 1)]
    write_csv(outdir / "data.csv",
              ["t", "err_linear", "pred_linear", "err_quadratic", "pred_quadratic",
               "max_flip_linear", "max_flip_quadratic"], rows)
    ts = tuple(range(config.T + 1))
    render_plot([Series("linear target", ts, tuple(curves[1][0].err_norm), marker=""),
                 Series("linear, linearized", ts, tuple(curves[1][1]), marker=""),
                 Series("quadratic target", ts, tuple(curves[2][0].err_norm), marker=""),
                 Series("quadratic, linearized", ts, tuple(curves[2][1]), marker="")],
                AxesSpec(xlabel="iteration", ylabel="normalized training error",
                         ylog=True, title="GD training error vs linearized predictor"),
                outdir / "plot.svg")
    return result


def run_sandwich(config: ExperimentConfig, outdir: Path) -> ExperimentResult:
    """Entrywise slack of the two-sided error-evolution bound over a run."""
    result = ExperimentResult("sandwich", outdir)
    rows = []
    min_slack = math.inf
    for seed in config.seeds:
        feats = sample_uniform_sphere(config.n, config.d, seed)
        target = make_polynomial_target(config.degree, config.d, seed)
        data = build_dataset(target, feats)
        net = init_network(config.m, config.d, config.resolved_nu(),
                           bias_mode=False, seed=seed)
        km = empirical_kernel_matrix(feats, biased=False)
        h_init = h_matrix(net, feats)
        for gs, r_t, r_t1, flips in capture_gram_run(net, data, config.eta, config.T):
            lower, upper = sandwich_check(r_t, r_t1, gs, config.eta)
            step_min = float(min(lower.min(), upper.min()))
            min_slack = min(min_slack, step_min)
            try:
                report = perturbation_norms(gs, km, flips, h_init, config.m)
            except AssertionError as exc:
                result.violations.append(str(exc))
                break
            rows.append((seed, gs.t, float(lower.min()), float(upper.min()),
                         report.norm_M, report.norm_L, report.norm_H_drift,
                         report.ceiling))
    result.summary["min_slack"] = min_slack
    if min_slack < -1e-9:
        result.violations.append(f"entrywise slack {min_slack:.3g} below -1e-9")
    write_csv(outdir / "data.csv",
              ["seed", "t", "min_lower_slack", "min_upper_slack",
               "norm_M", "norm_L", "norm_H_drift", "flip_ceiling"], rows)
    by_step = {}
    for row in rows:
        by_step.setdefault(row[0], []).append(min(row[2], row[3]))
    render_plot([Series(f"seed {s}", tuple(range(1, len(v) + 1)), tuple(v))
                 for s, v in by_step.items()],
                AxesSpec(xlabel="step", ylabel="min entrywise slack",
                         title="Two-sided error-evolution slack"),
                outdir / "plot.svg")
    return result


def run_bounds(config: ExperimentConfig, outdir: Path) -> ExperimentResult:
    """Closed-form bound calculators across the sample-size sweep."""
    result = ExperimentResult("bounds", outdir)
    eigs = operator_eigs(config.d, config.ell_max, biased=config.biased)
    rows = []
    for n in config.n_list:
        b = theory.quadratic_regime_floor(n, eigs, config.ell, config.delta)
        rows.append((n, b.c0, b.c1, b.T, b.m_min, b.eps_conc))
    write_csv(outdir / "data.csv", ["n", "c0", "c1", "T", "m_min", "eps_conc"], rows)
    b = theory.quadratic_regime_floor(config.n, eigs, config.ell, config.delta)
    (outdir / "bounds.txt").write_text(theory.bounds_report(b))
    render_plot([Series("width floor", tuple(r[0] for r in rows),
                        tuple(r[4] for r in rows))],
                AxesSpec(xlabel="n", ylabel="m floor", xlog=True, ylog=True,
                         title="Over-parameterization floor vs sample size"),
                outdir / "plot.svg")
    result.summary["m_min"] = {r[0]: r[4] for r in rows}
    return result


_RUNNERS = {
    "fig1a": run_fig1a,
    "fig1b": run_fig1b,
    "fig2a": run_fig2a,
    "fig2b": run_fig2b,
    "figA1": run_figA1,
    "sandwich": run_sandwich,
    "bounds": run_bounds,
}


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    outdir = Path(config.outdir) / config.experiment
    outdir.mkdir(parents=True, exist_ok=True)
    start = time.monotonic()
    result = _RUNNERS[config.experiment](config, outdir)
    _write_manifest(outdir, config, time.monotonic() - start)
    return result
