"""Experiment orchestration: configs, sweeps, rate fits, result emission.

A sweep drives the PDE solver through a family of quadrature rules and
tabulates (n, error) pairs: absolute quadrature error against a reference
for the one-parameter Gauss study, relative RMSE over random shifts or
replicates for the high-dimensional lattice/Monte Carlo study. Results
are written as CSV plus JSON metadata (and a rendered figure) so any
plotting or comparison tooling can consume them.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import __version__
from . import integrators as quad
from .combinatorics import MultiIndex
from .fields import ZETA5, make_field, ParamField, ParameterBox
from .regularity import AssumptionMode, theory_constants
from .solver import ProblemSpec, SolverContext, benchmark_problem, fixed_point_solve, qoi
from .verification import (
    BoundCheckReport,
    FdScheme,
    calibrate_radii,
    gevrey_bound_check,
    invariants_suite,
    laplacian_bound_check,
)

SCHEMA_VERSION = 1

EXPERIMENTS = ("gauss-sweep", "qmc-sweep", "mc-sweep", "derivative-check", "suite")
RATE_MODELS = ("semilog-n", "semilog-sqrt-n", "loglog")


class ConfigError(ValueError):
    """Configuration failed validation."""


class SweepError(RuntimeError):
    """A sweep failed numerically (solver breakdown, degenerate fit)."""


_PROBLEM_KEYS = {
    "family", "b_variant", "s", "m", "c_m", "mesh_n", "quad_degree",
    "solve_rel_tol", "fields", "mode",
}
_REFERENCE_KEYS = {"type", "n", "value", "shifts"}
_FD_KEYS = {"order", "step", "richardson", "max_order", "dims", "include_laplacian", "norm"}
_TOP_KEYS = {
    "schema_version", "experiment", "problem", "n_values", "reference", "R",
    "seed", "output_dir", "rate_model", "qoi", "fixed_point_tol",
    "max_iterations", "noise_floor_rel", "lattice_weights_decay",
    "lattice_file", "fd", "suite_depth",
}

_EXPERIMENT_DEFAULTS = {
    "gauss-sweep": dict(
        problem=dict(family="1d", b_variant="b1", mesh_n=32),
        n_values=list(range(2, 13)),
        reference=dict(type="gauss", n=25),
        rate_model="semilog-n",
        qoi="mean",
    ),
    "qmc-sweep": dict(
        problem=dict(family="hd", b_variant="b1", s=20, mesh_n=16),
        n_values=[2**k for k in range(4, 11)],
        reference=dict(type="qmc", n=2**13, shifts=2),
        rate_model="loglog",
        qoi="point",
    ),
    "mc-sweep": dict(
        problem=dict(family="hd", b_variant="b1", s=20, mesh_n=16),
        n_values=[2**k for k in range(4, 11)],
        reference=dict(type="qmc", n=2**13, shifts=2),
        rate_model="loglog",
        qoi="point",
    ),
    "derivative-check": dict(
        problem=dict(family="hd", b_variant="b1", s=20, mesh_n=16),
    ),
    "suite": dict(),
}


@dataclass
class ExperimentConfig:
    experiment: str
    problem: dict = dc_field(default_factory=dict)
    n_values: list = dc_field(default_factory=list)
    reference: dict = dc_field(default_factory=dict)
    R: int = 8
    seed: int = 20240801
    output_dir: str = "out"
    rate_model: str = "semilog-n"
    qoi: str = "mean"
    fixed_point_tol: float = 1e-12
    max_iterations: int = 200
    noise_floor_rel: float = 1e-14
    lattice_weights_decay: float = 5.0
    lattice_file: str | None = None
    fd: dict = dc_field(default_factory=dict)
    suite_depth: str = "quick"

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "experiment": self.experiment,
            "problem": dict(self.problem),
            "n_values": list(self.n_values),
            "reference": dict(self.reference),
            "R": self.R,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "rate_model": self.rate_model,
            "qoi": self.qoi,
            "fixed_point_tol": self.fixed_point_tol,
            "max_iterations": self.max_iterations,
            "noise_floor_rel": self.noise_floor_rel,
            "lattice_weights_decay": self.lattice_weights_decay,
            "lattice_file": self.lattice_file,
            "fd": dict(self.fd),
            "suite_depth": self.suite_depth,
        }


def load_config(path) -> ExperimentConfig:
    """Parse and validate a JSON experiment configuration."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON (line {exc.lineno}): {exc.msg}") from exc
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if raw.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {raw['schema_version']}")
    experiment = raw.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {experiment!r}")

    defaults = _EXPERIMENT_DEFAULTS[experiment]
    cfg = ExperimentConfig(experiment=experiment)
    cfg.problem = dict(defaults.get("problem", {}))
    cfg.problem.update(raw.get("problem", {}) or {})
    cfg.n_values = list(raw.get("n_values", defaults.get("n_values", [])))
    cfg.reference = dict(raw.get("reference", defaults.get("reference", {})) or {})
    cfg.rate_model = raw.get("rate_model", defaults.get("rate_model", "semilog-n"))
    cfg.qoi = raw.get("qoi", defaults.get("qoi", "mean"))
    for key in ("R", "seed", "output_dir", "fixed_point_tol", "max_iterations",
                "noise_floor_rel", "lattice_weights_decay", "lattice_file",
                "suite_depth"):
        if key in raw:
            setattr(cfg, key, raw[key])
    cfg.fd = dict(raw.get("fd", {}) or {})
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    bad = set(cfg.problem) - _PROBLEM_KEYS
    if bad:
        raise ConfigError(f"unknown problem keys: {sorted(bad)}")
    bad = set(cfg.reference) - _REFERENCE_KEYS
    if bad:
        raise ConfigError(f"unknown reference keys: {sorted(bad)}")
    bad = set(cfg.fd) - _FD_KEYS
    if bad:
        raise ConfigError(f"unknown fd keys: {sorted(bad)}")
    if cfg.rate_model not in RATE_MODELS:
        raise ConfigError(f"rate_model must be one of {RATE_MODELS}")
    if cfg.qoi not in ("mean", "point"):
        raise ConfigError("qoi must be 'mean' or 'point'")
    if cfg.R < 1:
        raise ConfigError("R must be >= 1")
    if cfg.suite_depth not in ("quick", "full"):
        raise ConfigError("suite_depth must be 'quick' or 'full'")

    if cfg.experiment in ("gauss-sweep", "qmc-sweep", "mc-sweep"):
        ns = cfg.n_values
        if len(ns) < 1:
            raise ConfigError("n_values must be nonempty")
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError("n_values must be strictly increasing")
        if cfg.experiment == "qmc-sweep":
            for n in ns:
                if n < 4 or n & (n - 1):
                    raise ConfigError(f"qmc n_values must be powers of two >= 4, got {n}")
        rtype = cfg.reference.get("type")
        if rtype not in ("gauss", "qmc", "explicit", "self-finest"):
            raise ConfigError("reference.type must be gauss, qmc, explicit or self-finest")
        if rtype == "explicit" and "value" not in cfg.reference:
            raise ConfigError("explicit reference needs a value")
        if rtype in ("gauss", "qmc"):
            n_ref = cfg.reference.get("n")
            if not n_ref:
                raise ConfigError(f"{rtype} reference needs n")
            # reference hygiene: the finest sweep point must stay at or below
            # half the reference resolution, else errors degenerate
            if 2 * max(ns) > n_ref:
                raise ConfigError(
                    f"finest sweep point {max(ns)} exceeds half the reference "
                    f"resolution {n_ref}"
                )


def build_problem(cfg: ExperimentConfig) -> ProblemSpec:
    p = cfg.problem
    if "fields" in p:
        return _custom_problem(p)
    family = p.get("family", "1d")
    kwargs = dict(
        b_variant=p.get("b_variant", "b1"),
        m=p.get("m", 3),
        quad_degree=p.get("quad_degree", 4),
        solve_rel_tol=p.get("solve_rel_tol", 1e-12),
    )
    if p.get("mesh_n"):
        kwargs["mesh_n"] = p["mesh_n"]
    if p.get("c_m") is not None:
        kwargs["c_m"] = p["c_m"]
    if family == "hd":
        kwargs["s"] = p.get("s", 20)
    return benchmark_problem(family, **kwargs)


def _custom_problem(p: dict) -> ProblemSpec:
    fields = p["fields"]
    spec_fields = {}
    for name in ("a", "b", "f"):
        entry = fields.get(name)
        if entry is None:
            raise ConfigError(f"custom problem is missing field {name!r}")
        if isinstance(entry, str):
            spec_fields[name] = make_field(entry, s=p.get("s"))
        else:
            spec_fields[name] = make_field("custom", spec=entry)
    mode_cfg = p.get("mode", "positive-b")
    mode = AssumptionMode(mode_cfg) if isinstance(mode_cfg, str) else AssumptionMode(**mode_cfg)
    s = max(f.param_dim for f in spec_fields.values())
    half = max((f.box.half_width for f in spec_fields.values() if f.param_dim), default=0.5)
    return ProblemSpec(
        m=p.get("m", 3), c_m=p.get("c_m", 1.0), mode=mode,
        param_box=ParameterBox(s, half),
        mesh_n=p.get("mesh_n", 32), quad_degree=p.get("quad_degree", 4),
        solve_rel_tol=p.get("solve_rel_tol", 1e-12), **spec_fields,
    )


@dataclass
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    model: str
    n_used: list

    def to_dict(self) -> dict:
        return {
            "slope": self.slope, "intercept": self.intercept,
            "r_squared": self.r_squared, "model": self.model,
            "n_used": list(self.n_used),
        }


def fit_rate(rows, model: str) -> FitResult:
    """Least squares of log(error) against the model abscissa."""
    rows = [(n, e) for n, e in rows]
    if len(rows) < 3:
        raise SweepError(f"rate fit needs at least 3 rows, got {len(rows)}")
    if any(e <= 0 for _, e in rows):
        raise SweepError("rate fit needs positive errors")
    n = np.array([r[0] for r in rows], dtype=float)
    if model == "semilog-n":
        x = n
    elif model == "semilog-sqrt-n":
        x = np.sqrt(n)
    elif model == "loglog":
        x = np.log(n)
    else:
        raise SweepError(f"unknown rate model {model!r}")
    if np.ptp(x) <= 0:
        raise SweepError("degenerate abscissae in rate fit")
    y = np.log([r[1] for r in rows])
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return FitResult(float(slope), float(intercept), r2, model, [int(v) for v in n])


@dataclass
class SweepResult:
    rows: list  # (n, error)
    fit: FitResult | None
    metadata: dict
    reports: list | None = None  # derivative-check payload


def _base_metadata(cfg: ExperimentConfig, spec: ProblemSpec | None) -> dict:
    import scipy

    meta = {
        "config": cfg.to_dict(),
        "versions": {
            "gevreyrd": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "zeta5": f"{ZETA5:.15f}",
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
    }
    if spec is not None:
        meta["mesh_n"] = spec.mesh_n
        meta["quad_degree"] = spec.quad_degree
        meta["solve_rel_tol"] = spec.solve_rel_tol
        meta["c_m"] = spec.c_m
        meta["m"] = spec.m
        meta["constants"] = theory_constants(spec).to_dict()
        meta["field_labels"] = {"a": spec.a.label, "b": spec.b.label, "f": spec.f.label}
        if spec.b.label.startswith("b2-hd"):
            meta["coefficient_note"] = (
                "exp(-1/(y_j+1/2)) extended continuously by 0 at y_j = -1/2"
            )
        elif spec.b.label == "b2-1d":
            meta["coefficient_note"] = (
                "exponential bump extended continuously at the endpoint y = -1"
            )
    return meta


def _qoi_function(spec: ProblemSpec, ctx: SolverContext, cfg: ExperimentConfig,
                  counter: dict):
    kind = cfg.qoi
    u_bar = theory_constants(spec).u_bar

    def F(y):
        u, trace = fixed_point_solve(
            spec, y, tol=cfg.fixed_point_tol, max_iter=cfg.max_iterations, ctx=ctx
        )
        if not trace.converged:
            raise SweepError(
                f"fixed point did not reach {cfg.fixed_point_tol} within "
                f"{cfg.max_iterations} iterations at y={np.asarray(y)}"
            )
        # piggybacked a-priori bound: no iterate may leave the solution ball
        ball = spec.c_m * max(trace.iterates_norms)
        if ball > u_bar + 1e-8:
            raise SweepError(
                f"iterate left the a-priori ball at y={np.asarray(y)}: "
                f"scaled seminorm {ball} > {u_bar}"
            )
        counter["solves"] += 1
        counter["max_ball"] = max(counter["max_ball"], ball)
        return qoi(u, kind)

    return F


def run_sweep(cfg: ExperimentConfig):
    """Dispatch an experiment; returns SweepResult (or a suite report)."""
    if cfg.experiment == "gauss-sweep":
        return _run_gauss(cfg)
    if cfg.experiment in ("qmc-sweep", "mc-sweep"):
        return _run_sampling(cfg)
    if cfg.experiment == "derivative-check":
        return _run_derivative_check(cfg)
    if cfg.experiment == "suite":
        return invariants_suite(cfg.suite_depth)
    raise ConfigError(f"cannot run experiment {cfg.experiment!r}")


def _run_gauss(cfg: ExperimentConfig) -> SweepResult:
    spec = build_problem(cfg)
    ctx = SolverContext(spec)
    counter = {"solves": 0, "max_ball": 0.0}
    F = _qoi_function(spec, ctx, cfg, counter)
    cache: dict[float, float] = {}

    def G(y: float) -> float:
        key = round(float(y), 15)
        if key not in cache:
            cache[key] = F([y])
        return cache[key]

    ref_cfg = cfg.reference
    ref_err_est = 0.0
    if ref_cfg["type"] == "gauss":
        n_ref = ref_cfg["n"]
        reference = quad.gauss_integrate(G, n_ref)
        ref_err_est = abs(reference - quad.gauss_integrate(G, n_ref - 1))
    elif ref_cfg["type"] == "explicit":
        n_ref = None
        reference = float(ref_cfg["value"])
    elif ref_cfg["type"] == "self-finest":
        n_ref = max(cfg.n_values)
        reference = quad.gauss_integrate(G, n_ref)
    else:
        raise ConfigError("gauss sweeps take gauss, explicit or self-finest references")

    rows = [(n, abs(reference - quad.gauss_integrate(G, n))) for n in cfg.n_values]
    fit, fit_info = _windowed_fit(rows, cfg, reference, ref_err_est, exclude_n=n_ref)
    meta = _base_metadata(cfg, spec)
    meta.update({
        "reference_value": reference,
        "reference_error_estimate": ref_err_est,
        "qoi_kind": cfg.qoi,
        "solves": counter["solves"],
        "max_scaled_h1": counter["max_ball"],
        "fit_window": fit_info,
    })
    return SweepResult(rows=rows, fit=fit, metadata=meta)


def _lattice_for(cfg: ExperimentConfig, s: int, n: int):
    if cfg.lattice_file:
        rule = quad.read_lattice(cfg.lattice_file)
        if rule.n == n and rule.s >= s:
            return quad.LatticeRule(n=rule.n, z=rule.z[:s], s=s)
    gamma = (np.arange(1, s + 1, dtype=float)) ** (-cfg.lattice_weights_decay)
    return quad.cbc_generating_vector(s, n, weights=gamma)


def _run_sampling(cfg: ExperimentConfig) -> SweepResult:
    spec = build_problem(cfg)
    s = spec.param_box.dim
    ctx = SolverContext(spec)
    counter = {"solves": 0, "max_ball": 0.0}
    F = _qoi_function(spec, ctx, cfg, counter)

    ref_cfg = cfg.reference
    ref_err_est = 0.0
    if ref_cfg["type"] == "qmc":
        n_ref = ref_cfg["n"]
        r_ref = ref_cfg.get("shifts", 2)
        ref_rule = _lattice_for(cfg, s, n_ref)
        ref_shifts = quad.ShiftSet.make(r_ref, s, quad.derive_seed(cfg.seed, "qmc-reference"))
        ref_ests = quad.qmc_estimate(F, ref_rule, ref_shifts)
        reference = float(np.mean(ref_ests))
        if r_ref > 1:
            ref_err_est = float(np.std(ref_ests) / math.sqrt(r_ref)) / abs(reference)
    elif ref_cfg["type"] == "explicit":
        reference = float(ref_cfg["value"])
    else:
        raise ConfigError("sampling sweeps take qmc or explicit references")
    if reference == 0.0:
        raise SweepError("reference value vanishes; relative errors undefined")

    rows = []
    lattice_log = {}
    if cfg.experiment == "qmc-sweep":
        shifts = quad.ShiftSet.make(cfg.R, s, cfg.seed)
        for n in cfg.n_values:
            rule = _lattice_for(cfg, s, n)
            lattice_log[str(n)] = [int(v) for v in rule.z]
            ests = quad.qmc_estimate(F, rule, shifts)
            rows.append((n, quad.rmse_relative(ests, reference)))
    else:
        for idx, n in enumerate(cfg.n_values):
            ests = [
                quad.mc_estimate(F, n, s, quad.derive_seed(cfg.seed, "mc-replicate", idx * cfg.R + r))
                for r in range(cfg.R)
            ]
            rows.append((n, quad.rmse_relative(ests, reference)))

    fit, fit_info = _windowed_fit(rows, cfg, 1.0, ref_err_est, exclude_n=None)
    meta = _base_metadata(cfg, spec)
    meta.update({
        "reference_value": reference,
        "reference_error_estimate_rel": ref_err_est,
        "qoi_kind": cfg.qoi,
        "R": cfg.R,
        "s": s,
        "solves": counter["solves"],
        "max_scaled_h1": counter["max_ball"],
        "fit_window": fit_info,
    })
    if lattice_log:
        meta["generating_vectors"] = lattice_log
    return SweepResult(rows=rows, fit=fit, metadata=meta)


def _windowed_fit(rows, cfg: ExperimentConfig, scale: float, ref_err_est: float,
                  exclude_n=None):
    """Fit over rows clear of the noise floor.

    The floor combines the reference-error estimate with the solver's
    contribution to the quantity of interest (far below the fixed-point
    stopping tolerance because the contraction keeps iterating error well
    under the last update; the relative factor is configurable).
    """
    floor = cfg.noise_floor_rel * abs(scale) + ref_err_est
    kept, dropped = [], []
    for n, e in rows:
        if exclude_n is not None and n == exclude_n:
            dropped.append({"n": n, "error": e, "why": "coincides with reference"})
        elif e <= 10.0 * floor:
            dropped.append({"n": n, "error": e, "why": "within 10x of noise floor"})
        else:
            kept.append((n, e))
    info = {"noise_floor": floor, "dropped": dropped}
    if len(kept) < 3:
        return None, info
    return fit_rate(kept, cfg.rate_model), info


def _run_derivative_check(cfg: ExperimentConfig) -> SweepResult:
    spec = build_problem(cfg)
    spec.validate()
    ctx = SolverContext(spec)
    bundle = theory_constants(spec)
    delta = max(f.envelope.delta for f in (spec.a, spec.b, spec.f) if f.envelope)
    radii = calibrate_radii(spec.b)
    fd_cfg = cfg.fd
    scheme = FdScheme(
        order=fd_cfg.get("order", 2),
        step=fd_cfg.get("step", 1e-3),
        richardson=fd_cfg.get("richardson", False),
    )
    max_order = fd_cfg.get("max_order", 2)
    dims = fd_cfg.get("dims") or list(range(1, spec.param_box.dim + 1))
    norm = fd_cfg.get("norm", "H1")
    y0 = np.zeros(spec.param_box.dim)
    cache: dict = {}

    reports: list[BoundCheckReport] = []
    reports.append(gevrey_bound_check(spec, bundle, MultiIndex(), delta, y0,
                                      scheme, radii, norm, ctx=ctx, cache=cache))
    indices = [MultiIndex.unit(j) for j in dims]
    if max_order >= 2:
        indices += [MultiIndex({j: 2}) for j in dims]
        indices += [
            MultiIndex({i: 1, j: 1})
            for k, i in enumerate(dims) for j in dims[k + 1:]
        ]
    for nu in indices:
        if nu.order > 3:
            continue
        reports.append(gevrey_bound_check(spec, bundle, nu, delta, y0, scheme,
                                          radii, norm, ctx=ctx, cache=cache))
    if fd_cfg.get("include_laplacian", True):
        lap_cache: dict = {}
        reports.append(laplacian_bound_check(spec, bundle, y0, MultiIndex(), delta,
                                             scheme, radii, ctx=ctx, cache=lap_cache))
        reports.append(laplacian_bound_check(spec, bundle, y0, MultiIndex.unit(dims[0]),
                                             delta, scheme, radii, ctx=ctx, cache=lap_cache))

    meta = _base_metadata(cfg, spec)
    meta.update({
        "fd_scheme": {"order": scheme.order, "step": scheme.step,
                      "richardson": scheme.richardson},
        "radii": radii.description,
        "delta": delta,
        "checks": len(reports),
        "checks_passed": sum(r.passed for r in reports),
        "max_ratio": max(r.ratio for r in reports),
    })
    return SweepResult(rows=[], fit=None, metadata=meta, reports=reports)


# --- emission -----------------------------------------------------------------


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "error"])
    for n, e in rows:
        w.writerow([n, f"{e:.17g}"])
    return buf.getvalue()


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["nu", "norm", "measured", "bound", "ratio", "passed"])
    for r in reports:
        row = r.to_row()
        w.writerow([row["nu"], row["norm"], f"{row['measured']:.17g}",
                    f"{row['bound']:.17g}", f"{row['ratio']:.17g}", row["passed"]])
    return buf.getvalue()


def write_outputs(result, out_dir, render: bool = True) -> dict:
    """Persist a sweep (or check) result; returns the file map.

    sweep.csv and fit.json are byte-stable for fixed inputs; meta.json
    carries a wall-clock timestamp by design and is not.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}

    if result.reports is not None:
        files["checks.csv"] = out / "checks.csv"
        files["checks.csv"].write_text(reports_to_csv(result.reports))
    else:
        files["sweep.csv"] = out / "sweep.csv"
        files["sweep.csv"].write_text(rows_to_csv(result.rows))

    fit_payload: dict = {"model": None, "warning": "fit omitted (too few usable rows)"}
    if result.fit is not None:
        fit_payload = result.fit.to_dict()
    if "fit_window" in result.metadata:
        fit_payload["window"] = result.metadata["fit_window"]
    files["fit.json"] = out / "fit.json"
    files["fit.json"].write_text(json.dumps(fit_payload, indent=2, sort_keys=True) + "\n")

    files["meta.json"] = out / "meta.json"
    files["meta.json"].write_text(json.dumps(result.metadata, indent=2, sort_keys=True) + "\n")

    if render:
        from . import figures

        if result.reports is not None:
            files["checks.png"] = out / "checks.png"
            figures.render_checks(result.reports, files["checks.png"])
        elif result.rows:
            files["sweep.png"] = out / "sweep.png"
            figures.render_sweep(result, files["sweep.png"])
    return files


def read_sweep_csv(path) -> list:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if header != ["n", "error"]:
            raise ValueError(f"unexpected sweep header {header}")
        return [(int(n), float(e)) for n, e in rd]
