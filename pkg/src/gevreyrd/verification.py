"""Numerical verification of the derivative bounds at desk scale.

Parametric derivatives of the discrete solution are formed by nested
central finite differences (the independent check: no adjoint or symbolic
machinery), then measured in the norm the corresponding bound is stated
in and compared against the explicit constant chain.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field as dc_field
from itertools import product

import numpy as np

from . import combinatorics as comb
from . import fem
from .combinatorics import MultiIndex
from .regularity import ConstantBundle, Radii, derivative_bound, laplacian_zero_bound
from .solver import ProblemSpec, SolverContext, fixed_point_solve, strong_laplacian

PASS_SLACK = 1e-2  # FD-noise allowance on measured/bound ratios


def _as_param_vector(y) -> np.ndarray:
    if y is None:
        return np.zeros(0)
    return np.atleast_1d(np.asarray(y, dtype=float))


@dataclass(frozen=True)
class FdScheme:
    """Central finite-difference stencil family."""

    order: int = 2
    step: float = 1e-3
    richardson: bool = False

    def __post_init__(self):
        if self.order not in (2, 4):
            raise ValueError("stencil order must be 2 or 4")
        if not (1e-6 <= self.step <= 1e-1):
            raise ValueError("step must lie in [1e-6, 1e-1]")


@dataclass
class BoundCheckReport:
    nu: MultiIndex
    measured: float
    bound: float
    ratio: float
    norm_kind: str
    passed: bool

    def to_row(self) -> dict:
        return {
            "nu": "+".join(f"{j}^{e}" for j, e in self.nu.entries) or "0",
            "norm": self.norm_kind,
            "measured": self.measured,
            "bound": self.bound,
            "ratio": self.ratio,
            "passed": self.passed,
        }


# 1-D central stencils: {derivative order: {offset: weight * step^order}}
_STENCILS = {
    2: {
        1: {-1: -0.5, 1: 0.5},
        2: {-1: 1.0, 0: -2.0, 1: 1.0},
        3: {-2: -0.5, -1: 1.0, 1: -1.0, 2: 0.5},
    },
    4: {
        1: {-2: 1 / 12, -1: -8 / 12, 1: 8 / 12, 2: -1 / 12},
        2: {-2: -1 / 12, -1: 16 / 12, 0: -30 / 12, 1: 16 / 12, 2: 1 / 12},
        3: {-3: 1 / 8, -2: -1.0, -1: 13 / 8, 1: -13 / 8, 2: 1.0, 3: -1 / 8},
    },
}


def _composite_stencil(nu: MultiIndex, scheme: FdScheme) -> list[tuple[tuple, float]]:
    """Tensor product of 1-D stencils, applied in ascending dimension order.

    Returns (offsets, weight) pairs; offsets are (dim, multiple-of-step)
    tuples and weights already include the 1/step^|nu| factors.
    """
    if nu.order > 3:
        raise ValueError("finite differences are capped at |nu| <= 3")
    table = _STENCILS[scheme.order]
    pieces = []
    for j, e in nu.entries:
        if e not in table:
            raise ValueError(f"no stencil for derivative order {e}")
        pieces.append((j, table[e], scheme.step**e))
    combos = [((), 1.0)]
    for j, st, hpow in pieces:
        combos = [
            (offs + ((j, o),), w * wj / hpow)
            for offs, w in combos
            for o, wj in st.items()
        ]
    return combos


def _stencil_points(y: np.ndarray, combos, scheme: FdScheme):
    pts = []
    for offs, w in combos:
        yp = y.copy()
        for j, o in offs:
            yp[j - 1] += o * scheme.step
        pts.append((tuple(np.round(yp, 15)), yp, w))
    return pts


def fd_partial(
    spec: ProblemSpec,
    y,
    nu: MultiIndex,
    scheme: FdScheme,
    ctx: SolverContext | None = None,
    solve_tol: float = 1e-12,
    _cache: dict | None = None,
) -> fem.FemFunction:
    """FD approximation of the nu-th parametric derivative of the solution.

    Order zero returns the solution itself. Every stencil point must stay
    inside the parameter box. Solves are cached by parameter vector so
    overlapping stencils do not repeat work.
    """
    ctx = ctx or SolverContext(spec)
    y = _as_param_vector(y)
    cache = _cache if _cache is not None else {}

    def solve_at(key, yp):
        if key not in cache:
            if not spec.param_box.contains(yp):
                raise ValueError(f"stencil point {yp} leaves the parameter box")
            u, tr = fixed_point_solve(spec, yp, tol=solve_tol, ctx=ctx)
            if not tr.converged:
                raise RuntimeError(f"stencil solve at {yp} did not converge")
            cache[key] = u.values
        return cache[key]

    def evaluate(sch: FdScheme) -> np.ndarray:
        if nu.is_zero():
            return solve_at(tuple(np.round(y, 15)), y).copy()
        combos = _composite_stencil(nu, sch)
        out = np.zeros(len(ctx.mesh.nodes))
        for key, yp, w in _stencil_points(y, combos, sch):
            out += w * solve_at(key, yp)
        return out

    if scheme.richardson and not nu.is_zero():
        coarse = evaluate(FdScheme(scheme.order, scheme.step, False))
        fine = evaluate(FdScheme(scheme.order, scheme.step / 2.0, False))
        gain = 2.0**scheme.order
        vals = (gain * fine - coarse) / (gain - 1.0)
    else:
        vals = evaluate(scheme)
    return fem.FemFunction(ctx.mesh, vals)


def gevrey_bound_check(
    spec: ProblemSpec,
    bundle: ConstantBundle,
    nu: MultiIndex,
    delta: float,
    y,
    scheme: FdScheme,
    radii: Radii,
    norm_kind: str = "H1",
    ctx: SolverContext | None = None,
    cache: dict | None = None,
) -> BoundCheckReport:
    """Measured FD derivative norm against the solution-regularity bound.

    |nu| >= 1 checks the energy-norm estimates; nu = 0 checks the a-priori
    ball bound C_m |u|_H1 <= u_bar instead.
    """
    ctx = ctx or SolverContext(spec)
    du = fd_partial(spec, y, nu, scheme, ctx=ctx, solve_tol=spec.solve_rel_tol,
                    _cache=cache)
    h1 = fem.fem_functionals(du, "h1-seminorm")
    if nu.is_zero():
        measured = spec.c_m * h1
        bound = bundle.u_bar
        kind = "V-ball"
    elif norm_kind == "H1":
        measured, bound, kind = h1, derivative_bound(bundle, radii, nu, delta, "H1"), "H1"
    elif norm_kind == "V":
        measured = spec.c_m * h1
        bound, kind = derivative_bound(bundle, radii, nu, delta, "V"), "V"
    else:
        raise ValueError(f"unsupported norm kind {norm_kind!r}")
    ratio = measured / bound
    return BoundCheckReport(nu, measured, bound, ratio, kind, ratio <= 1.0 + PASS_SLACK)


def power_derivative_check(
    spec: ProblemSpec,
    y,
    k: int,
    nu: MultiIndex,
    scheme: FdScheme,
    bundle: ConstantBundle,
    radii: Radii,
    delta: float,
    ctx: SolverContext | None = None,
    cache: dict | None = None,
) -> BoundCheckReport:
    """L^((m+1)/k) bound on FD derivatives of the k-th solution power.

    The power is taken pointwise at quadrature nodes of each stencil
    solve before the difference weights are applied (powers do not
    commute with the nodal combination).
    """
    if not (1 <= k <= spec.m + 1):
        raise ValueError("power k must satisfy 1 <= k <= m + 1")
    if not (1 <= nu.order <= 2):
        raise ValueError("power-derivative checks cover 1 <= |nu| <= 2")
    ctx = ctx or SolverContext(spec)
    y = _as_param_vector(y)
    combos = _composite_stencil(nu, scheme)
    cache = cache if cache is not None else {}
    acc = None
    for key, yp, w in _stencil_points(y, combos, scheme):
        if key not in cache:
            if not spec.param_box.contains(yp):
                raise ValueError(f"stencil point {yp} leaves the parameter box")
            u, tr = fixed_point_solve(spec, yp, tol=spec.solve_rel_tol, ctx=ctx)
            if not tr.converged:
                raise RuntimeError(f"stencil solve at {yp} did not converge")
            cache[key] = u.values
        uq = fem.FemFunction(ctx.mesh, cache[key]).at_quad_points(ctx.quad)
        acc = w * uq**k if acc is None else acc + w * uq**k
    p_over_k = (spec.m + 1) / k
    integrand = np.abs(acc) ** p_over_k
    measured = float(
        np.sum(2.0 * ctx.mesh.areas * (integrand @ ctx.quad.weights))
    ) ** (1.0 / p_over_k)
    n = nu.order
    bound = (
        3.0 ** (k - 1)
        * bundle.c_u**k
        * bundle.rho ** (n - 1)
        * float(comb.half_falling_factorial(n))
        * math.factorial(n) ** (delta - 1.0)
        / radii.power(nu)
    )
    ratio = measured / bound
    return BoundCheckReport(nu, measured, bound, ratio, f"L({spec.m + 1}/{k})",
                            ratio <= 1.0 + PASS_SLACK)


def laplacian_bound_check(
    spec: ProblemSpec,
    bundle: ConstantBundle,
    y,
    nu: MultiIndex,
    delta: float,
    scheme: FdScheme,
    radii: Radii,
    ctx: SolverContext | None = None,
    cache: dict | None = None,
) -> BoundCheckReport:
    """Strong-form Laplacian bounds: order zero against the explicit
    right-hand side estimate, |nu| = 1 by finite differences of the
    reconstructed Laplacian field across stencil solves."""
    if nu.order > 1:
        raise ValueError("Laplacian checks cover |nu| <= 1")
    ctx = ctx or SolverContext(spec)
    y = _as_param_vector(y)
    cache = cache if cache is not None else {}

    def laplacian_at(key, yp) -> np.ndarray:
        if key not in cache:
            u, tr = fixed_point_solve(spec, yp, tol=spec.solve_rel_tol, ctx=ctx)
            if not tr.converged:
                raise RuntimeError(f"stencil solve at {yp} did not converge")
            cache[key] = strong_laplacian(spec, yp, u, ctx=ctx).values
        return cache[key]

    if nu.is_zero():
        vals = laplacian_at(tuple(np.round(y, 15)), y)
        bound = laplacian_zero_bound(bundle)
    else:
        acc = None
        for key, yp, w in _stencil_points(y, _composite_stencil(nu, scheme), scheme):
            if not spec.param_box.contains(yp):
                raise ValueError(f"stencil point {yp} leaves the parameter box")
            lap = laplacian_at(key, yp)
            acc = w * lap if acc is None else acc + w * lap
        vals = acc
        bound = spec.c_m**2 * derivative_bound(bundle, radii, nu, delta, "laplacian-L2")
    l2 = math.sqrt(float(np.sum(2.0 * ctx.mesh.areas * ((vals**2) @ ctx.quad.weights))))
    measured = spec.c_m**2 * l2
    ratio = measured / bound
    return BoundCheckReport(nu, measured, bound, ratio, "laplacian-L2",
                            ratio <= 1.0 + PASS_SLACK)


def calibrate_radii(field, safety: float = 0.5, probe_dims: int = 6,
                    grid_n: int = 33, fd_step: float = 1e-4) -> Radii:
    """Envelope radii from first-order differences of the coefficient.

    The first-order envelope requires |d b / d y_j| <= (scale/2) / (2 R_j),
    so R_j <= scale / (4 max |d b / d y_j|). High-dimensional fields follow
    the R_j = r0 j^5 pattern matching their j^-5 mode decay, calibrated on
    the leading dimensions; others get a single constant radius. The
    safety factor keeps the claimed envelope conservative.
    """
    if field.envelope is None:
        raise ValueError("field carries no envelope to calibrate")
    s = field.param_dim
    if s == 0:
        return Radii(rule=lambda j: 1.0, description="parameter-free")
    scale = field.envelope.scale
    g = np.linspace(0.0, 1.0, grid_n)
    xs = np.column_stack([np.repeat(g, grid_n), np.tile(g, grid_n)])
    hw = field.box.half_width
    probes = [np.zeros(s)]
    probes += [np.full(s, 0.5 * hw), np.full(s, -0.4 * hw)]
    caps = []
    dims = range(1, min(s, probe_dims) + 1)
    for j in dims:
        dmax = 0.0
        for y0 in probes:
            yp, ym = y0.copy(), y0.copy()
            yp[j - 1] += fd_step
            ym[j - 1] -= fd_step
            if abs(yp[j - 1]) > hw or abs(ym[j - 1]) > hw:
                continue
            diff = (field.evaluate_batch(xs, yp) - field.evaluate_batch(xs, ym)) / (2 * fd_step)
            dmax = max(dmax, float(np.max(np.abs(diff))))
        if dmax > 0:
            caps.append((j, scale / (4.0 * dmax)))
    if not caps:
        return Radii(rule=lambda j: 1.0, description="flat-in-y")
    hd = "hd" in field.label
    if hd:
        r0 = safety * min(cap / j**5 for j, cap in caps)
        return Radii(rule=lambda j: r0 * j**5, description=f"calibrated r0={r0:.6g} * j^5")
    r = safety * min(cap for _, cap in caps)
    return Radii(rule=lambda j: r, description=f"calibrated constant {r:.6g}")


# --- exact-arithmetic invariant suite ----------------------------------------


@dataclass
class SuiteReport:
    depth: str
    checks_passed: int = 0
    checks_failed: int = 0
    first_failure: dict | None = None
    elapsed_s: float = 0.0

    def record(self, ok: bool, label: str, lhs, rhs):
        if ok:
            self.checks_passed += 1
        else:
            self.checks_failed += 1
            if self.first_failure is None:
                self.first_failure = {"check": label, "lhs": str(lhs), "rhs": str(rhs)}

    @property
    def ok(self) -> bool:
        return self.checks_failed == 0


def invariants_suite(depth: str = "quick", seed: int = 20240601) -> SuiteReport:
    """Run every exact identity/inequality check to the requested depth."""
    if depth == "quick":
        n_max, n_random = 12, 50
    elif depth == "full":
        n_max, n_random = 25, 200
    else:
        raise ValueError("depth must be 'quick' or 'full'")
    import random

    rng = random.Random(seed)
    rep = SuiteReport(depth=depth)
    t0 = time.time()

    for n in range(1, n_max + 1):
        lhs, rhs = comb.identity_sum("shifted-convolution", n)
        rep.record(lhs == rhs, f"shifted-convolution n={n}", lhs, rhs)
    for k in range(2, n_max + 1):
        for kind in ("interior-convolution", "full-convolution"):
            lhs, rhs = comb.identity_sum(kind, k)
            rep.record(lhs == rhs, f"{kind} k={k}", lhs, rhs)
    for n in range(0, n_max + 1):
        ok = comb.factorial_sandwich_holds(n)
        rep.record(ok, f"factorial-sandwich n={n}", n, None)
        for variant in (1, 2, 3):
            lhs, rhs = comb.convolution_bound(n, variant)
            rep.record(lhs <= rhs, f"extended-convolution-{variant} n={n}", lhs, rhs)

    for i in range(n_random):
        support = rng.sample(range(1, 41), rng.randint(1, 5))
        entries, budget = {}, rng.randint(1, 12)
        for j in support:
            if budget <= 0:
                break
            e = rng.randint(1, budget)
            entries[j] = e
            budget -= e
        nu = MultiIndex(entries)
        e = MultiIndex.unit(rng.choice(nu.support))
        for kind, needs_e in (("est-7", False), ("est-3", False),
                              ("est-6", True), ("est-5", True)):
            lhs, rhs = comb.identity_sum(kind, nu, e=e if needs_e else None)
            rep.record(lhs <= rhs, f"{kind} #{i}", lhs, rhs)
        for delta in (1.0, 1.5, 2.0):
            lhs, rhs = comb.identity_sum("est-1", nu, delta=delta)
            rep.record(lhs <= rhs * (1 + 1e-12), f"est-1 delta={delta} #{i}", lhs, rhs)
        r = rng.randint(0, min(nu.order, 10))
        lhs, rhs = comb.identity_sum("chu-vandermonde", nu, r=r)
        rep.record(lhs == rhs, f"chu-vandermonde #{i}", lhs, rhs)

    rep.elapsed_s = time.time() - t0
    return rep
