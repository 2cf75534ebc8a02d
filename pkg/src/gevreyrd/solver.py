"""Fixed-point solver for the parametric semilinear problem.

For a fixed parameter vector y the discrete problem reads: find u in the
P1 space with

    C_m^2 int a grad(u).grad(v) + int b (I_h u)^m v = C_m int f v

for all interior basis functions v. Starting from u_0 = 0 the reaction
term is lagged, so every step is one SPD solve with the same stiffness
matrix; the matrix is factored once per parameter point (once per mesh
when the diffusion coefficient is parameter-free) and reused.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import fem
from .fields import ParamField, ParameterBox, make_field, field_range_scan
from .regularity import AssumptionMode, admissible, default_embedding_constant


class DivergenceError(RuntimeError):
    """Fixed-point iteration diverged (difference grew 10x over 5 steps)."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class ProblemSpec:
    """Everything needed to pose the discrete problem. d = 2 throughout."""

    m: int
    c_m: float
    a: ParamField
    b: ParamField
    f: ParamField
    mode: AssumptionMode
    param_box: ParameterBox
    mesh_n: int = 32
    quad_degree: int = 4
    solve_rel_tol: float = 1e-12

    d: int = 2

    def __post_init__(self):
        if self.d != 2:
            raise ValueError("only the planar problem is implemented")
        if not admissible(2, self.m):
            raise ValueError(f"inadmissible power m={self.m}")
        if self.c_m <= 0:
            raise ValueError("c_m must be positive")
        if self.mode.tag == "positive-b" and self.m % 2 == 0:
            raise ValueError("positive-b mode requires odd m")

    def validate(self, scan_seed: int = 0) -> None:
        """Costlier invariants: nonnegative reaction under positive-b."""
        if self.mode.tag == "positive-b":
            lo, _ = field_range_scan(self.b, grid_n=33, param_samples=16, seed=scan_seed)
            if lo < 0:
                raise ValueError(
                    f"positive-b mode but reaction coefficient scans down to {lo}"
                )


@dataclass
class FixedPointTrace:
    iterates_norms: list = dc_field(default_factory=list)  # H1_0 seminorms
    diffs: list = dc_field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    tol: float = 0.0


class SolverContext:
    """Per-spec discretization state shared across parameter points.

    When the diffusion coefficient has no parameter dependence the scaled
    stiffness matrix is assembled and factored exactly once.
    """

    def __init__(self, spec: ProblemSpec):
        self.spec = spec
        self.mesh = fem.build_mesh(spec.mesh_n)
        self.quad = fem.tri_quad_rule(spec.quad_degree)
        unit = make_field("unit-a")
        self.unit_stiffness = fem.assemble_stiffness(self.mesh, unit, None, 1.0, self.quad)
        self._static_a = spec.a.param_dim == 0
        self._static_f = spec.f.param_dim == 0
        self._factor = None
        self._load = None
        if self._static_a:
            A = fem.assemble_stiffness(self.mesh, spec.a, None, spec.c_m**2, self.quad)
            self._factor = fem.CholeskyFactor(A)
        if self._static_f:
            self._load = fem.assemble_load(self.mesh, spec.f, None, spec.c_m, self.quad)

    def factor_for(self, y):
        if self._static_a:
            return self._factor
        A = fem.assemble_stiffness(self.mesh, self.spec.a, y, self.spec.c_m**2, self.quad)
        return fem.CholeskyFactor(A)

    def load_for(self, y):
        if self._static_f:
            return self._load
        return fem.assemble_load(self.mesh, self.spec.f, y, self.spec.c_m, self.quad)

    def h1_seminorm(self, interior_vec: np.ndarray) -> float:
        return math.sqrt(max(self.unit_stiffness.energy(interior_vec), 0.0))


def fixed_point_solve(
    spec: ProblemSpec,
    y,
    tol: float = 1e-12,
    max_iter: int = 200,
    ctx: SolverContext | None = None,
) -> tuple[fem.FemFunction, FixedPointTrace]:
    """Iterate the lagged-reaction scheme from u_0 = 0.

    Stops when the H1_0 seminorm of the update drops to ``tol`` (read as
    an absolute seminorm). Divergence (update growing tenfold over five
    steps) raises DivergenceError; hitting max_iter returns a trace with
    converged=False.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    y = np.atleast_1d(np.asarray(y, dtype=float)) if y is not None else np.zeros(0)
    if not spec.param_box.contains(y):
        raise ValueError("parameter vector outside the parameter box")
    ctx = ctx or SolverContext(spec)
    factor = ctx.factor_for(y)
    load = ctx.load_for(y)
    b_at_quad = fem._eval_field(spec.b, ctx.mesh.quad_points(ctx.quad), y)

    trace = FixedPointTrace(tol=tol)
    x = np.zeros(ctx.mesh.n_interior)
    for it in range(1, max_iter + 1):
        u_fn = fem.FemFunction.from_interior(ctx.mesh, x)
        reaction = fem.assemble_reaction(
            ctx.mesh, spec.b, y, u_fn, spec.m, ctx.quad, b_at_quad=b_at_quad
        )
        x_new = factor.solve(load - reaction)
        diff = ctx.h1_seminorm(x_new - x)
        trace.diffs.append(diff)
        trace.iterates_norms.append(ctx.h1_seminorm(x_new))
        trace.iterations = it
        x = x_new
        if diff <= tol:
            trace.converged = True
            break
        if it >= 6 and trace.diffs[-1] > 10.0 * trace.diffs[-6]:
            raise DivergenceError(
                f"update norm grew from {trace.diffs[-6]:.3e} to {trace.diffs[-1]:.3e} "
                f"over five steps at iteration {it}",
                trace=trace,
            )
    return fem.FemFunction.from_interior(ctx.mesh, x), trace


def contraction_diagnostics(trace: FixedPointTrace) -> tuple[float, list]:
    """Successive update-norm ratios; the maximum skips the first ratio
    (initial transient) per the contraction estimate being asymptotic."""
    if trace.iterations < 3:
        raise ValueError("need at least 3 iterations for contraction ratios")
    d = trace.diffs
    ratios = [d[k + 1] / d[k] for k in range(len(d) - 1) if d[k] > 0]
    if len(ratios) < 2:
        raise ValueError("not enough nonzero updates for a ratio")
    return max(ratios[1:]), ratios


@dataclass
class LaplacianField:
    """Piecewise reconstruction of the Laplacian at quadrature points."""

    values: np.ndarray  # (T, Q)
    l2_norm: float


def strong_laplacian(
    spec: ProblemSpec, y, u: fem.FemFunction, ctx: SolverContext | None = None
) -> LaplacianField:
    """Reconstruct Laplacian(u) = (b u^m - C_m^2 grad a . grad u - C_m f)
    / (C_m^2 a) pointwise at quadrature nodes, with grad u constant per
    triangle, and return it with its quadrature L2 norm."""
    ctx = ctx or SolverContext(spec)
    mesh, quad = ctx.mesh, ctx.quad
    y = np.atleast_1d(np.asarray(y, dtype=float)) if y is not None else np.zeros(0)
    qp = mesh.quad_points(quad)
    flat = qp.reshape(-1, 2)

    a_vals = spec.a.evaluate_batch(flat, y).reshape(qp.shape[:2])
    if np.any(a_vals <= 0):
        raise ValueError("diffusion coefficient is nonpositive at a quadrature point")
    b_vals = spec.b.evaluate_batch(flat, y).reshape(qp.shape[:2])
    f_vals = spec.f.evaluate_batch(flat, y).reshape(qp.shape[:2])
    grad_a = spec.a.gradient_batch(flat, y).reshape(qp.shape[0], qp.shape[1], 2)

    uq = u.at_quad_points(quad)
    nodal = u.values[mesh.triangles]
    grad_u = np.einsum("tk,tkd->td", nodal, mesh.grads)  # (T, 2), constant per cell
    adv = np.einsum("tqd,td->tq", grad_a, grad_u)

    cm = spec.c_m
    values = (b_vals * uq**spec.m - cm**2 * adv - cm * f_vals) / (cm**2 * a_vals)
    l2 = math.sqrt(float(np.sum(2.0 * mesh.areas * ((values**2) @ quad.weights))))
    return LaplacianField(values=values, l2_norm=l2)


def qoi(u: fem.FemFunction, kind: str, x0: tuple[float, float] = (0.5, 0.5)) -> float:
    """Quantity of interest: domain average or a point value."""
    if kind == "mean":
        return fem.fem_functionals(u, "mean")
    if kind == "point":
        return fem.fem_functionals(u, "point", x=x0)
    raise ValueError(f"unknown QoI kind {kind!r}")


def solve_record(
    spec: ProblemSpec,
    y,
    tol: float = 1e-12,
    max_iter: int = 200,
    ctx: SolverContext | None = None,
    x0: tuple[float, float] = (0.5, 0.5),
) -> dict:
    """One solve as a JSON-serializable record (parameter point,
    iteration diagnostics, both quantities of interest, norms)."""
    ctx = ctx or SolverContext(spec)
    u, trace = fixed_point_solve(spec, y, tol=tol, max_iter=max_iter, ctx=ctx)
    yv = np.atleast_1d(np.asarray(y, dtype=float)) if y is not None else np.zeros(0)
    h1 = trace.iterates_norms[-1] if trace.iterates_norms else 0.0
    return {
        "y": [float(v) for v in yv],
        "iterations": trace.iterations,
        "converged": trace.converged,
        "final_diff": trace.diffs[-1] if trace.diffs else 0.0,
        "tol": trace.tol,
        "qoi": {"mean": qoi(u, "mean"), "point": qoi(u, "point", x0=x0)},
        "h1_seminorm": h1,
        "scaled_norm": spec.c_m * h1,
    }


def benchmark_problem(
    family: str,
    b_variant: str = "b1",
    s: int | None = None,
    mesh_n: int | None = None,
    m: int = 3,
    quad_degree: int = 4,
    solve_rel_tol: float = 1e-12,
    c_m: float | None = None,
) -> ProblemSpec:
    """The two benchmark problem families.

    family '1d': one scalar parameter in [-1, 1], oscillatory reaction
    (b1/b2), fixed trigonometric forcing, unit diffusion, m = 3.
    family 'hd': s parameters in [-1/2, 1/2]^s, decaying mode expansion in
    the reaction (b1/b2), unit forcing and diffusion.

    The default scaling constant is C_m = 1: a valid (non-sharp) L^(m+1)
    embedding constant on the unit square under which the lagged iteration
    contracts for both reaction families. The sharp discrete Rayleigh value
    (about 0.285 for m = 3) makes the rescaled solution large enough that
    the plain fixed-point map stops contracting for the oscillatory b.
    """
    if c_m is None:
        c_m = 1.0
    a = make_field("unit-a")
    if family == "1d":
        b = make_field({"b1": "b1-1d", "b2": "b2-1d"}[b_variant])
        f = make_field("f-trig-51")
        box = ParameterBox(1, 1.0)
        mesh_n = mesh_n or 32
    elif family == "hd":
        if not s:
            raise ValueError("family 'hd' needs the parameter dimension s")
        b = make_field({"b1": "b1-hd", "b2": "b2-hd"}[b_variant], s=s)
        f = make_field("unit-f")
        box = ParameterBox(s, 0.5)
        mesh_n = mesh_n or 16
    else:
        raise ValueError(f"unknown problem family {family!r}")
    return ProblemSpec(
        m=m, c_m=c_m, a=a, b=b, f=f, mode=AssumptionMode("positive-b"),
        param_box=box, mesh_n=mesh_n, quad_degree=quad_degree,
        solve_rel_tol=solve_rel_tol,
    )
