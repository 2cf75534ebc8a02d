"""P1 finite elements on a uniform triangulation of the unit square.

Homogeneous Dirichlet conditions throughout. The N x N grid of squares is
split along the lower-left to upper-right diagonal of every cell, giving
2 N^2 positively oriented triangles and mesh size h = sqrt(2)/N.

Coefficient arguments are "batch fields": objects with an
``evaluate_batch(xs, y)`` method mapping an (M, 2) array of points to an
(M,) array of values (see fields.ParamField). Assembly samples them at
quadrature points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


# Barycentric points and weights on the reference triangle; weights sum to
# the reference area 1/2. The six-point rule is exact to degree 4, needed
# because the reaction coefficients oscillate at frequencies 15*pi, 17*pi.
_QUAD_DATA = {
    1: (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([0.5])),
    2: (
        np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
        np.array([1 / 6, 1 / 6, 1 / 6]),
    ),
    4: (
        np.array(
            [
                [0.445948490915965, 0.445948490915965, 0.108103018168070],
                [0.445948490915965, 0.108103018168070, 0.445948490915965],
                [0.108103018168070, 0.445948490915965, 0.445948490915965],
                [0.091576213509771, 0.091576213509771, 0.816847572980459],
                [0.091576213509771, 0.816847572980459, 0.091576213509771],
                [0.816847572980459, 0.091576213509771, 0.091576213509771],
            ]
        ),
        np.array(
            [
                0.223381589678011 / 2,
                0.223381589678011 / 2,
                0.223381589678011 / 2,
                0.109951743655322 / 2,
                0.109951743655322 / 2,
                0.109951743655322 / 2,
            ]
        ),
    ),
}


@dataclass(frozen=True)
class TriQuadRule:
    """Quadrature on the reference triangle; weights sum to area 1/2."""

    degree: int
    points: np.ndarray  # (Q, 3) barycentric
    weights: np.ndarray  # (Q,)


def tri_quad_rule(degree: int) -> TriQuadRule:
    if degree not in _QUAD_DATA:
        raise ValueError(f"unsupported quadrature degree {degree}; use 1, 2 or 4")
    pts, w = _QUAD_DATA[degree]
    return TriQuadRule(degree, pts.copy(), w.copy())


class Mesh:
    """Uniform triangulation of (0,1)^2 with (N+1)^2 nodes, 2 N^2 triangles."""

    def __init__(self, n_cells_per_side: int):
        if n_cells_per_side < 2:
            raise ValueError("need at least 2 cells per side")
        n = n_cells_per_side
        self.n = n
        self.h = math.sqrt(2.0) / n

        g = np.arange(n + 1) / n
        xx, yy = np.meshgrid(g, g, indexing="xy")
        self.nodes = np.column_stack([xx.ravel(), yy.ravel()])

        ix, iy = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
        n00 = (iy * (n + 1) + ix).ravel()
        n10 = n00 + 1
        n01 = n00 + (n + 1)
        n11 = n01 + 1
        lower = np.column_stack([n00, n10, n11])  # below the cell diagonal
        upper = np.column_stack([n00, n11, n01])
        self.triangles = np.vstack([lower, upper])

        on_boundary = (
            (self.nodes[:, 0] == 0.0)
            | (self.nodes[:, 0] == 1.0)
            | (self.nodes[:, 1] == 0.0)
            | (self.nodes[:, 1] == 1.0)
        )
        self.interior_index = np.full(len(self.nodes), -1, dtype=np.int64)
        self.interior_index[~on_boundary] = np.arange((n - 1) ** 2)
        self.interior_nodes = np.flatnonzero(~on_boundary)
        self.n_interior = (n - 1) ** 2

        coords = self.nodes[self.triangles]  # (T, 3, 2)
        v1 = coords[:, 1] - coords[:, 0]
        v2 = coords[:, 2] - coords[:, 0]
        det = v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0]
        self.areas = det / 2.0
        grads = np.empty((len(self.triangles), 3, 2))
        grads[:, 1, 0] = v2[:, 1] / det
        grads[:, 1, 1] = -v2[:, 0] / det
        grads[:, 2, 0] = -v1[:, 1] / det
        grads[:, 2, 1] = v1[:, 0] / det
        grads[:, 0] = -grads[:, 1] - grads[:, 2]
        self.grads = grads

        self._qpoint_cache: dict[int, np.ndarray] = {}

    def quad_points(self, quad: TriQuadRule) -> np.ndarray:
        """Physical quadrature points, shape (T, Q, 2). Cached per degree."""
        if quad.degree not in self._qpoint_cache:
            coords = self.nodes[self.triangles]  # (T, 3, 2)
            self._qpoint_cache[quad.degree] = np.einsum(
                "qk,tkd->tqd", quad.points, coords
            )
        return self._qpoint_cache[quad.degree]

    def __repr__(self):
        return f"Mesh(n={self.n}, nodes={len(self.nodes)}, triangles={len(self.triangles)})"


def build_mesh(n: int) -> Mesh:
    return Mesh(n)


@dataclass
class SparseSymMatrix:
    """Symmetric positive-definite matrix in compressed-row storage."""

    csr: sp.csr_matrix
    dim: int = field(init=False)

    def __post_init__(self):
        self.dim = self.csr.shape[0]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.csr @ x

    def diagonal(self) -> np.ndarray:
        return self.csr.diagonal()

    def check_symmetry(self, rel_tol: float = 1e-14) -> bool:
        d = self.csr - self.csr.T
        scale = max(abs(self.csr).max(), 1.0)
        return abs(d).max() <= rel_tol * scale

    def energy(self, x: np.ndarray) -> float:
        """x^T A x."""
        return float(x @ (self.csr @ x))


class FemFunction:
    """Nodal P1 function; boundary entries are pinned to zero unless the
    test-mode flag ``free_boundary`` is set."""

    def __init__(self, mesh: Mesh, values: np.ndarray | None = None, free_boundary=False):
        self.mesh = mesh
        if values is None:
            values = np.zeros(len(mesh.nodes))
        values = np.asarray(values, dtype=float).copy()
        if values.shape != (len(mesh.nodes),):
            raise ValueError("values must cover all nodes")
        if not free_boundary:
            values[mesh.interior_index < 0] = 0.0
        self.values = values
        self.free_boundary = free_boundary

    @classmethod
    def from_interior(cls, mesh: Mesh, interior: np.ndarray) -> "FemFunction":
        vals = np.zeros(len(mesh.nodes))
        vals[mesh.interior_nodes] = interior
        return cls(mesh, vals)

    @classmethod
    def interpolate(cls, mesh: Mesh, fn, free_boundary=False) -> "FemFunction":
        vals = fn(mesh.nodes[:, 0], mesh.nodes[:, 1])
        return cls(mesh, np.asarray(vals, dtype=float), free_boundary=free_boundary)

    def interior(self) -> np.ndarray:
        return self.values[self.mesh.interior_nodes]

    def at_quad_points(self, quad: TriQuadRule) -> np.ndarray:
        """Interpolant values at quadrature points, shape (T, Q)."""
        nodal = self.values[self.mesh.triangles]  # (T, 3)
        return nodal @ quad.points.T

    def copy(self) -> "FemFunction":
        return FemFunction(self.mesh, self.values, free_boundary=self.free_boundary)


def _scatter_matrix(mesh: Mesh, local: np.ndarray, include_boundary: bool) -> SparseSymMatrix:
    """Accumulate (T, 3, 3) element matrices into a global CSR matrix."""
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    data = local.ravel()
    n_all = len(mesh.nodes)
    full = sp.coo_matrix((data, (rows, cols)), shape=(n_all, n_all)).tocsr()
    if include_boundary:
        return SparseSymMatrix(full)
    keep = mesh.interior_nodes
    return SparseSymMatrix(full[keep][:, keep].tocsr())


def assemble_stiffness(
    mesh: Mesh, a, y, scale: float = 1.0, quad: TriQuadRule | None = None,
    include_boundary: bool = False,
) -> SparseSymMatrix:
    """scale * int a grad(phi_i) . grad(phi_j), coefficient sampled at
    quadrature points. Interior block unless include_boundary (test mode)."""
    quad = quad or tri_quad_rule(4)
    if scale <= 0:
        raise ValueError("scale must be positive")
    qp = mesh.quad_points(quad)  # (T, Q, 2)
    avals = _eval_field(a, qp, y)  # (T, Q)
    # gradients are constant per triangle, so only int_T a enters
    a_int = 2.0 * mesh.areas * (avals @ quad.weights)  # (T,)
    gdot = np.einsum("tid,tjd->tij", mesh.grads, mesh.grads)  # (T, 3, 3)
    local = scale * a_int[:, None, None] * gdot
    return _scatter_matrix(mesh, local, include_boundary)


def assemble_load(
    mesh: Mesh, g, y, scale: float = 1.0, quad: TriQuadRule | None = None
) -> np.ndarray:
    """Interior vector with entries scale * int g phi_i."""
    quad = quad or tri_quad_rule(4)
    qp = mesh.quad_points(quad)
    gvals = _eval_field(g, qp, y)  # (T, Q)
    return _scatter_vector(mesh, gvals, quad, scale)


def assemble_reaction(
    mesh: Mesh, b, y, u: FemFunction, m: int, quad: TriQuadRule | None = None,
    b_at_quad: np.ndarray | None = None,
) -> np.ndarray:
    """Interior vector int b (I_h u)^m phi_i.

    The interpolant of u is evaluated at quadrature points first and then
    raised to the power m (not the other way around). ``b_at_quad`` lets a
    caller reuse coefficient samples across fixed-point iterations.
    """
    quad = quad or tri_quad_rule(4)
    if m < 1:
        raise ValueError("power m must be >= 1")
    if b_at_quad is None:
        b_at_quad = _eval_field(b, mesh.quad_points(quad), y)
    uq = u.at_quad_points(quad)  # (T, Q)
    return _scatter_vector(mesh, b_at_quad * uq**m, quad, 1.0)


def _eval_field(f, qp: np.ndarray, y) -> np.ndarray:
    flat = qp.reshape(-1, 2)
    vals = f.evaluate_batch(flat, y)
    return np.asarray(vals, dtype=float).reshape(qp.shape[:2])


def _scatter_vector(mesh: Mesh, integrand: np.ndarray, quad: TriQuadRule, scale: float) -> np.ndarray:
    # entries 2 * area * sum_q w_q integrand * lambda_i(q), per vertex
    weighted = integrand * quad.weights  # (T, Q)
    contrib = 2.0 * mesh.areas[:, None] * (weighted @ quad.points)  # (T, 3)
    full = np.bincount(
        mesh.triangles.ravel(), weights=(scale * contrib).ravel(), minlength=len(mesh.nodes)
    )
    return full[mesh.interior_nodes]


class CholeskyFactor:
    """Prefactored direct solve (sparse LU of an SPD matrix)."""

    def __init__(self, A: SparseSymMatrix):
        if np.any(A.diagonal() <= 0):
            raise ValueError("matrix has a nonpositive diagonal entry; not SPD")
        self._lu = spla.splu(A.csr.tocsc(), permc_spec="MMD_AT_PLUS_A")
        self.dim = A.dim

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        x = self._lu.solve(rhs)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError("direct factorization produced non-finite values")
        return x


def solve_spd(
    A: SparseSymMatrix,
    rhs: np.ndarray,
    rel_tol: float = 1e-12,
    method: str = "direct-cholesky",
    max_iter: int | None = None,
) -> np.ndarray:
    """Solve A x = rhs with residual ||A x - rhs|| <= rel_tol ||rhs||."""
    if not (0 < rel_tol <= 1e-6):
        raise ValueError("rel_tol must lie in (0, 1e-6]")
    nrhs = np.linalg.norm(rhs)
    if nrhs == 0.0:
        return np.zeros_like(rhs)
    if method == "direct-cholesky":
        x = CholeskyFactor(A).solve(rhs)
    elif method == "cg":
        x = _cg_jacobi(A, rhs, rel_tol, max_iter or 10 * A.dim)
    else:
        raise ValueError(f"unknown method {method!r}")
    res = np.linalg.norm(A.matvec(x) - rhs)
    if res > rel_tol * nrhs:
        raise RuntimeError(
            f"linear solve residual {res:.3e} exceeds {rel_tol:.1e} * ||rhs||"
        )
    return x


def _cg_jacobi(A: SparseSymMatrix, rhs: np.ndarray, rel_tol: float, max_iter: int) -> np.ndarray:
    dinv = 1.0 / A.diagonal()
    x = np.zeros_like(rhs)
    r = rhs.copy()
    z = dinv * r
    p = z.copy()
    rz = r @ z
    target = rel_tol * np.linalg.norm(rhs)
    for _ in range(max_iter):
        Ap = A.matvec(p)
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= 0.5 * target:
            return x
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise RuntimeError(f"CG did not converge within {max_iter} iterations")


def fem_functionals(u: FemFunction, kind: str, p: int | None = None,
                    x: tuple[float, float] | None = None,
                    quad: TriQuadRule | None = None) -> float:
    """Evaluate a functional of a P1 function.

    kind: 'h1-seminorm' (exact, piecewise-constant gradients),
    'l2-norm' / 'lp-norm' (quadrature of the interpolant),
    'point' (barycentric interpolation), 'mean' (exact integral).
    """
    mesh = u.mesh
    if kind == "h1-seminorm":
        nodal = u.values[mesh.triangles]  # (T, 3)
        g = np.einsum("tk,tkd->td", nodal, mesh.grads)
        return float(np.sqrt(np.sum(mesh.areas * np.sum(g * g, axis=1))))
    if kind in ("l2-norm", "lp-norm"):
        pw = 2 if kind == "l2-norm" else p
        if pw is None or pw < 1:
            raise ValueError("lp-norm needs p >= 1")
        quad = quad or tri_quad_rule(4)
        uq = np.abs(u.at_quad_points(quad)) ** pw
        total = float(np.sum(2.0 * mesh.areas * (uq @ quad.weights)))
        return total ** (1.0 / pw)
    if kind == "point":
        if x is None:
            raise ValueError("point evaluation needs x")
        return point_value(u, x)
    if kind == "mean":
        nodal = u.values[mesh.triangles]
        return float(np.sum(mesh.areas * nodal.mean(axis=1)))
    raise ValueError(f"unknown functional kind {kind!r}")


def point_value(u: FemFunction, x: tuple[float, float]) -> float:
    px, py = float(x[0]), float(x[1])
    if not (0.0 <= px <= 1.0 and 0.0 <= py <= 1.0):
        raise ValueError("point outside the unit square")
    mesh = u.mesh
    n = mesh.n
    ix = min(int(px * n), n - 1)
    iy = min(int(py * n), n - 1)
    xi = px * n - ix
    eta = py * n - iy
    cell = iy * n + ix
    # below the cell diagonal -> lower triangle, else upper
    t = cell if eta <= xi else cell + n * n
    tri = mesh.triangles[t]
    if eta <= xi:
        lam1, lam2 = xi - eta, eta
    else:
        lam1, lam2 = xi, eta - xi
    lam = np.array([1.0 - lam1 - lam2, lam1, lam2])
    return float(u.values[tri] @ lam)


def export_text(mesh: Mesh, u: FemFunction | None = None) -> str:
    """Node/element text format: header, then 'x y' node lines, then
    'i j k' element lines (0-based), then one nodal value per line."""
    lines = [f"nodes={len(mesh.nodes)} triangles={len(mesh.triangles)} values={int(u is not None)}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.nodes]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    if u is not None:
        lines += [f"{v:.17g}" for v in u.values]
    return "\n".join(lines) + "\n"


def import_text(text: str) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Parse the export format back into (nodes, triangles, values or None)."""
    lines = text.strip().splitlines()
    header = dict(part.split("=") for part in lines[0].split())
    nn, nt = int(header["nodes"]), int(header["triangles"])
    has_vals = bool(int(header.get("values", "0")))
    nodes = np.array([[float(v) for v in ln.split()] for ln in lines[1 : 1 + nn]])
    tris = np.array(
        [[int(v) for v in ln.split()] for ln in lines[1 + nn : 1 + nn + nt]], dtype=np.int64
    )
    vals = None
    if has_vals:
        vals = np.array([float(ln) for ln in lines[1 + nn + nt : 1 + nn + nt + nn]])
    return nodes, tris, vals
