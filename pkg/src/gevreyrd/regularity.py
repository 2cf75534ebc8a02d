"""Explicit constants of the regularity analysis.

Given uniform coefficient envelopes (scale, Gevrey exponent delta, radii)
this module produces the full chain of constants entering the derivative
bounds: the solution bound u_bar, the coercivity constant C_A, the
first-order constant C_u with growth rate rho, and the Laplacian-level
pair (C_Delta, rho_tilde). Sobolev embedding constants for the unit
square are certified either through the first Dirichlet eigenvalue or by
discrete Rayleigh-quotient maximization on a fine P1 space.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Callable

import numpy as np

from .combinatorics import MultiIndex, half_falling_factorial

_ADMISSIBLE_MAX_M = {3: 5, 4: 3, 5: 2, 6: 2}

_LOG_SPACE_ORDER = 20  # factorial-bearing bounds switch to log-space here
_TWO_SQRT_PI = 2.0 * math.sqrt(math.pi)


def admissible(d: int, m: int) -> bool:
    """Whether the nonlinearity power m is allowed in dimension d."""
    if d < 1 or m < 1:
        raise ValueError("d and m must be >= 1")
    if d <= 2:
        return True
    if d >= 7:
        return m == 1
    return m <= _ADMISSIBLE_MAX_M[d]


class Radii:
    """Positive radius sequence R_1, R_2, ...; explicit or rule-based."""

    def __init__(self, values=None, rule: Callable[[int], float] | None = None,
                 description: str = ""):
        if (values is None) == (rule is None):
            raise ValueError("give either explicit values or a rule")
        self._values = tuple(float(v) for v in values) if values is not None else None
        self._rule = rule
        self.description = description or (
            f"explicit[{len(self._values)}]" if self._values is not None else "rule"
        )

    def radius(self, j: int) -> float:
        if j < 1:
            raise ValueError("radius indices are 1-based")
        if self._values is not None:
            if j > len(self._values):
                raise IndexError(f"radius {j} beyond the explicit sequence")
            r = self._values[j - 1]
        else:
            r = float(self._rule(j))
        if r <= 0:
            raise ValueError(f"radius R_{j} = {r} is not positive")
        return r

    def log_power(self, nu: MultiIndex) -> float:
        """log of R^nu."""
        return sum(e * math.log(self.radius(j)) for j, e in nu.entries)

    def power(self, nu: MultiIndex) -> float:
        out = 1.0
        for j, e in nu.entries:
            out *= self.radius(j) ** e
        return out

    def scaled(self, factor: float) -> "Radii":
        if self._values is not None:
            return Radii(values=[factor * v for v in self._values],
                         description=f"{factor}*{self.description}")
        rule = self._rule
        return Radii(rule=lambda j: factor * rule(j),
                     description=f"{factor}*{self.description}")


@dataclass(frozen=True)
class GevreyEnvelope:
    """Derivative envelope (scale, delta, radii) of a coefficient."""

    scale: float
    delta: float
    radii: Radii

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("envelope scale must be positive")
        if self.delta < 1:
            raise ValueError("Gevrey exponent delta must be >= 1")

    @staticmethod
    def rule_radii(rule: Callable[[int], float], description: str = "") -> Radii:
        return Radii(rule=rule, description=description)


@dataclass(frozen=True)
class AssumptionMode:
    """Which well-posedness assumption is in force.

    ``general-b`` allows sign-changing reaction but ties the reaction
    envelope to the forcing through the contraction number gamma < 1;
    ``positive-b`` requires a nonnegative reaction coefficient and odd m.
    """

    tag: str
    gamma: float | None = None

    def __post_init__(self):
        if self.tag not in ("general-b", "positive-b"):
            raise ValueError(f"unknown assumption mode {self.tag!r}")
        if self.tag == "general-b" and self.gamma is not None:
            if not (0 < self.gamma < 1):
                raise ValueError("general-b requires gamma in (0, 1)")


@dataclass(frozen=True)
class ConstantBundle:
    """All explicit constants of the derivative bounds, plus provenance."""

    u_bar: float
    c_A: float
    c_u: float
    rho: float
    c_delta: float
    rho_tilde: float
    c_m: float
    c_1: float
    c_2m_minus_1: float
    a_bar: float
    b_bar: float
    f_bar: float
    m: int
    gamma: float | None = None

    def __post_init__(self):
        if not (0 < self.c_A <= 1):
            raise ValueError("coercivity constant must lie in (0, 1]")
        if self.rho < 2:
            raise ValueError("rho must be >= 2")
        if self.rho_tilde < max(self.rho, 4 * self.a_bar) - 1e-12:
            raise ValueError("rho_tilde must dominate rho and 4*a_bar")
        for name in ("u_bar", "c_u", "c_delta", "c_m", "c_1", "c_2m_minus_1"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"constant {name} must be finite and positive")

    def to_dict(self) -> dict:
        return {
            "u_bar": self.u_bar, "c_A": self.c_A, "c_u": self.c_u, "rho": self.rho,
            "c_delta": self.c_delta, "rho_tilde": self.rho_tilde, "c_m": self.c_m,
            "c_1": self.c_1, "c_2m_minus_1": self.c_2m_minus_1,
            "a_bar": self.a_bar, "b_bar": self.b_bar, "f_bar": self.f_bar,
            "m": self.m, "gamma": self.gamma,
        }


def derive_gamma(b_bar: float, m: int, f_bar: float) -> float:
    """Contraction number implied by the envelope scales: the reaction
    envelope must satisfy b_bar/2 = gamma / (m f_bar^(m-1))."""
    gamma = m * f_bar ** (m - 1) * b_bar / 2.0
    if gamma >= 1.0:
        raise ValueError(
            f"derived gamma = {gamma:.6g} >= 1: reaction envelope too large for "
            f"the contraction assumption (b_bar={b_bar}, f_bar={f_bar}, m={m})"
        )
    return gamma


def bundle_from_scalars(
    a_bar: float, b_bar: float, f_bar: float, m: int, mode: AssumptionMode,
    c_m: float | None = None, c_1: float | None = None,
    c_2m_minus_1: float | None = None,
) -> ConstantBundle:
    """Pure arithmetic of the constant chain from the envelope scales."""
    if not admissible(2, m):
        raise ValueError(f"(d=2, m={m}) not admissible")
    gamma = None
    if mode.tag == "general-b":
        gamma = derive_gamma(b_bar, m, f_bar)
        if mode.gamma is not None and abs(gamma - mode.gamma) > 1e-12 * max(abs(gamma), 1):
            raise ValueError(
                f"declared gamma {mode.gamma} inconsistent with derived "
                f"gamma {gamma} (contraction assumption b_bar/2 = gamma/(m f_bar^(m-1)))"
            )
        c_A = 1.0 - gamma
        u_bar = f_bar / (1.0 - gamma) if m == 1 else f_bar
    else:
        if m % 2 == 0:
            raise ValueError("positive-b mode requires odd m (monotone reaction)")
        c_A = 1.0
        u_bar = f_bar

    c_m = c_m if c_m is not None else default_embedding_constant(m + 1)
    c_1 = c_1 if c_1 is not None else embedding_constant(2, "poincare-chain")
    c_2m_minus_1 = (
        c_2m_minus_1 if c_2m_minus_1 is not None else default_embedding_constant(2 * m)
    )

    c_u = u_bar * (a_bar + b_bar * u_bar ** (m - 1) + 1.0) / c_A
    rho = max(
        2.0,
        (2 * a_bar + b_bar * (m * u_bar ** (m - 1) + (3 * c_u) ** (m - 1) * (m + 1)))
        / c_A
        + 1.0,
    )
    c_delta = (
        (1.0 + a_bar / 2.0)
        * (c_m * f_bar + b_bar * (u_bar / c_m) ** m + c_m * a_bar * u_bar)
        + (3.0 * c_2m_minus_1 * c_u / c_m) ** m * b_bar
        + 3.0 * c_m * c_u * a_bar
    )
    rho_tilde = max(4.0 * a_bar, rho)
    return ConstantBundle(
        u_bar=u_bar, c_A=c_A, c_u=c_u, rho=rho, c_delta=c_delta,
        rho_tilde=rho_tilde, c_m=c_m, c_1=c_1, c_2m_minus_1=c_2m_minus_1,
        a_bar=a_bar, b_bar=b_bar, f_bar=f_bar, m=m, gamma=gamma,
    )


def theory_constants(spec, c_m: float | None = None) -> ConstantBundle:
    """Constant chain for a problem specification (solver.ProblemSpec).

    Envelope scales are read off the attached field envelopes; the mode is
    validated (odd m for positive-b, derived gamma < 1 for general-b).
    """
    for name in ("a", "b", "f"):
        fld = getattr(spec, name)
        if fld.envelope is None:
            raise ValueError(f"field {name!r} carries no Gevrey envelope")
    return bundle_from_scalars(
        a_bar=spec.a.envelope.scale,
        b_bar=spec.b.envelope.scale,
        f_bar=spec.f.envelope.scale,
        m=spec.m,
        mode=spec.mode,
        c_m=c_m if c_m is not None else spec.c_m,
    )


def laplacian_zero_bound(bundle: ConstantBundle) -> float:
    """Bound for C_m^2 ||Laplacian u||_L2 at derivative order zero."""
    b = bundle
    return 0.5 * (
        b.b_bar * (b.u_bar / b.c_m) ** b.m + b.c_m * b.a_bar * b.u_bar + b.c_m * b.f_bar
    )


def _log_half_ff(n: int) -> float:
    if n <= _LOG_SPACE_ORDER:
        return math.log(float(half_falling_factorial(n)))
    return math.lgamma(n - 0.5) - math.log(_TWO_SQRT_PI)


def envelope_bound(env: GevreyEnvelope, nu: MultiIndex, form: str) -> float:
    """Derivative envelope value for the index nu.

    'assumption-form': (scale/2) (|nu|!)^delta / (2R)^nu.
    'halved-form':     scale [1/2]_|nu| (|nu|!)^(delta-1) / R^nu.
    Evaluated in log-space beyond order 20 to dodge factorial overflow.
    """
    n = nu.order
    if form == "assumption-form":
        log_val = (
            math.log(env.scale / 2.0)
            + env.delta * math.lgamma(n + 1)
            - n * math.log(2.0)
            - env.radii.log_power(nu)
        )
    elif form == "halved-form":
        log_val = (
            math.log(env.scale)
            + _log_half_ff(n)
            + (env.delta - 1.0) * math.lgamma(n + 1)
            - env.radii.log_power(nu)
        )
    else:
        raise ValueError(f"unknown envelope form {form!r}")
    if n <= _LOG_SPACE_ORDER:
        # direct evaluation; identical branch for reproducibility
        fact = float(math.factorial(n))
        rp = env.radii.power(nu)
        if form == "assumption-form":
            return (env.scale / 2.0) * fact**env.delta / (2.0**n * rp)
        return env.scale * float(half_falling_factorial(n)) * fact ** (env.delta - 1.0) / rp
    return math.exp(log_val)


def derivative_bound(
    bundle: ConstantBundle, radii: Radii, nu: MultiIndex, delta: float, norm: str
) -> float:
    """Bound on a parametric derivative of the solution in the given norm.

    norm: 'V' (the scaled energy norm), 'H1' (plain H1_0 seminorm),
    'laplacian-L2' (the L2 norm of the Laplacian of the derivative),
    'H2' (equivalent-norm combination).
    """
    n = nu.order
    if norm in ("V", "H1", "laplacian-L2") and n < 1:
        raise ValueError("this norm form needs |nu| >= 1; order zero uses u_bar")
    b = bundle
    if n <= _LOG_SPACE_ORDER:
        fact = float(math.factorial(n))
        hf = float(half_falling_factorial(n))
        rp = radii.power(nu)
        if norm == "V":
            return b.c_u * b.rho ** (n - 1) * hf * fact ** (delta - 1.0) / rp
        if norm == "H1":
            return b.c_u * b.rho ** (n - 1) * fact**delta / (b.c_m * rp)
        if norm == "laplacian-L2":
            return 2.0 * b.c_delta * b.rho_tilde ** (n - 1) * hf * fact ** (delta - 1.0) / (
                b.c_m**2 * rp
            )
        if norm == "H2":
            pref = math.hypot(b.c_1 * b.c_u / b.c_m, 2.0 * b.c_delta / b.c_m**2)
            return pref * fact**delta * b.rho_tilde**n / rp
        raise ValueError(f"unknown norm {norm!r}")
    log_rp = radii.log_power(nu)
    if norm == "V":
        log_val = (
            math.log(b.c_u) + (n - 1) * math.log(b.rho) + _log_half_ff(n)
            + (delta - 1.0) * math.lgamma(n + 1) - log_rp
        )
    elif norm == "H1":
        log_val = (
            math.log(b.c_u) + (n - 1) * math.log(b.rho)
            + delta * math.lgamma(n + 1) - math.log(b.c_m) - log_rp
        )
    elif norm == "laplacian-L2":
        log_val = (
            math.log(2.0 * b.c_delta) + (n - 1) * math.log(b.rho_tilde)
            + _log_half_ff(n) + (delta - 1.0) * math.lgamma(n + 1)
            - 2.0 * math.log(b.c_m) - log_rp
        )
    elif norm == "H2":
        pref = math.hypot(b.c_1 * b.c_u / b.c_m, 2.0 * b.c_delta / b.c_m**2)
        log_val = (
            math.log(pref) + delta * math.lgamma(n + 1)
            + n * math.log(b.rho_tilde) - log_rp
        )
    else:
        raise ValueError(f"unknown norm {norm!r}")
    return math.exp(log_val)


# --- Sobolev embedding constants on the unit square --------------------------


def embedding_constant(
    p: int,
    method: str | float = "poincare-chain",
    mesh_n: int = 64,
    safety_factor: float = 1.05,
    max_iter: int = 400,
    stall_tol: float = 1e-6,
) -> float:
    """Constant C with ||u||_Lp <= C |u|_H1 for u in H1_0 of the unit square.

    'poincare-chain' covers p = 2 through the first Dirichlet eigenvalue
    2 pi^2. 'rayleigh-numeric' maximizes the discrete quotient over the P1
    space on an mesh_n x mesh_n grid by a projected ascent fixed point and
    inflates the result by ``safety_factor``. A float is an override.
    """
    if p < 2:
        raise ValueError("p must be >= 2")
    if isinstance(method, (int, float)):
        return float(method)
    if method == "poincare-chain":
        if p != 2:
            raise ValueError("the eigenvalue chain certifies p = 2 only")
        return 1.0 / (math.sqrt(2.0) * math.pi)
    if method != "rayleigh-numeric":
        raise ValueError(f"unknown embedding method {method!r}")
    return safety_factor * _rayleigh_embedding(p, mesh_n, max_iter, stall_tol)


def _rayleigh_embedding(p: int, mesh_n: int, max_iter: int, stall_tol: float) -> float:
    from . import fem

    mesh = fem.build_mesh(mesh_n)
    quad = fem.tri_quad_rule(4)
    unit = _UnitCoeff()
    K = fem.assemble_stiffness(mesh, unit, None, 1.0, quad)
    factor = fem.CholeskyFactor(K)

    v = np.sin(np.pi * mesh.nodes[:, 0]) * np.sin(np.pi * mesh.nodes[:, 1])
    u = fem.FemFunction(mesh, v)
    x = u.interior()
    x /= math.sqrt(K.energy(x))

    quotient = 0.0
    for _ in range(max_iter):
        f = fem.FemFunction.from_interior(mesh, x)
        uq = f.at_quad_points(quad)
        lp = fem.fem_functionals(f, "lp-norm", p=p, quad=quad)
        # ascent direction: the Lp subgradient integrated against the basis
        g = fem._scatter_vector(mesh, np.abs(uq) ** (p - 1) * np.sign(uq), quad, 1.0)
        x_new = factor.solve(g)
        x_new /= math.sqrt(K.energy(x_new))
        q_new = lp  # |x|_H1 = 1 by normalization
        if quotient > 0 and abs(q_new - quotient) <= stall_tol * quotient:
            return q_new
        quotient = q_new
        x = x_new
    raise RuntimeError(
        f"Rayleigh ascent for p={p} did not stabilize within {max_iter} iterations"
    )


class _UnitCoeff:
    def evaluate_batch(self, xs, y):
        return np.ones(len(xs))


@lru_cache(maxsize=None)
def _fixture_constants() -> dict:
    try:
        path = resources.files("gevreyrd").joinpath("data/embedding_constants.json")
        return json.loads(path.read_text())
    except (FileNotFoundError, ModuleNotFoundError):
        return {}


@lru_cache(maxsize=None)
def default_embedding_constant(p: int, safety_factor: float = 1.05) -> float:
    """Default L^p embedding constant: recorded 64-mesh fixture value times
    the safety factor, computed on demand when no fixture entry exists."""
    if p == 2:
        return embedding_constant(2, "poincare-chain")
    fx = _fixture_constants()
    raw = fx.get(str(p))
    if raw is None:
        raw = _rayleigh_embedding(p, 64, 400, 1e-6)
    return safety_factor * raw
