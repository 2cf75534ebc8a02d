"""Exact falling-factorial and multi-index calculus.

Everything here is computed in exact rational arithmetic
(``fractions.Fraction``) so that the convolution identities and the
two-sided factorial estimates can be checked with zero tolerance.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, Mapping

# Exact rational carrier. Always reduced, denominator > 0 by construction.
ExactRational = Fraction

_IDENTITY_KINDS = (
    "shifted-convolution",
    "interior-convolution",
    "full-convolution",
    "chu-vandermonde",
    "est-1",
    "est-7",
    "est-3",
    "est-6",
    "est-5",
    "sandwich",
)


def identity_kinds() -> tuple[str, ...]:
    """The closed set of identity/estimate tags understood by identity_sum."""
    return _IDENTITY_KINDS


def falling_factorial(q: Fraction | int, n: int) -> Fraction:
    """(q)_n = q (q-1) ... (q-n+1), with (q)_0 = 1. Exact."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    q = Fraction(q)
    out = Fraction(1)
    for i in range(n):
        out *= q - i
    return out


@lru_cache(maxsize=None)
def half_falling_factorial(n: int) -> Fraction:
    """|(1/2)_n|, via the recurrence |(1/2)_{n+1}| = |(1/2)_n| * |1/2 - n|.

    Memoized; concurrent reads are safe and always yield the same value.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return Fraction(1)
    return half_falling_factorial(n - 1) * abs(Fraction(1, 2) - (n - 1))


def factorial_sandwich_holds(n: int) -> bool:
    """Exact check of [1/2]_n <= n! <= 2 * 2^n * [1/2]_n."""
    h = half_falling_factorial(n)
    f = Fraction(math.factorial(n))
    return h <= f <= 2 * 2**n * h


class MultiIndex:
    """Finitely supported exponent vector, stored sparsely.

    Dimension indices are 1-based; zero exponents are never stored, so an
    index supported on dimensions {3, 47} costs two entries regardless of
    the ambient parameter count. Instances are immutable and hashable.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries: Mapping[int, int] | Iterable[tuple[int, int]] = ()):
        items = entries.items() if isinstance(entries, Mapping) else entries
        cleaned = []
        for j, e in items:
            if j < 1:
                raise ValueError("dimension indices are 1-based")
            if e < 0:
                raise ValueError("exponents must be nonnegative")
            if e > 0:
                cleaned.append((int(j), int(e)))
        cleaned.sort()
        dims = [j for j, _ in cleaned]
        if len(set(dims)) != len(dims):
            raise ValueError("duplicate dimension index")
        self._entries = tuple(cleaned)

    @classmethod
    def from_tuple(cls, exps: Iterable[int]) -> "MultiIndex":
        """Dense constructor: position k (0-based) becomes dimension k+1."""
        return cls((j + 1, e) for j, e in enumerate(exps))

    @classmethod
    def unit(cls, j: int) -> "MultiIndex":
        return cls(((j, 1),))

    @property
    def entries(self) -> tuple[tuple[int, int], ...]:
        return self._entries

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(j for j, _ in self._entries)

    @property
    def order(self) -> int:
        """|nu| = sum of exponents."""
        return sum(e for _, e in self._entries)

    def get(self, j: int) -> int:
        for jj, e in self._entries:
            if jj == j:
                return e
        return 0

    def is_zero(self) -> bool:
        return not self._entries

    def factorial(self) -> int:
        """nu! = prod_j nu_j!."""
        out = 1
        for _, e in self._entries:
            out *= math.factorial(e)
        return out

    def __add__(self, other: "MultiIndex") -> "MultiIndex":
        d = dict(self._entries)
        for j, e in other._entries:
            d[j] = d.get(j, 0) + e
        return MultiIndex(d)

    def __sub__(self, other: "MultiIndex") -> "MultiIndex":
        d = dict(self._entries)
        for j, e in other._entries:
            d[j] = d.get(j, 0) - e
            if d[j] < 0:
                raise ValueError("subtraction would give a negative exponent")
        return MultiIndex(d)

    def __le__(self, other: "MultiIndex") -> bool:
        return all(e <= other.get(j) for j, e in self._entries)

    def __lt__(self, other: "MultiIndex") -> bool:
        return self <= other and self._entries != other._entries

    def __eq__(self, other: object) -> bool:
        return isinstance(other, MultiIndex) and self._entries == other._entries

    def __hash__(self) -> int:
        return hash(self._entries)

    def __repr__(self) -> str:
        inner = ", ".join(f"{j}:{e}" for j, e in self._entries)
        return f"MultiIndex({{{inner}}})"


def multi_binomial(nu: MultiIndex, eta: MultiIndex) -> int:
    """prod_j C(nu_j, eta_j); zero when eta is not componentwise <= nu."""
    if not eta <= nu:
        return 0
    out = 1
    for j, e in eta.entries:
        out *= math.comb(nu.get(j), e)
    return out


def enumerate_lower(
    nu: MultiIndex, strict: bool = False, exclude_zero: bool = False
) -> list[MultiIndex]:
    """All eta <= nu (or < nu when strict), in lexicographic order.

    Order is lexicographic on the exponent tuple read along the support of
    nu sorted by dimension, so fixtures are deterministic.
    """
    dims = nu.support
    bounds = [nu.get(j) for j in dims]

    def rec(k: int, prefix: list[int]) -> Iterator[list[int]]:
        if k == len(dims):
            yield list(prefix)
            return
        for e in range(bounds[k] + 1):
            prefix.append(e)
            yield from rec(k + 1, prefix)
            prefix.pop()

    out = []
    for exps in rec(0, []):
        eta = MultiIndex(zip(dims, exps))
        if strict and eta == nu:
            continue
        if exclude_zero and eta.is_zero():
            continue
        out.append(eta)
    return out


def _require_multiindex(arg, kind: str) -> MultiIndex:
    if not isinstance(arg, MultiIndex):
        raise TypeError(f"kind {kind!r} needs a MultiIndex argument")
    return arg


def _require_int(arg, kind: str) -> int:
    if isinstance(arg, MultiIndex):
        raise TypeError(f"kind {kind!r} needs a scalar integer argument")
    return int(arg)


def identity_sum(
    kind: str,
    arg,
    e: MultiIndex | None = None,
    r: int | None = None,
    delta: float = 1.0,
) -> tuple:
    """Evaluate both sides of one of the convolution identities/estimates.

    Returns ``(lhs, rhs)``. For the identity kinds (shifted/interior/full
    convolution, chu-vandermonde) equality lhs == rhs is the claim; for the
    estimate kinds (est-*, sandwich) the claim is lhs <= rhs. All kinds
    except est-1 are exact rationals; est-1 involves the real exponent
    delta - 1 and returns floats.

    Scalar kinds take an integer ``arg`` (n, or k >= 2 for the interior and
    full convolutions; smaller k is rejected here, the extended-range
    inequality readings live in ``convolution_bound``). Multi-index kinds
    take a MultiIndex; est-6 and est-5 additionally need the unit shift
    ``e``, chu-vandermonde needs the slice order ``r``.
    """
    if kind not in _IDENTITY_KINDS:
        raise ValueError(f"unknown identity kind {kind!r}")
    hf = half_falling_factorial

    if kind == "shifted-convolution":
        n = _require_int(arg, kind)
        if n < 1:
            raise ValueError("shifted-convolution needs n >= 1")
        lhs = sum(
            (math.comb(n, i) * hf(i) * hf(n + 1 - i) for i in range(1, n + 1)),
            Fraction(0),
        )
        return lhs, hf(n + 1)

    if kind in ("interior-convolution", "full-convolution"):
        k = _require_int(arg, kind)
        if k < 2:
            raise ValueError(f"{kind} identity holds for k >= 2 only")
        top = k - 1 if kind == "interior-convolution" else k
        factor = 2 if kind == "interior-convolution" else 3
        lhs = sum(
            (math.comb(k, i) * hf(i) * hf(k - i) for i in range(1, top + 1)),
            Fraction(0),
        )
        return lhs, factor * hf(k)

    if kind == "sandwich":
        n = _require_int(arg, kind)
        # Upper half of the two-sided estimate; the lower half is part of
        # factorial_sandwich_holds.
        return Fraction(math.factorial(n)), 2 * 2**n * hf(n)

    if kind == "chu-vandermonde":
        nu = _require_multiindex(arg, kind)
        if r is None:
            raise ValueError("chu-vandermonde needs the slice order r")
        lhs = sum(
            multi_binomial(nu, eta) for eta in enumerate_lower(nu) if eta.order == r
        )
        return Fraction(lhs), Fraction(math.comb(nu.order, r))

    if kind == "est-1":
        nu = _require_multiindex(arg, kind)
        ex = delta - 1.0
        lhs = max(
            float(math.factorial(nu.order - eta.order)) ** ex
            * float(math.factorial(eta.order)) ** ex
            for eta in enumerate_lower(nu)
        )
        return lhs, float(math.factorial(nu.order)) ** ex

    if kind in ("est-7", "est-3"):
        nu = _require_multiindex(arg, kind)
        strict = kind == "est-7"
        lhs = Fraction(0)
        for eta in enumerate_lower(nu, strict=strict, exclude_zero=True):
            lhs += multi_binomial(nu, eta) * hf(eta.order) * hf(nu.order - eta.order)
        factor = 2 if kind == "est-7" else 3
        return lhs, factor * hf(nu.order)

    if kind == "est-6":
        nu = _require_multiindex(arg, kind)
        if e is None or e.order != 1:
            raise ValueError("est-6 needs a unit multi-index e")
        lhs = Fraction(0)
        for eta in enumerate_lower(nu, exclude_zero=True):
            lhs += (
                multi_binomial(nu, eta)
                * hf((nu + e - eta).order)
                * hf(eta.order)
            )
        return lhs, hf(nu.order + 1)

    # est-5
    nu = _require_multiindex(arg, kind)
    if e is None or e.order != 1:
        raise ValueError("est-5 needs a unit multi-index e")
    lhs = Fraction(0)
    for eta in enumerate_lower(nu, exclude_zero=True):
        for ell in enumerate_lower(eta, exclude_zero=True):
            lhs += (
                multi_binomial(nu, eta)
                * multi_binomial(eta, ell)
                * hf((eta - ell).order)
                * hf(ell.order)
                * hf((nu + e - eta).order)
            )
    return lhs, 3 * hf(nu.order + 1)


def convolution_bound(n: int, variant: int) -> tuple[Fraction, Fraction]:
    """Extended-range inequality readings of the three convolutions.

    Valid for every n >= 0 with the empty-sum-equals-zero convention.
    The middle variant is stated in the source with an ambiguous binomial
    row index; we test the reading where it coincides with the summation
    bound (row = n), which is also the form used downstream.
    """
    hf = half_falling_factorial
    if variant == 1:
        lhs = sum(
            (math.comb(n, i) * hf(i) * hf(n + 1 - i) for i in range(1, n + 1)),
            Fraction(0),
        )
        return lhs, hf(n + 1)
    if variant == 2:
        lhs = sum(
            (math.comb(n, i) * hf(i) * hf(n - i) for i in range(1, n)),
            Fraction(0),
        )
        return lhs, 2 * hf(n)
    if variant == 3:
        lhs = sum(
            (math.comb(n, i) * hf(i) * hf(n - i) for i in range(1, n + 1)),
            Fraction(0),
        )
        return lhs, 3 * hf(n)
    raise ValueError("variant must be 1, 2 or 3")
