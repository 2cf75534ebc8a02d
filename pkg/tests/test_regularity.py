import math
import random
from fractions import Fraction

import pytest

from gevreyrd.combinatorics import MultiIndex, half_falling_factorial
from gevreyrd.regularity import (
    AssumptionMode,
    ConstantBundle,
    GevreyEnvelope,
    Radii,
    admissible,
    bundle_from_scalars,
    default_embedding_constant,
    derivative_bound,
    derive_gamma,
    embedding_constant,
    envelope_bound,
    laplacian_zero_bound,
)

EXACT_C2 = 1.0 / (math.sqrt(2.0) * math.pi)


class TestAdmissible:
    @pytest.mark.parametrize(
        "d,m,expect",
        [
            (1, 99, True), (2, 3, True), (2, 50, True),
            (3, 5, True), (3, 6, False),
            (4, 3, True), (4, 4, False),
            (5, 2, True), (5, 3, False),
            (6, 2, True), (6, 3, False),
            (7, 1, True), (7, 2, False), (11, 1, True),
        ],
    )
    def test_table(self, d, m, expect):
        assert admissible(d, m) is expect

    def test_invalid(self):
        with pytest.raises(ValueError):
            admissible(0, 1)


class TestEmbedding:
    def test_poincare_chain_p2(self):
        # first Dirichlet eigenvalue of the unit square is 2 pi^2
        assert embedding_constant(2, "poincare-chain") == pytest.approx(0.225079, abs=1e-6)

    def test_override_passthrough(self):
        assert embedding_constant(4, 1.0) == 1.0

    def test_rayleigh_p2_converges_to_eigenvalue(self):
        for n in (32, 64, 128):
            val = embedding_constant(2, "rayleigh-numeric", mesh_n=n, safety_factor=1.0)
            assert abs(val - EXACT_C2) <= 0.03 * EXACT_C2
        # discrete quotient never exceeds the continuous supremum
        assert embedding_constant(2, "rayleigh-numeric", mesh_n=64, safety_factor=1.0) <= EXACT_C2

    def test_rayleigh_p4_mesh_consistency(self):
        v64 = embedding_constant(4, "rayleigh-numeric", mesh_n=64, safety_factor=1.0)
        v128 = embedding_constant(4, "rayleigh-numeric", mesh_n=128, safety_factor=1.0)
        assert 0.0 < v64 < 1.0
        assert abs(v64 - v128) <= 0.02 * v128

    def test_fixture_matches_live_computation(self):
        fx = default_embedding_constant(4, safety_factor=1.0)
        live = embedding_constant(4, "rayleigh-numeric", mesh_n=64, safety_factor=1.0)
        assert fx == pytest.approx(live, rel=1e-6)

    def test_chain_limits(self):
        with pytest.raises(ValueError):
            embedding_constant(4, "poincare-chain")
        with pytest.raises(ValueError):
            embedding_constant(1)


def _mode_pos():
    return AssumptionMode("positive-b")


class TestConstantChain:
    def test_hand_derived_fixture(self):
        # a_bar=2, b_bar=1, f_bar=1, m=3, nonnegative reaction:
        # C_A = 1, u_bar = 1, C_u = 1*(2 + 1 + 1) = 4,
        # rho = 2*2 + 1*(3 + (3*4)^2 * 4) + 1 = 584
        b = bundle_from_scalars(2.0, 1.0, 1.0, 3, _mode_pos(), c_m=1.0, c_1=EXACT_C2,
                                c_2m_minus_1=0.35)
        assert b.c_A == 1.0
        assert b.u_bar == 1.0
        assert b.c_u == 4.0
        assert b.rho == 584.0
        assert b.rho_tilde == 584.0  # max(4 a_bar, rho)

    def test_general_b_linear_case(self):
        # m=1, gamma=0.5, f_bar=1 -> u_bar = f_bar / (1 - gamma) = 2
        b = bundle_from_scalars(2.0, 1.0, 1.0, 1, AssumptionMode("general-b"),
                                c_m=1.0, c_1=EXACT_C2, c_2m_minus_1=0.3)
        assert b.gamma == pytest.approx(0.5)
        assert b.u_bar == pytest.approx(2.0)
        assert b.c_A == pytest.approx(0.5)

    def test_derived_gamma(self):
        assert derive_gamma(1.0 / 3.0, 3, 1.0) == pytest.approx(0.5)
        with pytest.raises(ValueError):
            derive_gamma(3.0, 3, 1.0)  # gamma >= 1

    def test_mode_consistency_enforced(self):
        good = AssumptionMode("general-b", gamma=0.5)
        bundle_from_scalars(2.0, 1.0 / 3.0, 1.0, 3, good, c_m=1.0, c_1=0.2,
                            c_2m_minus_1=0.3)
        bad = AssumptionMode("general-b", gamma=0.4)
        with pytest.raises(ValueError, match="gamma"):
            bundle_from_scalars(2.0, 1.0 / 3.0, 1.0, 3, bad, c_m=1.0, c_1=0.2,
                                c_2m_minus_1=0.3)

    def test_positive_b_needs_odd_m(self):
        with pytest.raises(ValueError, match="odd"):
            bundle_from_scalars(2.0, 1.0, 1.0, 2, _mode_pos(), c_m=1.0, c_1=0.2,
                                c_2m_minus_1=0.3)

    def test_rho_and_rho_tilde_invariants(self):
        rng = random.Random(11)
        for _ in range(100):
            a = rng.uniform(2.0, 8.0)
            f = rng.uniform(0.1, 4.0)
            m = rng.choice([1, 3, 5])
            bb = rng.uniform(0.01, 1.8) / (m * f ** (m - 1))
            mode = rng.choice([_mode_pos(), AssumptionMode("general-b")])
            if mode.tag == "positive-b":
                pass
            else:
                bb = min(bb, 1.9 / (m * f ** (m - 1)))
            b = bundle_from_scalars(a, bb, f, m, mode, c_m=1.0, c_1=0.2, c_2m_minus_1=0.3)
            assert b.rho >= 2.0
            assert b.rho_tilde >= max(4.0 * a, b.rho) - 1e-12

    def test_laplacian_zero_bound(self):
        b = bundle_from_scalars(2.0, 1.0, 1.0, 3, _mode_pos(), c_m=2.0, c_1=0.2,
                                c_2m_minus_1=0.3)
        expected = 0.5 * (1.0 * (1.0 / 2.0) ** 3 + 2.0 * 2.0 * 1.0 + 2.0 * 1.0)
        assert laplacian_zero_bound(b) == pytest.approx(expected)


class TestEnvelopeBound:
    def setup_method(self):
        self.env = GevreyEnvelope(scale=2.0, delta=1.0, radii=Radii(rule=lambda j: 1.0))

    def test_zero_index_assumption_form(self):
        assert envelope_bound(self.env, MultiIndex(), "assumption-form") == pytest.approx(1.0)

    def test_unit_index_halved_form(self):
        env = GevreyEnvelope(scale=3.0, delta=1.5, radii=Radii(rule=lambda j: 2.0 * j))
        # scale * [1/2]_1 / R_j = 3 / (2 * 2 j)
        assert envelope_bound(env, MultiIndex.unit(2), "halved-form") == pytest.approx(3 / 8)

    def test_third_order_halved(self):
        assert envelope_bound(self.env, MultiIndex.from_tuple((3,)), "halved-form") == pytest.approx(0.75)

    def test_assumption_implies_halved(self):
        # halved(nu) = assumption(nu) * 2^(n+1) [1/2]_n / n!, and the factor
        # is >= 1 by the two-sided factorial estimate; exact up to order 20.
        for n in range(0, 21):
            factor = Fraction(2) ** (n + 1) * half_falling_factorial(n) / math.factorial(n)
            assert factor >= 1
            nu = MultiIndex.from_tuple((n,)) if n else MultiIndex()
            a = envelope_bound(self.env, nu, "assumption-form")
            h = envelope_bound(self.env, nu, "halved-form")
            assert h == pytest.approx(a * float(factor), rel=1e-12)
            assert float(factor) * 2 >= 1.0  # the ratio 2^n [1/2]_n / n! is >= 1/2

    def test_log_space_switchover_consistent(self):
        env = GevreyEnvelope(scale=1.5, delta=2.0, radii=Radii(rule=lambda j: 0.7))
        for n in (19, 20, 21, 25):
            nu = MultiIndex.from_tuple((n,))
            direct = (
                env.scale * float(half_falling_factorial(n))
                * math.factorial(n) ** (env.delta - 1.0) / 0.7**n
            )
            assert envelope_bound(env, nu, "halved-form") == pytest.approx(direct, rel=1e-10)

    def test_unknown_form(self):
        with pytest.raises(ValueError):
            envelope_bound(self.env, MultiIndex(), "bogus")


class TestDerivativeBound:
    def setup_method(self):
        self.bundle = bundle_from_scalars(2.0, 1.0, 1.0, 3, _mode_pos(), c_m=0.5,
                                          c_1=EXACT_C2, c_2m_minus_1=0.35)
        self.radii = Radii(rule=lambda j: 1.0 + j)

    def test_unit_h1(self):
        b = self.bundle
        got = derivative_bound(b, self.radii, MultiIndex.unit(3), 1.0, "H1")
        assert got == pytest.approx(b.c_u / (b.c_m * 4.0))

    def test_second_order_v(self):
        b = self.bundle
        got = derivative_bound(b, self.radii, MultiIndex.from_tuple((2,)), 1.0, "V")
        assert got == pytest.approx(b.c_u * b.rho * 0.25 / 4.0)

    def test_unit_laplacian(self):
        b = self.bundle
        got = derivative_bound(b, self.radii, MultiIndex.unit(1), 1.0, "laplacian-L2")
        assert got == pytest.approx(b.c_delta / (b.c_m**2 * 2.0))

    def test_h2_form(self):
        b = self.bundle
        nu = MultiIndex.from_tuple((1, 1))
        pref = math.hypot(b.c_1 * b.c_u / b.c_m, 2.0 * b.c_delta / b.c_m**2)
        expected = pref * 2.0**2.0 * b.rho_tilde**2 / (2.0 * 3.0)
        assert derivative_bound(b, self.radii, nu, 2.0, "H2") == pytest.approx(expected)

    def test_zero_order_rejected(self):
        for norm in ("V", "H1", "laplacian-L2"):
            with pytest.raises(ValueError):
                derivative_bound(self.bundle, self.radii, MultiIndex(), 1.0, norm)

    def test_monotone_in_order_for_small_radii(self):
        rng = random.Random(7)
        radii = Radii(rule=lambda j: 0.25 + 0.05 * (j % 3))
        for _ in range(100):
            a = rng.uniform(2.0, 6.0)
            f = rng.uniform(0.5, 2.0)
            bundle = bundle_from_scalars(a, rng.uniform(0.05, 1.0), f, 3, _mode_pos(),
                                         c_m=1.0, c_1=0.2, c_2m_minus_1=0.3)
            delta = rng.choice([1.0, 1.5, 2.0])
            nu = MultiIndex({rng.randint(1, 4): rng.randint(1, 3)})
            e = MultiIndex.unit(rng.randint(1, 4))
            for norm in ("V", "H1"):
                lo = derivative_bound(bundle, radii, nu, delta, norm)
                hi = derivative_bound(bundle, radii, nu + e, delta, norm)
                assert hi >= lo * (1 - 1e-12)

    def test_log_space_large_order(self):
        nu = MultiIndex.from_tuple((12, 13))  # order 25 goes through log-space
        got = derivative_bound(self.bundle, Radii(rule=lambda j: 1.0), nu, 1.0, "V")
        b = self.bundle
        direct = b.c_u * b.rho**24 * float(half_falling_factorial(25))
        assert got == pytest.approx(direct, rel=1e-10)


class TestRadii:
    def test_explicit_and_rule(self):
        r = Radii(values=[1.0, 2.0, 3.0])
        assert r.radius(2) == 2.0
        with pytest.raises(IndexError):
            r.radius(4)
        rr = Radii(rule=lambda j: j**2)
        assert rr.radius(5) == 25.0
        assert rr.power(MultiIndex({2: 2})) == pytest.approx(16.0)

    def test_positivity_enforced(self):
        with pytest.raises(ValueError):
            Radii(rule=lambda j: -1.0).radius(1)

    def test_bundle_invariant_violations(self):
        with pytest.raises(ValueError):
            ConstantBundle(u_bar=1, c_A=1.5, c_u=1, rho=2, c_delta=1, rho_tilde=8,
                           c_m=1, c_1=1, c_2m_minus_1=1, a_bar=2, b_bar=1, f_bar=1, m=3)
        with pytest.raises(ValueError):
            ConstantBundle(u_bar=1, c_A=1.0, c_u=1, rho=2, c_delta=1, rho_tilde=2,
                           c_m=1, c_1=1, c_2m_minus_1=1, a_bar=2, b_bar=1, f_bar=1, m=3)
