import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from gaplab.galerkin import (MultiIndexBasis, assemble_galerkin, beta_moment,
                             conditional_moment_eigenvalue, galerkin_eigensystem,
                             galerkin_gap, k_operator_check, pair_average_action,
                             quadratic_eigen_identity, rho_pair_action,
                             rho_trig_moment, sector_polynomial, simplex_moment,
                             sphere_moment, trig_moment, two_site_fourier_gap)
from gaplab.models import RhoSpec, build_graph

COSINE_RHO = RhoSpec(coefficients=[1.0, 0.5], exact_tail_zero=True, name="cosine")


def _wallis_oracle(p, q):
    """Independent recursion for the uniform angle moments."""
    if p % 2 or q % 2:
        return 0.0
    if p == 0 and q == 0:
        return 1.0
    if p >= 2:
        return _wallis_oracle(p - 2, q) * (p - 1) / (p + q)
    return _wallis_oracle(p, q - 2) * (q - 1) / (p + q)


class TestTrigMoments:
    def test_examples(self):
        assert trig_moment(2, 0) == Fraction(1, 2)
        assert trig_moment(2, 2) == Fraction(1, 8)
        assert trig_moment(1, 0) == 0

    @pytest.mark.parametrize("p,q", list(itertools.product(range(0, 7), repeat=2)))
    def test_against_wallis_recursion(self, p, q):
        assert float(trig_moment(p, q)) == pytest.approx(_wallis_oracle(p, q), abs=1e-14)

    def test_rho_reduces_to_uniform(self):
        rho = RhoSpec.uniform()
        for p, q in [(2, 0), (4, 2), (3, 1), (0, 6)]:
            assert rho_trig_moment(rho, p, q) == pytest.approx(float(trig_moment(p, q)),
                                                               abs=1e-14)

    def test_rho_cosine_against_quadrature(self):
        theta = np.linspace(-math.pi, math.pi, 20001)
        dens = (1 + np.cos(theta)) / (2 * math.pi)
        for p, q in [(2, 0), (1, 0), (2, 2), (3, 1)]:
            oracle = np.trapezoid(np.cos(theta) ** p * np.sin(theta) ** q * dens, theta)
            assert rho_trig_moment(COSINE_RHO, p, q) == pytest.approx(oracle, abs=1e-8)

    def test_order_error(self):
        rho = RhoSpec(coefficients=[1.0, 0.5])
        with pytest.raises(ValueError, match="order"):
            rho_trig_moment(rho, 3, 0)


class TestSphereMoments:
    def test_examples(self):
        assert sphere_moment((2, 0, 0), 3) == pytest.approx(1 / 3)
        assert sphere_moment((4,) , 3) == pytest.approx(1 / 5)
        assert sphere_moment((1, 1), 5) == 0.0

    def test_scaling_in_total(self):
        assert sphere_moment((2, 2), 4, omega=3) == pytest.approx(
            9 * sphere_moment((2, 2), 4))

    @pytest.mark.slow
    def test_monte_carlo_cross_check(self):
        rng = np.random.default_rng(20240811)
        n = 1_000_000
        for _ in range(20):
            N = int(rng.integers(2, 5))
            k = rng.integers(0, 3, size=N) * 2  # even exponents exercise nonzero values
            x = rng.standard_normal((n, N))
            x /= np.linalg.norm(x, axis=1, keepdims=True)
            vals = np.prod(x ** k[None, :], axis=1)
            mc, se = vals.mean(), vals.std() / math.sqrt(n)
            expect = sphere_moment(tuple(int(v) for v in k), N)
            assert abs(mc - expect) < 4 * se + 1e-12


class TestSimplexMoments:
    def test_examples(self):
        assert simplex_moment((1, 0, 0), 3, 1) == pytest.approx(1 / 3)
        assert simplex_moment((2, 0, 0), 3, 1) == pytest.approx(1 / 6)
        assert simplex_moment((2, 0, 0), 3, 1, omega=2) == pytest.approx(4 / 6)

    @pytest.mark.slow
    def test_monte_carlo_cross_check(self):
        rng = np.random.default_rng(77)
        n = 1_000_000
        for _ in range(20):
            N = int(rng.integers(2, 5))
            gamma = float(rng.choice([0.5, 1.0, 2.0]))
            k = rng.integers(0, 3, size=N)
            x = rng.dirichlet([gamma] * N, size=n)
            vals = np.prod(x ** k[None, :], axis=1)
            mc, se = vals.mean(), vals.std() / math.sqrt(n)
            expect = simplex_moment(tuple(int(v) for v in k), N, Fraction(gamma))
            assert abs(mc - expect) < 4 * se + 1e-12


class TestPairActions:
    def test_rotation_quadratic(self):
        act = pair_average_action("kac-uniform", 2, 0)
        assert act == {(2, 0): Fraction(1, 2), (0, 2): Fraction(1, 2)}

    def test_rotation_kills_odd(self):
        assert pair_average_action("kac-uniform", 1, 0) == {}
        assert pair_average_action("kac-uniform", 1, 1) == {}

    def test_redistribution_linear(self):
        act = pair_average_action("gamma-exchange-simple-average", 1, 0, gamma=1)
        assert act == {(1, 0): Fraction(1, 2), (0, 1): Fraction(1, 2)}

    def test_redistribution_quadratic(self):
        act = pair_average_action("gamma-exchange-simple-average", 2, 0, gamma=1)
        # E[beta^2] (x + y)^2 at uniform beta
        assert act == {(2, 0): Fraction(1, 3), (1, 1): Fraction(2, 3),
                       (0, 2): Fraction(1, 3)}

    def test_beta_moment(self):
        assert beta_moment(2, 0, 1) == Fraction(1, 3)
        assert beta_moment(1, 1, Fraction(1, 2)) == Fraction(1, 8)

    def test_rho_action_uniform_consistency(self):
        rho = RhoSpec.uniform()
        for a, b in [(2, 0), (4, 0), (2, 2), (1, 1), (3, 1)]:
            got = rho_pair_action(rho, a, b)
            expect = {k: float(v) for k, v in
                      pair_average_action("kac-uniform", a, b).items()}
            assert set(got) == set(expect)
            for k in expect:
                assert got[k] == pytest.approx(expect[k], abs=1e-12)

    def test_rho_action_cosine_against_quadrature(self):
        # direct quadrature of the symmetrized rotation average of x^2
        theta = np.linspace(-math.pi, math.pi, 40001)
        dens = (1 + np.cos(theta)) / (2 * math.pi)
        c2 = np.trapezoid(np.cos(theta) ** 2 * dens, theta)
        s2 = np.trapezoid(np.sin(theta) ** 2 * dens, theta)
        cross = 0.0  # odd under the symmetrization
        act = rho_pair_action(COSINE_RHO, 2, 0)
        assert act[(2, 0)] == pytest.approx(c2, abs=1e-8)
        assert act[(0, 2)] == pytest.approx(s2, abs=1e-8)
        assert act.get((1, 1), 0.0) == pytest.approx(cross, abs=1e-8)


class TestBasis:
    def test_full_count(self):
        b = MultiIndexBasis.build(3, 4)
        assert len(b) == math.comb(3 + 4, 4)

    def test_even_filter(self):
        b = MultiIndexBasis.build(3, 4, even_only=True)
        assert all(sum(k) % 2 == 0 for k in b.elements)

    def test_symmetric_orbits(self):
        b = MultiIndexBasis.build(3, 2, mode="symmetric")
        assert (2, 0, 0) in b.elements and (1, 1, 0) in b.elements
        assert set(b.monomials_of((1, 1, 0))) == {(1, 1, 0), (1, 0, 1), (0, 1, 1)}


class TestKacGalerkin:
    @pytest.mark.parametrize("N", [3, 4, 5, 6])
    def test_exact_values(self, N):
        pair = assemble_galerkin("kac-uniform", build_graph("complete", N=N), degree=4)
        assert galerkin_gap(pair) == pytest.approx((N + 2) / (4 * N), abs=1e-9)

    def test_monotone_in_degree(self):
        graph = build_graph("complete", N=3)
        gaps = [galerkin_gap(assemble_galerkin("kac-uniform", graph, degree=D))
                for D in (2, 4, 6)]
        assert gaps[0] >= gaps[1] - 1e-12
        assert gaps[1] >= gaps[2] - 1e-12
        assert gaps[1] == pytest.approx(5 / 12, abs=1e-9)
        assert gaps[2] == pytest.approx(5 / 12, abs=1e-9)

    def test_symmetric_mode_agrees(self):
        graph = build_graph("complete", N=4)
        full = galerkin_gap(assemble_galerkin("kac-uniform", graph, degree=4))
        sym = galerkin_gap(assemble_galerkin("kac-uniform", graph, degree=4,
                                             mode="symmetric"))
        assert sym == pytest.approx(full, abs=1e-9)

    def test_symmetric_mode_needs_complete(self):
        with pytest.raises(ValueError, match="complete"):
            assemble_galerkin("kac-uniform", build_graph("lattice", d=1, N=3),
                              degree=4, mode="symmetric")

    def test_sector_closure(self):
        # rotation averaging is degree-homogeneous: the image of a pair
        # monomial carries exactly the original total degree
        for a, b in itertools.product(range(5), repeat=2):
            for (p, q) in pair_average_action("kac-uniform", a, b):
                assert p + q == a + b

    def test_constant_in_null_space(self):
        pair = assemble_galerkin("kac-uniform", build_graph("complete", N=3), degree=4)
        i0 = pair.basis.elements.index((0, 0, 0))
        assert np.abs(pair.A[:, i0]).max() < 1e-12

    def test_eigenfunction_callable(self):
        pair = assemble_galerkin("kac-uniform", build_graph("complete", N=3), degree=4)
        rep = galerkin_eigensystem(pair)
        f = sector_polynomial(rep)
        x = np.array([0.3, -0.5, math.sqrt(1 - 0.09 - 0.25)])
        assert np.isfinite(f(x))

    def test_lattice_sector_gap_upper_bounds_complete(self):
        # fewer edges, unit scaling: local dynamics on 1d chains is slower
        lat = build_graph("lattice", d=1, N=4)
        comp = build_graph("complete", N=4)
        g_lat = galerkin_gap(assemble_galerkin("kac-uniform", lat, degree=2))
        g_comp = galerkin_gap(assemble_galerkin("kac-uniform", comp, degree=2))
        assert g_lat > 0
        assert g_comp > 0


class TestGammaGalerkin:
    @pytest.mark.parametrize("gamma", [Fraction(1, 2), Fraction(1), Fraction(2)])
    @pytest.mark.parametrize("N", [3, 4, 5])
    def test_exact_values(self, gamma, N):
        pair = assemble_galerkin("gamma", build_graph("complete", N=N),
                                 degree=2, gamma=gamma)
        expect = float((gamma * N + 1) / (N * (2 * gamma + 1)))
        assert galerkin_gap(pair) == pytest.approx(expect, abs=1e-9)


class TestConditionalOperator:
    def test_unit_shape_spectrum(self):
        rep = k_operator_check(Fraction(1), degree=6)
        expect = [Fraction(-1) ** n / (n + 1) for n in range(7)]
        assert list(rep.eigenvalues) == expect
        assert rep.max_residual == 0.0
        assert rep.triangular_residual == 0.0

    @pytest.mark.parametrize("gamma", [Fraction(1, 2), Fraction(1), Fraction(2),
                                       Fraction(5)])
    def test_mu_extremes(self, gamma):
        rep = k_operator_check(gamma, degree=6)
        assert rep.mu1 == Fraction(-1, 2)
        assert rep.mu2 == (1 + gamma) / (2 * (1 + 2 * gamma))
        assert rep.linear_eigen_residual == 0.0
        assert rep.min_formula_value == (1 + 3 * gamma) / (3 * (1 + 2 * gamma))

    def test_closed_form_helper(self):
        assert conditional_moment_eigenvalue(1, Fraction(3)) == Fraction(-1, 2)
        assert conditional_moment_eigenvalue(2, Fraction(1)) == Fraction(1, 3)


class TestQuadraticIdentity:
    @pytest.mark.parametrize("gamma,lam", [
        (Fraction(1), Fraction(4, 9)),
        (Fraction(1, 2), Fraction(5, 12)),
        (Fraction(2), Fraction(7, 15)),
    ])
    def test_eigen_identity(self, gamma, lam):
        rep = quadratic_eigen_identity(gamma)
        assert rep.eigenvalue == lam
        assert rep.max_residual < 1e-12
        assert rep.conditional_residual < 1e-12


class TestTwoSiteFourier:
    def test_uniform_collapse(self):
        res = two_site_fourier_gap(RhoSpec.uniform(), n_max=64)
        assert res.gap == 0.5
        assert res.kappa == 0.5
        assert not res.truncated

    def test_cosine(self):
        res = two_site_fourier_gap(COSINE_RHO, n_max=16)
        assert res.gap == pytest.approx(0.25, abs=1e-12)
        assert res.kappa == pytest.approx(0.5, abs=1e-12)

    def test_kappa_bounded_by_one(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            amps = rng.standard_normal(3) + 1j * rng.standard_normal(3)

            def density(theta, amps=amps):
                p = sum(a * np.exp(1j * k * theta) for k, a in enumerate(amps))
                return abs(p) ** 2
            mass = float(sum(abs(a) ** 2 for a in amps) * 2 * math.pi)
            rho = RhoSpec(density=lambda t: density(t) / mass, n_max=12)
            res = two_site_fourier_gap(rho, n_max=12)
            assert res.kappa <= 1.0 + 1e-9

    def test_bound_arithmetic_reproduction(self):
        # pair gap times the collapsed complete-graph value: lam(2) (N+2)/(2N)
        for rho in (RhoSpec.uniform(), COSINE_RHO):
            res = two_site_fourier_gap(rho, n_max=16)
            for N in (3, 4, 6):
                lam_star = (N + 2) / (4 * N)
                lower = 2 * res.gap * lam_star
                assert lower == pytest.approx(res.gap * (N + 2) / (2 * N), abs=1e-14)

    def test_rejects_invalid_coefficients(self):
        bad = RhoSpec(coefficients=[1.0, -1.5], exact_tail_zero=True)
        with pytest.raises(ArithmeticError, match="not"):
            two_site_fourier_gap(bad, n_max=4)
