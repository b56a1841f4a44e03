import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaplab.models import (G_CONSTANT_ONE, G_IDENTITY, GammaExchangeSpec,
                           IDENTITY, ModelSpec, RhoSpec, SQUARE, build_graph,
                           conserved_total, model_from_id, rate_from_table,
                           validate_model)


class TestBuildGraph:
    def test_complete_four(self):
        g = build_graph("complete", N=4)
        assert len(g.edges) == 6
        assert g.pair_scaling == pytest.approx(1 / 4)

    def test_lattice_two_by_three(self):
        g = build_graph("lattice", d=2, N=3)
        assert g.n_sites == 9
        assert len(g.edges) == 12
        assert g.pair_scaling == 1.0

    def test_lattice_path(self):
        g = build_graph("lattice", d=1, N=2)
        assert g.n_sites == 2
        assert len(g.edges) == 1

    def test_invalid_size(self):
        with pytest.raises(ValueError, match="invalid size"):
            build_graph("complete", N=1)

    def test_invalid_dimension(self):
        with pytest.raises(ValueError, match="invalid dimension"):
            build_graph("lattice", d=0, N=3)

    @given(N=st.integers(2, 12))
    def test_complete_edge_count(self, N):
        g = build_graph("complete", N=N)
        assert len(g.edges) == N * (N - 1) // 2

    @given(d=st.integers(1, 3), N=st.integers(2, 5))
    @settings(max_examples=30, deadline=None)
    def test_lattice_edge_count(self, d, N):
        g = build_graph("lattice", d=d, N=N)
        assert g.n_sites == N ** d
        assert len(g.edges) == d * N ** (d - 1) * (N - 1)
        # every edge joins vertices at L1 distance one
        for a, b in g.edges:
            u, v = g.vertices[a], g.vertices[b]
            assert sum(abs(x - y) for x, y in zip(u, v)) == 1


class TestConservedTotal:
    def test_identity(self):
        assert conserved_total((1, 2, 0), IDENTITY) == 3

    def test_square(self):
        assert conserved_total((1.0, -1.0), SQUARE) == pytest.approx(2.0)

    def test_zero_total_allowed(self):
        assert conserved_total((0, 0, 0, 0), IDENTITY) == 0

    def test_negative_rejected_for_identity(self):
        with pytest.raises(ValueError):
            conserved_total((1, -2), IDENTITY)


class TestRateFunctions:
    def test_convention_at_zero(self):
        assert G_IDENTITY(0) == 0.0
        assert G_CONSTANT_ONE(0) == 0.0

    def test_log_factorial(self):
        assert G_IDENTITY.log_factorial(4) == pytest.approx(math.log(24))
        assert G_CONSTANT_ONE.log_factorial(7) == 0.0

    def test_table(self):
        g = rate_from_table([(1, 2.0), (2, 3.0)])
        assert g(2) == 3.0
        with pytest.raises(ValueError):
            g(3)

    def test_nonpositive_rejected(self):
        g = rate_from_table([(1, 0.0)])
        with pytest.raises(ValueError, match="positive"):
            g(1)


class TestRhoSpec:
    def test_uniform_coefficients(self):
        rho = RhoSpec.uniform()
        assert rho.coefficient(0) == 1.0
        assert rho.coefficient(5) == 0.0

    def test_density_quadrature_uniform(self):
        rho = RhoSpec(density=lambda t: 1 / (2 * math.pi), n_max=8)
        assert rho.coefficient(0).real == pytest.approx(1.0, abs=1e-12)
        for n in range(1, 9):
            assert abs(rho.coefficient(n)) < 1e-12

    def test_cosine_density(self):
        rho = RhoSpec(density=lambda t: (1 + math.cos(t)) / (2 * math.pi), n_max=4)
        assert rho.coefficient(1).real == pytest.approx(0.5, abs=1e-10)
        assert abs(rho.coefficient(2)) < 1e-10

    def test_order_error(self):
        rho = RhoSpec(coefficients=[1.0, 0.3])
        with pytest.raises(ValueError, match="order"):
            rho.coefficient(2)

    def test_negative_index_conjugate(self):
        rho = RhoSpec(coefficients=[1.0, 0.2 + 0.1j])
        assert rho.coefficient(-1) == (0.2 + 0.1j).conjugate()

    @given(st.lists(st.complex_numbers(max_magnitude=1.0, allow_nan=False,
                                       allow_infinity=False),
                    min_size=1, max_size=4))
    @settings(max_examples=25, deadline=None)
    def test_fejer_densities_have_bounded_coefficients(self, amps):
        # |p(e^{i theta})|^2 is nonnegative; normalized it is a density, and
        # densities always have |rho_hat(n)| <= 1 with conjugate symmetry.
        def density(theta):
            p = sum(a * complex(math.cos(k * theta), math.sin(k * theta))
                    for k, a in enumerate(amps))
            return abs(p) ** 2

        mass = sum(abs(a) ** 2 for a in amps) * 2 * math.pi
        if mass < 1e-9:
            return
        rho = RhoSpec(density=lambda t: density(t) / mass, n_max=6)
        assert rho.coefficient(0).real == pytest.approx(1.0, abs=1e-8)
        for n in range(1, 7):
            assert abs(rho.coefficient(n)) <= 1.0 + 1e-9
            assert rho.coefficient(-n) == rho.coefficient(n).conjugate()


class TestValidateModel:
    def test_simple_average_kernel_passes(self):
        spec = ModelSpec("gamma-exchange", exchange=GammaExchangeSpec(gamma=1))
        report = validate_model(spec)
        assert report.passed, str(report)

    def test_simple_average_kernel_general_shape(self):
        spec = ModelSpec("gamma-exchange", exchange=GammaExchangeSpec(gamma=2))
        assert validate_model(spec).passed

    def test_uniform_rho_passes(self):
        spec = model_from_id("kac-rho")
        report = validate_model(spec)
        assert report.passed

    def test_unnormalized_density_fails(self):
        rho = RhoSpec(density=lambda t: 0.5 / (2 * math.pi), n_max=4)
        spec = ModelSpec("kac-rho", rho=rho)
        report = validate_model(spec)
        assert not report.passed
        norm = next(c for c in report.checks if "normalization" in c.name)
        assert not norm.passed
        assert norm.residual == pytest.approx(0.5, abs=1e-6)

    def test_detailed_balance_violating_kernel_fails(self):
        # a biased kernel cannot be reversible for the symmetric invariant law
        K = np.zeros((16, 16))
        for i in range(16):
            K[i, (i + 1) % 16] = 1.0
        spec = ModelSpec("gamma-exchange",
                         exchange=GammaExchangeSpec(gamma=1, kernel=K))
        report = validate_model(spec)
        assert not report.passed

    def test_zero_range_report(self):
        assert validate_model(ModelSpec("zero-range", g=G_IDENTITY)).passed


class TestModelCatalog:
    @pytest.mark.parametrize("mid", ["kac", "kac-rho", "gamma-exchange",
                                     "zero-range", "simple-average"])
    def test_ids_resolve(self, mid):
        spec = model_from_id(mid, g=G_CONSTANT_ONE, gamma=1)
        assert spec.family in ("kac-uniform", "kac-rho", "gamma-exchange",
                               "zero-range", "simple-average")
        spec.site_space()
        spec.law()

    def test_unknown_id(self):
        with pytest.raises(ValueError, match="unknown model id"):
            model_from_id("bogus")

    def test_pairings(self):
        assert model_from_id("kac").law().form == "square"
        assert model_from_id("zero-range", g=G_IDENTITY).law().form == "identity"
        assert model_from_id("gamma-exchange", gamma=2).law().form == "identity"
