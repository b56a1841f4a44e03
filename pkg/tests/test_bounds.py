import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaplab.bounds import (CertificateRefused, canonical_path, caputo_bound,
                           certificate, apply_transposition_word,
                           lambda_s_scaling, lattice_constants_table,
                           lemma_audit, local_gap_lower_bound,
                           moving_particle_decomposition, path_census, sandwich,
                           RULE_LATTICE, RULE_RECURSION, RULE_SANDWICH)
from gaplab.discrete import enumerate_states, exact_gap, stationary_weights
from gaplab.models import G_CONSTANT_ONE, G_IDENTITY, ModelSpec, build_graph


class TestCanonicalPath:
    def test_axis_order(self):
        p = canonical_path((1, 1), (3, 3), d=2, N=3)
        assert p.vertices == ((1, 1), (2, 1), (3, 1), (3, 2), (3, 3))
        assert p.length == 4

    def test_trivial(self):
        assert canonical_path((2, 2), (2, 2), d=2, N=3).length == 0

    def test_descending_line(self):
        p = canonical_path(5, 2, d=1, N=6)
        assert p.vertices == ((5,), (4,), (3,), (2,))
        assert p.length == 3

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            canonical_path((0, 1), (2, 2), d=2, N=3)

    @given(d=st.integers(1, 3), N=st.integers(2, 4), data=st.data())
    @settings(max_examples=40, deadline=None)
    def test_length_is_l1_distance(self, d, N, data):
        coord = st.tuples(*[st.integers(1, N)] * d)
        x, y = data.draw(coord), data.draw(coord)
        p = canonical_path(x, y, d, N)
        assert p.length == sum(abs(a - b) for a, b in zip(x, y))
        assert p.length <= d * (N - 1)
        for u, v in zip(p.vertices, p.vertices[1:]):
            assert sum(abs(a - b) for a, b in zip(u, v)) == 1


class TestPathCensus:
    def test_max_lengths(self):
        assert path_census(1, 4).max_length == 3
        assert path_census(2, 3).max_length == 4

    def test_line_congestion_exhaustive(self):
        census = path_census(1, 3)
        # oracle: ordered pairs through edge {2,3} are (1,3),(2,3) and reverses
        edge = ((2,), (3,))
        count = 0
        for x in range(1, 4):
            for y in range(1, 4):
                if x == y:
                    continue
                verts = canonical_path(x, y, 1, 3).vertices
                if any({u, v} == {(2,), (3,)} for u, v in zip(verts, verts[1:])):
                    count += 1
        assert count == 4
        assert census.congestion[edge] == 4

    @pytest.mark.parametrize("d,N", [(1, 4), (1, 8), (2, 3), (2, 4), (3, 3)])
    def test_congestion_bounds(self, d, N):
        census = path_census(d, N)
        assert census.holds
        assert census.max_congestion <= N ** (d + 1)
        assert census.max_weighted <= d * N ** (d + 2)


class TestMovingParticle:
    def test_two_vertices(self):
        assert moving_particle_decomposition([(1,), (2,)]) == [((1,), (2,))]

    def test_word_length(self):
        word = moving_particle_decomposition([(1,), (2,), (3,), (4,)])
        assert len(word) == 5

    def test_conjugation_identity(self):
        word = moving_particle_decomposition([(1,), (2,), (3,)])
        site_index = {(1,): 0, (2,): 1, (3,): 2}
        for cfg in itertools.product(range(3), repeat=3):
            direct = (cfg[2], cfg[1], cfg[0])
            assert apply_transposition_word(word, cfg, site_index) == direct

    def test_rejects_non_adjacent(self):
        with pytest.raises(ValueError, match="nearest neighbors"):
            moving_particle_decomposition([(1,), (3,)])

    @given(d=st.integers(1, 2), N=st.integers(2, 3), omega=st.integers(1, 3),
           data=st.data())
    @settings(max_examples=30, deadline=None)
    def test_word_equals_direct_swap_on_states(self, d, N, omega, data):
        graph = build_graph("lattice", d=d, N=N)
        V = graph.n_sites
        site_index = {v: i for i, v in enumerate(graph.vertices)}
        a = data.draw(st.integers(0, V - 1))
        b = data.draw(st.integers(0, V - 1))
        if a == b:
            return
        path = canonical_path(graph.vertices[a], graph.vertices[b], d, N)
        word = moving_particle_decomposition(path.vertices)
        states = enumerate_states(V, omega)
        for cfg in map(tuple, states.states):
            out = apply_transposition_word(word, cfg, site_index)
            direct = list(cfg)
            direct[a], direct[b] = direct[b], direct[a]
            assert out == tuple(direct)


class TestLemmaAudit:
    def test_small_instance_passes(self):
        graph = build_graph("lattice", d=1, N=3)
        states = enumerate_states(3, 2)
        measure = stationary_weights(G_CONSTANT_ONE, states)
        rep = lemma_audit(states, measure, graph, n_functions=100, seed=1)
        assert rep.passed
        assert rep.max_ratio_transfer <= 1.0 + 1e-9
        assert rep.max_ratio_swap <= 1.0 + 1e-9
        assert rep.observed_swap_constant <= 4.0 + 1e-9
        assert rep.max_ratio_path <= 1.0 + 1e-9

    def test_constant_function_trivial(self):
        graph = build_graph("lattice", d=1, N=3)
        states = enumerate_states(3, 2)
        measure = stationary_weights(G_IDENTITY, states)
        # zero random functions: nothing to check, vacuously clean
        rep = lemma_audit(states, measure, graph, n_functions=0)
        assert rep.checks_run == 0 and rep.passed

    def test_deterministic_given_seed(self):
        graph = build_graph("lattice", d=1, N=3)
        states = enumerate_states(3, 3)
        measure = stationary_weights(G_IDENTITY, states)
        r1 = lemma_audit(states, measure, graph, n_functions=20, seed=9)
        r2 = lemma_audit(states, measure, graph, n_functions=20, seed=9)
        assert r1.max_ratio_transfer == r2.max_ratio_transfer
        assert r1.max_ratio_swap == r2.max_ratio_swap


class TestCaputoBound:
    def test_fixed_point_at_three(self):
        assert caputo_bound(Fraction(5, 12), 3) == Fraction(5, 12)

    def test_four(self):
        assert caputo_bound(Fraction(5, 12), 4) == Fraction(3, 8)

    def test_degenerate_level(self):
        for N in (2, 5, 17):
            assert caputo_bound(Fraction(1, 3), N) == Fraction(1, N)

    def test_exact_rational_identity(self):
        for N in range(2, 65):
            assert caputo_bound(Fraction(5, 12), N) == Fraction(N + 2, 4 * N)

    def test_floats_pass_through(self):
        assert caputo_bound(5 / 12, 4) == pytest.approx(3 / 8)


class TestLatticeConstants:
    def test_local_bound_values(self):
        assert local_gap_lower_bound(Fraction(1, 4), 1, 10) == Fraction(1, 38400)
        assert local_gap_lower_bound(Fraction(1, 4), 2, 10) == Fraction(1, 76800)

    def test_constants_table(self):
        table = lattice_constants_table(1, 10, lam2=Fraction(1, 2))
        assert table["uniform_rotation_bound"] == Fraction(1, 38400)
        assert table["two_site_bound"] == Fraction(1, 38400)
        assert table["rule"] == RULE_LATTICE

    def test_both_constants_kept_distinct(self):
        t = lattice_constants_table(2, 4)
        assert t["uniform_rotation_bound"] == Fraction(1, 384 * 2 * 16)
        assert "two_site_bound" not in t


class TestSandwich:
    def test_degenerate_collapse(self):
        for N in (3, 5):
            lam_star = Fraction(N + 2, 4 * N)
            lo, hi = sandwich(Fraction(1, 2), Fraction(1, 2), lam_star)
            assert lo == hi == lam_star

    def test_vacuous_lower(self):
        lo, hi = sandwich(0, 1, 0.4)
        assert lo == 0 and hi == pytest.approx(0.8)

    def test_arithmetic(self):
        lo, hi = sandwich(Fraction(1, 4), Fraction(1, 2), Fraction(5, 12))
        assert (lo, hi) == (Fraction(5, 24), Fraction(5, 12))

    def test_inconsistent(self):
        with pytest.raises(ValueError, match="inconsistent"):
            sandwich(0.9, 0.5, 1.0)

    def test_interval_contains_exact_gap(self):
        # cross-module: exact particle-jump gap sits inside the certified interval
        model = ModelSpec("zero-range", g=G_IDENTITY)
        avg = ModelSpec("simple-average", g=G_IDENTITY)
        graph = build_graph("complete", N=3)
        for om in (1, 2, 4):
            lam = exact_gap(model, graph, om)[0]
            lam_star = exact_gap(avg, graph, om)[0]
            lo, hi = sandwich(1.0, float(om), lam_star)
            assert lo - 1e-9 <= lam <= hi + 1e-9


class TestCertificate:
    def test_rotation_chain(self):
        chain = certificate(Fraction(5, 12), Fraction(1, 2), 1)
        assert chain.value_of(RULE_RECURSION) == Fraction(1, 4)
        assert chain.value_of(RULE_LATTICE) == Fraction(1, 384)
        assert chain.value_of(RULE_SANDWICH) == Fraction(1, 384)
        assert chain.interval[0] == Fraction(1, 384)
        assert math.isinf(chain.interval[1])

    def test_redistribution_chain(self):
        chain = certificate(Fraction(4, 9), Fraction(1), 1)
        assert chain.value_of(RULE_RECURSION) == Fraction(1, 3)
        assert chain.value_of(RULE_LATTICE) == Fraction(1, 288)
        assert chain.value_of(RULE_SANDWICH) == Fraction(1, 144)

    def test_boundary_refused(self):
        with pytest.raises(CertificateRefused) as err:
            certificate(Fraction(1, 3), Fraction(1, 2), 1)
        assert "1/3" in err.value.hypothesis

    def test_nonpositive_pair_gap_refused(self):
        with pytest.raises(CertificateRefused) as err:
            certificate(Fraction(5, 12), 0, 1)
        assert "lambda(2)" in err.value.hypothesis

    def test_json_round_trip(self):
        import json
        chain = certificate(Fraction(5, 12), Fraction(1, 2), 2)
        doc = json.loads(json.dumps(chain.to_json()))
        assert doc["steps"][0]["rule"] == RULE_RECURSION
        assert doc["steps"][1]["value"]["fraction"] == "1/768"
        assert doc["interval"][1] == "inf"
        assert all("inequality" in s and s["inequality"] for s in doc["steps"])


class TestRateScaling:
    def test_constant_rate(self):
        table = lambda_s_scaling(lambda s: 1.0, 0.5, [0.5, 1, 2, 5])
        assert all(v == pytest.approx(0.5) for _, v in table.rows)
        assert not table.degenerate_warning

    def test_linear_rate_warns(self):
        grid = np.linspace(0.1, 10, 25)
        table = lambda_s_scaling(lambda s: s, 0.5, grid)
        assert table.infimum == pytest.approx(0.1 * 0.5)
        assert table.degenerate_warning

    def test_quadratic_bounded_below_no_warning(self):
        grid = np.linspace(0.1, 10, 25)
        table = lambda_s_scaling(lambda s: 1 + s * s, 0.5, grid)
        assert not table.degenerate_warning
        assert table.infimum == pytest.approx((1 + 0.01) / 2 * 0.5)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError, match="invalid rate"):
            lambda_s_scaling(lambda s: s - 1.0, 0.5, [0.5, 2.0])
