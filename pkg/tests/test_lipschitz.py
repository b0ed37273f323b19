from fractions import Fraction

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

import core.lipschitz
from core.cover import spanning_tree
from core.errors import BudgetExceeded, DepthLimitExceeded, NotImmersed, NotSausage, NotVolumeOne
from core.gog import GraphOfGroups, Vertex, make_path, scale, volume
from core.lipschitz import (
    SHAPES, brute_force_stretch, candidate_ratios, distance, embedded_cycles, enumerate_candidates,
    is_immersed, is_sausage, sausage_reduce, simple_paths, stretch_factor,
)
from core.morphism import compose, identity_map, is_marked_isometry, validate_map, with_graphs
from tests.conftest import plain_edge
from tests.strategies import identity_shaped_maps, tight_maps, twisted_maps
from utils.config import BRUTE_FORCE_MAX_EDGES

# centre of the tripod visited four times: two barbells glued end to end
TRIPLE_POINT = [1, -1, 0, 2, 1, -2, 0, 1, 1, -1, 0, 3, 1, -3, 0, 1, 0]

SLOW = dict(deadline=None, suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much])


@pytest.fixture
def doubled_triangle(z2, trivial):
    """A triangle with its first side doubled and a loop at vertex 0."""
    groups = [trivial, trivial, z2]
    ends = [(0, 1), (0, 1), (1, 2), (2, 0), (0, 0)]
    edges = [plain_edge(groups, t, h, 1, trivial) for t, h in ends]
    return GraphOfGroups([Vertex(g) for g in groups], edges, name="doubled")


class TestSearch:
    def test_embedded_cycles(self, doubled_triangle):
        cycles = embedded_cycles(doubled_triangle)
        assert [sorted(abs(e) for e in c) for c in cycles] == [[5], [1, 2], [1, 3, 4], [2, 3, 4]]

    def test_simple_paths(self, doubled_triangle):
        assert simple_paths(doubled_triangle, 0, 2) == [(-4,), (1, 3), (2, 3)]
        assert simple_paths(doubled_triangle, 0, 2, avoid=frozenset({1})) == [(-4,)]

    def test_spanning_tree(self, doubled_triangle):
        assert spanning_tree(doubled_triangle) == frozenset({1, 3})


class TestCandidates:
    def test_dihedral_has_one(self, corpus):
        candidates = enumerate_candidates(corpus.graph("dihedral"))
        assert len(candidates) == 1
        assert candidates[0].shape == "doubly_degenerate"
        assert candidates[0].loop.edges == (1, -1)

    def test_tripod_barbells(self, corpus):
        candidates = enumerate_candidates(corpus.graph("tripodA"))
        assert len(candidates) == 3
        assert {c.shape for c in candidates} == {"doubly_degenerate"}
        assert {frozenset(abs(e) for e in c.loop.edges) for c in candidates} == {
            frozenset({1, 2}), frozenset({1, 3}), frozenset({2, 3})}

    def test_k23_cycles(self, corpus):
        candidates = enumerate_candidates(corpus.graph("k23"))
        assert len(candidates) == 3
        assert all(c.shape == "simple_loop" and len(c.loop.edges) == 4 for c in candidates)

    def test_sorted_by_key(self, corpus):
        candidates = enumerate_candidates(corpus.graph("barbell"))
        keys = [c.key for c in candidates]
        assert keys == sorted(keys)
        assert len(set(keys)) == len(keys)
        assert all(c.shape in SHAPES for c in candidates)

    def test_budget(self, corpus):
        with pytest.raises(BudgetExceeded):
            enumerate_candidates(corpus.graph("k23"), budget=1)


class TestStretchFactor:
    def test_tripod_pair(self, corpus):
        lam, witness = stretch_factor(corpus.map("id"))
        assert lam == Fraction(9, 8)
        assert witness.shape == "doubly_degenerate"
        assert {abs(e) for e in witness.loop.edges} == {1, 2}

    def test_corpus_maps(self, corpus):
        assert stretch_factor(corpus.map("cat2tri"))[0] == Fraction(4, 3)
        assert stretch_factor(corpus.map("tri2cat"))[0] == Fraction(3, 2)
        assert stretch_factor(identity_map(corpus.graph("k23")))[0] == 1

    def test_ratios_listed(self, corpus):
        ratios = sorted(r for _, r in candidate_ratios(corpus.map("id")))
        assert ratios == [Fraction(3, 4), Fraction(9, 8), Fraction(9, 8)]

    def test_threads_agree(self, corpus):
        f = corpus.map("cat2tri")
        assert stretch_factor(f, threads=4) == stretch_factor(f)

    def test_doubling_target_doubles(self, corpus):
        f = corpus.map("tri2cat")
        doubled = with_graphs(f, f.source, scale(f.target, 2))
        assert stretch_factor(doubled)[0] == 2 * stretch_factor(f)[0]


class TestDistance:
    def test_volume_one_required(self, corpus):
        with pytest.raises(NotVolumeOne):
            distance(corpus.map("twist"))

    def test_normalized(self, corpus):
        lam, _, f = distance(corpus.map("twist"), normalize=True)
        assert volume(f.source) == volume(f.target) == 1
        assert lam > 0

    def test_identity_is_zero(self, corpus):
        lam, _, _ = distance(identity_map(corpus.graph("tripodA")))
        assert lam == 1


class TestBruteForce:
    def test_short_loops_suffice(self, corpus):
        assert brute_force_stretch(corpus.map("cat2tri"), max_edges=2)[0] == Fraction(4, 3)

    def test_tripod_pair(self, corpus):
        lam, loop = brute_force_stretch(corpus.map("id"), max_edges=8)
        assert lam == Fraction(9, 8)
        assert {abs(e) for e in loop.edges} == {1, 2}

    def test_node_budget(self, corpus):
        with pytest.raises(BudgetExceeded):
            brute_force_stretch(corpus.map("id"), max_edges=8, budget=3)

    @settings(max_examples=100, **SLOW)
    @given(tight_maps(max_edges=2))
    def test_matches_candidates(self, f):
        assert validate_map(f)["valid"]
        depth = max(len(c.loop.edges) for c in enumerate_candidates(f.source))
        assert brute_force_stretch(f, max_edges=depth)[0] == stretch_factor(f)[0]

    def test_depth_outside_limit(self, corpus):
        f = corpus.map("id")
        for depth in (0, BRUTE_FORCE_MAX_EDGES + 1):
            with pytest.raises(DepthLimitExceeded) as info:
                brute_force_stretch(f, max_edges=depth)
            assert info.value.depth == depth
            assert info.value.limit == BRUTE_FORCE_MAX_EDGES


class TestMetric:
    @settings(max_examples=30, deadline=None)
    @given(identity_shaped_maps(normalize=True))
    def test_at_least_one(self, f):
        assert stretch_factor(f)[0] >= 1

    @settings(max_examples=30, deadline=None)
    @given(identity_shaped_maps(normalize=True))
    def test_one_only_for_isometries(self, f):
        assert (stretch_factor(f)[0] == 1) == is_marked_isometry(f)

    @settings(max_examples=50, **SLOW)
    @given(st.data())
    def test_submultiplicative(self, data):
        f = data.draw(tight_maps())
        g = data.draw(twisted_maps(f.target))
        lam_f, lam_g = stretch_factor(f)[0], stretch_factor(g)[0]
        assert stretch_factor(compose(g, f))[0] <= lam_f * lam_g


class TestSausages:
    def test_candidates_are_sausages(self, corpus):
        f = identity_map(corpus.graph("tripodA"))
        for candidate in enumerate_candidates(f.source):
            assert is_sausage(f.source, candidate.loop)
            assert sausage_reduce(f, candidate.loop) == candidate.loop

    def test_triple_point_is_split(self, corpus):
        f = identity_map(corpus.graph("tripodA"))
        loop = make_path(f.source, 1, TRIPLE_POINT, loop=True)
        assert not is_sausage(f.source, loop)
        reduced = sausage_reduce(f, loop)
        assert len(reduced.edges) == 4
        assert {abs(e) for e in reduced.edges} == {1, 3}
        assert is_sausage(f.source, reduced)

    def test_not_immersed(self, corpus):
        f = corpus.map("cat2tri")
        loop = make_path(f.source, 0, [1, 1, 0, 2, 1, -2, 0, -1, 0], loop=True)
        assert not is_immersed(f, loop)
        with pytest.raises(NotImmersed):
            sausage_reduce(f, loop)

    def test_stalled_reduction_is_reported(self, corpus, monkeypatch):
        f = identity_map(corpus.graph("tripodA"))
        loop = make_path(f.source, 1, TRIPLE_POINT, loop=True)
        monkeypatch.setattr(core.lipschitz, "_shorten", lambda f, pairs, current: None)
        with pytest.raises(NotSausage) as info:
            sausage_reduce(f, loop)
        assert info.value.edges == 8
