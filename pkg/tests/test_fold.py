from fractions import Fraction

import pytest

from core.errors import NotFoldingMap, NotIllegal, OutOfRange, UnsupportedFoldKind
from core.fingroup import identity_hom, make_group
from core.fold import (
    DISTINCT_ORBITS, GROUP_TWIST, check_geodesic, fold_sequence, fold_turn, illegal_turn, lift_sequence,
    simplicial_form, subdivide, verify_event,
)
from core.gog import Edge, GraphOfGroups, Vertex, make_path, volume
from core.morphism import Direction, identity_map, is_marked_isometry, lipschitz_constant, make_map


def z2_loop_graph():
    z2 = make_group("cyclic(2)")
    edge = Edge(0, 0, z2, identity_hom(z2), identity_hom(z2), Fraction(1))
    return GraphOfGroups([Vertex(z2)], [edge], name="z2loop")


class TestSubdivide:
    def test_split(self, corpus):
        tripod = corpus.graph("tripodA")
        split, f = subdivide(tripod, 1, Fraction(1, 6))
        assert len(split.vertices) == 5
        assert len(split.edges) == 4
        assert volume(split) == volume(tripod)
        assert lipschitz_constant(f) == 1
        assert split.length(1) == split.length(4) == Fraction(1, 6)

    @pytest.mark.parametrize("t", [0, Fraction(1, 3), 1])
    def test_out_of_range(self, corpus, t):
        with pytest.raises(OutOfRange):
            subdivide(corpus.graph("tripodA"), 1, t)


class TestSimplicialForm:
    def test_caterpillar_is_split_at_the_centre(self, corpus):
        simplicial, f0, pull = simplicial_form(corpus.map("cat2tri"))
        assert len(simplicial.edges) == 4
        assert len(simplicial.vertices) == 5
        assert all(len(path.edges) == 1 for path in f0.edge_image)
        assert volume(simplicial) == Fraction(4, 3)
        assert [len(path.edges) for path in pull.edge_image] == [2, 2]

    def test_needs_full_tension(self, corpus):
        with pytest.raises(NotFoldingMap):
            simplicial_form(corpus.map("id"))


class TestFoldTurn:
    def test_legal_turn(self, corpus):
        _, start, _ = simplicial_form(corpus.map("cat2tri"))
        with pytest.raises(NotIllegal):
            fold_turn(start, (Direction(0, 1, 0), Direction(0, 1, 1)))

    def test_distinct_edges(self, corpus):
        _, start, _ = simplicial_form(corpus.map("cat2tri"))
        turn = illegal_turn(start)
        assert turn is not None
        event = fold_turn(start, turn)
        assert event.kind == DISTINCT_ORBITS
        assert len(event.graph.edges) == 3
        report = verify_event(event)
        assert report["valid"]
        assert report["summary"]["lipschitz_after"] <= report["summary"]["lipschitz_before"]

    def test_group_twist(self, corpus):
        f = corpus.map("twist")
        turn = illegal_turn(f)
        assert turn == (Direction(0, 1, 0), Direction(0, 1, 1))
        event = fold_turn(f, turn)
        assert event.kind == GROUP_TWIST
        assert event.graph.vertex_group(1).order == 2
        assert event.graph.edge_group(1).order == 2
        assert is_marked_isometry(event.remainder)

    def test_twist_of_a_loop(self, corpus):
        rose, target = corpus.graph("rose"), z2_loop_graph()
        f = make_map(rose, target, [0], [[0, 1]], [make_path(target, 0, [0, 1, 0])])
        with pytest.raises(UnsupportedFoldKind):
            fold_turn(f, illegal_turn(f))


class TestSequence:
    def test_caterpillar(self, corpus):
        seq = fold_sequence(corpus.map("cat2tri"))
        assert len(seq) == 1
        assert len(seq.points) == 3
        assert len(seq.maps) == 2
        assert is_marked_isometry(seq.final)

    def test_twist(self, corpus):
        seq = fold_sequence(corpus.map("twist"))
        assert [event.kind for event in seq] == [GROUP_TWIST]

    def test_map_between_ends(self, corpus):
        seq = fold_sequence(corpus.map("cat2tri"))
        whole = seq.map_between(0, len(seq.points) - 1)
        assert whole.source is seq.points[0]
        assert whole.target is seq.points[-1]
        assert seq.map_between(1, 1).edge_image == identity_map(seq.points[1]).edge_image

    def test_normalized_points(self, corpus):
        seq = fold_sequence(corpus.map("cat2tri"))
        assert all(volume(p) == 1 for p in seq.normalized())

    def test_geodesic(self, corpus):
        f = corpus.map("cat2tri")
        seq = fold_sequence(f)
        report = check_geodesic(seq, f)
        assert report["valid"]
        assert report["summary"]["points"] == 3
        assert report["summary"]["lambdas"]["0,2"] == Fraction(4, 3)

    def test_geodesic_threads_agree(self, corpus):
        seq = fold_sequence(corpus.map("cat2tri"))
        assert check_geodesic(seq, threads=3)["summary"] == check_geodesic(seq)["summary"]

    def test_lift(self, corpus):
        quotient = corpus.quotient("z2")
        seq = fold_sequence(corpus.map("cat2tri"))
        report = lift_sequence(seq, quotient, quotient.group.trivial_subgroup())
        assert report["valid"]
        assert report["summary"]["index"] == 2
        assert len(report["lifted_maps"]) == len(seq.maps)
