"""Shared fixtures: the sample corpus and small hand-built graphs."""

from fractions import Fraction
from pathlib import Path

import pytest

from core.fingroup import make_group, trivial_hom
from core.gog import Edge, GraphOfGroups, Vertex
from core.parser import parse_workspace

SAMPLES = Path(__file__).resolve().parent.parent / "samples"


def sample_files(*names):
    return [str(SAMPLES / f"{name}.json") for name in names]


@pytest.fixture(scope="session")
def corpus():
    """Every sample workspace loaded together."""
    return parse_workspace(sorted(str(p) for p in SAMPLES.glob("*.json")))


@pytest.fixture(scope="session")
def z2():
    return make_group("cyclic(2)")


@pytest.fixture(scope="session")
def trivial():
    return make_group("trivial")


def plain_edge(graph_groups, tail, head, length, trivial_group):
    """Edge with a trivial edge group between the given vertices."""
    return Edge(tail, head, trivial_group,
                trivial_hom(trivial_group, graph_groups[head]),
                trivial_hom(trivial_group, graph_groups[tail]), Fraction(length))


@pytest.fixture
def rose2(trivial):
    """Free group of rank 2: one trivial vertex with two loops of length 1/2."""
    groups = [trivial]
    edges = [plain_edge(groups, 0, 0, Fraction(1, 2), trivial) for _ in range(2)]
    return GraphOfGroups([Vertex(trivial, "v")], edges, name="rose2")


@pytest.fixture
def segment(z2, trivial):
    """Z/2 * Z/2 as one edge of length 1."""
    groups = [z2, z2]
    return GraphOfGroups([Vertex(z2, "a"), Vertex(z2, "b")],
                         [plain_edge(groups, 0, 1, 1, trivial)], name="segment")
