"""Hypothesis strategies for small graphs of groups, marking changes and quotients."""

from fractions import Fraction

import networkx as nx
from hypothesis import assume
from hypothesis import strategies as st

from core.cover import FiniteQuotient, spanning_tree, validate_quotient
from core.fingroup import GroupHom, make_group, trivial_hom
from core.gog import Edge, GraphOfGroups, Vertex, euler_char, make_path, normalize_volume
from core.morphism import GoGMap, identity_map, with_graphs

TRIVIAL = make_group("trivial")
ORDERS = (1, 2, 3, 4, 5, 6)
QUOTIENT_GROUPS = ("cyclic(2)", "cyclic(3)", "cyclic(4)", "klein4")

lengths = st.builds(Fraction, st.integers(1, 5), st.integers(1, 4))


def cyclic(order):
    return TRIVIAL if order == 1 else make_group(f"cyclic({order})")


def inclusion(sub, group):
    """Z/k onto the multiples of n/k in Z/n."""
    step = group.order // sub.order
    return GroupHom(sub, group, [c * step for c in range(sub.order)], check=False)


def _valence(edges, v):
    return sum((d.tail == v) + (d.head == v) for d in edges)


def _ends(draw, n, max_edges):
    """A spanning tree on n vertices plus random extra edges (loops allowed)."""
    ends = [(draw(st.integers(0, v - 1)), v) for v in range(1, n)]
    extra = draw(st.integers(0 if ends else 1, max(0, max_edges - len(ends))))
    for _ in range(extra):
        ends.append((draw(st.integers(0, n - 1)), draw(st.integers(0, n - 1))))
    return ends


def _minimal(groups, edges, name):
    """Trivial vertices have valence at least three and the Euler characteristic is negative."""
    assume(all(groups[v].order > 1 or _valence(edges, v) >= 3 for v in range(len(groups))))
    graph = GraphOfGroups([Vertex(g) for g in groups], edges, name=name)
    assume(euler_char(graph) < 0)
    return graph


@st.composite
def graphs_of_groups(draw, max_vertices=3, max_edges=3, orders=(1, 2)):
    """Connected graphs with cyclic vertex groups and trivial edge groups."""
    n = draw(st.integers(1, max_vertices))
    groups = [cyclic(draw(st.sampled_from(orders))) for _ in range(n)]
    edges = [Edge(t, h, TRIVIAL, trivial_hom(TRIVIAL, groups[h]), trivial_hom(TRIVIAL, groups[t]), draw(lengths))
             for t, h in _ends(draw, n, max_edges)]
    return _minimal(groups, edges, "random")


@st.composite
def decorated_graphs(draw, max_vertices=3, max_edges=2):
    """
    Connected graphs with cyclic vertex groups of order at most six.

    A non-loop edge may carry a cyclic edge group, included at both ends
    as a proper subgroup, so no such edge is collapsible.
    """
    n = draw(st.integers(1, max_vertices))
    groups = [cyclic(draw(st.sampled_from(ORDERS))) for _ in range(n)]
    edges = []
    for t, h in _ends(draw, n, max_edges):
        a, b = groups[t].order, groups[h].order
        shared = [k for k in range(2, 7) if t != h and a % k == 0 and b % k == 0 and k < a and k < b]
        group = cyclic(draw(st.sampled_from([1] + shared)))
        edges.append(Edge(t, h, group, inclusion(group, groups[h]), inclusion(group, groups[t]), draw(lengths)))
    return _minimal(groups, edges, "decorated")


@st.composite
def relengthed(draw, graph):
    """The same graph of groups with fresh edge lengths."""
    return graph.with_lengths([draw(lengths) for _ in graph.edges], name="relengthed")


@st.composite
def identity_shaped_maps(draw, normalize=False, max_edges=3):
    """The identity marking between two length assignments on one random graph."""
    graph = draw(graphs_of_groups(max_edges=max_edges))
    other = draw(relengthed(graph))
    if normalize:
        graph, other = normalize_volume(graph), normalize_volume(other)
    return with_graphs(identity_map(graph), graph, other)


@st.composite
def twisted_maps(draw, graph, target=None):
    """
    A tight marking change from graph onto a relengthed copy.

    Every vertex group is either fixed or inverted (the same choice
    throughout, so edge groups stay compatible) and every edge image is
    ``g e h`` for random g and h at its ends. Vertex groups are abelian, so
    every edge relator holds.
    """
    target = draw(relengthed(graph)) if target is None else target
    flip = draw(st.booleans())
    homs = []
    for v in range(len(graph.vertices)):
        group = graph.vertex_group(v)
        homs.append(GroupHom(group, target.vertex_group(v),
                             [(-x) % group.order if flip else x for x in group.elements], check=False))
    images = []
    for e in graph.positive_edges():
        d = graph.edge(e)
        g = draw(st.sampled_from(list(graph.vertex_group(d.tail).elements)))
        h = draw(st.sampled_from(list(graph.vertex_group(d.head).elements)))
        images.append(make_path(target, d.tail, [g, e, h]))
    return GoGMap(graph, target, range(len(graph.vertices)), homs, images, name="twist")


@st.composite
def tight_maps(draw, max_edges=2):
    """A twisted marking change on a random decorated graph."""
    return draw(twisted_maps(draw(decorated_graphs(max_edges=max_edges))))


def _embeddings(q, name):
    """Cyclic subgroups of a small abelian Q, each as (group, inclusion image)."""
    if name == "klein4":
        z2 = cyclic(2)
        return [(TRIVIAL, [0])] + [(z2, [0, a]) for a in (1, 2, 3)]
    n = q.order
    return [(TRIVIAL, [0])] + [(cyclic(d), [c * (n // d) for c in range(d)]) for d in range(2, n + 1) if n % d == 0]


@st.composite
def torsion_free_quotients(draw, max_vertices=3, max_edges=4):
    """
    A graph with trivial edge groups and a surjection onto a group of order
    at most four that is injective on every vertex group.
    """
    name = draw(st.sampled_from(QUOTIENT_GROUPS))
    q = make_group(name)
    options = _embeddings(q, name)
    n = draw(st.integers(1, max_vertices))
    chosen = [draw(st.sampled_from(options)) for _ in range(n)]
    groups = [group for group, _ in chosen]
    edges = [Edge(t, h, TRIVIAL, trivial_hom(TRIVIAL, groups[h]), trivial_hom(TRIVIAL, groups[t]), draw(lengths))
             for t, h in _ends(draw, n, max_edges)]
    graph = _minimal(groups, edges, "random")
    tree = spanning_tree(graph)
    values = [0 if e in tree else draw(st.sampled_from(list(q.elements))) for e in graph.positive_edges()]
    homs = [GroupHom(group, q, image, check=False) for group, image in chosen]
    quotient = FiniteQuotient(graph, q, homs, values, tree=tree, name=name)
    assume(validate_quotient(quotient)["valid"])
    return quotient


def random_word(graph, rng, start, steps):
    """Alternating word of a random walk, with backtracks likely."""
    word = [rng.randrange(graph.vertex_group(start).order)]
    v = start
    for _ in range(steps):
        e = rng.choice(graph.edges_at(v))
        v = graph.terminus(e)
        word += [e, rng.randrange(graph.vertex_group(v).order)]
    return word


def random_loop(graph, rng, steps):
    """Random walk from vertex 0, closed up along a shortest path home."""
    word = random_word(graph, rng, 0, steps)
    path = make_path(graph, 0, word)
    route = nx.shortest_path(graph.nx_graph(), path.end, 0)
    for u, w in zip(route, route[1:]):
        e = next(e for e in graph.edges_at(u) if graph.terminus(e) == w)
        word += [e, rng.randrange(graph.vertex_group(w).order)]
    return make_path(graph, 0, word, loop=True)
