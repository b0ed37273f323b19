"""
Metric graphs of groups with finite vertex and edge groups.

Edges are stored unoriented; oriented edges are signed ids. Unoriented edge
``i`` (0-based) gives the oriented edges ``i + 1`` (tail to head) and
``-(i + 1)`` (head to tail), so the reverse of ``e`` is ``-e``.

For an oriented edge ``e`` the monomorphism ``alpha(e)`` lands in the group
at ``terminus(e)``. A positive edge uses the stored ``mono_to_head``, a
negative one uses ``mono_to_tail``. Paths reduce by the rewrite
``e alpha(e)(c) -e  ->  alpha(-e)(c)``.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import networkx as nx

from core.errors import InconsistentPath, InvalidGraph, NonpositiveFactor
from core.fingroup import GroupHom
from core.validator import ReportBuilder

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Vertex:
    group: object
    name: str = None


@dataclass(frozen=True)
class Edge:
    tail: int
    head: int
    group: object
    mono_to_head: GroupHom
    mono_to_tail: GroupHom
    length: Fraction
    reverse_length: Fraction = None
    name: str = None

    def __post_init__(self):
        object.__setattr__(self, "length", Fraction(self.length))
        rev = self.length if self.reverse_length is None else Fraction(self.reverse_length)
        object.__setattr__(self, "reverse_length", rev)

    def with_length(self, length):
        return Edge(self.tail, self.head, self.group, self.mono_to_head,
                    self.mono_to_tail, length, None, self.name)


class GraphOfGroups:
    """A marked metric quotient graph of groups."""

    def __init__(self, vertices, edges, name=None):
        self.vertices = tuple(vertices)
        self.edges = tuple(edges)
        self.name = name
        self._valid = None

    # oriented edge helpers

    def edge(self, e):
        if e == 0 or abs(e) > len(self.edges):
            raise InconsistentPath(f"no edge with id {e}")
        return self.edges[abs(e) - 1]

    def origin(self, e):
        d = self.edge(e)
        return d.tail if e > 0 else d.head

    def terminus(self, e):
        d = self.edge(e)
        return d.head if e > 0 else d.tail

    def alpha(self, e):
        d = self.edge(e)
        return d.mono_to_head if e > 0 else d.mono_to_tail

    def edge_group(self, e):
        return self.edge(e).group

    def length(self, e):
        return self.edge(e).length

    def vertex_group(self, v):
        return self.vertices[v].group

    def is_loop(self, e):
        d = self.edge(e)
        return d.tail == d.head

    def signed_edges(self):
        out = []
        for i in range(len(self.edges)):
            out += [i + 1, -(i + 1)]
        return out

    def positive_edges(self):
        return list(range(1, len(self.edges) + 1))

    def edges_at(self, v):
        """Oriented edges issuing from v, ordered by id (positive first)."""
        return [e for e in self.signed_edges() if self.origin(e) == v]

    def is_free_vertex(self, v):
        return self.vertex_group(v).order == 1

    def direction_key(self, e, g):
        """Least element of the coset g * alpha(-e)(G_e) at origin(e)."""
        group = self.vertex_group(self.origin(e))
        return min(group.mul(g, x) for x in self.alpha(-e).image)

    def nx_graph(self, edges=None):
        """
        Underlying multigraph, keyed by positive edge id.

        Args:
            edges: positive edge ids to keep (default: all)
        """
        graph = nx.MultiGraph()
        graph.add_nodes_from(range(len(self.vertices)))
        for e in self.positive_edges() if edges is None else sorted(edges):
            d = self.edge(e)
            graph.add_edge(d.tail, d.head, key=e, eid=e)
        return graph

    def oriented(self, e, u):
        """The orientation of edge |e| that issues from u."""
        e = abs(e)
        return e if self.edge(e).tail == u else -e

    def with_lengths(self, lengths, name=None):
        edges = [d.with_length(length) for d, length in zip(self.edges, lengths)]
        return GraphOfGroups(self.vertices, edges, name=name or self.name)

    def require_valid(self):
        if self._valid is None:
            report = validate_gog(self)
            self._valid = report["errors"]
        if self._valid:
            raise InvalidGraph(self._valid)

    def __repr__(self):
        return f"GraphOfGroups({self.name or ''}: {len(self.vertices)} vertices, {len(self.edges)} edges)"


def validate_gog(graph):
    """
    Check every graph-of-groups invariant.

    Returns:
        dict: report with one error per violation and a summary carrying
        the Euler characteristic and volume when the graph is valid.
    """
    report = ReportBuilder(graph.name or "graph")
    n = len(graph.vertices)
    report.check(n >= 1, "graph has no vertices")
    for i, d in enumerate(graph.edges):
        label = d.name or f"e{i + 1}"
        ends_ok = report.check(0 <= d.tail < n and 0 <= d.head < n,
                               f"edge {label} has an endpoint outside the vertex list")
        report.check(d.length > 0, f"edge {label} has non-positive length {d.length}")
        report.check(d.length == d.reverse_length,
                     f"edge {label} has length {d.length} but its reverse has {d.reverse_length}")
        if not ends_ok:
            continue
        for side, hom, v in (("head", d.mono_to_head, d.head), ("tail", d.mono_to_tail, d.tail)):
            if hom.source != d.group:
                report.error(f"mono_to_{side} of edge {label} does not start at the edge group")
                continue
            if hom.target != graph.vertex_group(v):
                report.error(f"mono_to_{side} of edge {label} does not land in the vertex group at {v}")
                continue
            if not is_homomorphism(hom):
                report.error(f"mono_to_{side} of edge {label} is not a homomorphism")
            elif not hom.injective:
                report.error(f"mono_to_{side} of edge {label} is not injective")
    if n and all(0 <= d.tail < n and 0 <= d.head < n for d in graph.edges):
        report.check(nx.is_connected(graph.nx_graph()), "underlying graph is not connected")
    if report.ok:
        report.note(euler_char=_euler(graph), volume=_volume(graph),
                    unweighted_volume=unweighted_volume(graph),
                    vertices=n, edges=len(graph.edges))
    graph._valid = list(report.errors)
    return report.result()


def is_homomorphism(hom):
    s, t = hom.source, hom.target
    if len(hom.image) != s.order or any(y < 0 or y >= t.order for y in hom.image):
        return False
    return all(hom.image[s.mul(a, b)] == t.mul(hom.image[a], hom.image[b])
               for a in s.elements for b in s.elements)


def _volume(graph):
    return sum((d.length / d.group.order for d in graph.edges), Fraction(0))


def _euler(graph):
    return (sum((Fraction(1, v.group.order) for v in graph.vertices), Fraction(0))
            - sum((Fraction(1, d.group.order) for d in graph.edges), Fraction(0)))


def volume(graph):
    """Sum of edge lengths, each divided by the order of its edge group."""
    graph.require_valid()
    return _volume(graph)


def unweighted_volume(graph):
    return sum((d.length for d in graph.edges), Fraction(0))


def euler_char(graph):
    graph.require_valid()
    return _euler(graph)


def scale(graph, factor):
    """
    Args:
        graph: GraphOfGroups
        factor: positive rational

    Returns:
        GraphOfGroups: every length multiplied by factor; graph itself when factor is 1

    Raises:
        NonpositiveFactor: if factor <= 0
    """
    factor = Fraction(factor)
    if factor <= 0:
        raise NonpositiveFactor(factor)
    if factor == 1:
        return graph
    return graph.with_lengths([d.length * factor for d in graph.edges])


def normalize_volume(graph):
    """Rescale so that the volume is exactly 1."""
    vol = volume(graph)
    return scale(graph, 1 / vol)


# Edge paths

@dataclass(frozen=True)
class EdgePath:
    """
    A decorated path g0 e1 g1 ... ek gk.

    ``elements[i]`` lives in the vertex group at the i-th vertex of the
    path, ``edges[i]`` is the signed id of e_{i+1}.
    """

    start: int
    end: int
    elements: tuple
    edges: tuple
    loop: bool = False

    @property
    def size(self):
        return len(self.edges)

    def word(self):
        out = [self.elements[0]]
        for e, g in zip(self.edges, self.elements[1:]):
            out += [e, g]
        return out

    def as_loop(self):
        return EdgePath(self.start, self.end, self.elements, self.edges, True)

    def __str__(self):
        parts = [str(self.elements[0])]
        for e, g in zip(self.edges, self.elements[1:]):
            parts.append(f"e{e}" if e > 0 else f"~e{-e}")
            parts.append(str(g))
        return " ".join(parts)


def make_path(graph, start, word, loop=False):
    """
    Build and check an EdgePath from an alternating list [g0, e1, g1, ...].

    Raises:
        InconsistentPath: when the word does not chain through the graph.
    """
    word = list(word)
    if len(word) % 2 == 0:
        raise InconsistentPath("word must alternate elements and edges and end with an element")
    elements = tuple(word[0::2])
    edges = tuple(word[1::2])
    end = start
    for e in edges:
        if graph.origin(e) != end:
            raise InconsistentPath(f"edge {e} does not issue from vertex {end}")
        end = graph.terminus(e)
    path = EdgePath(start, end, elements, edges, loop)
    check_path(graph, path)
    return path


def check_path(graph, path):
    if len(path.elements) != len(path.edges) + 1:
        raise InconsistentPath("element count must exceed edge count by one")
    if not 0 <= path.start < len(graph.vertices):
        raise InconsistentPath(f"start vertex {path.start} does not exist")
    v = path.start
    for i, g in enumerate(path.elements):
        order = graph.vertex_group(v).order
        if not isinstance(g, int) or not 0 <= g < order:
            raise InconsistentPath(f"element {g} at position {i} is not in the group at vertex {v}")
        if i < len(path.edges):
            e = path.edges[i]
            if graph.origin(e) != v:
                raise InconsistentPath(f"edge {e} does not issue from vertex {v}")
            v = graph.terminus(e)
    if v != path.end:
        raise InconsistentPath(f"path ends at {v}, not {path.end}")
    if path.loop and path.start != path.end:
        raise InconsistentPath("loop flag set on an open path")


def trivial_path(vertex, element=0, loop=False):
    return EdgePath(vertex, vertex, (element,), (), loop)


def edge_path(graph, e):
    """The path 1 e 1."""
    return EdgePath(graph.origin(e), graph.terminus(e), (0, 0), (e,))


def reduce_path(graph, path):
    """Apply the backtrack rewrite until no reducible subpath remains."""
    check_path(graph, path)
    elements = [path.elements[0]]
    edges = []
    for e, g in zip(path.edges, path.elements[1:]):
        if edges and e == -edges[-1]:
            last = edges[-1]
            pre = graph.alpha(last).preimage(elements[-1])
            if pre is not None:
                edges.pop()
                elements.pop()
                group = graph.vertex_group(graph.origin(last))
                elements[-1] = group.prod(elements[-1], graph.alpha(e)(pre), g)
                continue
        edges.append(e)
        elements.append(g)
    return EdgePath(path.start, path.end, tuple(elements), tuple(edges), path.loop)


def reducible_positions(graph, path):
    """Indices i such that edges i, i+1 with the element between form a backtrack."""
    out = []
    for i in range(len(path.edges) - 1):
        e, f = path.edges[i], path.edges[i + 1]
        if f == -e and graph.alpha(e).preimage(path.elements[i + 1]) is not None:
            out.append(i)
    return out


def reduce_at(graph, path, i):
    """Rewrite the single backtrack starting at edge index i."""
    e = path.edges[i]
    pre = graph.alpha(e).preimage(path.elements[i + 1])
    if path.edges[i + 1] != -e or pre is None:
        raise InconsistentPath(f"no backtrack at position {i}")
    group = graph.vertex_group(graph.origin(e))
    merged = group.prod(path.elements[i], graph.alpha(-e)(pre), path.elements[i + 2])
    elements = path.elements[:i] + (merged,) + path.elements[i + 3:]
    edges = path.edges[:i] + path.edges[i + 2:]
    return EdgePath(path.start, path.end, elements, edges, path.loop)


def is_reduced_path(graph, path):
    return not reducible_positions(graph, path)


def reverse_path(graph, path):
    """The inverse path, elements inverted in their vertex groups."""
    elements = []
    verts = [path.start]
    for e in path.edges:
        verts.append(graph.terminus(e))
    for g, v in zip(reversed(path.elements), reversed(verts)):
        elements.append(graph.vertex_group(v).inv(g))
    edges = tuple(-e for e in reversed(path.edges))
    return EdgePath(path.end, path.start, tuple(elements), edges, path.loop)


def concat_paths(graph, *paths):
    """Concatenate paths end to start, merging the junction elements."""
    first = paths[0]
    elements = list(first.elements)
    edges = list(first.edges)
    end = first.end
    for p in paths[1:]:
        if p.start != end:
            raise InconsistentPath(f"cannot join a path ending at {end} to one starting at {p.start}")
        elements[-1] = graph.vertex_group(end).mul(elements[-1], p.elements[0])
        elements += p.elements[1:]
        edges += p.edges
        end = p.end
    return EdgePath(first.start, end, tuple(elements), tuple(edges), False)


def multiply_left(graph, g, path):
    group = graph.vertex_group(path.start)
    return EdgePath(path.start, path.end, (group.mul(g, path.elements[0]),) + path.elements[1:],
                    path.edges, path.loop)


def multiply_right(graph, path, g):
    group = graph.vertex_group(path.end)
    return EdgePath(path.start, path.end, path.elements[:-1] + (group.mul(path.elements[-1], g),),
                    path.edges, path.loop)


def paths_equal(graph, first, second):
    """True iff the two paths represent the same groupoid element."""
    if first.start != second.start or first.end != second.end:
        return False
    both = reduce_path(graph, concat_paths(graph, first, reverse_path(graph, second)))
    return not both.edges and both.elements[0] == 0


def path_length(graph, path):
    return sum((graph.length(e) for e in path.edges), Fraction(0))


# Loops

def loop_pairs(graph, loop):
    """
    Cyclic word of a loop as ((e1, l1), ..., (ek, lk)).

    ``l_i`` is the element after ``e_i``; the last one absorbs g0, so the
    cyclic word starts right before e1.
    """
    if not loop.edges:
        return ()
    group = graph.vertex_group(loop.end)
    labels = list(loop.elements[1:])
    labels[-1] = group.mul(labels[-1], loop.elements[0])
    return tuple(zip(loop.edges, labels))


def loop_from_pairs(graph, pairs):
    """Inverse of loop_pairs: the loop 1 e1 l1 ... ek lk at origin(e1)."""
    pairs = tuple(pairs)
    start = graph.origin(pairs[0][0])
    elements = (0,) + tuple(label for _, label in pairs)
    edges = tuple(e for e, _ in pairs)
    return EdgePath(start, start, elements, edges, True)


def is_cyclically_reduced_pairs(graph, pairs):
    k = len(pairs)
    for i in range(k):
        e, label = pairs[i]
        nxt = pairs[(i + 1) % k][0]
        if nxt == -e and graph.alpha(e).preimage(label) is not None:
            return False
    return True


def is_cyclically_reduced(graph, loop):
    reduced = is_reduced_path(graph, loop)
    return reduced and is_cyclically_reduced_pairs(graph, loop_pairs(graph, loop))


def cyclic_reduce(graph, loop):
    """
    Cyclically reduce a loop.

    The loop is first reduced as a path. The conjugator only records edges
    peeled off by wrap-around cancellation afterwards, so a loop that dies
    under path reduction (``a e 1 e^-1`` reduces to ``a``) comes back with
    the trivial conjugator at its own start.

    Args:
        graph: the graph of groups the loop lives in
        loop: closed edge path

    Returns:
        tuple: (reduced loop, conjugator) with
        ``loop == conjugator * reduced * conjugator^-1``. The reduced loop
        has no edges exactly when the input is elliptic.

    Raises:
        InconsistentPath: if the path is not closed
    """
    if not loop.loop or loop.start != loop.end:
        raise InconsistentPath("cyclic reduction needs a closed loop")
    p = reduce_path(graph, loop)
    conjugator = trivial_path(loop.start)
    while len(p.edges) >= 1:
        first, last = p.edges[0], p.edges[-1]
        if first != -last:
            break
        group = graph.vertex_group(p.end)
        wrap = group.mul(p.elements[-1], p.elements[0])
        pre = graph.alpha(last).preimage(wrap)
        if pre is None:
            break
        step = EdgePath(p.start, graph.terminus(first), (p.elements[0], 0), (first,))
        conjugator = concat_paths(graph, conjugator, step)
        base = graph.terminus(first)
        inner = p.elements[1:-1]
        tail_group = graph.vertex_group(base)
        fixed = tail_group.mul(inner[-1], graph.alpha(first)(pre))
        elements = inner[:-1] + (fixed,)
        p = EdgePath(base, base, elements, p.edges[1:-1], True)
    return p, conjugator


def is_hyperbolic(graph, loop):
    return bool(cyclic_reduce(graph, loop)[0].edges)


def translation_length(graph, loop):
    """
    Length of the cyclically reduced form of a loop.

    Args:
        graph: GraphOfGroups carrying the lengths
        loop: closed EdgePath

    Returns:
        Fraction: 0 exactly for elliptic loops
    """
    reduced, _ = cyclic_reduce(graph, loop)
    return path_length(graph, reduced)


def loop_power(graph, loop, k):
    """k-fold concatenation of a loop with itself, k >= 1."""
    path = loop
    for _ in range(k - 1):
        path = concat_paths(graph, path, loop)
    return path.as_loop()


def loop_from_path(graph, path):
    """Close a path whose ends meet into a loop."""
    check_path(graph, path)
    if path.start != path.end:
        raise InconsistentPath(f"path from {path.start} to {path.end} is not closed")
    return path.as_loop()


def path_from_loop(loop):
    return EdgePath(loop.start, loop.end, loop.elements, loop.edges, False)


def invert_pairs(graph, pairs):
    k = len(pairs)
    out = []
    for j in range(k):
        e = pairs[k - 1 - j][0]
        label = pairs[k - 2 - j][1] if j < k - 1 else pairs[k - 1][1]
        group = graph.vertex_group(graph.origin(e))
        out.append((-e, group.inv(label)))
    return tuple(out)


def _slide_orbit(graph, pairs):
    """All pair sequences obtained by sliding edge-group elements across edges."""
    k = len(pairs)
    edge_groups = [graph.edge_group(e).order for e, _ in pairs]
    seen = set()
    for choice in product(*(range(n) for n in edge_groups)):
        out = []
        for i, (e, label) in enumerate(pairs):
            group = graph.vertex_group(graph.terminus(e))
            a = choice[i]
            nxt = pairs[(i + 1) % k][0]
            b = choice[(i + 1) % k]
            left = group.inv(graph.alpha(e)(a))
            right = graph.alpha(-nxt)(b)
            out.append((e, group.prod(left, label, right)))
        seen.add(tuple(out))
    return seen


def edge_rank(e):
    """Serialization rank: e1, -e1, e2, -e2, ... map to 1, 2, 3, 4, ..."""
    return 2 * e - 1 if e > 0 else -2 * e


def edge_unrank(r):
    return (r + 1) // 2 if r % 2 else -(r // 2)


def canonical_key(graph, loop_or_pairs):
    """
    Least serialized form of a cyclically reduced loop under rotation,
    inversion and edge-group sliding. Elliptic loops get the empty key.

    The key alternates edge ranks (see ``edge_rank``) and labels.
    """
    if isinstance(loop_or_pairs, EdgePath):
        reduced, _ = cyclic_reduce(graph, loop_or_pairs)
        pairs = loop_pairs(graph, reduced)
    else:
        pairs = tuple(loop_or_pairs)
    if not pairs:
        return ()
    best = None
    for base in (pairs, invert_pairs(graph, pairs)):
        for variant in _slide_orbit(graph, base):
            for r in range(len(variant)):
                rotated = variant[r:] + variant[:r]
                key = tuple(x for e, label in rotated for x in (edge_rank(e), label))
                if best is None or key < best:
                    best = key
    return best


def pairs_from_key(key):
    return tuple((edge_unrank(r), label) for r, label in zip(key[0::2], key[1::2]))
