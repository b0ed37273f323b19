"""
Maps between graphs of groups: path images, slopes, tension, gates, legality.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

from core.errors import AllEdgesCollapsed, EllipticLoop, InconsistentPath
from core.fingroup import GroupHom, compose_homs, identity_hom
from core.gog import (
    EdgePath, check_path, concat_paths, cyclic_reduce, edge_path, euler_char,
    is_homomorphism, is_reduced_path, loop_pairs, multiply_left, multiply_right, path_length,
    reduce_path, reverse_path, translation_length, trivial_path,
)
from core.validator import ReportBuilder

logger = logging.getLogger(__name__)


class GoGMap:
    """
    A conjugator-free map of graphs of groups.

    ``edge_image[i]`` is the image of the positive edge ``i + 1``; the
    image of ``-(i + 1)`` is its reverse.
    """

    def __init__(self, source, target, vertex_image, vertex_hom, edge_image, name=None):
        self.source = source
        self.target = target
        self.vertex_image = tuple(vertex_image)
        self.vertex_hom = tuple(vertex_hom)
        self.edge_image = tuple(edge_image)
        self.name = name

    def image_of_edge(self, e):
        path = self.edge_image[abs(e) - 1]
        return path if e > 0 else reverse_path(self.target, path)

    @property
    def tight(self):
        return all(is_reduced_path(self.target, p) for p in self.edge_image)

    def collapsed(self, e):
        """True if edge e is sent to a path without edges."""
        return not self.edge_image[abs(e) - 1].edges

    def slope(self, e):
        """
        Stretch of a single edge.

        Args:
            e: signed edge id of the source

        Returns:
            Fraction: length of the image path over the length of e
        """
        return path_length(self.target, self.edge_image[abs(e) - 1]) / self.source.length(e)

    def __repr__(self):
        return f"GoGMap({self.name or ''}: {self.source!r} -> {self.target!r})"


def identity_map(graph):
    return GoGMap(graph, graph, range(len(graph.vertices)),
                  [identity_hom(v.group) for v in graph.vertices],
                  [edge_path(graph, e) for e in graph.positive_edges()],
                  name="identity")


def with_graphs(f, source, target):
    """The same combinatorial map between rescaled copies of its graphs."""
    return GoGMap(source, target, f.vertex_image, f.vertex_hom, f.edge_image, name=f.name)


def validate_map(f):
    """
    Check shapes, vertex homs, edge-image endpoints and the edge relators of f.

    Returns:
        dict: report; ``valid`` is false when any relator fails
    """
    report = ReportBuilder(f.name or "map")
    src, tgt = f.source, f.target
    report.check(len(f.vertex_image) == len(src.vertices), "vertex_image has the wrong number of entries")
    report.check(len(f.vertex_hom) == len(src.vertices), "vertex_hom has the wrong number of entries")
    report.check(len(f.edge_image) == len(src.edges), "edge_image has the wrong number of entries")
    if not report.ok:
        return report.result()
    for v, (w, hom) in enumerate(zip(f.vertex_image, f.vertex_hom)):
        if not 0 <= w < len(tgt.vertices):
            report.error(f"vertex {v} maps to missing vertex {w}")
            continue
        if hom.source != src.vertex_group(v) or hom.target != tgt.vertex_group(w):
            report.error(f"vertex_hom at {v} has the wrong source or target")
        elif not is_homomorphism(hom):
            report.error(f"vertex_hom at {v} is not a homomorphism")
        elif not hom.injective:
            report.error(f"vertex_hom at {v} is not injective")
    if not report.ok:
        return report.result()
    for e in src.positive_edges():
        path = f.edge_image[e - 1]
        label = f"e{e}"
        try:
            check_path(tgt, path)
        except InconsistentPath as exc:
            report.error(f"edge image {label} is inconsistent: {exc.reason}")
            continue
        if path.start != f.vertex_image[src.origin(e)] or path.end != f.vertex_image[src.terminus(e)]:
            report.error(f"edge image {label} does not join the images of its endpoints")
            continue
        if not is_reduced_path(tgt, path):
            report.error(f"non-reduced edge image {label}")
            continue
        for sign in (1, -1):
            _check_relator(f, sign * e, report)
    report.note(euler_source=euler_char(src), euler_target=euler_char(tgt))
    if euler_char(src) != euler_char(tgt):
        report.warn("source and target Euler characteristics differ")
    return report.result()


def _check_relator(f, e, report):
    src, tgt = f.source, f.target
    image = f.image_of_edge(e)
    u, w = src.origin(e), src.terminus(e)
    for c in src.edge_group(e).elements:
        inner = f.vertex_hom[w](src.alpha(e)(c))
        conj = concat_paths(tgt, multiply_right(tgt, image, inner), reverse_path(tgt, image))
        reduced = reduce_path(tgt, conj)
        expected = f.vertex_hom[u](src.alpha(-e)(c))
        if reduced.edges or reduced.elements[0] != expected:
            report.error(f"edge e{e} fails compatibility at edge-group element {c}")
            return


def map_path_raw(f, path):
    """Substitute images without reducing."""
    tgt = f.target
    v = path.start
    out = trivial_path(f.vertex_image[v], f.vertex_hom[v](path.elements[0]))
    for e, g in zip(path.edges, path.elements[1:]):
        w = f.source.terminus(e)
        out = concat_paths(tgt, out, f.image_of_edge(e))
        out = multiply_right(tgt, out, f.vertex_hom[w](g))
    return EdgePath(out.start, out.end, out.elements, out.edges, path.loop)


def map_path(f, path):
    """Reduced image of a path."""
    return reduce_path(f.target, map_path_raw(f, path))


def map_loop(f, loop):
    """Cyclically reduced image of a loop."""
    return cyclic_reduce(f.target, map_path_raw(f, loop).as_loop())[0]


def compose(g, f):
    """
    Return g after f.

    Args:
        g: GoGMap whose source is the target of f
        f: GoGMap

    Returns:
        GoGMap: from f.source to g.target, edge images reduced in the target
    """
    vertex_image = [g.vertex_image[w] for w in f.vertex_image]
    vertex_hom = [compose_homs(g.vertex_hom[w], h) for w, h in zip(f.vertex_image, f.vertex_hom)]
    edge_image = [map_path(g, p) for p in f.edge_image]
    name = f"{g.name}*{f.name}" if g.name and f.name else None
    return GoGMap(f.source, g.target, vertex_image, vertex_hom, edge_image, name=name)


def lipschitz_constant(f):
    """
    Largest slope over the edges f does not collapse.

    Args:
        f: GoGMap

    Returns:
        Fraction: the Lipschitz constant of f

    Raises:
        AllEdgesCollapsed: if every source edge is collapsed
    """
    slopes = [f.slope(e) for e in f.source.positive_edges() if not f.collapsed(e)]
    if not slopes:
        raise AllEdgesCollapsed()
    return max(slopes)


def tension_subgraph(f):
    """Signed edges of maximal slope, closed under reversal."""
    top = lipschitz_constant(f)
    out = []
    for e in f.source.positive_edges():
        if not f.collapsed(e) and f.slope(e) == top:
            out += [e, -e]
    return frozenset(out)


def is_marked_isometry(f):
    """True iff f sends edges bijectively onto single edges of equal length with vertex isomorphisms."""
    src, tgt = f.source, f.target
    if len(src.vertices) != len(tgt.vertices) or len(src.edges) != len(tgt.edges):
        return False
    if sorted(f.vertex_image) != list(range(len(tgt.vertices))):
        return False
    if any(h.source.order != h.target.order or not h.injective for h in f.vertex_hom):
        return False
    hit = set()
    for e in src.positive_edges():
        path = f.edge_image[e - 1]
        if len(path.edges) != 1 or tgt.length(path.edges[0]) != src.length(e):
            return False
        hit.add(abs(path.edges[0]))
    return len(hit) == len(tgt.edges)


# Directions and gates

@dataclass(frozen=True, order=True)
class Direction:
    vertex: int
    edge: int
    coset: int


class GateStructure:
    """Per vertex, a partition of the directions into gates."""

    def __init__(self, blocks, degenerate):
        self.blocks = blocks
        self.degenerate = frozenset(degenerate)
        self._gate = {}
        for v, gates in blocks.items():
            for i, gate in enumerate(gates):
                for d in gate:
                    self._gate[d] = (v, i)

    def gate_of(self, direction):
        return self._gate[direction]

    def same_gate(self, first, second):
        return self._gate[first] == self._gate[second]

    def gate_count(self, v):
        return len(self.blocks[v])

    def as_dict(self):
        return {v: [[(d.edge, d.coset) for d in gate] for gate in gates] for v, gates in self.blocks.items()}


def directions_at(graph, v):
    out = []
    group = graph.vertex_group(v)
    for e in graph.edges_at(v):
        keys = sorted({graph.direction_key(e, g) for g in group.elements})
        out += [Direction(v, e, k) for k in keys]
    return out


def image_direction(f, direction):
    """Direction of f(direction) in the target, or None if its edge collapses."""
    path = multiply_left(f.target, f.vertex_hom[direction.vertex](direction.coset),
                         f.image_of_edge(direction.edge))
    if not path.edges:
        return None
    first = path.edges[0]
    return Direction(path.start, first, f.target.direction_key(first, path.elements[0]))


def _gates_at(f, v):
    groups = {}
    degenerate = []
    for d in directions_at(f.source, v):
        image = image_direction(f, d)
        if image is None:
            degenerate.append(d)
            key = ("collapsed", d)
        else:
            key = ("image", image)
        groups.setdefault(key, []).append(d)
    gates = sorted((sorted(block) for block in groups.values()), key=lambda block: block[0])
    return gates, degenerate


def gates(f, threads=1):
    """Partition directions by their image directions."""
    lipschitz_constant(f)
    vertices = range(len(f.source.vertices))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda v: _gates_at(f, v), vertices))
    else:
        results = [_gates_at(f, v) for v in vertices]
    blocks = {}
    degenerate = []
    for v, (found, dead) in zip(vertices, results):
        blocks[v] = found
        degenerate += dead
    return GateStructure(blocks, degenerate)


def loop_turns(graph, loop):
    """
    Turns crossed by a cyclically reduced loop, one per edge, in order.

    Turn i sits after edge e_i: the incoming direction of -e_i at the
    identity coset against the outgoing direction label_i * e_{i+1}.
    """
    pairs = loop_pairs(graph, loop)
    k = len(pairs)
    out = []
    for i, (e, label) in enumerate(pairs):
        nxt = pairs[(i + 1) % k][0]
        v = graph.terminus(e)
        incoming = Direction(v, -e, graph.direction_key(-e, 0))
        outgoing = Direction(v, nxt, graph.direction_key(nxt, label))
        out.append((incoming, outgoing))
    return out


def is_legal(graph, loop, gate_structure):
    for first, second in loop_turns(graph, loop):
        if first in gate_structure.degenerate or second in gate_structure.degenerate:
            continue
        if gate_structure.same_gate(first, second):
            return False
    return True


def illegal_turns(graph, loop, gate_structure):
    return [(i, turn) for i, turn in enumerate(loop_turns(graph, loop))
            if turn[0] not in gate_structure.degenerate
            and turn[1] not in gate_structure.degenerate
            and gate_structure.same_gate(*turn)]


def loop_ratio(f, loop):
    """Stretch of a hyperbolic loop: image translation length over its own."""
    own = translation_length(f.source, loop)
    if own == 0:
        raise EllipticLoop()
    return Fraction(path_length(f.target, map_loop(f, loop))) / own


def witness_certificate(f, loop):
    """
    Check that a loop certifies the Lipschitz constant of f.

    Returns:
        dict: ``in_tension``, ``legal``, ``ratio``, ``lipschitz``,
        ``ratio_matches`` and the overall ``certified`` flag.
    """
    reduced, _ = cyclic_reduce(f.source, loop.as_loop())
    if not reduced.edges:
        raise EllipticLoop()
    tension = tension_subgraph(f)
    in_tension = all(e in tension for e in reduced.edges)
    legal = is_legal(f.source, reduced, gates(f))
    ratio = loop_ratio(f, reduced)
    lip = lipschitz_constant(f)
    return {
        "in_tension": in_tension,
        "legal": legal,
        "ratio": ratio,
        "lipschitz": lip,
        "ratio_matches": ratio == lip,
        "certified": in_tension and legal and ratio == lip,
    }


def make_map(source, target, vertex_image, vertex_hom, edge_image, name=None):
    """Build a GoGMap from raw image arrays; homs are wrapped without checks."""
    homs = []
    for v, (w, image) in enumerate(zip(vertex_image, vertex_hom)):
        if isinstance(image, GroupHom):
            homs.append(image)
        else:
            homs.append(GroupHom(source.vertex_group(v), target.vertex_group(w), image, check=False))
    return GoGMap(source, target, vertex_image, homs, edge_image, name=name)
