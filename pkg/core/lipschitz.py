"""
Stretch factors and the Lipschitz distance.

The stretch factor of a marking change is the largest ratio of translation
lengths over hyperbolic elements. It is attained on a finite set of
candidate loops of five shapes: embedded simple loops, figure-eights,
barbells, and barbells with one or both lobes replaced by a non-free vertex.
``brute_force_stretch`` searches every short loop instead and serves as an
independent check.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product

import networkx as nx

from core.errors import (
    BudgetExceeded, DepthLimitExceeded, NoHyperbolics, NotImmersed, NotSausage,
    NotVolumeOne,
)
from core.gog import (
    EdgePath, canonical_key, cyclic_reduce, is_cyclically_reduced_pairs,
    loop_from_pairs, loop_pairs, normalize_volume, pairs_from_key, path_length,
    volume,
)
from core.morphism import map_loop, map_path_raw, with_graphs
from utils.config import BRUTE_FORCE_MAX_EDGES, CANDIDATE_BUDGET, NODE_BUDGET

logger = logging.getLogger(__name__)

SHAPES = ("simple_loop", "figure_eight", "barbell", "singly_degenerate", "doubly_degenerate")


@dataclass(frozen=True)
class Candidate:
    shape: str
    loop: EdgePath
    key: tuple


# Underlying walks

def cycle_vertices(graph, cycle):
    return [graph.origin(e) for e in cycle]


def rotate_to(graph, cycle, vertex):
    verts = cycle_vertices(graph, cycle)
    i = verts.index(vertex)
    return cycle[i:] + cycle[:i]


def invert_walk(walk):
    return tuple(-e for e in reversed(walk))


def _steps(graph, u, w):
    """Signed edges from u to w, for u != w."""
    return [e for e in graph.edges_at(u) if graph.terminus(e) == w]


def _normal_cycle(graph, cycle):
    """Rotation from the least vertex, in the smaller of the two orientations."""
    start = min(cycle_vertices(graph, cycle))
    return min(rotate_to(graph, cycle, start), rotate_to(graph, invert_walk(cycle), start))


def embedded_cycles(graph):
    """
    Embedded cycles as closed tuples of signed edges, one orientation each.

    Cycles through three or more vertices come from ``nx.simple_cycles`` on
    the simple graph underneath; every choice among parallel edges along
    such a cycle gives its own embedded cycle. Loop edges and pairs of
    parallel edges are added directly.

    Returns:
        list: cycles ordered by length, then edge set
    """
    found = {(e,) for e in graph.positive_edges() if graph.is_loop(e)}
    simple = nx.Graph()
    simple.add_edges_from((u, w) for u, w in graph.nx_graph().edges() if u != w)
    for u, w in simple.edges():
        for a, b in combinations(_steps(graph, u, w), 2):
            found.add(_normal_cycle(graph, (a, -b)))
    for nodes in nx.simple_cycles(simple):
        hops = [_steps(graph, nodes[i], nodes[(i + 1) % len(nodes)]) for i in range(len(nodes))]
        for cycle in product(*hops):
            found.add(_normal_cycle(graph, cycle))
    return sorted(found, key=lambda c: (len(c), sorted(abs(x) for x in c), c))


def simple_paths(graph, u, w, avoid=frozenset()):
    """Embedded edge paths from u to w whose inner vertices avoid the given set."""
    multi = graph.nx_graph(e for e in graph.positive_edges() if not graph.is_loop(e))
    allowed = multi.subgraph(v for v in multi if v not in avoid or v in (u, w))
    out = [tuple(graph.oriented(key, a) for a, _, key in route)
           for route in nx.all_simple_edge_paths(allowed, u, w)]
    return sorted(out, key=lambda p: (len(p), p))


def candidate_walks(graph):
    """Yield (shape, closed walk) for every underlying shape of a candidate."""
    cycles = embedded_cycles(graph)
    vsets = [set(cycle_vertices(graph, c)) for c in cycles]
    esets = [{abs(e) for e in c} for c in cycles]
    for c in cycles:
        yield "simple_loop", c
    for i, j in combinations(range(len(cycles)), 2):
        common = vsets[i] & vsets[j]
        if len(common) == 1 and not esets[i] & esets[j]:
            x = next(iter(common))
            first = rotate_to(graph, cycles[i], x)
            second = rotate_to(graph, cycles[j], x)
            yield "figure_eight", first + second
            yield "figure_eight", first + invert_walk(second)
    for i, j in combinations(range(len(cycles)), 2):
        if vsets[i] & vsets[j]:
            continue
        avoid = vsets[i] | vsets[j]
        for x in sorted(vsets[i]):
            for y in sorted(vsets[j]):
                for seg in simple_paths(graph, x, y, avoid):
                    first = rotate_to(graph, cycles[i], x)
                    second = rotate_to(graph, cycles[j], y)
                    yield "barbell", first + seg + second + invert_walk(seg)
                    yield "barbell", first + seg + invert_walk(second) + invert_walk(seg)
    nonfree = [v for v in range(len(graph.vertices)) if not graph.is_free_vertex(v)]
    for u in nonfree:
        for c, vs in zip(cycles, vsets):
            if u in vs:
                continue
            for x in sorted(vs):
                for seg in simple_paths(graph, u, x, vs):
                    yield "singly_degenerate", seg + rotate_to(graph, c, x) + invert_walk(seg)
    for u, w in combinations(nonfree, 2):
        for seg in simple_paths(graph, u, w):
            yield "doubly_degenerate", seg + invert_walk(seg)


def label_choices(graph, walk, i):
    """Labels after edge i; all but the last are taken up to sliding onto the next edge."""
    group = graph.vertex_group(graph.terminus(walk[i]))
    if i == len(walk) - 1:
        return list(group.elements)
    nxt = walk[i + 1]
    return sorted({graph.direction_key(nxt, g) for g in group.elements})


def decorated_loops(graph, walk):
    """Every cyclically reduced decoration of a closed walk, as pair tuples."""
    choices = [label_choices(graph, walk, i) for i in range(len(walk))]
    for labels in product(*choices):
        pairs = tuple(zip(walk, labels))
        if is_cyclically_reduced_pairs(graph, pairs):
            yield pairs


def enumerate_candidates(graph, budget=None):
    """
    Decorated candidate loops, deduplicated by canonical key.

    Raises:
        NoHyperbolics: when no candidate is hyperbolic.
        BudgetExceeded: when more than ``budget`` decorations are examined.
    """
    graph.require_valid()
    budget = CANDIDATE_BUDGET if budget is None else budget
    seen = {}
    examined = 0
    for shape, walk in candidate_walks(graph):
        for pairs in decorated_loops(graph, walk):
            examined += 1
            if examined > budget:
                raise BudgetExceeded("candidate enumeration", budget)
            key = canonical_key(graph, pairs)
            if key not in seen:
                seen[key] = Candidate(shape, loop_from_pairs(graph, pairs_from_key(key)), key)
    if not seen:
        raise NoHyperbolics()
    logger.debug("%d candidates from %d decorated walks", len(seen), examined)
    return [seen[k] for k in sorted(seen)]


# Ratios

def ratio(f, loop):
    """Translation length of the image over that of the loop (cyclically reduced input)."""
    own = path_length(f.source, loop)
    return Fraction(path_length(f.target, map_loop(f, loop))) / own


def _ratios(f, loops, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda c: ratio(f, c.loop), loops))
    return [ratio(f, c.loop) for c in loops]


def stretch_factor(f, threads=1, budget=None):
    """
    Maximal candidate ratio.

    Returns:
        tuple: (lambda, witness) where the witness is the least maximizing
        candidate in canonical order.
    """
    candidates = enumerate_candidates(f.source, budget=budget)
    ratios = _ratios(f, candidates, threads)
    best = max(ratios)
    witness = next(c for c, r in zip(candidates, ratios) if r == best)
    logger.info("stretch factor %s over %d candidates", best, len(candidates))
    return best, witness


def candidate_ratios(f, threads=1, budget=None):
    """
    Every candidate loop of the source with its stretch ratio under f.

    Returns:
        list: (Candidate, Fraction) pairs in candidate order
    """
    candidates = enumerate_candidates(f.source, budget=budget)
    return list(zip(candidates, _ratios(f, candidates, threads)))


def distance(f, normalize=False, threads=1, budget=None):
    """
    Lipschitz distance between the two marked graphs of f.

    Returns:
        tuple: (lambda, witness, f) with f rescaled when ``normalize`` is set.
        The distance itself is log(lambda); rendering is left to the caller.
    """
    src_vol, tgt_vol = volume(f.source), volume(f.target)
    if normalize:
        f = with_graphs(f, normalize_volume(f.source), normalize_volume(f.target))
    else:
        if src_vol != 1:
            raise NotVolumeOne("source", src_vol)
        if tgt_vol != 1:
            raise NotVolumeOne("target", tgt_vol)
    lam, witness = stretch_factor(f, threads=threads, budget=budget)
    return lam, witness, f


def brute_force_stretch(f, max_edges=None, budget=None):
    """
    Largest ratio over every cyclically reduced loop with at most max_edges edges.

    Returns:
        tuple: (lambda_k, argmax loop) with the argmax least in canonical order.

    Raises:
        DepthLimitExceeded: if max_edges is not in 1..BRUTE_FORCE_MAX_EDGES
    """
    graph = f.source
    graph.require_valid()
    max_edges = BRUTE_FORCE_MAX_EDGES if max_edges is None else max_edges
    if not 1 <= max_edges <= BRUTE_FORCE_MAX_EDGES:
        raise DepthLimitExceeded(max_edges, BRUTE_FORCE_MAX_EDGES)
    budget = NODE_BUDGET if budget is None else budget
    order = {e: i for i, e in enumerate(graph.signed_edges())}
    best = [None, None]
    nodes = 0

    def consider(pairs):
        if not is_cyclically_reduced_pairs(graph, pairs):
            return
        loop = loop_from_pairs(graph, pairs)
        r = ratio(f, loop)
        if best[0] is None or r > best[0]:
            best[0], best[1] = r, canonical_key(graph, pairs)
        elif r == best[0]:
            key = canonical_key(graph, pairs)
            if key < best[1]:
                best[1] = key

    def extend(pairs):
        nonlocal nodes
        nodes += 1
        if nodes > budget:
            raise BudgetExceeded("brute-force search", budget)
        first = pairs[0][0]
        last, label = pairs[-1]
        v = graph.terminus(last)
        if v == graph.origin(first):
            consider(pairs)
        if len(pairs) == max_edges:
            return
        for nxt in graph.edges_at(v):
            if order[nxt] < order[first]:
                continue
            if label != graph.direction_key(nxt, label):
                continue
            if nxt == -last and graph.alpha(last).preimage(label) is not None:
                continue
            for g in graph.vertex_group(graph.terminus(nxt)).elements:
                extend(pairs + ((nxt, g),))

    for first in graph.signed_edges():
        for g in graph.vertex_group(graph.terminus(first)).elements:
            extend(((first, g),))
    if best[0] is None:
        raise NoHyperbolics()
    logger.debug("brute force visited %d nodes", nodes)
    return best[0], loop_from_pairs(graph, pairs_from_key(best[1]))


# Sausages

def is_immersed(f, loop):
    """True iff the raw image of a cyclically reduced loop needs no cancellation."""
    raw = map_path_raw(f, loop).as_loop()
    reduced, _ = cyclic_reduce(f.target, raw)
    return len(reduced.edges) == len(raw.edges) and len(raw.edges) > 0


def _visits(graph, pairs):
    return [graph.terminus(e) for e, _ in pairs]


def _triple_points(graph, pairs):
    verts = _visits(graph, pairs)
    for v in sorted(set(verts)):
        where = [i for i, x in enumerate(verts) if x == v]
        if len(where) >= 3:
            yield where[:3]


def _double_pairs(graph, pairs):
    verts = _visits(graph, pairs)
    out = []
    for i, j in combinations(range(len(verts)), 2):
        if verts[i] == verts[j]:
            out.append((i, j))
    return out


def _crossings(graph, pairs):
    for (a, c), (b, d) in combinations(_double_pairs(graph, pairs), 2):
        if a < b < c < d:
            yield a, b, c, d
        elif b < a < d < c:
            yield b, a, d, c


def _bad_triangles(graph, pairs):
    doubles = _double_pairs(graph, pairs)
    k = len(pairs)
    arcs = []
    for i, j in doubles:
        arcs.append((i, j))
        arcs.append((j, i + k))
    for x, y, z in combinations(sorted(arcs), 3):
        if x[1] <= y[0] and y[1] <= z[0] and z[1] <= x[0] + k:
            yield x, y, z


def _segment(pairs, i, j):
    """Pairs strictly after visit i up to and including visit j (cyclic)."""
    k = len(pairs)
    if i == j:
        return ()
    if j < i:
        j += k
    return tuple(pairs[m % k] for m in range(i + 1, j + 1))


def _as_open(graph, segment):
    """A pair slice as an open path 1 e1 l1 ... em 1 (its last label dropped)."""
    edges = tuple(e for e, _ in segment)
    labels = tuple(label for _, label in segment[:-1])
    return edges, labels


def _joined(graph, parts):
    """
    Close up a sequence of open pieces (edges, inner labels) into loops,
    trying every junction label.
    """
    junction_groups = [graph.vertex_group(graph.terminus(edges[-1])) for edges, _ in parts]
    for junctions in product(*(g.elements for g in junction_groups)):
        pairs = []
        for (edges, labels), x in zip(parts, junctions):
            pairs += list(zip(edges, labels + (x,)))
        yield tuple(pairs)


def _reverse_open(graph, segment):
    edges, labels = _as_open(graph, segment)
    inv = []
    for e, label in zip(edges[:-1], labels):
        inv.append(graph.vertex_group(graph.terminus(e)).inv(label))
    return tuple(-e for e in reversed(edges)), tuple(reversed(inv))


def _move_options(graph, pairs):
    """Candidate replacement loops, in the order the shortening moves try them."""
    for i, j, m in _triple_points(graph, pairs):
        pieces = [_segment(pairs, i, j), _segment(pairs, j, m), _segment(pairs, m, i)]
        yield list(pieces)
        yield [pieces[0] + pieces[1], pieces[1] + pieces[2], pieces[2] + pieces[0]]
    for a, b, c, d in _crossings(graph, pairs):
        d1, d2 = _segment(pairs, a, b), _segment(pairs, b, c)
        d3, d4 = _segment(pairs, c, d), _segment(pairs, d, a)
        yield [d1 + d2, d2 + d3, d3 + d4, d4 + d1]
        yield list(_joined(graph, [_as_open(graph, d1), _reverse_open(graph, d3)]))
    for x, y, z in _bad_triangles(graph, pairs):
        k = len(pairs)
        d1 = _segment(pairs, x[0] % k, x[1] % k)
        d2 = _segment(pairs, x[1] % k, y[0] % k)
        d3 = _segment(pairs, y[0] % k, y[1] % k)
        d4 = _segment(pairs, y[1] % k, z[0] % k)
        d5 = _segment(pairs, z[0] % k, z[1] % k)
        yield [d1, d3, d5]
        options = []
        if d2:
            options += list(_joined(graph, [_as_open(graph, d1 + d2 + d3), _reverse_open(graph, d2)]))
        if d4:
            options += list(_joined(graph, [_as_open(graph, d3 + d4 + d5), _reverse_open(graph, d4)]))
        yield options


def is_sausage(graph, loop):
    """No triple points, no crossing double points, no bad triangles."""
    pairs = loop_pairs(graph, loop)
    return not (any(True for _ in _triple_points(graph, pairs))
                or any(True for _ in _crossings(graph, pairs))
                or any(True for _ in _bad_triangles(graph, pairs)))


def sausage_reduce(f, loop):
    """
    Shorten an f-immersed loop by the triple-point, crossing and triangle
    moves until it is a sausage.

    Moves that keep the stretch ratio are preferred; a move that lowers it
    is only taken when no ratio-preserving move applies.

    Raises:
        NotImmersed: if the loop's image is not cyclically reduced
        NotSausage: if the moves run out before the loop is a sausage
    """
    graph = f.source
    reduced, _ = cyclic_reduce(graph, loop.as_loop())
    if not is_immersed(f, reduced):
        raise NotImmersed()
    pairs = loop_pairs(graph, reduced)
    current = ratio(f, reduced)
    while True:
        step = _shorten(f, pairs, current)
        if step is None:
            break
        pairs, current = step
        logger.debug("sausage move: %d edges, ratio %s", len(pairs), current)
    result = loop_from_pairs(graph, pairs)
    if not is_sausage(graph, result):
        raise NotSausage(len(pairs))
    return result


def _shorten(f, pairs, current):
    graph = f.source
    fallback = None
    for options in _move_options(graph, pairs):
        for option in options:
            if not option or len(option) >= len(pairs):
                continue
            if graph.origin(option[0][0]) != graph.terminus(option[-1][0]):
                continue
            if not is_cyclically_reduced_pairs(graph, option):
                continue
            loop = loop_from_pairs(graph, option)
            if not is_immersed(f, loop):
                continue
            r = ratio(f, loop)
            if r >= current:
                return option, r
            if fallback is None:
                fallback = (option, r)
    return fallback
