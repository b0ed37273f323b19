"""
Discrete folding of maps between graphs of groups.

A map is first put in simplicial form: the source is given the metric
pulled back from the target and subdivided at preimages of target
vertices, so every edge maps isometrically onto one target edge. Folds
then identify two arms that leave a vertex through the same gate, one
edge orbit at a time, until the remaining map has no illegal turn.

Two kinds of fold are supported:

``distinct_orbits``
    arms on different edges, with equal stabilizers at the fold vertex and
    one far endpoint whose group is the image of its edge group;
``same_orbit_group_twist``
    an edge folded with its translate by a vertex-group element, whose far
    endpoint carries exactly the edge group.

Anything else raises ``UnsupportedFoldKind``.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

from core.errors import (
    ArmsUnequal, BudgetExceeded, NotFoldingMap, NotIllegal, OutOfRange, UnsupportedFoldKind,
)
from core.fingroup import GroupHom, compose_homs, conjugated_hom, identity_hom, subgroup_closure, subgroup_group
from core.gog import (
    Edge, EdgePath, GraphOfGroups, Vertex, concat_paths, multiply_left, multiply_right,
    normalize_volume, paths_equal, reduce_path, reverse_path, translation_length, trivial_path, volume,
)
from core.morphism import (
    GoGMap, compose, gates, identity_map, is_marked_isometry, lipschitz_constant, map_loop, map_path,
    tension_subgraph, validate_map,
)
from core.validator import ReportBuilder
from utils.config import FOLD_BUDGET

logger = logging.getLogger(__name__)

DISTINCT_ORBITS = "distinct_orbits"
GROUP_TWIST = "same_orbit_group_twist"


def subdivide(graph, e, t):
    """
    Split edge e at distance t from its tail.

    The tail half keeps the id e, the head half becomes the last edge and
    the new vertex is the last vertex; both carry the edge group of e.

    Returns:
        tuple: (subdivided graph, length-preserving map from graph).
    """
    t = Fraction(t)
    old = graph.edge(e)
    if not 0 < t < old.length:
        raise OutOfRange(t, old.length)
    e = abs(e)
    mid = len(graph.vertices)
    group = old.group
    vertices = list(graph.vertices) + [Vertex(group, name=f"{old.name or 'e' + str(e)}@{t}")]
    edges = list(graph.edges)
    edges[e - 1] = Edge(old.tail, mid, group, identity_hom(group), old.mono_to_tail, t, name=old.name)
    edges.append(Edge(mid, old.head, group, old.mono_to_head, identity_hom(group), old.length - t,
                      name=f"{old.name or 'e' + str(e)}'"))
    split = GraphOfGroups(vertices, edges, name=graph.name)
    images = [EdgePath(d.tail, d.head, (0, 0), (i,)) for i, d in enumerate(graph.edges, start=1)]
    images[e - 1] = EdgePath(old.tail, old.head, (0, 0, 0), (e, len(edges)))
    f = GoGMap(graph, split, range(len(graph.vertices)),
               [identity_hom(v.group) for v in graph.vertices], images, name=f"subdivide(e{e})")
    return split, f


def _require_folding(f):
    lip = lipschitz_constant(f)
    if len(tension_subgraph(f)) != 2 * len(f.source.edges):
        raise NotFoldingMap("tension subgraph is not the whole source")
    return lip


def simplicial_form(f):
    """
    Pull the target metric back along f and subdivide at target vertices.

    Returns:
        tuple: (new source, map sending each edge onto one target edge,
        map from the old source onto the new one).
    """
    _require_folding(f)
    src, tgt = f.source, f.target
    vertices = list(src.vertices)
    edges = list(src.edges)
    vertex_image = list(f.vertex_image)
    vertex_hom = list(f.vertex_hom)
    extra_edges, extra_images = [], []
    images = [None] * len(src.edges)
    pieces_of = {}
    for e in src.positive_edges():
        old = src.edge(e)
        path = f.edge_image[e - 1]
        k = len(path.edges)
        group = old.group
        ends = [old.tail]
        for i in range(1, k):
            ends.append(len(vertices))
            vertices.append(Vertex(group, name=f"{old.name or 'e' + str(e)}.{i}"))
            vertex_image.append(tgt.terminus(path.edges[i - 1]))
            vertex_hom.append(_fixing_hom(f, e, path, i))
        ends.append(old.head)
        ids = []
        for i, E in enumerate(path.edges):
            to_tail = old.mono_to_tail if i == 0 else identity_hom(group)
            to_head = old.mono_to_head if i == k - 1 else identity_hom(group)
            piece = Edge(ends[i], ends[i + 1], group, to_head, to_tail, tgt.length(E),
                         name=old.name if k == 1 else f"{old.name or 'e' + str(e)}:{i + 1}")
            last = path.elements[k] if i == k - 1 else 0
            image = EdgePath(tgt.origin(E), tgt.terminus(E), (path.elements[i], last), (E,))
            if i == 0:
                edges[e - 1] = piece
                images[e - 1] = image
                ids.append(e)
            else:
                extra_edges.append(piece)
                extra_images.append(image)
                ids.append(len(src.edges) + len(extra_edges))
        pieces_of[e] = ids
    simplicial = GraphOfGroups(vertices, edges + extra_edges, name=f"{src.name or 'source'}*")
    f0 = GoGMap(simplicial, tgt, vertex_image, vertex_hom, images + extra_images, name=f.name)
    report = validate_map(f0)
    if report["errors"]:
        raise NotFoldingMap("; ".join(report["errors"]))
    pull = GoGMap(src, simplicial, range(len(src.vertices)),
                  [identity_hom(v.group) for v in src.vertices],
                  [EdgePath(src.origin(e), src.terminus(e), (0,) * (len(pieces_of[e]) + 1), tuple(pieces_of[e]))
                   for e in src.positive_edges()],
                  name="pullback")
    return simplicial, f0, pull


def _fixing_hom(f, e, path, i):
    """Homomorphism from the edge group of e into the group at the i-th vertex of its image."""
    src, tgt = f.source, f.target
    prefix = EdgePath(path.start, tgt.terminus(path.edges[i - 1]), path.elements[:i] + (0,), path.edges[:i])
    here = tgt.vertex_group(prefix.end)
    image = []
    for c in src.edge_group(e).elements:
        g = f.vertex_hom[src.origin(e)](src.alpha(-e)(c))
        loop = reduce_path(tgt, concat_paths(tgt, reverse_path(tgt, prefix), trivial_path(path.start, g), prefix))
        if loop.edges:
            raise NotFoldingMap(f"edge group of e{e} does not fix its image")
        image.append(loop.elements[0])
    return GroupHom(src.edge_group(e), here, image, check=False)


def reframe(f, w, y):
    """Equivalent map with the frame at source vertex w moved by target element y."""
    src, tgt = f.source, f.target
    group = tgt.vertex_group(f.vertex_image[w])
    homs = list(f.vertex_hom)
    homs[w] = conjugated_hom(f.vertex_hom[w], y)
    images = []
    for e in src.positive_edges():
        path = f.edge_image[e - 1]
        d = src.edge(e)
        if d.tail == w:
            path = multiply_left(tgt, y, path)
        if d.head == w:
            path = multiply_right(tgt, path, group.inv(y))
        images.append(path)
    return GoGMap(src, tgt, f.vertex_image, homs, images, name=f.name)


@dataclass
class FoldEvent:
    """One fold: ``reframed == remainder after fold_map`` cell by cell."""

    turn: tuple
    kind: str
    graph: GraphOfGroups
    fold_map: GoGMap
    remainder: GoGMap
    reframed: GoGMap


def _check_turn(f, turn):
    first, second = turn
    structure = gates(f)
    if first == second or first.vertex != second.vertex:
        raise NotIllegal(turn)
    for d in turn:
        if d in structure.degenerate:
            raise NotIllegal(turn)
    try:
        shared = structure.same_gate(first, second)
    except KeyError:
        raise NotIllegal(turn) from None
    if not shared:
        raise NotIllegal(turn)


def fold_turn(f, turn):
    """
    Fold the two arms of an illegal turn.

    Raises:
        NotIllegal: when the directions do not share a gate.
        ArmsUnequal: when the two arms have different lengths.
        UnsupportedFoldKind: for configurations outside the two fold kinds.
    """
    _check_turn(f, turn)
    first, second = sorted(turn)
    if abs(first.edge) == abs(second.edge):
        if first.edge != second.edge:
            raise UnsupportedFoldKind(turn, "an edge folded with its own reverse")
        event = _twist_fold(f, (first, second))
    else:
        event = _distinct_fold(f, (first, second))
    _verify_event(event)
    logger.debug("folded %s (%s): %d edges left", turn, event.kind, len(event.graph.edges))
    return event


def _single(f, e, turn):
    path = f.image_of_edge(e)
    if len(path.edges) != 1:
        raise UnsupportedFoldKind(turn, f"edge {e} does not map to a single edge")
    return path


def _distinct_fold(f, turn):
    src, tgt = f.source, f.target
    d1, d2 = turn
    e1, e2 = d1.edge, d2.edge
    if src.length(e1) != src.length(e2):
        raise ArmsUnequal(turn, src.length(e1), src.length(e2))
    v = d1.vertex
    w1, w2 = src.terminus(e1), src.terminus(e2)
    if src.is_loop(e1) or src.is_loop(e2) or w1 == w2:
        raise UnsupportedFoldKind(turn, "arms close up into a loop")
    if not src.alpha(e2).is_surjective():
        if not src.alpha(e1).is_surjective():
            raise UnsupportedFoldKind(turn, "neither far endpoint carries only its edge group")
        d1, d2 = d2, d1
        e1, e2, w1, w2 = e2, e1, w2, w1
    gv = src.vertex_group(v)
    k1, k2 = d1.coset, d2.coset
    stab1 = {gv.conj(k1, x) for x in src.alpha(-e1).image}
    stab2 = {gv.conj(k2, x) for x in src.alpha(-e2).image}
    if stab1 != stab2:
        raise UnsupportedFoldKind(turn, "arm stabilizers differ")
    g = gv.mul(gv.inv(k2), k1)
    if f.vertex_image[w1] != f.vertex_image[w2]:
        raise UnsupportedFoldKind(turn, "far endpoints have different images")
    _single(f, e1, turn)
    _single(f, e2, turn)

    # f(e2) == f(g) f(e1) y
    image_g = multiply_left(tgt, f.vertex_hom[v](g), f.image_of_edge(e1))
    gap = reduce_path(tgt, concat_paths(tgt, reverse_path(tgt, image_g), f.image_of_edge(e2)))
    if gap.edges:
        raise UnsupportedFoldKind(turn, "arm images differ")
    reframed = reframe(f, w2, gap.elements[0])

    phi = {}
    for c in src.edge_group(e2).elements:
        inner = gv.prod(gv.inv(g), src.alpha(-e2)(c), g)
        phi[c] = src.alpha(-e1).preimage(inner)
    g1, g2 = src.vertex_group(w1), src.vertex_group(w2)
    transfer = GroupHom(g2, g1, [src.alpha(e1)(phi[src.alpha(e2).preimage(x)]) for x in g2.elements], check=False)

    renumber = {}
    vertices = []
    for u, vertex in enumerate(src.vertices):
        if u != w2:
            renumber[u] = len(vertices)
            vertices.append(vertex)
    renumber[w2] = renumber[w1]
    edges, new_id = [], {}
    for i, old in enumerate(src.edges, start=1):
        if i == abs(e2):
            continue
        to_head = compose_homs(transfer, old.mono_to_head) if old.head == w2 else old.mono_to_head
        to_tail = compose_homs(transfer, old.mono_to_tail) if old.tail == w2 else old.mono_to_tail
        edges.append(Edge(renumber[old.tail], renumber[old.head], old.group, to_head, to_tail,
                          old.length, old.reverse_length, old.name))
        new_id[i] = len(edges)
    folded = GraphOfGroups(vertices, edges, name=f"{src.name or 'graph'}/fold")

    arm = EdgePath(renumber[v], renumber[w1], (g, 0), ((1 if e1 > 0 else -1) * new_id[abs(e1)],))
    sigma_images = []
    for i, old in enumerate(src.edges, start=1):
        if i == abs(e2):
            sigma_images.append(arm if e2 > 0 else reverse_path(folded, arm))
        else:
            sigma_images.append(EdgePath(renumber[old.tail], renumber[old.head], (0, 0), (new_id[i],)))
    sigma_homs = [transfer if u == w2 else identity_hom(src.vertex_group(u)) for u in range(len(src.vertices))]
    sigma = GoGMap(src, folded, [renumber[u] for u in range(len(src.vertices))], sigma_homs, sigma_images,
                   name="fold")
    kept = [u for u in range(len(src.vertices)) if u != w2]
    remainder = GoGMap(folded, tgt, [reframed.vertex_image[u] for u in kept],
                       [reframed.vertex_hom[u] for u in kept],
                       [reframed.edge_image[i - 1] for i in sorted(new_id)], name=f.name)
    return FoldEvent(turn, DISTINCT_ORBITS, folded, sigma, remainder, reframed)


def _twist_fold(f, turn):
    src, tgt = f.source, f.target
    d1, d2 = turn
    e = d1.edge
    v, w = src.origin(e), src.terminus(e)
    if src.is_loop(e):
        raise UnsupportedFoldKind(turn, "twist of a loop edge")
    if not src.alpha(e).is_surjective():
        raise UnsupportedFoldKind(turn, "far endpoint carries more than the edge group")
    gv = src.vertex_group(v)
    g = gv.mul(gv.inv(d1.coset), d2.coset)
    grown = subgroup_closure(gv, list(src.alpha(-e).image) + [g])
    new_group, incl = subgroup_group(grown, name=f"{src.edge(e).name or 'e' + str(abs(e))}+")
    old_w = src.vertex_group(w)
    into = GroupHom(old_w, new_group,
                    [grown.elements.index(src.alpha(-e)(src.alpha(e).preimage(x))) for x in old_w.elements],
                    check=False)

    vertices = list(src.vertices)
    vertices[w] = Vertex(new_group, name=src.vertices[w].name)
    edges = []
    for i, old in enumerate(src.edges, start=1):
        if i == abs(e):
            ident = identity_hom(new_group)
            to_head, to_tail = (ident, incl) if e > 0 else (incl, ident)
            edges.append(Edge(old.tail, old.head, new_group, to_head, to_tail, old.length,
                              old.reverse_length, old.name))
            continue
        to_head = compose_homs(into, old.mono_to_head) if old.head == w else old.mono_to_head
        to_tail = compose_homs(into, old.mono_to_tail) if old.tail == w else old.mono_to_tail
        edges.append(Edge(old.tail, old.head, old.group, to_head, to_tail, old.length,
                          old.reverse_length, old.name))
    folded = GraphOfGroups(vertices, edges, name=f"{src.name or 'graph'}/twist")
    sigma = GoGMap(src, folded, range(len(src.vertices)),
                   [into if u == w else identity_hom(src.vertex_group(u)) for u in range(len(src.vertices))],
                   [EdgePath(d.tail, d.head, (0, 0), (i,)) for i, d in enumerate(src.edges, start=1)],
                   name="fold")

    path = _single(f, e, turn)
    a, E, b = path.elements[0], path.edges[0], path.elements[1]
    tv = tgt.vertex_group(f.vertex_image[v])
    tw = tgt.vertex_group(f.vertex_image[w])
    far = []
    for s in grown.elements:
        c = tgt.alpha(-E).preimage(tv.prod(tv.inv(a), f.vertex_hom[v](s), a))
        if c is None:
            raise UnsupportedFoldKind(turn, "twist element does not fix the image edge")
        far.append(tw.prod(tw.inv(b), tgt.alpha(E)(c), b))
    homs = list(f.vertex_hom)
    homs[w] = GroupHom(new_group, tw, far, check=False)
    remainder = GoGMap(folded, tgt, f.vertex_image, homs, f.edge_image, name=f.name)
    return FoldEvent(turn, GROUP_TWIST, folded, sigma, remainder, f)


def _verify_event(event):
    before, sigma, after = event.reframed, event.fold_map, event.remainder
    for label, report in (("fold map", validate_map(sigma)), ("remainder", validate_map(after))):
        if report["errors"]:
            raise UnsupportedFoldKind(event.turn, f"{label} is inconsistent: {report['errors'][0]}")
    tgt = before.target
    for v in range(len(before.source.vertices)):
        w = sigma.vertex_image[v]
        if after.vertex_image[w] != before.vertex_image[v]:
            raise UnsupportedFoldKind(event.turn, f"vertex {v} lands elsewhere after folding")
        if compose_homs(after.vertex_hom[w], sigma.vertex_hom[v]) != before.vertex_hom[v]:
            raise UnsupportedFoldKind(event.turn, f"vertex {v} changes its homomorphism")
    for e in before.source.positive_edges():
        if not paths_equal(tgt, map_path(after, sigma.edge_image[e - 1]), before.edge_image[e - 1]):
            raise UnsupportedFoldKind(event.turn, f"factorization fails on edge e{e}")


def verify_event(event, budget=None):
    """
    Report on an event: Lipschitz constants and candidate lengths under the fold map.
    """
    from core.lipschitz import enumerate_candidates
    report = ReportBuilder(f"fold{event.turn}")
    before, sigma, after = event.reframed, event.fold_map, event.remainder
    lip_before, lip_after = lipschitz_constant(before), lipschitz_constant(after)
    report.check(lip_after <= lip_before, f"Lipschitz constant grew from {lip_before} to {lip_after}")
    report.check(len({abs(p.edges[0]) for p in sigma.edge_image if p.edges}) == len(event.graph.edges),
                 "fold map is not onto the edges")
    checked = 0
    for cand in enumerate_candidates(before.source, budget):
        own = translation_length(before.source, cand.loop)
        folded = translation_length(event.graph, map_loop(sigma, cand.loop))
        report.check(folded <= own, f"candidate {cand.key} grows under the fold")
        image = translation_length(before.target, map_loop(before, cand.loop))
        report.check(image <= lip_after * folded, f"candidate {cand.key} is stretched past the remainder")
        checked += 1
    report.note(kind=event.kind, lipschitz_before=lip_before, lipschitz_after=lip_after, candidates=checked)
    return report.result()


def illegal_turn(f):
    """First illegal turn in canonical order (least vertex, least pair), or None."""
    structure = gates(f)
    for v in sorted(structure.blocks):
        for gate in structure.blocks[v]:
            live = [d for d in gate if d not in structure.degenerate]
            for pair in combinations(sorted(live), 2):
                return pair
    return None


class FoldSequence:
    """
    Points of a discrete folding path and the maps between them.

    ``points[0]`` is the simplicial source, the last point is the target,
    and ``maps[i]`` runs from ``points[i]`` to ``points[i + 1]``.
    """

    def __init__(self, original, pullback, start_map, events, final):
        self.original = original
        self.pullback = pullback
        self.start_map = start_map
        self.events = events
        self.final = final
        self.points = [start_map.source] + [ev.graph for ev in events] + [final.target]
        self.maps = [ev.fold_map for ev in events] + [final]

    def normalized(self):
        return [normalize_volume(p) for p in self.points]

    def map_between(self, r, t):
        f = identity_map(self.points[r])
        for i in range(r, t):
            f = compose(self.maps[i], f)
        return f

    def __iter__(self):
        return iter(self.events)

    def __len__(self):
        return len(self.events)


def fold_sequence(f, budget=None):
    """
    Fold illegal turns greedily until the remainder is an isometry.

    Raises:
        NotFoldingMap: when f does not stretch every edge by lip(f), or the
            final remainder is not a marked isometry.
        BudgetExceeded: after more events than the budget allows.
        UnsupportedFoldKind: when a turn needs a fold of another kind.
    """
    limit = FOLD_BUDGET if budget is None else budget
    _, start, pullback = simplicial_form(f)
    current = start
    events = []
    while True:
        turn = illegal_turn(current)
        if turn is None:
            break
        event = fold_turn(current, turn)
        events.append(event)
        current = event.remainder
        if len(events) > limit:
            raise BudgetExceeded("fold events", limit)
    if not is_marked_isometry(current):
        raise NotFoldingMap("remainder has no illegal turn but is not an isometry")
    logger.info("fold sequence of %s: %d events", f.name or "map", len(events))
    return FoldSequence(f, pullback, start, events, current)


def _pair_lambdas(seq, threads, budget):
    from core.lipschitz import stretch_factor
    n = len(seq.points)
    pairs = [(r, t) for r in range(n) for t in range(r + 1, n)]
    vols = [volume(p) for p in seq.points]

    def one(pair):
        r, t = pair
        raw, _ = stretch_factor(seq.map_between(r, t), budget=budget)
        return raw * vols[r] / vols[t]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(one, pairs))
    else:
        values = [one(p) for p in pairs]
    table = {(r, r): Fraction(1) for r in range(n)}
    table.update(zip(pairs, values))
    return table


def check_geodesic(seq, f=None, threads=1, budget=None):
    """
    Check that stretch factors multiply along the sequence.

    Every pair of points is compared after normalizing both to volume 1.
    """
    report = ReportBuilder(f"geodesic({seq.original.name or 'map'})")
    table = _pair_lambdas(seq, threads, budget)
    n = len(seq.points)
    for r in range(n):
        for s in range(r, n):
            for t in range(s, n):
                lhs, rhs = table[r, t], table[r, s] * table[s, t]
                report.check(lhs == rhs, f"lambda({r},{t}) = {lhs} but lambda({r},{s})*lambda({s},{t}) = {rhs}")
    if f is not None:
        from core.lipschitz import stretch_factor
        raw, _ = stretch_factor(f, budget=budget)
        whole = raw * volume(f.source) / volume(f.target)
        report.check(table[0, n - 1] == whole, f"end-to-end lambda {table[0, n - 1]} differs from {whole}")
    report.note(points=n, events=len(seq.events), volumes=[volume(p) for p in seq.points],
                lambdas={f"{r},{t}": table[r, t] for r, t in sorted(table) if r < t})
    return report.result(table=table)


def lift_sequence(seq, quotient, subgroup, threads=1, budget=None):
    """
    Lift every map of a sequence to the covers defined by rho^-1(subgroup).

    ``quotient`` lives on the original source of the sequence.
    """
    from core.cover import build_cover, push_map_to_cover, transport_quotient
    from core.lipschitz import stretch_factor
    report = ReportBuilder(f"lifted({seq.original.name or 'map'})")
    current = transport_quotient(seq.pullback, quotient)
    cover = build_cover(current, subgroup)
    covers = [cover]
    lifted = []
    for i, step in enumerate(seq.maps):
        up, current, _, cover = push_map_to_cover(step, current, subgroup, source_cover=cover)
        lifted.append(up)
        covers.append(cover)
        if i < len(seq.events):
            full = len(tension_subgraph(up)) == 2 * len(up.source.edges)
            report.check(full, f"lifted fold {i + 1} does not stretch every edge equally")
    base = _pair_lambdas(seq, threads, budget)
    vols = [volume(c.cover) for c in covers]
    upstairs = {}
    for r in range(len(covers)):
        f = identity_map(covers[r].cover)
        for t in range(r + 1, len(covers)):
            f = compose(lifted[t - 1], f)
            raw, _ = stretch_factor(f, threads=threads, budget=budget)
            upstairs[r, t] = raw * vols[r] / vols[t]
            report.check(upstairs[r, t] == base[r, t],
                         f"lambda({r},{t}) is {base[r, t]} below but {upstairs[r, t]} on the cover")
    report.note(index=covers[0].index, cover_volumes=vols,
                lambdas={f"{r},{t}": upstairs[r, t] for r, t in sorted(upstairs)})
    return report.result(lifted_maps=lifted, covers=covers)
