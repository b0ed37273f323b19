"""
Forest collapses and the collapse poset below a graph of groups.

An edge may be collapsed when it is not a loop and one of its attaching
monomorphisms is onto; the vertex on that side is absorbed into the other
one. Collapsing a set of edges is done one edge at a time, and a set is a
collapse forest when some order of it succeeds at every stage.
"""

import logging
from dataclasses import dataclass
from itertools import permutations

import networkx as nx
from networkx.algorithms.isomorphism import categorical_multiedge_match, categorical_node_match

from core.errors import BudgetExceeded, InvalidDeckAction, KernelHasTorsion, NotCollapsible
from core.fingroup import GroupHom, compose_homs, identity_hom
from core.gog import Edge, EdgePath, GraphOfGroups, Vertex, euler_char, trivial_path
from core.morphism import GoGMap, compose, identity_map
from core.validator import ReportBuilder
from utils.config import SPINE_BUDGET

logger = logging.getLogger(__name__)


def _onto(hom):
    return hom.is_surjective()


def is_collapsible(graph, e):
    if graph.is_loop(e):
        return False
    return _onto(graph.alpha(e)) or _onto(graph.alpha(-e))


def collapsible_edges(graph):
    graph.require_valid()
    return frozenset(e for e in graph.positive_edges() if is_collapsible(graph, e))


def is_reduced(graph):
    return not collapsible_edges(graph)


def collapse_edge(graph, e):
    """
    Collapse one edge.

    Returns:
        tuple: (collapsed graph, collapse map).
    """
    d = graph.edge(e)
    if graph.is_loop(e):
        raise NotCollapsible(e, 1)
    if _onto(d.mono_to_tail):
        absorbed, keeper = d.tail, d.head
        onto, other = d.mono_to_tail, d.mono_to_head
    elif _onto(d.mono_to_head):
        absorbed, keeper = d.head, d.tail
        onto, other = d.mono_to_head, d.mono_to_tail
    else:
        raise NotCollapsible(e, 1)
    kept_group = graph.vertex_group(keeper)
    absorbed_group = graph.vertex_group(absorbed)
    transfer = GroupHom(absorbed_group, kept_group,
                        [other(onto.preimage(g)) for g in absorbed_group.elements], check=False)

    renumber = {}
    vertices = []
    for v, vertex in enumerate(graph.vertices):
        if v != absorbed:
            renumber[v] = len(vertices)
            vertices.append(vertex)
    renumber[absorbed] = renumber[keeper]

    edges = []
    edge_ids = {}
    for i, old in enumerate(graph.edges, start=1):
        if i == abs(e):
            continue
        to_head = compose_homs(transfer, old.mono_to_head) if old.head == absorbed else old.mono_to_head
        to_tail = compose_homs(transfer, old.mono_to_tail) if old.tail == absorbed else old.mono_to_tail
        edges.append(Edge(renumber[old.tail], renumber[old.head], old.group, to_head, to_tail,
                          old.length, old.reverse_length, old.name))
        edge_ids[i] = len(edges)
    name = graph.name or "graph"
    collapsed = GraphOfGroups(vertices, edges, name=f"{name}/e{abs(e)}")

    vertex_hom = [transfer if v == absorbed else identity_hom(graph.vertex_group(v))
                  for v in range(len(graph.vertices))]
    edge_image = []
    for i, old in enumerate(graph.edges, start=1):
        if i == abs(e):
            edge_image.append(trivial_path(renumber[keeper]))
        else:
            edge_image.append(EdgePath(renumber[old.tail], renumber[old.head], (0, 0), (edge_ids[i],)))
    f = GoGMap(graph, collapsed, [renumber[v] for v in range(len(graph.vertices))],
               vertex_hom, edge_image, name=f"collapse(e{abs(e)})")
    logger.debug("collapsed e%d of %s, absorbing vertex %d", abs(e), name, absorbed)
    return collapsed, f, edge_ids


@dataclass(frozen=True)
class CollapseForest:
    """Edges of a graph listed in an order that collapses stage by stage."""

    edges: tuple

    def as_set(self):
        return frozenset(self.edges)


def collapse(graph, forest):
    """
    Collapse a forest of edges in order.

    Args:
        graph: the graph of groups.
        forest: a CollapseForest or an iterable of edge ids.

    Returns:
        tuple: (collapsed graph, collapse map).

    Raises:
        NotCollapsible: at the first stage whose edge cannot be collapsed.
    """
    graph.require_valid()
    order = forest.edges if isinstance(forest, CollapseForest) else tuple(forest)
    current = graph
    f = identity_map(graph)
    where = {e: e for e in graph.positive_edges()}
    for stage, e in enumerate(order, start=1):
        now = where.get(e)
        if now is None or not is_collapsible(current, now):
            raise NotCollapsible(e, stage)
        current, step, ids = collapse_edge(current, now)
        f = compose(step, f)
        where = {orig: ids[cur] for orig, cur in where.items() if cur in ids}
    if euler_char(current) != euler_char(graph):
        logger.warning("collapse of %s changed the Euler characteristic", graph.name)
    return current, GoGMap(graph, current, f.vertex_image, f.vertex_hom, f.edge_image,
                           name=f"collapse{list(order)}")


def certify_forest(graph, edges):
    """Find a collapse order for a set of edges, trying orders lexicographically."""
    edges = tuple(sorted(set(edges)))
    first_error = None
    for order in permutations(edges):
        try:
            collapse(graph, order)
        except NotCollapsible as exc:
            first_error = first_error or exc
            continue
        return CollapseForest(order)
    raise first_error


# Collapse poset

def _forest_key(forest):
    return (len(forest), tuple(sorted(forest)))


class PosetStar:
    """
    Collapse forests of a graph ordered by inclusion.

    The empty forest stands for the graph itself; the minimal elements of
    the poset (the terminal forests) are the reduced collapses.
    """

    def __init__(self, graph, forests, covers):
        self.graph = graph
        self.forests = forests
        self.elements = sorted(forests, key=_forest_key)
        self.covers = sorted(covers, key=lambda pair: (_forest_key(pair[0]), _forest_key(pair[1])))
        self._up = {}
        for lower, upper in self.covers:
            self._up.setdefault(lower, []).append(upper)

    def collapsed(self, forest):
        return self.forests[forest][0]

    def order(self, forest):
        return self.forests[forest][1]

    def terminal(self):
        """Forests with nothing above them: the reduced collapses."""
        return [F for F in self.elements if not self._up.get(F)]

    def maximal_chains(self, budget=None):
        limit = SPINE_BUDGET if budget is None else budget
        chains = []

        def walk(chain):
            nxt = self._up.get(chain[-1])
            if not nxt:
                chains.append(tuple(chain))
                if len(chains) > limit:
                    raise BudgetExceeded("maximal chains", limit)
                return
            for F in nxt:
                walk(chain + [F])

        walk([frozenset()])
        return chains

    def __len__(self):
        return len(self.elements)


def star_poset(graph, budget=None):
    """Every collapse of graph, keyed by its collapsed edge set."""
    graph.require_valid()
    limit = SPINE_BUDGET if budget is None else budget
    forests = {frozenset(): (graph, ())}
    covers = []
    frontier = [frozenset()]
    while frontier:
        nxt = []
        for F in sorted(frontier, key=_forest_key):
            _, order = forests[F]
            current, _ = collapse(graph, order)
            where = _surviving_ids(graph, order)
            for e in graph.positive_edges():
                if e in F or not is_collapsible(current, where[e]):
                    continue
                bigger = F | {e}
                covers.append((F, bigger))
                if bigger not in forests:
                    forests[bigger] = (None, order + (e,))
                    nxt.append(bigger)
                    if len(forests) > limit:
                        raise BudgetExceeded("poset elements", limit)
        frontier = nxt
    for F, (_, order) in forests.items():
        forests[F] = (collapse(graph, order)[0], order)
    logger.debug("collapse poset of %s has %d elements", graph.name, len(forests))
    return PosetStar(graph, forests, covers)


def _surviving_ids(graph, order):
    where = {e: e for e in graph.positive_edges()}
    for e in order:
        cut = where[e]
        where = {orig: (cur if cur < cut else cur - 1) for orig, cur in where.items() if orig != e}
    return where


def _typed_graph(graph):
    out = nx.MultiGraph()
    for v in range(len(graph.vertices)):
        out.add_node(v, order=graph.vertex_group(v).order)
    for i, d in enumerate(graph.edges, start=1):
        out.add_edge(d.tail, d.head, key=i, order=d.group.order)
    return out


def isomorphism_types(poset):
    """Number of distinct underlying graphs of groups (by group orders) in the poset."""
    node_match = categorical_node_match("order", None)
    edge_match = categorical_multiedge_match("order", None)
    seen = []
    for F in poset.elements:
        typed = _typed_graph(poset.collapsed(F))
        if not any(nx.is_isomorphic(typed, other, node_match=node_match, edge_match=edge_match)
                   for other in seen):
            seen.append(typed)
    return len(seen)


def surviving_edges(graph, budget=None):
    """Edges left uncollapsed by at least one reduced collapse."""
    poset = star_poset(graph, budget)
    terminal = poset.terminal()
    return frozenset(e for e in graph.positive_edges() if any(e not in F for F in terminal))


def in_reduced_spine(graph, budget=None):
    return surviving_edges(graph, budget) == frozenset(graph.positive_edges())


# Deck actions

class DeckAction:
    """Left action of Q on the sheets of a torsion-free cover."""

    def __init__(self, group, vertex_perm, edge_perm):
        self.group = group
        self.vertex_perm = tuple(tuple(p) for p in vertex_perm)
        self.edge_perm = tuple(tuple(p) for p in edge_perm)

    def act_vertex(self, a, v):
        return self.vertex_perm[a][v]

    def act_edge(self, a, e):
        return self.edge_perm[a][e - 1]

    def edge_orbits(self):
        seen = set()
        orbits = []
        for e in range(1, len(self.edge_perm[0]) + 1):
            if e in seen:
                continue
            orbit = frozenset(self.act_edge(a, e) for a in self.group.elements)
            seen |= orbit
            orbits.append(orbit)
        return orbits


def deck_action_cover(quotient):
    """
    The cover of the kernel of rho together with the action of Q on it.

    Raises:
        KernelHasTorsion: when rho kills a nontrivial vertex-group element.
    """
    from core.cover import build_cover
    base, q = quotient.base, quotient.group
    for v in range(len(base.vertices)):
        for g in base.vertex_group(v).elements:
            if g and quotient.rho_vertex(v, g) == 0:
                raise KernelHasTorsion(v, g)
    data = build_cover(quotient, q.trivial_subgroup())
    edge_of = {}
    for eid, sheet in enumerate(data.edge_sheets, start=1):
        e = sheet.base_edge
        u = base.origin(e)
        for c in base.edge_group(e).elements:
            edge_of[e, q.mul(sheet.rep, quotient.rho_vertex(u, base.alpha(-e)(c)))] = eid
    vertex_perm = []
    edge_perm = []
    for a in q.elements:
        vertex_perm.append([data.vertex_id(s.base_vertex, data.vertex_class(s.base_vertex, q.mul(a, s.rep)))
                            for s in data.vertex_sheets])
        edge_perm.append([edge_of[s.base_edge, q.mul(a, s.rep)] for s in data.edge_sheets])
    action = DeckAction(q, vertex_perm, edge_perm)
    check_deck_action(data, action)
    return data, action


def check_deck_action(data, action):
    """
    Check that Q acts on the cover by graph automorphisms commuting with the
    projection to the base.

    Raises:
        InvalidDeckAction: for the first group element that fails.
    """
    cover, q = data.cover, action.group
    vertices = list(range(len(data.vertex_sheets)))
    edges = list(range(1, len(data.edge_sheets) + 1))
    for a in q.elements:
        if sorted(action.vertex_perm[a]) != vertices or sorted(action.edge_perm[a]) != edges:
            raise InvalidDeckAction(a, "not a permutation of the cover")
        for v in vertices:
            if data.vertex_sheets[action.act_vertex(a, v)].base_vertex != data.vertex_sheets[v].base_vertex:
                raise InvalidDeckAction(a, f"cover vertex {v} leaves its fibre")
        for eid in edges:
            image = action.act_edge(a, eid)
            if data.edge_sheets[image - 1].base_edge != data.edge_sheets[eid - 1].base_edge:
                raise InvalidDeckAction(a, f"cover edge {eid} leaves its fibre")
            d, moved = cover.edge(eid), cover.edge(image)
            if (moved.tail, moved.head) != (action.act_vertex(a, d.tail), action.act_vertex(a, d.head)):
                raise InvalidDeckAction(a, f"cover edge {eid} loses its ends")
        for b in q.elements:
            ab = q.mul(a, b)
            if any(action.act_vertex(ab, v) != action.act_vertex(a, action.act_vertex(b, v)) for v in vertices):
                raise InvalidDeckAction(a, f"composition with {b} is not the action of {ab}")
    logger.debug("deck action of order %d checked on %d cells", q.order, len(vertices) + len(edges))


def _is_forest(graph, edges):
    sub = nx.MultiGraph()
    sub.add_nodes_from(range(len(graph.vertices)))
    for e in edges:
        d = graph.edge(e)
        sub.add_edge(d.tail, d.head, key=e)
    return nx.is_forest(sub)


def maximal_invariant_forests(graph, action, budget=None):
    """Maximal unions of edge orbits that form a forest, as sets of orbit indices."""
    limit = SPINE_BUDGET if budget is None else budget
    orbits = action.edge_orbits()
    forests = {frozenset()}
    frontier = [frozenset()]
    maximal = []
    while frontier:
        nxt = []
        for F in sorted(frontier, key=_forest_key):
            grown = False
            for i in range(len(orbits)):
                if i in F:
                    continue
                bigger = F | {i}
                edges = set().union(*(orbits[j] for j in bigger))
                if not _is_forest(graph, edges):
                    continue
                grown = True
                if bigger not in forests:
                    forests.add(bigger)
                    nxt.append(bigger)
                    if len(forests) > limit:
                        raise BudgetExceeded("invariant forests", limit)
            if not grown:
                maximal.append(F)
        frontier = nxt
    return orbits, sorted(maximal, key=_forest_key)


def essential_edges(graph, action, budget=None):
    """Edge orbits missing from at least one maximal invariant forest."""
    orbits, maximal = maximal_invariant_forests(graph, action, budget)
    return frozenset(orbits[i] for i in range(len(orbits)) if any(i not in F for F in maximal))


def verify_thmC_correspondence(graph, quotient, budget=None):
    """
    Compare surviving edges of graph with essential orbits of its deck cover.

    Returns:
        dict: report with per-edge verdicts and the two families of
        maximal objects expressed as sets of base edges.
    """
    report = ReportBuilder(f"correspondence({graph.name or 'graph'})")
    poset = star_poset(graph, budget)
    terminal = poset.terminal()
    surviving = frozenset(e for e in graph.positive_edges() if any(e not in F for F in terminal))
    data, action = deck_action_cover(quotient)
    orbits, maximal = maximal_invariant_forests(data.cover, action, budget)
    over = [data.edge_sheets[min(orbit) - 1].base_edge for orbit in orbits]
    essential = frozenset(over[i] for i in range(len(orbits)) if any(i not in F for F in maximal))
    for e in graph.positive_edges():
        report.check((e in surviving) == (e in essential),
                     f"edge e{e}: surviving={e in surviving} but essential={e in essential}")
    collapse_side = sorted(sorted(F) for F in terminal)
    forest_side = sorted(sorted(over[i] for i in F) for F in maximal)
    report.check(collapse_side == forest_side,
                 "reduced collapses and maximal invariant forests differ as edge sets")
    report.note(surviving=sorted(surviving), essential=sorted(essential),
                reduced_collapses=collapse_side, invariant_forests=forest_side,
                chains=len(poset.maximal_chains(budget)), cover_edges=len(data.cover.edges))
    return report.result()
