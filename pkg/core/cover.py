"""
Finite-index covers of graphs of groups defined by finite quotients.

A quotient ``rho`` sends every vertex group into a finite group Q and
every edge to an element of Q, with tree edges sent to the identity. The
subgroup H = rho^-1(P) of a subgroup P of Q has a covering graph of groups
whose vertices over v are the double cosets P \\ Q / rho(G_v) and whose
edges over e are the double cosets P \\ Q / rho(alpha(-e)(G_e)).

Sheets are labelled by representatives: least elements for vertices, and
``r_u * rho(h)`` with the least possible h for edges, where r_u labels the
tail sheet.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import networkx as nx

from core.errors import (
    EllipticLoop, IncompatibleQuotient, InvalidQuotient, StartSheetMismatch,
    SubgroupParentMismatch,
)
from core.fingroup import (
    GroupHom, Subgroup, all_homomorphisms, double_cosets, subgroup_closure, subgroup_group,
)
from core.gog import (
    Edge, EdgePath, GraphOfGroups, Vertex, concat_paths, cyclic_reduce, is_homomorphism,
    loop_power, multiply_left, multiply_right, paths_equal, reduce_path, reverse_path,
    scale, trivial_path, unweighted_volume, volume,
)
from core.morphism import GoGMap, map_path, with_graphs
from core.validator import ReportBuilder

logger = logging.getLogger(__name__)


def spanning_tree(graph):
    """
    Spanning tree of least total edge id.

    Returns:
        frozenset: positive edge ids of the tree
    """
    edges = nx.minimum_spanning_edges(graph.nx_graph(), algorithm="kruskal", weight="eid", keys=True, data=False)
    return frozenset(key for _, _, key in edges)


class FiniteQuotient:
    """A homomorphism from the fundamental group of a graph of groups onto Q."""

    def __init__(self, base, group, vertex_hom, edge_values, tree=None,
                 reverse_values=None, name=None):
        self.base = base
        self.group = group
        self.vertex_hom = tuple(vertex_hom)
        self.edge_values = tuple(edge_values)
        self.reverse_values = tuple(reverse_values) if reverse_values is not None else None
        self.tree = frozenset(tree) if tree is not None else spanning_tree(base)
        self.name = name

    def rho_edge(self, e):
        value = self.edge_values[abs(e) - 1]
        if e > 0:
            return value
        if self.reverse_values is not None:
            return self.reverse_values[-e - 1]
        return self.group.inv(value)

    def rho_vertex(self, v, g):
        return self.vertex_hom[v](g)

    def holonomy(self, path):
        """
        Image of a path under rho.

        Args:
            path: EdgePath in the base

        Returns:
            int: element of Q
        """
        q = self.group
        v = path.start
        value = self.rho_vertex(v, path.elements[0])
        for e, g in zip(path.edges, path.elements[1:]):
            v = self.base.terminus(e)
            value = q.prod(value, self.rho_edge(e), self.rho_vertex(v, g))
        return value

    def image(self):
        gens = set(self.edge_values)
        for hom in self.vertex_hom:
            gens |= set(hom.image)
        return subgroup_closure(self.group, gens)

    def vertex_image(self, v):
        return self.vertex_hom[v].image_subgroup()

    def require_valid(self):
        report = validate_quotient(self)
        if report["errors"]:
            raise InvalidQuotient(report["errors"])


def validate_quotient(quotient):
    """
    Check the vertex homs, the edge values, the tree and every edge relator,
    then surjectivity.

    Returns:
        dict: report with the order of Q in its summary
    """
    report = ReportBuilder(quotient.name or "quotient")
    base, q = quotient.base, quotient.group
    report.check(len(quotient.vertex_hom) == len(base.vertices), "one vertex hom per vertex is required")
    report.check(len(quotient.edge_values) == len(base.edges), "one edge value per edge is required")
    if not report.ok:
        return report.result()
    for v, hom in enumerate(quotient.vertex_hom):
        if hom.source != base.vertex_group(v) or hom.target != q:
            report.error(f"vertex hom at {v} has the wrong source or target")
        elif not is_homomorphism(hom):
            report.error(f"vertex hom at {v} is not a homomorphism")
    for i, value in enumerate(quotient.edge_values):
        if not 0 <= value < q.order:
            report.error(f"value of edge e{i + 1} is not an element of Q")
    if quotient.reverse_values is not None:
        for i, (value, back) in enumerate(zip(quotient.edge_values, quotient.reverse_values)):
            if not 0 <= back < q.order or q.mul(value, back) != 0:
                report.error(f"value of edge -e{i + 1} is not the inverse of the value of e{i + 1}")
    if not report.ok:
        return report.result()
    tree_graph = nx.MultiGraph()
    tree_graph.add_nodes_from(range(len(base.vertices)))
    for e in sorted(quotient.tree):
        if not 1 <= e <= len(base.edges):
            report.error(f"tree edge e{e} does not exist")
            continue
        d = base.edge(e)
        tree_graph.add_edge(d.tail, d.head, key=e)
        if quotient.edge_values[e - 1] != 0:
            report.error(f"tree edge e{e} is not sent to the identity")
    if report.ok and not nx.is_tree(tree_graph):
        report.error("tree edges do not form a spanning tree")
    for e in base.positive_edges():
        u, w = base.origin(e), base.terminus(e)
        t = quotient.rho_edge(e)
        for c in base.edge_group(e).elements:
            lhs = q.prod(t, quotient.rho_vertex(w, base.alpha(e)(c)), q.inv(t))
            if lhs != quotient.rho_vertex(u, base.alpha(-e)(c)):
                report.error(f"relator of edge e{e} fails at edge-group element {c}")
                break
    if report.ok:
        image = quotient.image()
        report.check(image.order == q.order, f"quotient is not surjective (image of order {image.order})")
    report.note(order=q.order)
    return report.result()


@dataclass(frozen=True)
class VertexSheet:
    base_vertex: int
    rep: int
    stabilizer: Subgroup
    inclusion: GroupHom

    def index(self, g):
        return self.stabilizer.elements.index(g)


@dataclass(frozen=True)
class EdgeSheet:
    base_edge: int
    rep: int
    tail_shift: int
    head_shift: int
    stabilizer: Subgroup
    inclusion: GroupHom


class CoverData:
    """A covering graph of groups with its sheet labels and projection."""

    def __init__(self, quotient, subgroup, cover, vertex_sheets, edge_sheets, projection):
        self.quotient = quotient
        self.subgroup = subgroup
        self.cover = cover
        self.vertex_sheets = vertex_sheets
        self.edge_sheets = edge_sheets
        self.projection = projection
        self.index = quotient.group.order // subgroup.order
        self._vertex_id = {(s.base_vertex, s.rep): i for i, s in enumerate(vertex_sheets)}
        self._class = {}
        q = quotient.group
        for v in range(len(quotient.base.vertices)):
            for cls in double_cosets(q, subgroup, quotient.vertex_image(v)):
                for x in cls:
                    self._class[v, x] = cls[0]

    def vertex_id(self, v, rep):
        return self._vertex_id[v, rep]

    def sheets_over(self, v):
        return [i for i, s in enumerate(self.vertex_sheets) if s.base_vertex == v]

    def edges_over(self, e):
        return [i + 1 for i, s in enumerate(self.edge_sheets) if s.base_edge == e]

    def vertex_class(self, v, x):
        return self._class[v, x]

    def decompose(self, v, x):
        """
        Write x = p * r * rho(h) with r the class label at v.

        Returns:
            tuple: (r, p, h) with the least h, then the least p.
        """
        q = self.quotient.group
        r = self._class[v, x]
        for h in self.quotient.base.vertex_group(v).elements:
            for p in self.subgroup:
                if q.prod(p, r, self.quotient.rho_vertex(v, h)) == x:
                    return r, p, h
        raise InvalidQuotient([f"element {x} is not in the class of {r} at vertex {v}"])

    def summary(self):
        return {
            "index": self.index,
            "vertices": len(self.vertex_sheets),
            "edges": len(self.edge_sheets),
            "volume": volume(self.cover),
            "base_volume": volume(self.quotient.base),
            "unweighted_volume": unweighted_volume(self.cover),
            "base_unweighted_volume": unweighted_volume(self.quotient.base),
        }


def build_cover(quotient, subgroup):
    """
    Covering graph of groups for rho^-1(subgroup).

    Raises:
        InvalidQuotient: when the quotient fails validation or the volume
            identity does not hold.
        SubgroupParentMismatch: when the subgroup is not a subgroup of Q.
    """
    if subgroup.parent != quotient.group:
        raise SubgroupParentMismatch()
    quotient.require_valid()
    base, q = quotient.base, quotient.group

    vertex_sheets = []
    for v in range(len(base.vertices)):
        gv = base.vertex_group(v)
        for cls in double_cosets(q, subgroup, quotient.vertex_image(v)):
            r = cls[0]
            members = [g for g in gv.elements
                       if q.prod(r, quotient.rho_vertex(v, g), q.inv(r)) in subgroup]
            stab = Subgroup(gv, members, check=False)
            group, incl = subgroup_group(stab, name=f"K({v},{r})")
            vertex_sheets.append(VertexSheet(v, r, stab, incl))
    vertices = [Vertex(s.inclusion.source, name=f"{base.vertices[s.base_vertex].name or s.base_vertex}/{s.rep}")
                for s in vertex_sheets]
    vertex_id = {(s.base_vertex, s.rep): i for i, s in enumerate(vertex_sheets)}

    partial = CoverData(quotient, subgroup, None, vertex_sheets, [], None)
    edge_sheets = []
    edges = []
    for e in base.positive_edges():
        u, w = base.origin(e), base.terminus(e)
        gu = base.vertex_group(u)
        ge = base.edge_group(e)
        tail_image = Subgroup(q, (quotient.rho_vertex(u, base.alpha(-e)(c)) for c in ge.elements), check=False)
        for cls in double_cosets(q, subgroup, tail_image):
            members = set(cls)
            r_u = partial.vertex_class(u, cls[0])
            h = next(g for g in gu.elements if q.mul(r_u, quotient.rho_vertex(u, g)) in members)
            rep = q.mul(r_u, quotient.rho_vertex(u, h))
            r_w, _, h_head = partial.decompose(w, q.mul(rep, quotient.rho_edge(e)))
            stab_elems = [c for c in ge.elements
                          if q.prod(rep, quotient.rho_vertex(u, base.alpha(-e)(c)), q.inv(rep)) in subgroup]
            stab = Subgroup(ge, stab_elems, check=False)
            group, incl = subgroup_group(stab, name=f"C({e},{rep})")
            tail_sheet = vertex_sheets[vertex_id[u, r_u]]
            head_sheet = vertex_sheets[vertex_id[w, r_w]]
            tail_img = [tail_sheet.index(gu.conj(h, base.alpha(-e)(c))) for c in stab.elements]
            gw = base.vertex_group(w)
            head_img = [head_sheet.index(gw.conj(h_head, base.alpha(e)(c))) for c in stab.elements]
            edges.append(Edge(
                vertex_id[u, r_u], vertex_id[w, r_w], group,
                GroupHom(group, head_sheet.inclusion.source, head_img, check=False),
                GroupHom(group, tail_sheet.inclusion.source, tail_img, check=False),
                base.length(e), name=f"{base.edge(e).name or 'e' + str(e)}/{rep}",
            ))
            edge_sheets.append(EdgeSheet(e, rep, h, h_head, stab, incl))

    cover = GraphOfGroups(vertices, edges, name=f"cover({base.name or 'graph'})")
    projection = GoGMap(
        cover, base,
        [s.base_vertex for s in vertex_sheets],
        [s.inclusion for s in vertex_sheets],
        [EdgePath(base.origin(s.base_edge), base.terminus(s.base_edge),
                  (s.tail_shift, base.vertex_group(base.terminus(s.base_edge)).inv(s.head_shift)),
                  (s.base_edge,))
         for s in edge_sheets],
        name="projection",
    )
    data = CoverData(quotient, subgroup, cover, vertex_sheets, edge_sheets, projection)
    expected = data.index * volume(base)
    if volume(cover) != expected:
        raise InvalidQuotient([f"cover volume {volume(cover)} differs from {expected}"])
    logger.info("built cover of index %d: %d vertices, %d edges", data.index, len(vertices), len(edges))
    return data


def fiber_identity(data, v):
    """Check n / |G_v| == sum over sheets of 1 / |K|; returns both sides."""
    lhs = Fraction(data.index, data.quotient.base.vertex_group(v).order)
    rhs = sum((Fraction(1, data.vertex_sheets[i].stabilizer.order) for i in data.sheets_over(v)), Fraction(0))
    return lhs, rhs


def rescale(graph, factor):
    """Multiply every edge length by factor."""
    return scale(graph, factor)


# Lifting

def lift_word(data, sheet, offset, path):
    """
    Lift a base path starting on the given cover vertex.

    ``offset`` is the base-group element by which the current frame differs
    from the sheet's own. Returns (cover path without its final element,
    end sheet, end offset); the caller decides the final element.
    """
    base, cover = data.quotient.base, data.cover
    elements = []
    edges = []
    x = data.vertex_sheets[sheet].inclusion.target.mul(offset, path.elements[0])
    current = sheet
    for e, g in zip(path.edges, path.elements[1:]):
        current, k, step, x = _cross(data, current, x, e)
        elements.append(k)
        edges.append(step)
        x = base.vertex_group(base.terminus(e)).mul(x, g)
    return elements, edges, current, x


def _cross(data, sheet, x, e):
    base, cover = data.quotient.base, data.cover
    d = abs(e)
    v = data.vertex_sheets[sheet].base_vertex
    group = base.vertex_group(v)
    stab = data.vertex_sheets[sheet].stabilizer
    for eid in data.edges_over(d):
        edge = cover.edge(eid)
        es = data.edge_sheets[eid - 1]
        if e > 0 and edge.tail != sheet or e < 0 and edge.head != sheet:
            continue
        for c in base.edge_group(d).elements:
            if e > 0:
                k = group.prod(x, base.alpha(-d)(c), group.inv(es.tail_shift))
            else:
                k = group.prod(x, base.alpha(d)(c), group.inv(es.head_shift))
            if k not in stab:
                continue
            if e > 0:
                far = base.vertex_group(base.terminus(d))
                new_x = far.mul(es.head_shift, far.inv(base.alpha(d)(c)))
                return edge.head, data.vertex_sheets[sheet].index(k), eid, new_x
            far = base.vertex_group(base.origin(d))
            new_x = far.mul(es.tail_shift, far.inv(base.alpha(-d)(c)))
            return edge.tail, data.vertex_sheets[sheet].index(k), -eid, new_x
    raise IncompatibleQuotient(f"edge {e} has no lift at cover vertex {sheet}")


def lift_power(data, loop, start_sheet=None):
    """
    Least power of a hyperbolic base loop whose lift closes up.

    The loop is first cyclically reduced; ``start_sheet`` must be a cover
    vertex over the start of the reduced loop.

    Returns:
        tuple: (k, lifted loop in the cover).

    Raises:
        EllipticLoop: if the loop has no edges once reduced
        StartSheetMismatch: if start_sheet lies over another base vertex
    """
    base, q = data.quotient.base, data.quotient.group
    reduced, _ = cyclic_reduce(base, loop.as_loop())
    if not reduced.edges:
        raise EllipticLoop()
    v0 = reduced.start
    if start_sheet is None:
        start_sheet = data.sheets_over(v0)[0]
    elif not 0 <= start_sheet < len(data.vertex_sheets) or data.vertex_sheets[start_sheet].base_vertex != v0:
        raise StartSheetMismatch(start_sheet, v0)
    r0 = data.vertex_sheets[start_sheet].rep
    hol = data.quotient.holonomy(reduced)
    k, power = 1, hol
    while q.prod(r0, power, q.inv(r0)) not in data.subgroup:
        k += 1
        power = q.mul(power, hol)
    word = loop_power(base, reduced, k)
    elements, edges, end, x = lift_word(data, start_sheet, 0, word)
    if end != start_sheet or x not in data.vertex_sheets[end].stabilizer:
        raise IncompatibleQuotient("lifted power does not close up")
    elements.append(data.vertex_sheets[end].index(x))
    lifted = EdgePath(start_sheet, start_sheet, tuple(elements), tuple(edges), True)
    return k, lifted


# Transporting quotients and maps

def _tree_paths(graph, tree):
    """For every vertex, the tree path from vertex 0 as a base path."""
    forest = graph.nx_graph(tree)
    paths = {}
    for w, route in nx.single_source_shortest_path(forest, 0).items():
        edges = tuple(graph.oriented(next(iter(forest[a][b])), a) for a, b in zip(route, route[1:]))
        paths[w] = EdgePath(0, w, (0,) * (len(edges) + 1), edges)
    return paths


def _generator_loops(graph, tree):
    """Loops at vertex 0 generating the fundamental group, with their labels."""
    paths = _tree_paths(graph, tree)
    out = []
    for v in range(len(graph.vertices)):
        for g in graph.vertex_group(v).elements:
            if g:
                loop = concat_paths(graph, paths[v], trivial_path(v, g), reverse_path(graph, paths[v]))
                out.append((("vertex", v, g), loop))
    for e in graph.positive_edges():
        if e in tree:
            continue
        u, w = graph.origin(e), graph.terminus(e)
        step = EdgePath(u, w, (0, 0), (e,))
        loop = concat_paths(graph, paths[u], step, reverse_path(graph, paths[w]))
        out.append((("edge", e), loop))
    return out


def transport_quotient(f, quotient):
    """
    Find rho' on the target with rho'(f(loop)) == rho(loop) on generators.

    Raises:
        IncompatibleQuotient: when no such quotient exists, e.g. because f
            is not a homotopy equivalence.
    """
    src, tgt, q = f.source, f.target, quotient.group
    tree = spanning_tree(tgt)
    targets = [(quotient.holonomy(loop), map_path(f, loop)) for _, loop in _generator_loops(src, quotient.tree)]
    hom_choices = [all_homomorphisms(tgt.vertex_group(w), q) for w in range(len(tgt.vertices))]
    free_edges = [e for e in tgt.positive_edges() if e not in tree]
    for homs in product(*hom_choices):
        for values in product(range(q.order), repeat=len(free_edges)):
            edge_values = [0] * len(tgt.edges)
            for e, val in zip(free_edges, values):
                edge_values[e - 1] = val
            trial = FiniteQuotient(tgt, q, homs, edge_values, tree=tree, name=f"{quotient.name or 'rho'}'")
            if all(trial.holonomy(image) == want for want, image in targets):
                if not validate_quotient(trial)["errors"]:
                    return trial
    raise IncompatibleQuotient("no quotient of the target matches the source quotient through the map")


def push_map_to_cover(f, quotient, subgroup, source_cover=None):
    """
    Lift f to the covers defined by rho^-1(subgroup) on both sides.

    Returns:
        tuple: (cover map, target quotient, source cover, target cover).
    """
    q_target = transport_quotient(f, quotient)
    src_cover = source_cover or build_cover(quotient, subgroup)
    tgt_cover = build_cover(q_target, subgroup)
    src, tgt, q = f.source, f.target, quotient.group
    tree_paths = _tree_paths(src, quotient.tree)
    phi = [q_target.holonomy(map_path(f, tree_paths[v])) for v in range(len(src.vertices))]

    vertex_image, vertex_hom, shifts = [], [], []
    for sheet in src_cover.vertex_sheets:
        v = sheet.base_vertex
        w = f.vertex_image[v]
        r_img, _, y = tgt_cover.decompose(w, q.mul(sheet.rep, phi[v]))
        target_id = tgt_cover.vertex_id(w, r_img)
        target_sheet = tgt_cover.vertex_sheets[target_id]
        gw = tgt.vertex_group(w)
        image = [target_sheet.index(gw.conj(y, f.vertex_hom[v](k))) for k in sheet.stabilizer.elements]
        vertex_image.append(target_id)
        vertex_hom.append(GroupHom(sheet.inclusion.source, target_sheet.inclusion.source, image, check=False))
        shifts.append(y)

    edge_image = []
    for eid, es in enumerate(src_cover.edge_sheets, start=1):
        edge = src_cover.cover.edge(eid)
        tail, head = edge.tail, edge.head
        proj = src_cover.projection.edge_image[eid - 1]
        base_path = map_path(f, proj)
        elements, edges, end, x = lift_word(tgt_cover, vertex_image[tail], shifts[tail], base_path)
        w = tgt_cover.vertex_sheets[vertex_image[head]].base_vertex
        last = tgt.vertex_group(w).mul(x, tgt.vertex_group(w).inv(shifts[head]))
        if end != vertex_image[head] or last not in tgt_cover.vertex_sheets[end].stabilizer:
            raise IncompatibleQuotient(f"lift of cover edge {eid} does not end on the image sheet")
        elements.append(tgt_cover.vertex_sheets[end].index(last))
        path = EdgePath(vertex_image[tail], end, tuple(elements), tuple(edges))
        edge_image.append(reduce_path(tgt_cover.cover, path))

    lifted = GoGMap(src_cover.cover, tgt_cover.cover, vertex_image, vertex_hom, edge_image,
                    name=f"{f.name or 'f'}~")
    _check_squares(f, lifted, src_cover, tgt_cover, shifts)
    return lifted, q_target, src_cover, tgt_cover


def _check_squares(f, lifted, src_cover, tgt_cover, shifts):
    """projection' after lift == f after projection, up to the vertex shifts."""
    tgt = f.target
    for eid in range(1, len(src_cover.edge_sheets) + 1):
        edge = src_cover.cover.edge(eid)
        down = map_path(tgt_cover.projection, lifted.edge_image[eid - 1])
        around = map_path(f, src_cover.projection.edge_image[eid - 1])
        w = f.vertex_image[src_cover.vertex_sheets[edge.head].base_vertex]
        around = multiply_right(tgt, multiply_left(tgt, shifts[edge.tail], around),
                                tgt.vertex_group(w).inv(shifts[edge.head]))
        if not paths_equal(tgt, down, around):
            raise IncompatibleQuotient(f"projection square fails on cover edge {eid}")


def verify_isometry(f, quotient, subgroup, threads=1, budget=None):
    """
    Compare the stretch factor of f with that of its lift between
    covers rescaled by 1/n.
    """
    from core.lipschitz import distance, stretch_factor
    report = ReportBuilder(f"isometry({f.name or 'map'})")
    lam_base, witness_base, _ = distance(f, threads=threads, budget=budget)
    lifted, q_target, src_cover, tgt_cover = push_map_to_cover(f, quotient, subgroup)
    n = src_cover.index
    scaled = with_graphs(lifted, rescale(src_cover.cover, Fraction(1, n)),
                         rescale(tgt_cover.cover, Fraction(1, n)))
    lam_cover, witness_cover = stretch_factor(scaled, threads=threads, budget=budget)
    report.check(lam_base == lam_cover, f"stretch factors differ: {lam_base} != {lam_cover}")
    report.check(volume(src_cover.cover) == n * volume(f.source), "source cover volume is not n times the base volume")
    report.check(volume(tgt_cover.cover) == n * volume(f.target), "target cover volume is not n times the base volume")
    report.note(index=n, lambda_base=lam_base, lambda_cover=lam_cover, equal=lam_base == lam_cover,
                source_cover=src_cover.summary(), target_cover=tgt_cover.summary())
    return report.result(witness_base=witness_base, witness_cover=witness_cover,
                         source_cover=src_cover, target_cover=tgt_cover, lifted_map=lifted)
