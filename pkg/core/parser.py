"""
Workspace loading: named groups, graphs, maps, quotients and subgroups
read from one or more JSON files, plus the matching dump functions.

A workspace file is a JSON object with any of the sections ``groups``,
``graphs``, ``maps``, ``quotients`` and ``subgroups``, each a mapping from
names to definitions. Names are shared across all files of a workspace;
references may point into another file. Rationals are written as "p/q"
strings or integers. Group references are either names from ``groups`` or
preset strings such as ``"cyclic(2)"``.
"""

import json
import logging
from pathlib import Path

from core.cover import FiniteQuotient, validate_quotient
from core.errors import DanglingReference, LipschitzError, ParseError, ValidationError
from core.fingroup import GroupHom, Subgroup, make_group
from core.gog import Edge, GraphOfGroups, Vertex, make_path, validate_gog
from core.morphism import GoGMap, validate_map
from utils.helpers import format_fraction, parse_fraction

logger = logging.getLogger(__name__)

SECTIONS = ("groups", "graphs", "maps", "quotients", "subgroups")
_PRESET_KINDS = ("trivial", "klein4", "cyclic", "symmetric", "dihedral")


def _line_of(text, name):
    """First line mentioning "name", for error context."""
    needle = f'"{name}"'
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return 1


class Workspace:
    """Named objects loaded from workspace files."""

    def __init__(self):
        self.groups = {}
        self.graphs = {}
        self.maps = {}
        self.quotients = {}
        self.subgroups = {}
        self.sources = {}

    def graph(self, name):
        return self._get(self.graphs, name)

    def map(self, name):
        return self._get(self.maps, name)

    def quotient(self, name):
        return self._get(self.quotients, name)

    def subgroup(self, name, quotient):
        """Subgroup of the quotient's group: "trivial", "whole" or a named entry."""
        q = quotient.group
        if name == "trivial":
            return q.trivial_subgroup()
        if name == "whole":
            return q.whole()
        raw = self._get(self.subgroups, name)
        return Subgroup(q, raw["elements"])

    def _get(self, table, name):
        if name not in table:
            raise DanglingReference(self.sources.get(name, "workspace"), name)
        return table[name]

    def summary(self):
        return {section: sorted(getattr(self, section)) for section in SECTIONS}


class WorkspaceParser:
    """Reads workspace files and builds the objects they describe."""

    def __init__(self, validate=True):
        self.validate = validate
        self.raw = {section: {} for section in SECTIONS}
        self.texts = {}
        self.origin = {}

    def parse(self, paths):
        """
        Load and cross-link every file.

        Args:
            paths: workspace JSON files, in order

        Returns:
            Workspace: the validated workspace
        """
        for path in paths:
            self._read(Path(path))
        workspace = Workspace()
        workspace.sources = dict(self.origin)
        for name, spec in self.raw["groups"].items():
            workspace.groups[name] = self._group(spec, name)
        for name, spec in self.raw["graphs"].items():
            workspace.graphs[name] = self._graph(workspace, name, spec)
        for name, spec in self.raw["maps"].items():
            workspace.maps[name] = self._map(workspace, name, spec)
        for name, spec in self.raw["quotients"].items():
            workspace.quotients[name] = self._quotient(workspace, name, spec)
        workspace.subgroups = dict(self.raw["subgroups"])
        logger.info("loaded workspace: %s", workspace.summary())
        return workspace

    def _read(self, path):
        source = str(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ParseError(source, 0, f"cannot read file: {exc.strerror}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(source, exc.lineno, exc.msg) from exc
        if not isinstance(data, dict):
            raise ParseError(source, 1, "workspace must be a JSON object")
        self.texts[source] = text
        for section, entries in data.items():
            if section not in SECTIONS:
                raise ParseError(source, _line_of(text, section), f"unknown section '{section}'")
            if not isinstance(entries, dict):
                raise ParseError(source, _line_of(text, section), f"section '{section}' must map names to objects")
            for name, spec in entries.items():
                if name in self.origin:
                    raise ParseError(source, _line_of(text, name),
                                     f"'{name}' is already defined in {self.origin[name]}")
                self.origin[name] = source
                self.raw[section][name] = spec

    def _fail(self, name, reason):
        source = self.origin.get(name, "workspace")
        return ParseError(source, _line_of(self.texts.get(source, ""), name), f"{name}: {reason}")

    def _group(self, spec, name):
        try:
            return make_group(spec)
        except LipschitzError as exc:
            raise self._fail(name, str(exc)) from exc

    def _resolve_group(self, workspace, ref, owner):
        if isinstance(ref, str):
            if ref in workspace.groups:
                return workspace.groups[ref]
            kind = ref.split("(")[0].strip()
            if kind not in _PRESET_KINDS:
                raise DanglingReference(self.origin.get(owner, "workspace"), ref)
        return self._group(ref, owner)

    def _hom(self, source, target, images, name, what):
        images = list(images)
        if len(images) != source.order or any(not isinstance(x, int) or not 0 <= x < target.order for x in images):
            raise self._fail(name, f"{what} must list {source.order} elements of a group of order {target.order}")
        return GroupHom(source, target, images, check=False)

    def _graph(self, workspace, name, spec):
        try:
            vertices = []
            for v in spec["vertices"]:
                vertices.append(Vertex(self._resolve_group(workspace, v.get("group", "trivial"), name), v.get("name")))
            edges = []
            for i, d in enumerate(spec["edges"], start=1):
                tail, head = d["from"], d["to"]
                if not (0 <= tail < len(vertices) and 0 <= head < len(vertices)):
                    raise self._fail(name, f"edge {i} joins missing vertices")
                group = self._resolve_group(workspace, d.get("edge_group", "trivial"), name)
                trivial = [0] * group.order
                to_head = self._hom(group, vertices[head].group, d.get("mono_to_head", trivial),
                                    name, f"mono_to_head of edge {i}")
                to_tail = self._hom(group, vertices[tail].group, d.get("mono_to_tail", trivial),
                                    name, f"mono_to_tail of edge {i}")
                rev = d.get("reverse_length")
                edges.append(Edge(tail, head, group, to_head, to_tail, parse_fraction(d["length"]),
                                  None if rev is None else parse_fraction(rev), d.get("name")))
        except (KeyError, TypeError, ValueError) as exc:
            raise self._fail(name, f"malformed graph ({exc})") from exc
        graph = GraphOfGroups(vertices, edges, name=name)
        if self.validate:
            report = validate_gog(graph)
            if report["errors"]:
                raise ValidationError(f"{self.origin[name]}: graph {name}", report["errors"])
        return graph

    def _map(self, workspace, name, spec):
        try:
            source = workspace.graph(spec["source"])
            target = workspace.graph(spec["target"])
            vertex_image = list(spec["vertex_image"])
            if len(vertex_image) != len(source.vertices) or any(
                    not 0 <= w < len(target.vertices) for w in vertex_image):
                raise self._fail(name, "vertex_image must send every source vertex to a target vertex")
            homs = [self._hom(source.vertex_group(v), target.vertex_group(w), images, name, f"vertex_hom {v}")
                    for v, (w, images) in enumerate(zip(vertex_image, spec["vertex_hom"]))]
            paths = []
            for e, word in zip(source.positive_edges(), spec["edge_image"]):
                start = vertex_image[source.origin(e)]
                paths.append(make_path(target, start, word))
        except (DanglingReference, ParseError):
            raise
        except LipschitzError as exc:
            raise self._fail(name, str(exc)) from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise self._fail(name, f"malformed map ({exc})") from exc
        f = GoGMap(source, target, vertex_image, homs, paths, name=name)
        if self.validate:
            report = validate_map(f)
            if report["errors"]:
                raise ValidationError(f"{self.origin[name]}: map {name}", report["errors"])
        return f

    def _quotient(self, workspace, name, spec):
        try:
            base = workspace.graph(spec["graph"])
            group = self._resolve_group(workspace, spec["group"], name)
            homs = [self._hom(base.vertex_group(v), group, images, name, f"vertex_images {v}")
                    for v, images in enumerate(spec["vertex_images"])]
            quotient = FiniteQuotient(base, group, homs, spec.get("edge_values", [0] * len(base.edges)),
                                      tree=spec.get("tree"), reverse_values=spec.get("reverse_values"), name=name)
        except DanglingReference:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise self._fail(name, f"malformed quotient ({exc})") from exc
        if self.validate:
            report = validate_quotient(quotient)
            if report["errors"]:
                raise ValidationError(f"{self.origin[name]}: quotient {name}", report["errors"])
        return quotient


def parse_workspace(files, validate=True):
    """Load a workspace; raises ParseError, ValidationError or DanglingReference."""
    return WorkspaceParser(validate=validate).parse(files)


# Dumping

def dump_group(group):
    """
    Workspace form of a group.

    Args:
        group: FiniteGroup

    Returns:
        str or dict: ``"trivial"`` for the trivial group, else ``{"table": rows}``
    """
    if group.order == 1:
        return "trivial"
    return {"table": [list(row) for row in group.table]}


def dump_graph(graph):
    """JSON-ready definition of a graph in the workspace schema."""
    return {
        "vertices": [{"name": v.name, "group": dump_group(v.group)} if v.name is not None
                     else {"group": dump_group(v.group)} for v in graph.vertices],
        "edges": [_dump_edge(d) for d in graph.edges],
    }


def _dump_edge(d):
    out = {
        "from": d.tail,
        "to": d.head,
        "edge_group": dump_group(d.group),
        "mono_to_head": list(d.mono_to_head.image),
        "mono_to_tail": list(d.mono_to_tail.image),
        "length": format_fraction(d.length),
    }
    if d.reverse_length != d.length:
        out["reverse_length"] = format_fraction(d.reverse_length)
    if d.name is not None:
        out["name"] = d.name
    return out


def dump_path(path):
    return list(path.word())


def dump_map(f, source_name, target_name):
    """JSON-ready map definition naming its graphs by their workspace names."""
    return {
        "source": source_name,
        "target": target_name,
        "vertex_image": list(f.vertex_image),
        "vertex_hom": [list(h.image) for h in f.vertex_hom],
        "edge_image": [dump_path(p) for p in f.edge_image],
    }


def dump_workspace(graphs=None, maps=None):
    """A workspace document holding the given named graphs and maps."""
    out = {}
    if graphs:
        out["graphs"] = {name: dump_graph(g) for name, g in graphs.items()}
    if maps:
        out["maps"] = {name: dump_map(f, s, t) for name, (f, s, t) in maps.items()}
    return out
