import json
from fractions import Fraction

import pytest

from core.cover import build_cover
from core.errors import DanglingReference, ParseError, ValidationError, ValidationFailure
from core.gog import euler_char, volume
from core.parser import dump_graph, dump_workspace, parse_workspace
from tests.conftest import sample_files


def write(tmp_path, name, document):
    path = tmp_path / name
    path.write_text(json.dumps(document, indent=2), encoding="utf-8")
    return str(path)


SEGMENT = {
    "vertices": [{"name": "a", "group": "cyclic(2)"}, {"name": "b", "group": "cyclic(2)"}],
    "edges": [{"from": 0, "to": 1, "length": "1"}],
}


class TestLoading:
    def test_single_file(self):
        workspace = parse_workspace(sample_files("dihedral"))
        assert sorted(workspace.graphs) == ["dihedral"]
        assert sorted(workspace.quotients) == ["klein"]
        assert workspace.graph("dihedral").vertex_group(0).order == 2

    def test_bundle(self):
        workspace = parse_workspace(sample_files("caterpillar"))
        assert len(workspace.graphs) == 2
        assert len(workspace.maps) == 1
        f = workspace.map("cat2tri")
        assert f.source is workspace.graph("caterpillar")
        assert f.target is workspace.graph("tripod")

    def test_cross_file_reference(self):
        workspace = parse_workspace(sample_files("caterpillar", "reverse"))
        assert workspace.map("tri2cat").target is workspace.graph("caterpillar")

    def test_whole_corpus(self, corpus):
        assert corpus.summary()["maps"] == ["cat2tri", "id", "tri2cat", "twist"]
        assert corpus.sources["k23"].endswith("k23.json")

    def test_named_group_and_rationals(self, tmp_path):
        path = write(tmp_path, "named.json", {
            "groups": {"two": {"table": [[0, 1], [1, 0]]}},
            "graphs": {"seg": {
                "vertices": [{"group": "two"}, {"group": "two"}],
                "edges": [{"from": 0, "to": 1, "length": "3/4"}],
            }},
        })
        graph = parse_workspace([path]).graph("seg")
        assert volume(graph) == Fraction(3, 4)
        assert str(graph.length(1)) == "3/4"

    def test_edge_keys(self, tmp_path):
        path = write(tmp_path, "keys.json", {"graphs": {"seg": {
            "vertices": [{"group": "cyclic(2)"}, {"group": "cyclic(2)"}],
            "edges": [{"from": 0, "to": 1, "length": "1/1", "edge_group": "trivial",
                       "mono_to_head": [0], "mono_to_tail": [0]}],
        }}})
        graph = parse_workspace([path]).graph("seg")
        assert (graph.edge(1).tail, graph.edge(1).head) == (0, 1)
        assert graph.edge_group(1).order == 1
        assert volume(graph) == 1

    def test_subgroups(self, tmp_path):
        path = write(tmp_path, "sub.json", {"subgroups": {"half": {"elements": [0, 2]}}})
        workspace = parse_workspace(sample_files("dihedral") + [path])
        quotient = workspace.quotient("klein")
        assert workspace.subgroup("half", quotient).order == 2
        assert workspace.subgroup("trivial", quotient).order == 1
        assert workspace.subgroup("whole", quotient).order == 4


class TestErrors:
    def test_syntax_error(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"graphs": {\n  "x": [}\n', encoding="utf-8")
        with pytest.raises(ParseError) as info:
            parse_workspace([str(path)])
        assert info.value.exit_code == 1

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            parse_workspace([str(tmp_path / "absent.json")])

    def test_duplicate_name(self):
        with pytest.raises(ParseError) as info:
            parse_workspace(sample_files("caterpillar") * 2)
        assert "already defined" in str(info.value)

    def test_unknown_section(self, tmp_path):
        with pytest.raises(ParseError):
            parse_workspace([write(tmp_path, "odd.json", {"widgets": {}})])

    def test_dangling_group(self, tmp_path):
        document = {"graphs": {"seg": {"vertices": [{"group": "mystery"}], "edges": []}}}
        with pytest.raises(DanglingReference):
            parse_workspace([write(tmp_path, "dangling.json", document)])

    def test_dangling_graph(self, tmp_path):
        document = {"graphs": {"seg": SEGMENT}, "maps": {"m": {
            "source": "seg", "target": "nowhere", "vertex_image": [0, 1],
            "vertex_hom": [[0, 1], [0, 1]], "edge_image": [[0, 1, 0]],
        }}}
        with pytest.raises(DanglingReference):
            parse_workspace([write(tmp_path, "map.json", document)])

    def test_invalid_graph(self, tmp_path):
        document = {"graphs": {"seg": {
            "vertices": [{"group": "cyclic(2)"}, {"group": "cyclic(2)"}],
            "edges": [{"from": 0, "to": 1, "length": "-1"}],
        }}}
        path = write(tmp_path, "negative.json", document)
        with pytest.raises(ValidationError):
            parse_workspace([path])
        assert parse_workspace([path], validate=False).graph("seg").length(1) < 0

    def test_bad_homomorphism_entry(self, tmp_path):
        document = {"graphs": {"seg": {
            "vertices": [{"group": "cyclic(2)"}, {"group": "cyclic(2)"}],
            "edges": [{"from": 0, "to": 1, "length": 1, "edge_group": "cyclic(2)", "mono_to_head": [0, 5]}],
        }}}
        with pytest.raises(ValidationFailure):
            parse_workspace([write(tmp_path, "hom.json", document)])


class TestDumping:
    def test_cover_round_trip(self, corpus, tmp_path):
        quotient = corpus.quotient("tripodZ2")
        cover = build_cover(quotient, quotient.group.trivial_subgroup()).cover
        path = write(tmp_path, "cover.json", dump_workspace(graphs={"lifted": cover}))
        loaded = parse_workspace([path]).graph("lifted")
        assert volume(loaded) == volume(cover)
        assert euler_char(loaded) == euler_char(cover)
        assert [d.length for d in loaded.edges] == [d.length for d in cover.edges]

    def test_graph_with_edge_group(self, corpus):
        dumped = dump_graph(corpus.graph("twisted"))
        assert dumped["edges"][0]["edge_group"] == {"table": [[0, 1], [1, 0]]}
        assert dumped["edges"][1]["edge_group"] == "trivial"
        assert dumped["edges"][0]["length"] == "1"
        assert set(dumped["edges"][0]) == {"from", "to", "edge_group", "mono_to_head", "mono_to_tail", "length", "name"}

    def test_map_round_trip(self, corpus, tmp_path):
        f = corpus.map("cat2tri")
        document = dump_workspace(graphs={"src": f.source, "tgt": f.target}, maps={"g": (f, "src", "tgt")})
        loaded = parse_workspace([write(tmp_path, "map.json", document)]).map("g")
        assert [p.word() for p in loaded.edge_image] == [p.word() for p in f.edge_image]
