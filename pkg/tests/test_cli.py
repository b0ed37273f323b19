import json
from io import StringIO

import pytest

from core.parser import parse_workspace
from ui.cli import COMMANDS, RunOptions, build_parser, execute, run
from tests.conftest import sample_files


def cli(*argv):
    out, err = StringIO(), StringIO()
    code = execute(build_parser().parse_args(list(argv)), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def cli_json(*argv):
    code, out, _ = cli(*argv, "--json")
    return code, json.loads(out)


class TestCommands:
    def test_volume(self):
        code, out, _ = cli("volume", "--graph", "dihedral")
        assert code == 0
        assert "volume:".ljust(22) + "1" in out.splitlines()
        assert "euler characteristic:".ljust(22) + "0" in out.splitlines()

    def test_distance(self):
        code, data = cli_json("distance", "--from", "tripodA", "--to", "tripodB", "--map", "id")
        assert code == 0
        assert data["lambda"] == "9/8"
        assert data["log"] == 0.117783035656
        assert data["witness"]["shape"] == "doubly_degenerate"
        assert sorted(abs(e) for e in data["witness"]["edges"]) == [1, 1, 2, 2]
        assert data["witness"]["ratio"] == "9/8"
        assert "brute_check" not in data

    def test_distance_by_endpoints(self):
        code, data = cli_json("distance", "--from", "caterpillar", "--to", "tripod")
        assert code == 0
        assert data["map"] == "cat2tri"
        assert data["lambda"] == "4/3"

    def test_digits(self):
        _, data = cli_json("distance", "--map", "id", "--digits", "4")
        assert data["log"] == 0.1178

    def test_brute_check(self):
        code, data = cli_json("distance", "--map", "id", "--brute-check", "8")
        assert code == 0
        check = data["brute_check"]
        assert (check["k"], check["lambda_k"]) == (8, "9/8")
        assert check["exhaustive"] is True
        assert check["agrees"] is True

    def test_short_brute_check_is_a_bound(self):
        code, data = cli_json("distance", "--map", "cat2tri", "--brute-check", "2")
        assert code == 0
        assert data["brute_check"]["lambda_k"] == data["lambda"] == "4/3"
        assert data["brute_check"]["exhaustive"] is False
        assert data["brute_check"]["agrees"] is True

    def test_brute_check_depth_limit(self):
        code, _, err = cli("distance", "--map", "id", "--brute-check", "9")
        assert code == 2
        assert "LIPSCHITZ_BRUTE_MAX_EDGES" in err

    def test_normalize(self):
        code, _, err = cli("distance", "--map", "twist")
        assert code == 2
        assert "volume" in err
        assert cli("distance", "--map", "twist", "--normalize")[0] == 0

    def test_candidates(self):
        code, data = cli_json("candidates", "--graph", "tripodA")
        assert code == 0
        assert len(data["candidates"]) == 3
        assert {c["length"] for c in data["candidates"]} == {"4/3"}

    def test_witness(self):
        code, data = cli_json("witness", "--map", "cat2tri")
        assert code == 0
        assert data["certificate"]["certified"] is True
        assert data["lambda"] == "4/3"

    def test_cover(self):
        code, data = cli_json("cover", "--quotient", "klein")
        assert code == 0
        assert data["summary"]["index"] == 4
        assert data["summary"]["volume"] == "4"
        assert list(data["workspace"]["graphs"]) == ["klein_trivial_cover"]

    def test_isometry_check(self):
        code, out, _ = cli("isometry-check", "--map", "cat2tri", "--quotient", "z2", "--subgroup", "trivial")
        assert code == 0
        assert out.rstrip().splitlines()[-1] == "equal: 4/3 = 4/3"

    def test_spine_star(self):
        code, data = cli_json("spine-star", "--graph", "barbell")
        assert code == 0
        assert data["elements"] == [[], [3]]
        assert data["reduced_collapses"] == [[3]]

    def test_surviving(self):
        code, data = cli_json("surviving", "--graph", "tripodA", "--quotient", "tripodZ2")
        assert code == 0
        assert data["surviving"] == [1, 2, 3]
        assert len(data["essential_orbits"]) == 3

    def test_correspondence(self):
        code, data = cli_json("thmC-check", "--quotient", "tripodZ2")
        assert code == 0
        assert data["valid"] is True

    def test_fold_run(self, tmp_path):
        target = tmp_path / "steps"
        code, data = cli_json("fold-run", "--map", "cat2tri", "--quotient", "z2",
                              "--emit-intermediates", str(target))
        assert code == 0
        assert len(data["events"]) == 1
        assert data["lifted"]["valid"] is True
        written = sorted(p.name for p in target.glob("*.json"))
        assert written == ["step_00.json", "step_01.json", "step_02.json"]
        point = parse_workspace([str(target / "step_01.json")]).graph("step_01")
        assert len(point.edges) == 3

    def test_validate(self):
        code, data = cli_json("validate")
        assert code == 0
        assert all(entry["valid"] for entry in data["objects"])


class TestOutput:
    def test_json_is_deterministic(self):
        first = cli("witness", "--map", "tri2cat", "--json")[1]
        second = cli("witness", "--map", "tri2cat", "--json", "--threads", "3")[1]
        assert first == second

    def test_workspace_flag(self):
        code, data = cli_json("volume", "--graph", "spider", "--workspace", *sample_files("spider"))
        assert code == 0
        assert data["volume"] == "1"

    def test_every_command_is_registered(self):
        parser = build_parser()
        for name in COMMANDS:
            assert parser.parse_args([name]).command == name

    def test_run_without_parser(self, corpus):
        result = run("volume", corpus, RunOptions(graph="k23"))
        assert result.exit_code == 0
        assert result.data["euler_char"] == -1


class TestExitCodes:
    def test_missing_flag(self):
        code, _, err = cli("volume")
        assert code == 1
        assert "--graph is required" in err

    def test_unknown_name(self):
        code, _, err = cli("volume", "--graph", "nowhere")
        assert code == 1
        assert "nowhere" in err

    def test_mismatched_endpoints(self):
        assert cli("distance", "--map", "id", "--from", "caterpillar")[0] == 1

    def test_budget(self):
        code, _, err = cli("candidates", "--graph", "k23", "--budget", "1")
        assert code == 2
        assert err.startswith("error:")

    def test_invalid_workspace(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"graphs": {"seg": {
            "vertices": [{"group": "cyclic(2)"}, {"group": "cyclic(2)"}],
            "edges": [{"from": 0, "to": 1, "length": "0"}],
        }}}), encoding="utf-8")
        assert cli("volume", "--graph", "seg", "--workspace", str(path))[0] == 1
        code, data = cli_json("validate", "--workspace", str(path))
        assert code == 1
        assert data["objects"][0]["valid"] is False

    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["frobnicate"])
