import json

import pytest

from isoconvex import __version__
from isoconvex.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, EXIT_VIOLATED, main
from isoconvex.report import from_jsonable, parse_csv_conditions

SCHEMA = {"tool_version", "command", "energy", "verdict", "conditions", "witnesses"}


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    return code, json.loads(out)


class TestClassify:
    @pytest.mark.parametrize("argv,verdict", [
        (["W_magic_plus"], "M_plus"),
        (["W_smooth"], "M_minus"),
        (["--h", "t^2", "--f", "z^2"], "BothConvex"),
    ])
    def test_examples(self, capsys, argv, verdict):
        code, doc = run_json(capsys, "classify", *argv)
        assert code == EXIT_OK
        assert doc["verdict"] == verdict
        assert SCHEMA <= set(doc)

    def test_both_convex_meaning(self, capsys):
        _, doc = run_json(capsys, "classify", "--h", "t^2", "--f", "z^2")
        assert doc["extra"]["meaning"] == "polyconvex (sum of polyconvex parts)"

    def test_not_rank_one_convex(self, capsys):
        code, doc = run_json(capsys, "classify", "--h=-(t + 1/t)", "--f=-(z^2)")
        assert code == EXIT_VIOLATED
        assert doc["verdict"] == "NotRankOneConvex"
        assert doc["extra"]["reduced_energy"] is None
        assert any("no log-volumetric reduction" in n for n in doc["notes"])

    def test_non_split_energy(self, capsys):
        code, _, err = run(capsys, "classify", "hencky")
        assert code == EXIT_USAGE and "split" in err


class TestCheck:
    def test_rank_one_magic_plus(self, capsys):
        code, doc = run_json(capsys, "check", "rank-one", "W_magic_plus", "--grid-t", "1.0001:1e4:200",
                             "--grid-z", "1e-4:1e4:200")
        assert code == EXIT_OK
        assert doc["verdict"] == "ConsistentOnGrid"
        eq = {c["id"]: c["equality_points"] for c in doc["conditions"]}
        assert len(eq["C1"]) >= 100 and len(eq["C3a"]) >= 100

    def test_polyconvex_magic_plus(self, capsys):
        code, doc = run_json(capsys, "check", "polyconvex", "W_magic_plus")
        assert code == EXIT_VIOLATED
        assert doc["witnesses"][0]["kind"] == "growth"

    def test_ks_det(self, capsys):
        code, doc = run_json(capsys, "check", "ks", "det", "--grid-t", "1.001:100:50", "--grid-z", "0.01:100:50")
        assert code == EXIT_OK and doc["command"] == "check ks"

    def test_custom_violated(self, capsys):
        code, doc = run_json(capsys, "check", "rank-one", "--h=-(t + 1/t)", "--f=-(z^2)")
        assert code == EXIT_VIOLATED
        assert doc["energy"]["h"] == "-(t + 1 / t)"

    def test_domain_failure(self, capsys):
        code, doc = run_json(capsys, "check", "rank-one", "--h", "t + sqrt(t - 2)^2", "--f", "log(z)")
        assert code == EXIT_NUMERIC
        assert doc["verdict"] == "NumericFailure" and doc["notes"]


class TestCustomEcho:
    def test_canonical_print(self, capsys):
        _, doc = run_json(capsys, "classify", "--h", "t+1/t", "--f", "z^2/2")
        assert doc["energy"]["h"] == "t + 1 / t"
        assert doc["energy"]["f"] == "z^2 / 2"

    def test_symmetry_note(self, capsys):
        _, doc = run_json(capsys, "classify", "--h", "t - log(t)", "--f", "log(z)")
        assert any("symmetr" in n for n in doc["notes"])


class TestOtherCommands:
    def test_catalog(self, capsys):
        code, doc = run_json(capsys, "catalog")
        ids = [c["id"] for c in doc["conditions"]]
        assert code == EXIT_OK and {"W_magic_plus", "W_magic_minus", "det"} <= set(ids)
        assert doc["tool_version"] == __version__

    def test_shield(self, capsys):
        code, doc = run_json(capsys, "shield", "W_magic_plus")
        assert code == EXIT_OK and doc["verdict"] == "ConsistentOnGrid"

    def test_shield_burkholder_param(self, capsys):
        code, doc = run_json(capsys, "shield", "burkholder", "--param", "p=3")
        assert code == EXIT_OK

    def test_radial_profile(self, capsys):
        code, doc = run_json(capsys, "radial", "W_magic_plus", "--profile", "r^2")
        assert code == EXIT_OK
        assert doc["verdict"] == "EnergyNeutral"
        assert abs(doc["conditions"][0]["min_margin"]) <= 1e-6
        assert doc["extra"]["profile_class"] == "Contracting"

    def test_radial_rescale_note(self, capsys):
        _, doc = run_json(capsys, "radial", "W_magic_plus", "--profile", "2*r^2")
        assert any("rescaled" in n for n in doc["notes"])

    def test_radial_increase(self, capsys):
        _, doc = run_json(capsys, "radial", "K_distortion", "--profile", "r^2")
        assert doc["verdict"] == "EnergyIncrease"

    def test_radial_packing(self, capsys, tmp_path):
        spec = {"radius": 1.0, "lambda": 1.2,
                "children": [{"center": [0.4, 0.0], "radius": 0.3, "profile": "r^2"}]}
        path = tmp_path / "pack.json"
        path.write_text(json.dumps(spec))
        code, doc = run_json(capsys, "radial", "W_magic_plus", "--packing", str(path))
        assert code == EXIT_OK and doc["verdict"] == "EnergyNeutral"

    def test_overlapping_packing_is_usage_error(self, capsys, tmp_path):
        spec = {"radius": 1.0, "children": [{"center": [0.2, 0.0], "radius": 0.3, "profile": "r^2"},
                                            {"center": [-0.2, 0.0], "radius": 0.3, "profile": "r^2"}]}
        path = tmp_path / "pack.json"
        path.write_text(json.dumps(spec))
        assert run(capsys, "radial", "W_magic_plus", "--packing", str(path))[0] == EXIT_USAGE

    def test_qc_small_budget(self, capsys):
        code, doc = run_json(capsys, "qc", "frobenius_sq", "--budget", "20", "--seed", "1")
        assert code == EXIT_OK
        assert doc["verdict"] in ("NoViolationFound", "EnergyNeutralFamily")
        assert doc["witnesses"][0]["seed"] == 1

    def test_out_file(self, capsys, tmp_path):
        path = tmp_path / "r.json"
        code, out, _ = run(capsys, "shield", "det", "--out", str(path))
        assert code == EXIT_OK and out == ""
        assert json.loads(path.read_text())["command"] == "shield"


class TestUsageErrors:
    @pytest.mark.parametrize("argv", [
        [],
        ["classify"],
        ["classify", "no_such_energy"],
        ["classify", "--h", "t"],
        ["classify", "W_magic_plus", "--h", "t", "--f", "z"],
        ["classify", "--h", "t +", "--f", "z"],
        ["classify", "--h", "t + q", "--f", "z"],
        ["check", "rank-one", "W_magic_plus", "--grid-t", "1:2"],
        ["check", "rank-one", "W_magic_plus", "--grid-t", "0.5:10:20"],
        ["check", "nonsense", "W_magic_plus"],
        ["radial", "W_magic_plus"],
        ["radial", "W_magic_plus", "--packing", "/nonexistent.json"],
        ["qc", "det", "--F0", "1,0,0"],
        ["qc", "det", "--budget", "0"],
        ["shield", "burkholder", "--param", "p"],
        ["classify", "W_magic_plus", "--energy", "W_smooth"],
    ])
    def test_exit_2(self, capsys, argv):
        assert run(capsys, *argv)[0] == EXIT_USAGE

    def test_version(self, capsys):
        assert main(["--version"]) == EXIT_OK
        assert __version__ in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["check", "rank-one", "W_magic_plus", "--grid-t", "1.001:1e3:60", "--grid-z", "1e-3:1e3:60"],
    ["check", "ks", "frobenius_sq", "--grid-t", "1.001:1e3:40", "--grid-z", "1e-3:1e3:40"],
    ["classify", "W_smooth"],
    ["shield", "W_magic_minus"],
    ["radial", "W_magic_plus", "--profile", "r^3"],
])
def test_csv_matches_json(capsys, argv):
    _, out_json, _ = run(capsys, *argv)
    _, out_csv, _ = run(capsys, *argv, "--format", "csv")
    doc = json.loads(out_json)
    rows = parse_csv_conditions(out_csv)
    assert [r["id"] for r in rows] == [c["id"] for c in doc["conditions"]]
    for r, c in zip(rows, doc["conditions"]):
        assert r["min_margin"] == from_jsonable(c["min_margin"])
        if isinstance(c["argmin"], (int, float)):
            assert r["argmin"] == c["argmin"]
        assert r["equality_points"] == [from_jsonable(p) for p in c["equality_points"]]
    assert f"# verdict={doc['verdict']}" in out_csv


def test_deterministic(capsys):
    argv = ["qc", "W_magic_minus", "--budget", "30", "--seed", "5"]
    a = run(capsys, *argv)[1]
    b = run(capsys, *argv)[1]
    assert a == b
