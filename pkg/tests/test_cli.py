"""Command-line runner: exit codes, reports, determinism."""

import csv
import json
import math

import pytest

from einwarp.cli import main

PHI = {
    "op": "mul",
    "args": [
        {"op": "const", "args": [0.5773502691896258]},
        {"op": "sin", "args": [{"op": "t", "args": []}]},
    ],
}
F_REF = {
    "op": "mul",
    "args": [
        {"op": "const", "args": [0.816496580927726]},
        {"op": "sin", "args": [{"op": "t", "args": []}]},
    ],
}


def mwp_payload(rho=None):
    payload = {
        "base": {"min": 0.0, "max": math.pi},
        "fibers": [
            {"dim": 2, "curvature": 1.0, "radius": 0.35, "warping": PHI},
            {"dim": 2, "curvature": 1.0, "radius": 0.35, "warping": PHI},
        ],
    }
    if rho is not None:
        payload["rho"] = rho
    return payload


def write_scene(path, kind, payload, **extra):
    scene = {"schema_version": 1, "kind": kind, "payload": payload, "seed": 0}
    scene.update(extra)
    path.write_text(json.dumps(scene))
    return str(path)


def read_report(out_dir):
    with open(out_dir / "report.json") as fh:
        return json.load(fh)


class TestExitCodes:
    def test_build_example_passes(self, tmp_path):
        scene = write_scene(
            tmp_path / "s.json", "three-curvature-example",
            {"n": 5, "p1": 2, "p2": 2, "k1": 1.0, "k2": 1.0, "rho": 4.0},
        )
        out = tmp_path / "out"
        assert main(["build-example", "--scene", scene, "--out", str(out), "--grid", "3"]) == 0
        doc = read_report(out)
        assert doc["all_pass"] is True
        assert doc["checks"]["einstein"]["residual"] < 1e-6

    def test_einstein_failure_names_check(self, tmp_path, capsys):
        scene = write_scene(tmp_path / "s.json", "mwp-metric", mwp_payload(rho=3.0))
        out = tmp_path / "out"
        code = main(["check-einstein", "--scene", scene, "--out", str(out), "--grid", "3"])
        assert code == 3
        assert "einstein" in capsys.readouterr().err
        assert read_report(out)["all_pass"] is False

    def test_schema_violation_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"kind": "mwp-metric"}))
        assert main(["curvature", "--scene", str(bad), "--out", str(tmp_path / "o")]) == 2
        assert "payload" in capsys.readouterr().err

    def test_wrong_kind_exits_2(self, tmp_path):
        scene = write_scene(tmp_path / "s.json", "cylinder-query", {"n": 5, "c": 1, "rho": 2.0})
        assert main(["check-structure", "--scene", scene, "--out", str(tmp_path / "o")]) == 2

    def test_missing_scene_exits_2(self, tmp_path):
        assert main(["cylinder", "--scene", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "o")]) == 2

    def test_bad_rho_missing_exits_2(self, tmp_path):
        scene = write_scene(tmp_path / "s.json", "mwp-metric", mwp_payload())
        assert main(["check-einstein", "--scene", scene, "--out", str(tmp_path / "o")]) == 2


class TestCommands:
    def test_solve_f_samples(self, tmp_path):
        scene = write_scene(
            tmp_path / "s.json", "three-curvature-example",
            {"n": 5, "p1": 2, "p2": 2, "k1": 1.0, "k2": 1.0, "rho": 4.0},
        )
        out = tmp_path / "out"
        assert main(["solve-f", "--scene", scene, "--out", str(out)]) == 0
        with open(out / "samples.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 100
        assert all(float(r["ode_residual"]) < 1e-10 for r in rows)

    def test_check_structure_certified_scene(self, tmp_path):
        lam2 = {"op": "div", "args": [{"op": "const", "args": [1.0]}, F_REF]}
        lam1 = {"op": "div", "args": [{"op": "const", "args": [-1.0]}, F_REF]}
        payload = {
            "metric": mwp_payload(),
            "shape_blocks": [0.0, lam1, lam2],
            "theta": 0.0,
            "ambient": {"f": F_REF, "c": 1},
        }
        scene = write_scene(tmp_path / "s.json", "structure-data", payload)
        out = tmp_path / "out"
        assert main(["check-structure", "--scene", scene, "--out", str(out), "--grid", "3"]) == 0
        doc = read_report(out)
        for name in "ABCDEF":
            assert doc["checks"][name]["pass"] is True

    def test_check_structure_perturbed_fails(self, tmp_path, capsys):
        lam2 = {"op": "div", "args": [{"op": "const", "args": [1.0]}, F_REF]}
        lam1 = {"op": "div", "args": [{"op": "const", "args": [-1.0]}, F_REF]}
        payload = {
            "metric": mwp_payload(),
            "shape_blocks": [0.0, lam1, lam2],
            "shape_offset": 0.1,
            "ambient": {"f": F_REF, "c": 1},
        }
        scene = write_scene(tmp_path / "s.json", "structure-data", payload)
        code = main(["check-structure", "--scene", scene, "--out", str(tmp_path / "o"),
                     "--grid", "3"])
        assert code == 3
        assert "F" in capsys.readouterr().err

    def test_curvature_dump(self, tmp_path):
        scene = write_scene(tmp_path / "s.json", "mwp-metric", mwp_payload())
        out = tmp_path / "out"
        assert main(["curvature", "--scene", scene, "--out", str(out), "--grid", "2"]) == 0
        with open(out / "samples.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2**5
        # Einstein metric: Ricci eigenvalues of g^{-1} Ric all equal rho = 4
        assert all(abs(float(r["ricci_eig_min"]) - 4.0) < 1e-6 for r in rows)

    def test_spread_with_threshold(self, tmp_path):
        scene = write_scene(tmp_path / "s.json", "mwp-metric", mwp_payload(),
                            tolerances={"min-spread": 2.9})
        out = tmp_path / "out"
        assert main(["spread", "--scene", scene, "--out", str(out), "--grid", "2"]) == 0
        doc = read_report(out)
        assert doc["meta"]["spread"]["spread"] >= 2.9

    def test_lcf_single_fiber(self, tmp_path):
        payload = {
            "base": {"min": 0.2, "max": 2.9},
            "fibers": [{"dim": 3, "curvature": 1.0,
                        "warping": {"op": "sin", "args": [{"op": "t", "args": []}]}}],
        }
        scene = write_scene(tmp_path / "s.json", "mwp-metric", payload)
        assert main(["lcf", "--scene", scene, "--out", str(tmp_path / "o"), "--grid", "3"]) == 0

    def test_cylinder_report(self, tmp_path):
        scene = write_scene(tmp_path / "s.json", "cylinder-query", {"n": 5, "c": 1, "rho": 2.0})
        out = tmp_path / "out"
        assert main(["cylinder", "--scene", scene, "--out", str(out)]) == 0
        doc = read_report(out)
        assert doc["meta"]["cylinder"]["Tnorm2"] == pytest.approx(1.0)
        assert doc["meta"]["cylinder"]["consistent"] is False


class TestDeterminism:
    def test_same_seed_same_report(self, tmp_path):
        scene = write_scene(tmp_path / "s.json", "mwp-metric", mwp_payload(rho=4.0))
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["check-einstein", "--scene", scene, "--out", str(out),
                         "--grid", "3", "--seed", "7"]) == 0
            outs.append((out / "report.json").read_text())
        assert outs[0] == outs[1]

    def test_tolerance_table_embedded(self, tmp_path):
        scene = write_scene(tmp_path / "s.json", "mwp-metric", mwp_payload(rho=4.0))
        out = tmp_path / "out"
        main(["check-einstein", "--scene", scene, "--out", str(out), "--grid", "3",
              "--tol", "einstein=1e-5"])
        doc = read_report(out)
        assert doc["tolerances_used"]["einstein"] == 1e-5
