"""Command-line runner: scene JSON in, JSON + CSV reports out.

Commands
--------
curvature        curvature-bundle invariants + per-point dump over a grid
check-structure  structure conditions (A)-(F) on a structure-data scene
check-einstein   sup |Ric - rho g| for the metric of a scene with rho
build-example    construct the three-curvature example and run the full
                 certification suite
spread           min/max sectional curvature over sampled planes
lcf              conformal-flatness (Weyl) check for single-fiber products
cylinder         algebraic forcing chain for cylinder ambients
solve-f          closed-form warping profile samples + ODE residual

Exit status: 0 when every pass flag is true, 2 on schema violations,
3 on numerical failures (the failing check is named on stderr).
All randomness is seeded (--seed overrides the scene's seed).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import classifier, schemas
from .curvature import build_mwp_metric, curvature_grid, tensor_grid, weyl_norm
from .errors import GeometryError
from .hypersurface import einstein_residual, structure_residuals
from .report import ResidualReport
from .scalarfun import ode_residual, solve_f_ode
from .schemas import SCHEMA_VERSION, validate_scene

DEFAULT_TOLERANCES = {
    "structure": 1e-6,
    "einstein": 1e-6,
    "symmetry": 1e-6,
    "weyl": 1e-6,
    "algebraic": 1e-9,
    "ode": 1e-10,
    "spread": 1e-3,
}

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_NUMERIC = 3


class SceneError(Exception):
    """Scene is unreadable or fails validation (exit code 2)."""


def _load_scene(path: str, expected_kinds: tuple[str, ...]) -> dict:
    try:
        with open(path) as fh:
            scene = json.load(fh)
    except OSError as err:
        raise SceneError(f"cannot read scene file: {err}") from err
    except json.JSONDecodeError as err:
        raise SceneError(f"scene is not valid JSON: {err}") from err
    try:
        validate_scene(scene)
    except jsonschema.ValidationError as err:
        raise SceneError(f"scene fails schema validation: {err.message}") from err
    if scene["kind"] not in expected_kinds:
        raise SceneError(
            f"scene kind {scene['kind']!r} not usable here (expected one of {expected_kinds})"
        )
    return scene


class Run:
    """Resolved configuration of one CLI invocation."""

    def __init__(self, args, scene: dict):
        self.args = args
        self.scene = scene
        self.seed = args.seed if args.seed is not None else int(scene.get("seed", 0))
        self.rng = np.random.default_rng(self.seed)
        grid_cfg = scene.get("grid", {})
        self.points_per_axis = args.grid or int(grid_cfg.get("points_per_axis", 5))
        self.inset = float(grid_cfg.get("inset", 0.12))
        self.tolerances = dict(DEFAULT_TOLERANCES)
        self.tolerances.update(scene.get("tolerances", {}))
        for item in args.tol or []:
            name, _, value = item.partition("=")
            if not value:
                raise SceneError(f"--tol expects name=value, got {item!r}")
            self.tolerances[name] = float(value)

    def tol(self, name: str) -> float:
        return float(self.tolerances[name])

    def grid_for(self, metric) -> np.ndarray:
        per_axis: object = self.points_per_axis
        if metric.dim >= 6 and self.args.grid is None and "points_per_axis" not in \
                self.scene.get("grid", {}):
            # full tensor grids get expensive in high dimension; thin the fibers
            per_axis = [self.points_per_axis] + [3] * (metric.dim - 1)
        return tensor_grid(metric.box, per_axis, self.inset)


def _write_report(out_dir: Path, report: ResidualReport, extra: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {"schema_version": SCHEMA_VERSION}
    doc.update(extra)
    doc.update(report.to_dict())
    doc["tolerances_used"] = report.tolerances()
    with open(out_dir / "report.json", "w") as fh:
        json.dump(doc, fh, indent=2, default=_jsonable)
        fh.write("\n")
    report.write_csv(out_dir / "report.csv")


def _jsonable(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if hasattr(obj, "item"):
        return obj.item()
    return str(obj)


# ---------------------------------------------------------------------------
# command handlers: scene -> (report, extra json, optional sample rows)
# ---------------------------------------------------------------------------

def cmd_curvature(run: Run, out_dir: Path) -> ResidualReport:
    mwp = schemas.mwp_from_payload(run.scene["payload"])
    metric = build_mwp_metric(mwp)
    grid = run.grid_for(metric)
    curv = curvature_grid(metric, grid)
    tol = run.tol("symmetry")
    riem, g, ginv = curv.riemann, curv.metric, curv.inverse
    scale = max(np.abs(riem).max(), 1.0)
    report = ResidualReport()
    desc = f"{grid.shape[0]} pts"
    report.add("riemann-antisym-ij", np.abs(riem + np.swapaxes(riem, 1, 2)).max() / scale,
               tol, desc)
    report.add("riemann-antisym-kl", np.abs(riem + np.swapaxes(riem, 3, 4)).max() / scale,
               tol, desc)
    pair = np.transpose(riem, (0, 3, 4, 1, 2))
    report.add("riemann-pair-symmetry", np.abs(riem - pair).max() / scale, tol, desc)
    bianchi = riem + np.transpose(riem, (0, 2, 3, 1, 4)) + np.transpose(riem, (0, 3, 1, 2, 4))
    report.add("bianchi1", np.abs(bianchi).max() / scale, tol, desc)
    wtrace = np.einsum("...il,...ijkl->...jk", ginv, curv.weyl)
    report.add("weyl-trace", np.abs(wtrace).max() / max(scale, 1.0), tol, desc)

    rows = [["point", *(f"x{i}" for i in range(metric.dim)),
             "scalar", "weyl_norm", "ricci_eig_min", "ricci_eig_max"]]
    for i in range(len(curv)):
        ric_endo = curv.inverse[i] @ curv.ricci[i]
        eig = np.linalg.eigvals(ric_endo).real
        rows.append([i, *(f"{v:.8g}" for v in curv.points[i]),
                     f"{curv.scalar[i]:.10g}", f"{weyl_norm(curv.bundle(i)):.6e}",
                     f"{eig.min():.10g}", f"{eig.max():.10g}"])
    with open(out_dir / "samples.csv", "w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    report.meta["samples"] = "samples.csv"
    report.meta["metric"] = metric.name
    return report


def cmd_check_structure(run: Run, out_dir: Path) -> ResidualReport:
    data, _ = schemas.structure_data_from_payload(run.scene["payload"])
    grid = run.grid_for(data.metric)
    return structure_residuals(data, grid, tol=run.tol("structure"), rng=run.rng)


def cmd_check_einstein(run: Run, out_dir: Path) -> ResidualReport:
    payload = run.scene["payload"]
    if "rho" not in payload:
        raise SceneError("check-einstein needs a 'rho' field in the payload")
    if run.scene["kind"] == "structure-data":
        mwp = schemas.mwp_from_payload(payload["metric"])
    else:
        mwp = schemas.mwp_from_payload(payload)
    metric = build_mwp_metric(mwp)
    grid = run.grid_for(metric)
    return einstein_residual(metric, float(payload["rho"]), grid, tol=run.tol("einstein"))


def cmd_build_example(run: Run, out_dir: Path) -> ResidualReport:
    spec = schemas.example_spec_from_payload(run.scene["payload"])
    payload = run.scene["payload"]
    kwargs = {}
    if "branch" in payload:
        kwargs["branch"] = payload["branch"]
    if "window" in payload:
        kwargs["window"] = tuple(payload["window"])
    built = classifier.build_three_curvature_example(spec, **kwargs)
    per_axis: object = run.points_per_axis
    if built.metric.dim >= 6 and run.args.grid is None:
        per_axis = [run.points_per_axis] + [3] * (built.metric.dim - 1)
    return classifier.certify_example(
        built,
        per_axis=per_axis,
        inset=run.inset,
        structure_tol=run.tol("structure"),
        algebraic_tol=run.tol("algebraic"),
        rng=run.rng,
    )


def cmd_spread(run: Run, out_dir: Path) -> ResidualReport:
    mwp = schemas.mwp_from_payload(run.scene["payload"])
    metric = build_mwp_metric(mwp)
    grid = run.grid_for(metric)
    result = classifier.constant_curvature_spread(metric, grid, rng=run.rng)
    report = ResidualReport()
    report.meta["spread"] = result.to_json()
    if "min-spread" in run.tolerances:
        # pass iff the observed spread reaches the requested lower bound
        report.add("spread-reached", max(0.0, run.tol("min-spread") - result.spread), 0.0)
    if "max-spread" in run.tolerances:
        report.add("spread", result.spread, run.tol("max-spread"))
    return report


def cmd_lcf(run: Run, out_dir: Path) -> ResidualReport:
    mwp = schemas.mwp_from_payload(run.scene["payload"])
    metric = build_mwp_metric(mwp)
    grid = run.grid_for(metric)
    return classifier.two_curvature_lcf_check(mwp, grid, tol=run.tol("weyl"))


def cmd_cylinder(run: Run, out_dir: Path) -> ResidualReport:
    payload = run.scene["payload"]
    result = classifier.cylinder_identities(int(payload["n"]), int(payload["c"]),
                                            float(payload["rho"]))
    report = ResidualReport()
    report.meta["cylinder"] = result.to_json()
    if result.product_residual is not None:
        report.add("lambda-product-consistency", result.product_residual,
                   run.tol("algebraic"))
    return report


def cmd_solve_f(run: Run, out_dir: Path) -> ResidualReport:
    n, rho, branch = schemas.solve_f_params(run.scene["payload"])
    fn = solve_f_ode(n, rho, branch=branch)
    ts = fn.domain.interior_samples(100)
    fval = fn(ts)
    fder = fn.derivative()(ts)
    resid = ode_residual(fn, n, rho, ts)
    rows = [["t", "f", "f_prime", "ode_residual"]]
    rows += [[f"{t:.10g}", f"{v:.12g}", f"{d:.12g}", f"{r:.3e}"]
             for t, v, d, r in zip(ts, fval, fder, resid)]
    with open(out_dir / "samples.csv", "w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    report = ResidualReport()
    report.add("ode", resid.max(), run.tol("ode"), "100 sample points")
    report.meta["samples"] = "samples.csv"
    report.meta["domain"] = fn.domain.to_json()
    report.meta["branch"] = branch
    return report


COMMANDS = {
    "curvature": (cmd_curvature, ("mwp-metric",)),
    "check-structure": (cmd_check_structure, ("structure-data",)),
    "check-einstein": (cmd_check_einstein, ("mwp-metric", "structure-data")),
    "build-example": (cmd_build_example, ("three-curvature-example",)),
    "spread": (cmd_spread, ("mwp-metric",)),
    "lcf": (cmd_lcf, ("mwp-metric",)),
    "cylinder": (cmd_cylinder, ("cylinder-query",)),
    "solve-f": (cmd_solve_f, ("three-curvature-example", "cylinder-query")),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="einwarp",
        description="Residual checks for Einstein hypersurfaces of warped products.",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--scene", required=True, help="path to the scene JSON file")
    parser.add_argument("--out", required=True, help="output directory for reports")
    parser.add_argument("--grid", type=int, default=None,
                        help="points per axis for sample grids (overrides the scene)")
    parser.add_argument("--tol", action="append", metavar="NAME=VALUE",
                        help="tolerance override, repeatable")
    parser.add_argument("--seed", type=int, default=None,
                        help="seed for all randomized sampling (overrides the scene)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler, kinds = COMMANDS[args.command]
    out_dir = Path(args.out)
    try:
        scene = _load_scene(args.scene, kinds)
        run = Run(args, scene)
    except (SceneError, KeyError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_SCHEMA

    out_dir.mkdir(parents=True, exist_ok=True)
    extra = {
        "command": args.command,
        "scene": str(args.scene),
        "kind": scene["kind"],
        "seed": run.seed,
    }
    try:
        report = handler(run, out_dir)
    except SceneError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_SCHEMA
    except GeometryError as err:
        failed = ResidualReport()
        failed.meta["error"] = str(err)
        _write_report(out_dir, failed, {**extra, "failed_check": type(err).__name__})
        print(f"numerical error: {err}", file=sys.stderr)
        return EXIT_NUMERIC

    _write_report(out_dir, report, extra)
    if not report.all_pass():
        print("failed checks: " + ", ".join(report.failing()), file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
