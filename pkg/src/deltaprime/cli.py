"""Command-line front end.

Every run writes its outputs plus ``manifest.json``, which records the fully
resolved configuration. ``deltaprime replay manifest.json`` (or
``--config manifest.json`` on the matching subcommand) repeats the run.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .evolution import EvolutionConfig, Perturbation, stability_probe
from .ground_state import (Branch, BracketFailure, bifurcation_scan, build_state, grid_for,
                           ground_state, solve_branch)
from .io import dump_json, write_table
from .linearization import build_L, hgamma, spectral_report
from .model import Grid, ModelParams, OutOfRange, ValidationError, make_params, write_qfunction_csv
from .stability import (SingularAtBifurcation, mu_star, stability_thresholds,
                        verdict_table)

OUTPUT_ENV = "DELTAPRIME_OUTPUT_DIR"
COMMANDS = ("solve", "scan", "classify", "spectrum", "evolve", "mu-star")

logger = logging.getLogger("deltaprime")


class UsageError(Exception):
    """A flag value outside its domain."""


# -- parser ------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, needs_params: bool = True):
    if needs_params:
        p.add_argument("--gamma", type=float, default=2.0, help="defect strength (> 0)")
        p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                       help="nonlinearity coupling (> 0)")
        p.add_argument("--mu", type=float, default=1.0, help="nonlinearity power (> 0)")
    p.add_argument("--out", default=None,
                   help=f"output directory (default: ${OUTPUT_ENV} or the current directory)")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="table format")
    p.add_argument("--config", default=None,
                   help="JSON file whose keys override the flags (a manifest works)")


def _add_grid(p: argparse.ArgumentParser):
    p.add_argument("--n-per-side", type=int, default=None, help="grid cells per half-line")
    p.add_argument("--half-length", type=float, default=None, help="truncation length L")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deltaprime",
        description="Stationary states, stability and dynamics of NLS with a delta-prime defect.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="ground state (and continued symmetric state) at omega")
    _add_common(p)
    _add_grid(p)
    p.add_argument("--omega", type=float, required=True)

    p = sub.add_parser("scan", help="branch table over a frequency range")
    _add_common(p)
    p.add_argument("--omega-min", type=float, required=True)
    p.add_argument("--omega-max", type=float, required=True)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--spacing", choices=("linear", "log"), default="linear")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("--no-verdict", action="store_true", help="skip the stability column")

    p = sub.add_parser("classify", help="stability verdicts and sign-change thresholds")
    _add_common(p)
    p.add_argument("--omega", type=float, default=None, help="single frequency")
    p.add_argument("--omega-min", type=float, default=None)
    p.add_argument("--omega-max", type=float, default=None)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--thresholds", action="store_true",
                   help="also locate the sign changes of d'' on the asymmetric branch")

    p = sub.add_parser("spectrum", help="low-lying spectrum of H_gamma, L1 or L2")
    _add_common(p)
    _add_grid(p)
    p.add_argument("--omega", type=float, default=None)
    p.add_argument("--branch", default="ground",
                   help="ground, symmetric, asymmetric_left or asymmetric_right")
    p.add_argument("--operator", choices=("H", "L1", "L2"), default="L1")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--dump-eigenvectors", action="store_true")

    p = sub.add_parser("evolve", help="perturb a stationary state and integrate in time")
    _add_common(p)
    _add_grid(p)
    p.add_argument("--omega", type=float, required=True)
    p.add_argument("--branch", default="ground")
    p.add_argument("--perturbation", choices=("generic", "antisymmetric", "shift"),
                   default="generic")
    p.add_argument("--amplitude", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--T", type=float, default=20.0)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--cfl", type=float, default=0.5)
    p.add_argument("--monitor-stride", type=int, default=20)
    p.add_argument("--snapshot-times", type=float, nargs="*", default=[])

    p = sub.add_parser("mu-star", help="critical power mu* in (2, 2.5)")
    _add_common(p, needs_params=False)
    p.add_argument("--xtol", type=float, default=1e-10)

    p = sub.add_parser("replay", help="repeat a run from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None)
    return parser


# -- helpers -----------------------------------------------------------------

def _resolve_config(args: argparse.Namespace) -> dict:
    cfg = vars(args).copy()
    cfg.pop("verbose", None)
    path = cfg.pop("config", None)
    if path:
        try:
            override = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"--config: cannot read {path}: {exc}") from None
        if not isinstance(override, dict):
            raise UsageError(f"--config: {path} must hold a JSON object")
        cmd = override.get("command", cfg["command"])
        if cmd != cfg["command"]:
            raise UsageError(f"--config: manifest is for '{cmd}', not '{cfg['command']}'")
        for key, value in override.items():
            if key in ("version", "outputs"):
                continue
            cfg[key] = value
    if cfg.get("out") is None:
        cfg["out"] = os.environ.get(OUTPUT_ENV, ".")
    return cfg


def _params(cfg: dict) -> ModelParams:
    try:
        return make_params(cfg["gamma"], cfg["lam"], cfg["mu"])
    except ValidationError as exc:
        raise UsageError(f"--{str(exc).split()[0]}: {exc}") from None


def _check_omega(params: ModelParams, omega, flag: str = "--omega", floor=None):
    floor = params.omega0 if floor is None else floor
    if omega is None:
        raise UsageError(f"{flag} is required")
    if not (np.isfinite(omega) and omega > floor):
        raise UsageError(f"{flag}: omega must exceed omega0 = {float(floor)!r} (got {omega})")


def _grid(params: ModelParams, omega: float, cfg: dict) -> Grid:
    g = grid_for(params, omega, cfg.get("n_per_side"))
    if cfg.get("half_length") is not None:
        g = Grid(float(cfg["half_length"]), g.n_per_side)
    return g


def _select_state(params: ModelParams, omega: float, branch: str, grid: Grid):
    key = str(branch).lower()
    gs = ground_state(params, omega, grid)
    if key == "ground":
        return gs
    b = Branch.parse(key)
    if b is Branch.SYMMETRIC:
        return gs.continued if gs.continued is not None else gs
    if omega <= params.omega_star:
        raise UsageError(f"--branch {branch}: asymmetric states need omega > omega_star = "
                         f"{params.omega_star:.10g}")
    return build_state(params, omega, solve_branch(params, omega, b), grid)


def _table_path(out: Path, stem: str, fmt: str) -> Path:
    return out / f"{stem}.{fmt}"


# -- commands ----------------------------------------------------------------

def cmd_solve(cfg: dict, out: Path) -> dict:
    params = _params(cfg)
    omega = cfg["omega"]
    _check_omega(params, omega)
    gs = ground_state(params, omega, _grid(params, omega, cfg))
    outputs = {"profile": str(write_qfunction_csv(gs.profile, out / "ground_state.csv"))}
    summary = gs.summary()
    summary["branch_tag"] = summary["branch"]
    summary["branch"] = "asymmetric" if gs.branch.is_asymmetric else "symmetric"
    if gs.continued is not None:
        outputs["continued_symmetric"] = str(
            write_qfunction_csv(gs.continued.profile, out / "continued_symmetric.csv"))
        summary["continued_symmetric"] = gs.continued.summary()
    dump_json(summary, out / "summary.json")
    outputs["summary"] = str(out / "summary.json")
    print(dump_json(summary))
    return outputs


def cmd_scan(cfg: dict, out: Path) -> dict:
    params = _params(cfg)
    _check_omega(params, cfg["omega_min"], "--omega-min")
    if cfg["omega_max"] < cfg["omega_min"]:
        raise UsageError("--omega-max must be >= --omega-min")
    if cfg["points"] < 1:
        raise UsageError("--points must be >= 1")
    rows = bifurcation_scan(params, cfg["omega_min"], cfg["omega_max"], cfg["points"],
                            spacing=cfg["spacing"], with_verdict=not cfg["no_verdict"],
                            workers=max(1, int(cfg["workers"])))
    path = write_table([r.as_dict() for r in rows], _table_path(out, "scan", cfg["format"]),
                       cfg["format"])
    print(f"{len(rows)} rows -> {path}")
    return {"table": str(path)}


def cmd_classify(cfg: dict, out: Path) -> dict:
    params = _params(cfg)
    if cfg.get("omega") is not None:
        _check_omega(params, cfg["omega"])
        omegas = [cfg["omega"]]
    else:
        if cfg.get("omega_min") is None or cfg.get("omega_max") is None:
            raise UsageError("give --omega or both --omega-min and --omega-max")
        _check_omega(params, cfg["omega_min"], "--omega-min")
        omegas = np.geomspace(cfg["omega_min"], cfg["omega_max"], cfg["points"])
    rows = verdict_table([params], lambda _: omegas)
    path = write_table(rows, _table_path(out, "verdicts", cfg["format"]), cfg["format"])
    outputs = {"table": str(path)}
    for r in rows:
        print(f"omega={r['omega']:.10g} branch={r['branch']} d''={r['d_second']:.6g} "
              f"n={r['n']} p={r['p']} -> {r['verdict']}")
    if cfg.get("thresholds"):
        th = stability_thresholds(params)
        doc = {"mu": th.mu, "gamma": th.gamma, "omega1": th.omega1, "omega2": th.omega2,
               "sign_changes": th.sign_changes, "omega_max_scanned": th.omega_max}
        dump_json(doc, out / "thresholds.json")
        outputs["thresholds"] = str(out / "thresholds.json")
        print(dump_json(doc))
    return outputs


def cmd_spectrum(cfg: dict, out: Path) -> dict:
    params = _params(cfg)
    op_name = cfg["operator"]
    if op_name == "H":
        omega = cfg.get("omega") or 0.0
        n = cfg.get("n_per_side") or 2000
        L = cfg.get("half_length") or 30.0 * params.gamma
        op = hgamma(params, Grid(float(L), int(n)))
    else:
        omega = cfg.get("omega")
        _check_omega(params, omega)
        state = _select_state(params, omega, cfg["branch"], _grid(params, omega, cfg))
        op = build_L(params, omega, state, int(op_name[1]))
    report = spectral_report(op, int(cfg["k"]))
    path = out / "spectrum.json"
    report.to_json(path)
    outputs = {"report": str(path)}
    if cfg.get("dump_eigenvectors"):
        for i in range(report.eigenvalues.size):
            p = write_qfunction_csv(report.eigenfunction(i), out / f"eigenvector_{i}.csv")
            outputs[f"eigenvector_{i}"] = str(p)
    print(report.to_json())
    return outputs


def cmd_evolve(cfg: dict, out: Path) -> dict:
    params = _params(cfg)
    omega = cfg["omega"]
    _check_omega(params, omega)
    branch = cfg["branch"]
    if str(branch).lower() == "ground":
        branch = (Branch.ASYMMETRIC_LEFT if omega > params.omega_star else Branch.SYMMETRIC)
    try:
        pert = Perturbation(cfg["perturbation"], cfg["amplitude"], int(cfg["seed"]))
        config = EvolutionConfig(dt=cfg.get("dt"), T=cfg["T"], monitor_stride=cfg["monitor_stride"],
                                 cfl=cfg["cfl"], snapshot_times=tuple(cfg["snapshot_times"]))
    except ValidationError as exc:
        raise UsageError(str(exc)) from None
    grid = _grid(params, omega, cfg)
    try:
        config.resolve_dt(grid)
    except ValidationError as exc:
        raise UsageError(f"--dt: {exc}") from None
    result = stability_probe(params, omega, branch, pert, config, grid)
    tr = result.trace
    outputs = {"trace": str(tr.write_csv(out / "trace.csv"))}
    for t, f in sorted(tr.snapshots.items()):
        p = write_qfunction_csv(f, out / f"snapshot_t{t:.6g}.csv", t=t)
        outputs[f"snapshot_{t:.6g}"] = str(p)
    summary = {"branch": Branch.parse(branch).value, "omega": omega,
               "growth_factor": result.growth_factor, "blowup_flag": tr.blowup_flag,
               "mass_drift": tr.mass_drift, "energy_drift": tr.energy_drift,
               "max_antisymmetry_defect": float(np.max(tr.antisymmetry_defect)),
               "dt": tr.dt, "steps": int(round(cfg["T"] / tr.dt)),
               "grid": grid.as_dict()}
    dump_json(summary, out / "summary.json")
    outputs["summary"] = str(out / "summary.json")
    print(dump_json(summary))
    return outputs


def cmd_mu_star(cfg: dict, out: Path) -> dict:
    res = mu_star(cfg["xtol"])
    lo, hi = res.bracket
    wl, wh = res.w_at_bracket
    print(f"mu* = {res.value:.8f}")
    print(f"bracket [{lo}, {hi}]: w({lo}) = {wl:.6e}, w({hi}) = {wh:.6e}")
    doc = {"mu_star": res.value, "bracket": [lo, hi], "w_at_bracket": [wl, wh]}
    dump_json(doc, out / "mu_star.json")
    return {"result": str(out / "mu_star.json")}


HANDLERS = {"solve": cmd_solve, "scan": cmd_scan, "classify": cmd_classify,
            "spectrum": cmd_spectrum, "evolve": cmd_evolve, "mu-star": cmd_mu_star}


def run(cfg: dict) -> int:
    """Dispatch a resolved configuration; returns the exit status."""
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    outputs = HANDLERS[cfg["command"]](cfg, out)
    manifest = {"version": __version__, **{k: v for k, v in cfg.items() if k != "out"},
                "out": str(out), "outputs": outputs}
    dump_json(manifest, out / "manifest.json")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "replay":
            try:
                cfg = json.loads(Path(args.manifest).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise UsageError(f"cannot read manifest {args.manifest}: {exc}") from None
            if cfg.get("command") not in HANDLERS:
                raise UsageError(f"manifest has no valid command: {cfg.get('command')!r}")
            cfg.pop("outputs", None)
            cfg.pop("version", None)
            if args.out is not None:
                cfg["out"] = args.out
            return run(cfg)
        return run(_resolve_config(args))
    except UsageError as exc:
        print(f"deltaprime: error: {exc}", file=sys.stderr)
        return 2
    except (OutOfRange, ValidationError, BracketFailure, SingularAtBifurcation,
            ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"deltaprime: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
