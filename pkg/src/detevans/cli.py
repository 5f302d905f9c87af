"""Command-line interface: ``detevans {profile,evans,sweep,report}``.

Settings are resolved as command-line flag, then ``--config`` INI file, then
built-in default (the tame case q=0.499, D=1, E_A=1, u_ig=0.1, u_plus=0).
The output directory falls back to ``$DETEVANS_OUT`` and then ``./detevans_out``.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .evans import STABLE, UNSTABLE, EvansSettings, certify_stability, write_contour_csv
from .model import ModelParams
from .profile import (ContinuationStalled, NoConnection, ProfileSettings, ProfileSolution,
                      continue_family, solve_profile, validate_profile)
from .spectral import compute_L_M, hf_bound, HighFreqBound
from .sweep import ParameterGrid, SweepSettings, read_records, run_grid, sweep_exit_code, SuccessTable

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NO_CONNECTION = 2
EXIT_UNSTABLE = 3
EXIT_INCONCLUSIVE = 4

# (config section, key, attribute, type)
_CONFIG_KEYS = (
    ("model", "q", "q", float),
    ("model", "D", "D", float),
    ("model", "E_A", "EA", float),
    ("model", "u_ig", "uig", float),
    ("model", "u_plus", "uplus", float),
    ("solver", "tol", "tol", float),
    ("contour", "n0", "n0", int),
    ("contour", "indent", "indent", float),
    ("contour", "radius_margin", "radius_margin", float),
    ("output", "out", "out", str),
    ("grid", "preset", "grid", str),
    ("grid", "q_values", "q_values", str),
    ("grid", "E_A_values", "EA_values", str),
    ("grid", "D_values", "D_values", str),
    ("grid", "jobs", "jobs", int),
)

_DEFAULTS = {
    "q": 0.499, "D": 1.0, "EA": 1.0, "uig": 0.1, "uplus": 0.0,
    "tol": 1e-6, "n0": 120, "indent": 1e-3, "radius_margin": 1.1,
    "out": None, "grid": "desk", "q_values": None, "EA_values": None, "D_values": None,
    "jobs": 1,
}


class ConfigError(ValueError):
    pass


@dataclass
class CliConfig:
    params: ModelParams
    profile: ProfileSettings
    evans: EvansSettings
    out_dir: Path
    grid: Optional[ParameterGrid] = None
    jobs: int = 1
    extra: dict = field(default_factory=dict)


def _float_list(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"cannot parse list of numbers: {text!r}") from exc


def _read_config(path) -> dict:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    if not cp.read(path):
        raise ConfigError(f"cannot read config file {path}")
    known = {(sec, key) for sec, key, _, _ in _CONFIG_KEYS}
    for sec in cp.sections():
        for key in cp[sec]:
            if (sec, key) not in known:
                raise ConfigError(f"unknown config entry [{sec}] {key}")
    out = {}
    for sec, key, attr, typ in _CONFIG_KEYS:
        if cp.has_option(sec, key):
            try:
                out[attr] = typ(cp.get(sec, key))
            except ValueError as exc:
                raise ConfigError(f"bad value for [{sec}] {key}: {exc}") from exc
    return out


def resolve(args: argparse.Namespace) -> CliConfig:
    """Merge flags, config file and defaults; validate before any computation."""
    values = dict(_DEFAULTS)
    if getattr(args, "config", None):
        values.update(_read_config(args.config))
    for attr in _DEFAULTS:
        v = getattr(args, attr, None)
        if v is not None:
            values[attr] = v
    params = ModelParams(q=values["q"], D=values["D"], E_A=values["EA"], u_ig=values["uig"],
                         u_plus=values["uplus"])
    try:
        params.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not values["tol"] > 0:
        raise ConfigError("--tol must be positive")
    try:
        evans = EvansSettings(n0=values["n0"], indent_factor=values["indent"],
                              radius_margin=values["radius_margin"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    profile = ProfileSettings(residual_tolerance=values["tol"])
    out = values["out"] or os.environ.get("DETEVANS_OUT") or "detevans_out"
    grid = None
    if values["grid"] not in ("desk", "full", "single"):
        raise ConfigError("grid preset must be one of desk, full, single")
    if values["grid"] == "full":
        grid = ParameterGrid.full()
    elif values["grid"] == "single":
        grid = ParameterGrid((params.q,), (params.E_A,), (params.D,), params.u_plus, params.u_ig)
    else:
        grid = ParameterGrid.desk()
    lists = {}
    for attr, name in (("q_values", "q_values"), ("EA_values", "E_A_values"), ("D_values", "D_values")):
        if values[attr] is not None:
            lists[name] = _float_list(values[attr]) if isinstance(values[attr], str) else tuple(values[attr])
    if lists:
        try:
            grid = replace(grid, **lists)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if values["jobs"] < 1:
        raise ConfigError("--jobs must be at least 1")
    return CliConfig(params, profile, evans, Path(out), grid, int(values["jobs"]))


def _add_common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--q", type=float, help="heat release (default 0.499)")
    g.add_argument("--D", type=float, help="species diffusion ratio (default 1)")
    g.add_argument("--EA", type=float, help="activation energy (default 1)")
    g.add_argument("--uig", type=float, help="ignition threshold (default 0.1)")
    g.add_argument("--uplus", type=float, help="unburned state (default 0)")
    g = p.add_argument_group("numerics")
    g.add_argument("--tol", type=float, help="profile collocation tolerance (default 1e-6)")
    g.add_argument("--n0", type=int, help="initial contour node count (default 120)")
    g.add_argument("--indent", type=float, help="indentation radius as a fraction of the contour radius (default 1e-3)")
    g.add_argument("--radius-margin", dest="radius_margin", type=float,
                   help="contour radius as a multiple of the high-frequency bound (default 1.1)")
    g = p.add_argument_group("input/output")
    g.add_argument("--config", help="INI file with [model], [solver], [contour], [output], [grid] sections")
    g.add_argument("--out", help="output directory (default $DETEVANS_OUT or ./detevans_out)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="detevans",
                                     description="Weak-detonation profiles and Evans-function stability.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="solve one traveling-wave profile")
    _add_common(p)
    p.add_argument("--profile-out", dest="profile_out", help="path of the profile JSON/CSV pair")

    p = sub.add_parser("evans", help="bound, winding number and verdict for one profile")
    _add_common(p)
    p.add_argument("--profile-in", dest="profile_in", help="reuse a saved profile instead of solving")
    p.add_argument("--profile-out", dest="profile_out", help="save the profile used")
    p.add_argument("--radius", type=float, help="contour radius (overrides the computed bound)")
    p.add_argument("--synthetic-zero", dest="synthetic_zero", type=float,
                   help="test hook: multiply E/lambda by (lambda - c)/(lambda + 1)")

    p = sub.add_parser("sweep", help="run a parameter grid")
    _add_common(p)
    p.add_argument("--grid", choices=("desk", "full", "single"), help="grid preset (default desk)")
    p.add_argument("--q-values", dest="q_values", help="comma separated q values (overrides preset)")
    p.add_argument("--EA-values", dest="EA_values", help="comma separated E_A values")
    p.add_argument("--D-values", dest="D_values", help="comma separated D values")
    p.add_argument("--resume", action="store_true", help="skip points already in the output directory")
    p.add_argument("--jobs", type=int, help="worker processes (default 1)")

    p = sub.add_parser("report", help="summarize a sweep directory; exit code replays its records")
    p.add_argument("--out", help="sweep output directory (default $DETEVANS_OUT or ./detevans_out)")
    p.add_argument("--config", help="INI file (only [output] out is used)")
    return parser


def _solve(cfg: CliConfig) -> ProfileSolution:
    """Direct solve, falling back to continuation from the tame case."""
    try:
        return solve_profile(cfg.params, settings=cfg.profile)
    except NoConnection:
        tame = solve_profile(ModelParams(u_ig=cfg.params.u_ig, u_plus=cfg.params.u_plus),
                             settings=cfg.profile)
        try:
            return continue_family(tame, cfg.params, settings=cfg.profile)
        except ContinuationStalled as exc:
            raise NoConnection(str(exc)) from exc


def _print_profile(sol: ProfileSolution) -> None:
    d = validate_profile(sol)
    print(f"k_found {sol.k_found:.10g}")
    print(f"domain [-{sol.M_minus:g}, {sol.M_plus:g}] with {sol.xi.size} nodes")
    print(f"collocation residual {sol.info.get('max_residual', float('nan')):.3e}")
    print(f"boundary residuals {sol.boundary_residuals[0]:.3e} {sol.boundary_residuals[1]:.3e}")
    print(f"monotone {d.monotone}  bounded {d.bounded}  decay {d.decay_ok}  "
          f"tail error {d.tail_error:.3e}")
    print("validation " + ("passed" if d.ok else "FAILED: " + "; ".join(d.failures)))


def cmd_profile(args) -> int:
    try:
        cfg = resolve(args)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        sol = _solve(cfg)
    except NoConnection as exc:
        print(f"no connection found: {exc}", file=sys.stderr)
        return EXIT_NO_CONNECTION
    _print_profile(sol)
    target = Path(args.profile_out) if args.profile_out else cfg.out_dir / "profile.json"
    path = sol.save(target)
    print(f"profile written to {path.with_suffix('.csv')}")
    return EXIT_OK


def cmd_evans(args) -> int:
    try:
        cfg = resolve(args)
        if args.radius is not None and not args.radius > 0:
            raise ConfigError("--radius must be positive")
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.profile_in:
        try:
            sol = ProfileSolution.load(args.profile_in)
        except (OSError, KeyError, ValueError) as exc:
            print(f"cannot read profile {args.profile_in}: {exc}", file=sys.stderr)
            return EXIT_INVALID
    else:
        try:
            sol = _solve(cfg)
        except NoConnection as exc:
            print(f"no connection found: {exc}", file=sys.stderr)
            return EXIT_NO_CONNECTION
    if args.profile_out:
        sol.save(args.profile_out)
    L, M = compute_L_M(sol)
    bound = HighFreqBound(L, M, hf_bound(L, M, sol.params, sol.k_found), False)
    print(f"k_found {sol.k_found:.10g}")
    print(f"L {L:.6g}  M {M:.6g}  R {bound.R:.6g}")
    verdict = certify_stability(sol, bound, cfg.evans, args.synthetic_zero, args.radius)
    print(f"contour radius {verdict.radius:.6g}  indent {verdict.indent_radius:.3g}  "
          f"nodes {verdict.n_nodes}  max arg step {verdict.max_arg_step:.3g}")
    print(f"|E(0)|/max|E| {verdict.origin_ratio:.3e}  indent ratio {verdict.indent_ratio:.3g}")
    if verdict.winding_result is not None:
        path = write_contour_csv(verdict.winding_result, cfg.out_dir / "contour.csv")
        print(f"contour written to {path}")
    print(f"winding {verdict.winding}, verdict {verdict.label}")
    if verdict.message:
        print(f"note: {verdict.message}")
    return {STABLE: EXIT_OK, UNSTABLE: EXIT_UNSTABLE}.get(verdict.kind, EXIT_INCONCLUSIVE)


def cmd_sweep(args) -> int:
    try:
        cfg = resolve(args)
        cfg.grid.validate()
    except (ConfigError, ValueError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    settings = SweepSettings(profile=cfg.profile, evans=cfg.evans, jobs=cfg.jobs)

    def progress(r):
        verdict = r.verdict.label if r.verdict is not None else "-"
        k = f"{r.k_found:.6g}" if r.k_found is not None else "-"
        print(f"q={r.params.q:<7g} E_A={r.params.E_A:<7g} D={r.params.D:<7g} "
              f"{r.profile_status:20s} k={k:12s} {verdict}", flush=True)

    records, table = run_grid(cfg.grid, settings, out_dir=cfg.out_dir, resume=args.resume,
                              progress=progress)
    print(table.format())
    print(f"results in {cfg.out_dir}")
    return sweep_exit_code(records)


def cmd_report(args) -> int:
    out = args.out
    if out is None and args.config:
        try:
            out = _read_config(args.config).get("out")
        except ConfigError as exc:
            print(f"invalid configuration: {exc}", file=sys.stderr)
            return EXIT_INVALID
    out = Path(out or os.environ.get("DETEVANS_OUT") or "detevans_out")
    if not (out / "records.jsonl").exists():
        print(f"no records.jsonl in {out}", file=sys.stderr)
        return EXIT_INVALID
    records = read_records(out)
    for r in records:
        verdict = r.verdict.label if r.verdict is not None else "-"
        print(f"q={r.params.q:<7g} E_A={r.params.E_A:<7g} D={r.params.D:<7g} "
              f"{r.profile_status:20s} winding={r.winding} {verdict}")
    print(SuccessTable.from_records(records).format())
    return sweep_exit_code(records)


COMMANDS = {"profile": cmd_profile, "evans": cmd_evans, "sweep": cmd_sweep, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse signals usage errors with status 2, which here means NoConnection
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
