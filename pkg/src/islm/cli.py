"""Command-line entry point.

Exit codes: 0 success, 1 condition violations, 2 numerical failures,
3 usage or configuration errors. Every run writes ``manifest.json`` into
the output directory, including failed runs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Sequence

import numpy as np

from islm import report
from islm.econ_model import GridSpec, ModelConfig, State, default_grid, verify_conditions
from islm.errors import ConditionError, IslmError, NumericalError
from islm.isocline import Which, fold_values, trace_isocline
from islm.phase_plane import find_equilibria
from islm.scenario import Parameter, SweepSpec, hysteresis_run, sweep
from islm.slowfast import CycleControl, StepControl, detect_cycle, fast_curve, integrate, singular_orbit

EXIT_OK, EXIT_CONDITION, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def tool_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


def load_config(path: str) -> ModelConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON ({exc.msg})") from exc
    try:
        return ModelConfig.from_dict(data)
    except (TypeError, ValueError, KeyError) as exc:
        raise UsageError(f"{path}: invalid config: {exc}") from exc


def _values(start: float, stop: float, step: float) -> list[float]:
    if step <= 0:
        raise UsageError("--step must be positive")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    if n < 2:
        raise UsageError("the range needs at least two values")
    return [round(start + k * step, 12) for k in range(n)]


def _require_conditions(cfg: ModelConfig):
    rep = verify_conditions(cfg)
    if not rep.passed:
        raise _Violations(rep)


class _Violations(Exception):
    def __init__(self, rep):
        super().__init__("condition violations: " + ", ".join(rep.violated_conditions()))
        self.report = rep


# -- subcommands ------------------------------------------------------------------

def cmd_verify(cfg, args, out: Path) -> list[Path]:
    grid = default_grid(cfg)
    if args.grid_n:
        grid = GridSpec(grid.y_min, grid.y_max, grid.r_min, grid.r_max, args.grid_n, args.grid_n)
    rep = verify_conditions(cfg, grid)
    path = report.write(out / "verify.json", report.json_bytes(rep.to_dict()))
    if not rep.passed:
        raise _Violations(rep)
    return [path]


def cmd_equilibria(cfg, args, out: Path) -> list[Path]:
    eqs = find_equilibria(cfg)
    files = [report.write(out / "equilibria.json", report.json_bytes(report.equilibria_doc(eqs)))]
    if args.figures:
        from islm.plotting import phase_figure
        curves = [trace_isocline(w, cfg) for w in (Which.IS, Which.LM)]
        files.append(phase_figure(out / "equilibria.png", curves, eqs))
    return files


def cmd_isoclines(cfg, args, out: Path) -> list[Path]:
    files = []
    curves = []
    for which in (Which.IS, Which.LM):
        c = trace_isocline(which, cfg)
        curves.append(c)
        rows = report.isocline_rows(c, cfg)
        files.append(report.write(out / f"isocline_{which.value.lower()}.csv",
                                  report.csv_bytes(report.ISOCLINE_COLUMNS, rows)))
    if args.figures:
        from islm.plotting import phase_figure
        files.append(phase_figure(out / "isoclines.png", curves))
    return files


def cmd_simulate(cfg, args, out: Path) -> list[Path]:
    ctrl = StepControl(rel_tol=args.rel_tol, abs_tol=args.abs_tol)
    tr = integrate(State(args.y0, args.r0), cfg, args.t_end, ctrl)
    files = [report.write(out / "trajectory.csv",
                          report.csv_bytes(report.TRAJECTORY_COLUMNS,
                                           report.trajectory_rows(tr, cfg)))]
    if args.figures:
        from islm.plotting import phase_figure
        curves = [trace_isocline(w, cfg) for w in (Which.IS, Which.LM)]
        files.append(phase_figure(out / "trajectory.png", curves, trajectory=tr))
    return files


def cmd_cycle(cfg, args, out: Path) -> list[Path]:
    _require_conditions(cfg)
    cyc = detect_cycle(cfg, ctrl=CycleControl(t_end=args.t_end))
    curves = [trace_isocline(w, cfg) for w in (Which.IS, Which.LM)]
    fast = curves[0] if fast_curve(cfg) is Which.IS else curves[1]
    orbit = singular_orbit(cfg, curve=fast)
    try:
        eqs = find_equilibria(cfg)
    except NumericalError:
        eqs = []
    doc = cyc.to_dict()
    doc["singular_orbit_orientation"] = orbit.orientation(cfg)
    files = [
        report.write(out / "cycle.json", report.json_bytes(doc)),
        report.write(out / "cycle.csv", report.csv_bytes(
            ("t", "y", "r"), ((t, y, r) for t, (y, r) in zip(cyc.times, cyc.cycle_samples)))),
        report.write(out / "cycle.svg", report.phase_svg(cfg, curves, cyc, eqs, orbit)),
    ]
    if args.figures:
        from islm.plotting import phase_figure
        files.append(phase_figure(out / "cycle.png", curves, eqs, cycle=cyc))
    return files


def cmd_sweep(cfg, args, out: Path) -> list[Path]:
    if args.parameter == Parameter.SLOW.value:
        raise UsageError("sweep takes --parameter MonetaryMS or FiscalShift")
    spec = SweepSpec(Parameter(args.parameter), tuple(_values(args.start, args.stop, args.step)), cfg)
    diagram = sweep(spec)
    files = [
        report.write(out / "sweep.csv", report.csv_bytes(report.SWEEP_COLUMNS, diagram.rows())),
        report.write(out / "sweep.json", report.json_bytes(diagram.to_dict())),
    ]
    if args.figures:
        from islm.plotting import branch_figure
        files.append(branch_figure(out / "sweep.png", diagram))
    return files


def cmd_hysteresis(cfg, args, out: Path) -> list[Path]:
    up = _values(args.start, args.stop, args.step)
    path = up + up[-2::-1]
    res = hysteresis_run(cfg, args.parameter, path)
    doc = res.to_dict()
    curve = None
    if res.parameter is Parameter.SLOW:
        curve = trace_isocline(fast_curve(cfg), cfg)
        fv = fold_values(curve)
        doc["fold_values"] = {"low": fv.low, "high": fv.high}
    files = [
        report.write(out / "hysteresis.json", report.json_bytes(doc)),
        report.write(out / "hysteresis.svg", report.hysteresis_svg(cfg, res, curve)),
    ]
    if args.figures:
        from islm.plotting import hysteresis_figure
        idx = 0 if fast_curve(cfg) is Which.IS else 1
        files.append(hysteresis_figure(out / "hysteresis.png", res, idx))
    return files


COMMANDS = {
    "verify": cmd_verify,
    "equilibria": cmd_equilibria,
    "isoclines": cmd_isoclines,
    "simulate": cmd_simulate,
    "cycle": cmd_cycle,
    "sweep": cmd_sweep,
    "hysteresis": cmd_hysteresis,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="islm", description="Slow-fast IS-LM dynamics toolkit.")
    parser.add_argument("--version", action="version", version=tool_version())
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON model configuration")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--figures", action="store_true", help="also write matplotlib PNGs")
        p.add_argument("--epsilon", type=float, help="override the time-scale ratio")
        return p

    p = add("verify", "certify regime conditions on the grid")
    p.add_argument("--grid-n", type=int, default=0, help="nodes per axis (default 201)")
    add("equilibria", "find and classify equilibria")
    add("isoclines", "trace IS and LM with arcs and folds")
    p = add("simulate", "integrate one trajectory")
    p.add_argument("--y0", type=float, required=True)
    p.add_argument("--r0", type=float, required=True)
    p.add_argument("--t-end", type=float, default=1000.0)
    p.add_argument("--rel-tol", type=float, default=1e-8)
    p.add_argument("--abs-tol", type=float, default=1e-10)
    p = add("cycle", "detect the relaxation cycle")
    p.add_argument("--t-end", type=float, default=None,
                   help="integration horizon (default: ten singular periods)")
    for name, text in (("sweep", "equilibrium branches under a policy shift"),
                       ("hysteresis", "quasi-static up/down parameter path")):
        p = add(name, text)
        choices = [m.value for m in Parameter]
        p.add_argument("--parameter", required=True, choices=choices)
        p.add_argument("--start", type=float, required=True)
        p.add_argument("--stop", type=float, required=True)
        p.add_argument("--step", type=float, required=True)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    t0 = time.perf_counter()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE

    out = Path(args.out)
    manifest = {
        "subcommand": args.command,
        "config_path": args.config,
        "config_sha256": None,
        "outputs": [],
        "status": "ok",
        "error": None,
        "exit_code": EXIT_OK,
        "version": tool_version(),
    }
    code = EXIT_OK
    try:
        cfg = load_config(args.config)
        if args.epsilon is not None:
            cfg = cfg.with_epsilon(args.epsilon)
        manifest["config_sha256"] = hashlib.sha256(cfg.to_json().encode()).hexdigest()
        files = COMMANDS[args.command](cfg, args, out)
        manifest["outputs"] = [str(f) for f in files]
    except UsageError as exc:
        code, manifest["status"], manifest["error"] = EXIT_USAGE, "UsageError", str(exc)
    except _Violations as exc:
        code, manifest["status"], manifest["error"] = EXIT_CONDITION, "ConditionViolation", str(exc)
        if args.command == "verify":
            manifest["outputs"] = [str(out / "verify.json")]
    except ConditionError as exc:
        code, manifest["status"], manifest["error"] = EXIT_CONDITION, type(exc).__name__, str(exc)
    except NumericalError as exc:
        code, manifest["status"], manifest["error"] = EXIT_NUMERICAL, type(exc).__name__, str(exc)
    except (IslmError, ValueError) as exc:
        code, manifest["status"], manifest["error"] = EXIT_USAGE, type(exc).__name__, str(exc)
    manifest["exit_code"] = code
    manifest["wall_clock_seconds"] = time.perf_counter() - t0
    report.write(out / "manifest.json", report.json_bytes(manifest))
    if code != EXIT_OK:
        print(f"islm {args.command}: {manifest['status']}: {manifest['error']}", file=sys.stderr)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
