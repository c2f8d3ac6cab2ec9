"""Command-line front end.

Exit codes: 0 success, 2 a synthesized pulse misses its constraints,
3 a verification check failed, 64 bad usage or unreadable input.
"""
from __future__ import annotations

import argparse
import ast
import logging
import operator
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io as pio
from .errors import ConstraintError, ParseError, PulseforgeError
from .filters import default_omegas, infidelity, robustness_flags
from .noise import NoiseChannel

EXIT_OK, EXIT_INFEASIBLE, EXIT_VERIFY, EXIT_USAGE = 0, 2, 3, 64
COMPARE_KINDS = ("naive", "short_corpse", "bb1", "cinbb", "cinsk")
GAUGE = (0.5 * np.pi + 0.3, 0.2)

log = logging.getLogger("pulseforge")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# small helpers

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.USub: operator.neg, ast.UAdd: operator.pos}


def parse_angle(text: str) -> float:
    """Number or arithmetic in ``pi``, e.g. ``pi/2`` or ``0.25*pi``."""
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return np.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ValueError
    try:
        return float(ev(ast.parse(text.strip(), mode="eval")))
    except (SyntaxError, ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not an angle: {text!r}") from None


def load_config(path):
    """JSON object whose keys mirror the long flag names (dashes as underscores)."""
    if path is None:
        return {}
    obj = pio.load_json(path)
    if not isinstance(obj, dict):
        raise ParseError(f"{path}: top level must be an object")
    return obj


def _setting(args, cfg, key, default=None):
    """Flag value if given, else config value, else ``default``."""
    val = getattr(args, key, None)
    if val is not None:
        return val
    return cfg.get(key, default)


def _channels(args, cfg):
    """Noise channels from ``--case``, ``--noise`` or the config file."""
    case = _setting(args, cfg, "case")
    noise = _setting(args, cfg, "noise")
    if case is not None and noise is not None:
        raise UsageError("give either a case preset or a noise spec, not both")
    if case is not None:
        from .optimizer import calibrated_amplitude, case_channels
        if case not in ("A", "B"):
            raise UsageError(f"unknown case {case!r}")
        return case_channels(case, calibrated_amplitude(case)), case
    if noise is None:
        return (), None
    spec = pio.load_json(noise) if isinstance(noise, str) else noise
    if isinstance(spec, dict):
        spec = spec.get("channels", spec)
    try:
        return tuple(NoiseChannel.from_dict(c) for c in spec), None
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"noise spec: {exc}") from None


def _write(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# ---------------------------------------------------------------------------
# commands

def cmd_calibrate(args, cfg):
    from .optimizer import calibrated_amplitude, case_channels, naive_reference
    case = _setting(args, cfg, "case", "A")
    target = float(_setting(args, cfg, "target", 0.1))
    amp = calibrated_amplitude(case, target)
    rep = infidelity(naive_reference(), case_channels(case, amp), warn=False)
    _write(pio.dump_json({"case": case, "amplitude": amp, "target": target,
                          "naive_infidelity": rep.total, "xi2": rep.xi2}),
           _setting(args, cfg, "out"))
    return EXIT_OK


def cmd_pulse(args, cfg):
    from .pulses import DEFAULT_RESOLUTION, build_pulse
    kind = _setting(args, cfg, "kind", "naive")
    theta = _setting(args, cfg, "theta", np.pi / 2)
    theta = parse_angle(theta) if isinstance(theta, str) else float(theta)
    res = float(_setting(args, cfg, "resolution", DEFAULT_RESOLUTION))
    pulse = build_pulse(kind, theta, res)
    fmt = _setting(args, cfg, "export", "csv")
    text = pio.pulse_to_csv(pulse) if fmt == "csv" else pio.dump_json(pio.pulse_to_json(pulse))
    _write(text, _setting(args, cfg, "out"))
    return EXIT_OK


def _load_trajectory(path, gamma0, beta0):
    from .report import trajectory_for
    if pio.sniff_kind(path) == "trajectory":
        return pio.load_trajectory(path)
    return trajectory_for(pio.load_pulse(path), gamma0, beta0)


def cmd_evaluate(args, cfg):
    from .report import gate_report
    channels, _ = _channels(args, cfg)
    traj = _load_trajectory(args.input, _setting(args, cfg, "gamma0"),
                            _setting(args, cfg, "beta0"))
    omegas = default_omegas(int(_setting(args, cfg, "omegas", 400)))
    ff_dir = _setting(args, cfg, "ff_dir")
    rep = gate_report(traj, channels, omegas if ff_dir else None)
    if ff_dir:
        from .filters import FilterFunctionTrace
        out = Path(ff_dir)
        out.mkdir(parents=True, exist_ok=True)
        for ch in channels:
            pio.filter_to_csv(FilterFunctionTrace(omegas, np.array(rep["filter_functions"][ch.id]),
                                                  ch.id), out / f"ff_{ch.id}.csv")
        rep.pop("filter_functions")
        rep.pop("omegas")
    _write(pio.dump_json(rep), _setting(args, cfg, "out"))
    return EXIT_OK


def compare_rows(case, resolution=256, trained=None):
    """Rows ``(name, infidelity, robust_detuning, robust_amplitude)`` for one case."""
    from .optimizer import calibrated_amplitude, case_channels, naive_reference
    from .pulses import build_pulse, pulse_to_invariants
    chans = case_channels(case, calibrated_amplitude(case))
    trajs = [("naive", naive_reference())]
    trajs += [(k, pulse_to_invariants(build_pulse(k, resolution=resolution), *GAUGE))
              for k in COMPARE_KINDS[1:]]
    if trained is not None:
        trajs.append(("dnn", trained))
    rows = []
    for name, traj in trajs:
        rep = infidelity(traj, chans, warn=False)
        flags = robustness_flags(traj)
        rows.append((name, rep.total, flags["detuning"], flags["amplitude"]))
    return rows


def cmd_compare(args, cfg):
    case = _setting(args, cfg, "case", "A")
    if case not in ("A", "B"):
        raise UsageError(f"unknown case {case!r}")
    trained = None
    path = _setting(args, cfg, "trained")
    if path is not None:
        if Path(path).exists():
            trained = _load_trajectory(path, None, None)
        else:
            warnings.warn(f"trained pulse {path} not found; table has no DNN row")
    rows = compare_rows(case, int(_setting(args, cfg, "resolution", 256)), trained)
    yn = {True: "Yes", False: "No"}
    lines = [f"case {case}", f"{'pulse':<14}{'infidelity':>14}{'robust dD':>11}{'robust dO':>11}"]
    lines += [f"{n:<14}{v:>14.4e}{yn[d]:>11}{yn[a]:>11}" for n, v, d, a in rows]
    print("\n".join(lines))
    csv_path = _setting(args, cfg, "csv")
    if csv_path:
        body = ["pulse,infidelity,robust_detuning,robust_amplitude"]
        body += [f"{n},{v!r},{int(d)},{int(a)}" for n, v, d, a in rows]
        Path(csv_path).write_text("\n".join(body) + "\n")
    return EXIT_OK


def cmd_synthesize(args, cfg):
    from .optimizer import SYNTH_DEFAULTS, preset, train_restarts
    case = _setting(args, cfg, "case", "A")
    if case not in ("A", "B"):
        raise UsageError(f"unknown case {case!r}")
    defaults = SYNTH_DEFAULTS[case]
    seed = int(_setting(args, cfg, "seed", 0))
    restarts = int(_setting(args, cfg, "restarts", defaults["restarts"]))
    iters = int(_setting(args, cfg, "iters", defaults["iters"]))
    screen = _setting(args, cfg, "screen", defaults["screen"])
    keep = _setting(args, cfg, "keep", defaults["keep"])
    if min(restarts, iters) < 1:
        raise UsageError("restarts and iters must be positive")
    out = Path(_setting(args, cfg, "out", f"synth_{case}"))
    out.mkdir(parents=True, exist_ok=True)
    cfg_run = preset(case)
    results = train_restarts(cfg_run, range(seed, seed + restarts), iters,
                             keep=None if keep is None else int(keep),
                             screen=None if screen is None else int(screen),
                             threads=_setting(args, cfg, "threads"), log=log.info,
                             polish=bool(_setting(args, cfg, "polish", False)))
    best = results[0]
    omegas = default_omegas()
    from .filters import filter_function
    for ch in cfg_run.channels:
        tr = filter_function(best.trajectory, ch.chi_trajectory(best.trajectory), omegas, ch.id)
        pio.filter_to_csv(tr, out / f"ff_{ch.id}.csv")
    pio.trajectory_to_csv(best.trajectory, out / "trajectory.csv")
    pio.dump_json(pio.trajectory_to_json(best.trajectory), out / "trajectory.json")
    pio.pulse_to_csv(best.pulse, out / "pulse.csv")
    summary = {
        "case": case, "seed": best.seed, "steps": best.steps, "feasible": best.feasible,
        "report": best.report, "params": best.params.params.tolist(),
        "history": best.history.tolist(),
        "restarts": [{"seed": r.seed, "feasible": r.feasible, "steps": r.steps,
                      "infidelity": r.total_infidelity} for r in results],
    }
    pio.dump_json(summary, out / "result.json")
    print(f"best seed {best.seed}: infidelity {best.total_infidelity:.4e}, "
          f"feasible {best.feasible}, output in {out}")
    return EXIT_OK if best.feasible else EXIT_INFEASIBLE


def _parse_tolerances(items):
    out = {}
    for item in items or ():
        name, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--tol expects NAME=VALUE, got {item!r}")
        try:
            out[name.strip()] = float(val)
        except ValueError:
            raise UsageError(f"--tol {name}: {val!r} is not a number") from None
    return out


def cmd_verify(args, cfg):
    from .verify import CHECKS, conformance_report, run_checks
    tols = dict(cfg.get("tolerances", {}))
    tols.update(_parse_tolerances(args.tol))
    unknown = [k for k in tols if k not in CHECKS]
    checks = args.check or cfg.get("checks")
    unknown += [k for k in checks or () if k not in CHECKS]
    if unknown:
        raise UsageError(f"unknown check(s) {', '.join(unknown)}; known: {', '.join(CHECKS)}")
    results = run_checks(checks, tols, mutation=args.mutate, quick=args.quick)
    report = conformance_report(results)
    _write(pio.dump_json(report), _setting(args, cfg, "out"))
    return EXIT_OK if report["passed"] else EXIT_VERIFY


# ---------------------------------------------------------------------------
# parser

def build_parser():
    p = _Parser(prog="pulseforge", description="Noise-robust one-qubit pulse toolkit.")
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--threads", type=int, help="worker cap (default: PULSEFORGE_THREADS or 1)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("calibrate", help="PSD amplitude giving the naive pulse 0.1 infidelity")
    c.add_argument("--case", choices=("A", "B"))
    c.add_argument("--target", type=float)
    c.add_argument("--out")
    c.set_defaults(func=cmd_calibrate)

    c = sub.add_parser("pulse", help="export a reference pulse")
    c.add_argument("--kind", choices=("naive", "short_corpse", "corpse", "bb1", "cinbb", "cinsk"))
    c.add_argument("--theta", type=parse_angle)
    c.add_argument("--resolution", type=float, help="grid steps per unit time")
    c.add_argument("--export", choices=("csv", "json"))
    c.add_argument("--out")
    c.set_defaults(func=cmd_pulse)

    c = sub.add_parser("evaluate", help="gate report for a pulse or trajectory file")
    c.add_argument("input")
    c.add_argument("--case", choices=("A", "B"))
    c.add_argument("--noise", help="JSON list of noise channels")
    c.add_argument("--gamma0", type=float)
    c.add_argument("--beta0", type=float)
    c.add_argument("--omegas", type=int, help="frequency samples for --ff-dir")
    c.add_argument("--ff-dir", help="write per-channel filter-function CSVs here")
    c.add_argument("--out")
    c.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("compare", help="composite-pulse infidelity table")
    c.add_argument("--case", choices=("A", "B"))
    c.add_argument("--trained", help="trajectory or pulse file of a trained gate")
    c.add_argument("--resolution", type=int)
    c.add_argument("--csv")
    c.set_defaults(func=cmd_compare)

    c = sub.add_parser("synthesize", help="train the network for a benchmark case")
    c.add_argument("--case", choices=("A", "B"))
    c.add_argument("--seed", type=int)
    c.add_argument("--restarts", type=int)
    c.add_argument("--iters", type=int, help="Adam steps per finishing restart")
    c.add_argument("--screen", type=int, help="steps before the restarts are culled")
    c.add_argument("--keep", type=int, help="restarts that finish the schedule")
    c.add_argument("--polish", action="store_true", default=None,
                   help="L-BFGS pass after Adam on the finishing restarts")
    c.add_argument("--out")
    c.set_defaults(func=cmd_synthesize)

    c = sub.add_parser("verify", help="run the conformance suite")
    c.add_argument("--check", action="append", help="run only this check (repeatable)")
    c.add_argument("--tol", action="append", metavar="NAME=VALUE", help="override a tolerance")
    c.add_argument("--mutate", choices=("lambda22",), help=argparse.SUPPRESS)
    c.add_argument("--quick", action="store_true")
    c.add_argument("--out")
    c.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        cfg = load_config(args.config)
        threads = _setting(args, cfg, "threads")
        if threads is not None:
            if int(threads) < 1:
                raise UsageError("--threads must be positive")
            os.environ["PULSEFORGE_THREADS"] = str(int(threads))
        return args.func(args, cfg)
    except (UsageError, ParseError) as exc:
        print(f"pulseforge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConstraintError as exc:
        print(f"pulseforge: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except PulseforgeError as exc:
        print(f"pulseforge: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
