"""CSV and JSON serialization of trajectories, pulses and reports.

CSV bodies are written with ``repr``-exact floats and no timestamps, so
repeated runs produce byte-identical files.  Comment lines start with
``#``; a pulse file may carry ``# hold=true`` to mark zero-order-hold
samples.
"""
from __future__ import annotations

import csv
import io as _io
import json
from pathlib import Path

import numpy as np

from .errors import ParseError
from .filters import FilterFunctionTrace, InfidelityReport
from .invariants import ControlPulse, InvariantTrajectory, TimeGrid

TRAJECTORY_COLUMNS = ("t", "gamma", "beta", "zeta")
PULSE_COLUMNS = ("t", "omega", "phi", "delta")
FILTER_COLUMNS = ("omega", "F")
GRID_RTOL = 1e-9


def _fmt(x):
    return repr(float(x))


def write_csv(path, columns, arrays, comments=()):
    buf = _io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in zip(*arrays):
        w.writerow([_fmt(x) for x in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def _read_table(path, columns):
    """Parse a CSV with exactly ``columns``; return (arrays, comment dict)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read ({exc.strerror})") from exc
    meta = {}
    rows = []
    header = None
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            for tok in s[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    meta[k.strip()] = v.strip()
            continue
        cells = [c.strip() for c in next(csv.reader([s]))]
        if header is None:
            header = cells
            missing = [c for c in columns if c not in header]
            if missing:
                raise ParseError(f"{path}:{lineno}: missing column(s) {', '.join(missing)}; "
                                 f"expected header {','.join(columns)}")
            continue
        if len(cells) != len(header):
            raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(cells)}")
        row = []
        for name in columns:
            raw = cells[header.index(name)]
            try:
                val = float(raw)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: column '{name}': "
                                 f"cannot parse {raw!r} as a number") from None
            if not np.isfinite(val):
                raise ParseError(f"{path}:{lineno}: column '{name}': non-finite value {raw!r}")
            row.append(val)
        rows.append(row)
    if header is None:
        raise ParseError(f"{path}: empty file")
    if len(rows) < 2:
        raise ParseError(f"{path}: need at least two data rows, got {len(rows)}")
    data = np.array(rows).T
    return dict(zip(columns, data)), meta


def _grid_from_times(t, path="<input>"):
    n = t.size
    grid = TimeGrid(t[-1], n) if t[-1] > 0 else None
    if grid is None or abs(t[0]) > GRID_RTOL * t[-1] or \
            np.max(np.abs(t - grid.times)) > GRID_RTOL * max(t[-1], 1.0):
        raise ParseError(f"{path}: column 't': times must be uniform on [0, T] starting at 0")
    return grid


# ---------------------------------------------------------------------------
# trajectories

def trajectory_to_csv(traj: InvariantTrajectory, path=None):
    return write_csv(path, TRAJECTORY_COLUMNS,
                     (traj.times, traj.gamma, traj.beta, traj.zeta))


def trajectory_from_csv(path) -> InvariantTrajectory:
    """Read ``t,gamma,beta,zeta``; rates come from finite differences."""
    cols, _ = _read_table(path, TRAJECTORY_COLUMNS)
    grid = _grid_from_times(cols["t"], path)
    return InvariantTrajectory.from_angles(grid, cols["gamma"], cols["beta"], cols["zeta"])


def trajectory_to_json(traj: InvariantTrajectory):
    return {"grid": {"T": traj.grid.T, "N": traj.grid.N},
            **{k: getattr(traj, k).tolist() for k in
               ("gamma", "beta", "zeta", "gamma_dot", "beta_dot", "zeta_dot")}}


def trajectory_from_json(obj) -> InvariantTrajectory:
    grid = _json_grid(obj)
    arrays = {k: _json_array(obj, k, grid.N) for k in ("gamma", "beta", "zeta")}
    if all(k + "_dot" in obj for k in arrays):
        rates = {k + "_dot": _json_array(obj, k + "_dot", grid.N) for k in arrays}
        return InvariantTrajectory(grid, **arrays, **rates)
    return InvariantTrajectory.from_angles(grid, arrays["gamma"], arrays["beta"], arrays["zeta"])


# ---------------------------------------------------------------------------
# pulses

def pulse_to_csv(pulse: ControlPulse, path=None):
    comments = ["hold=true"] if pulse.hold else ()
    return write_csv(path, PULSE_COLUMNS, (pulse.times, pulse.omega, pulse.phi, pulse.delta),
                     comments)


def pulse_from_csv(path) -> ControlPulse:
    cols, meta = _read_table(path, PULSE_COLUMNS)
    grid = _grid_from_times(cols["t"], path)
    if np.any(cols["omega"] < 0):
        line = int(np.flatnonzero(cols["omega"] < 0)[0])
        raise ParseError(f"{path}: column 'omega': negative amplitude in data row {line + 1}")
    hold = meta.get("hold", "false").lower() in ("1", "true", "yes")
    return ControlPulse(grid, cols["omega"], cols["phi"], cols["delta"], hold=hold)


def pulse_to_json(pulse: ControlPulse):
    return {"grid": {"T": pulse.grid.T, "N": pulse.grid.N}, "hold": pulse.hold,
            "omega": pulse.omega.tolist(), "phi": pulse.phi.tolist(),
            "delta": pulse.delta.tolist()}


def pulse_from_json(obj) -> ControlPulse:
    grid = _json_grid(obj)
    return ControlPulse(grid, *(_json_array(obj, k, grid.N) for k in ("omega", "phi", "delta")),
                        hold=bool(obj.get("hold", False)))


def _json_grid(obj):
    try:
        g = obj["grid"]
        return TimeGrid(float(g["T"]), int(g["N"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"field 'grid': expected {{'T': float, 'N': int}} ({exc})") from None


def _json_array(obj, key, n):
    if key not in obj:
        raise ParseError(f"field '{key}': missing")
    try:
        a = np.asarray(obj[key], dtype=float)
    except (TypeError, ValueError):
        raise ParseError(f"field '{key}': not a numeric array") from None
    if a.shape != (n,):
        raise ParseError(f"field '{key}': expected {n} values, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ParseError(f"field '{key}': non-finite values")
    return a


# ---------------------------------------------------------------------------
# filter functions and reports

def filter_to_csv(trace: FilterFunctionTrace, path=None):
    return write_csv(path, FILTER_COLUMNS, (trace.omegas, trace.values))


def filter_from_csv(path, channel="") -> FilterFunctionTrace:
    cols, _ = _read_table(path, FILTER_COLUMNS)
    return FilterFunctionTrace(cols["omega"], cols["F"], channel, "file")


def infidelity_to_json(report: InfidelityReport):
    return report.to_records()


def dump_json(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    raise TypeError(f"cannot serialize {type(x).__name__}")


def load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ParseError(f"{path}: cannot read ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None


def load_trajectory(path) -> InvariantTrajectory:
    if str(path).endswith(".json"):
        return trajectory_from_json(load_json(path))
    return trajectory_from_csv(path)


def load_pulse(path) -> ControlPulse:
    if str(path).endswith(".json"):
        return pulse_from_json(load_json(path))
    return pulse_from_csv(path)


def sniff_kind(path):
    """``'pulse'`` or ``'trajectory'`` from a file's header or keys."""
    p = str(path)
    if p.endswith(".json"):
        obj = load_json(path)
        return "pulse" if "omega" in obj else "trajectory"
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read ({exc.strerror})") from exc
    for line in text.splitlines():
        s = line.strip()
        if s and not s.startswith("#"):
            cols = [c.strip() for c in s.split(",")]
            if "omega" in cols:
                return "pulse"
            if "gamma" in cols:
                return "trajectory"
            raise ParseError(f"{path}: header {s!r} matches neither "
                             f"{','.join(PULSE_COLUMNS)} nor {','.join(TRAJECTORY_COLUMNS)}")
    raise ParseError(f"{path}: empty file")
