import json

import numpy as np
import pytest

from pulseforge import io as pio
from pulseforge.errors import ParseError
from pulseforge.filters import FilterFunctionTrace, infidelity
from pulseforge.noise import DeltaPSD, NoiseChannel
from pulseforge.pulses import build_pulse, naive_pulse
from pulseforge.verify import random_trajectory


def test_trajectory_csv_round_trip(tmp_path):
    tr = random_trajectory(0, n_points=101)
    path = tmp_path / "t.csv"
    text = pio.trajectory_to_csv(tr, path)
    assert text.splitlines()[0] == "t,gamma,beta,zeta"
    back = pio.trajectory_from_csv(path)
    assert back.grid == tr.grid
    for k in ("gamma", "beta", "zeta"):
        assert np.array_equal(getattr(back, k), getattr(tr, k))


def test_trajectory_json_keeps_rates(tmp_path):
    tr = random_trajectory(1, n_points=51)
    path = tmp_path / "t.json"
    pio.dump_json(pio.trajectory_to_json(tr), path)
    back = pio.load_trajectory(path)
    assert np.array_equal(back.zeta_dot, tr.zeta_dot)


def test_pulse_csv_round_trip_keeps_hold(tmp_path):
    p = build_pulse("bb1", resolution=16)
    path = tmp_path / "p.csv"
    text = pio.pulse_to_csv(p, path)
    assert text.startswith("# hold=true\n")
    back = pio.load_pulse(path)
    assert back.hold and np.array_equal(back.omega, p.omega)
    assert not pio.pulse_from_json(pio.pulse_to_json(naive_pulse(n_points=5))).hold


def test_csv_output_is_deterministic():
    p = naive_pulse(n_points=33)
    assert pio.pulse_to_csv(p) == pio.pulse_to_csv(p)


def test_filter_csv(tmp_path):
    tr = FilterFunctionTrace(np.array([0.1, 1.0]), np.array([2.0, 3.0]), "d")
    path = tmp_path / "f.csv"
    pio.filter_to_csv(tr, path)
    back = pio.filter_from_csv(path, "d")
    assert np.array_equal(back.values, tr.values) and back.channel == "d"


def test_infidelity_records():
    rep = infidelity(random_trajectory(0, n_points=51), [NoiseChannel("d", DeltaPSD(1e-3))])
    rec = pio.infidelity_to_json(rep)
    assert rec[0]["channel"] == "d" and "xi2" in rec[0]


def test_dump_json_handles_numpy():
    text = pio.dump_json({"a": np.float64(1.5), "b": np.arange(2), "c": np.bool_(True)})
    assert json.loads(text) == {"a": 1.5, "b": [0, 1], "c": True}


@pytest.mark.parametrize("body,needle", [
    ("t,omega,phi\n0,1,0\n1,1,0\n", "missing column(s) delta"),
    ("t,omega,phi,delta\n0,1,0,0\n1,abc,0,0\n", "column 'omega'"),
    ("t,omega,phi,delta\n0,1,0,0\n1,1,nan,0\n", "column 'phi'"),
    ("t,omega,phi,delta\n0,1,0,0\n1,1,0\n", "expected 4 fields"),
    ("t,omega,phi,delta\n0,1,0,0\n", "two data rows"),
    ("t,omega,phi,delta\n0,1,0,0\n1,-1,0,0\n", "column 'omega'"),
    ("t,omega,phi,delta\n0,1,0,0\n1,1,0,0\n3,1,0,0\n", "column 't'"),
    ("", "empty"),
])
def test_malformed_pulse_csv(tmp_path, body, needle):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(ParseError) as exc:
        pio.pulse_from_csv(path)
    assert needle in str(exc.value)
    assert str(path) in str(exc.value)


def test_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{\"grid\": ")
    with pytest.raises(ParseError, match="invalid JSON"):
        pio.load_json(path)
    path.write_text(json.dumps({"grid": {"T": 1.0, "N": 3}, "omega": [1, 1]}))
    with pytest.raises(ParseError, match="field 'omega'"):
        pio.load_pulse(path)


def test_missing_file(tmp_path):
    with pytest.raises(ParseError, match="cannot read"):
        pio.load_pulse(tmp_path / "nope.csv")
    with pytest.raises(ParseError, match="cannot read"):
        pio.sniff_kind(tmp_path / "nope.csv")


def test_sniff_kind(tmp_path):
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    pio.pulse_to_csv(naive_pulse(n_points=5), a)
    pio.trajectory_to_csv(random_trajectory(0, n_points=5), b)
    c.write_text("x,y\n1,2\n")
    assert pio.sniff_kind(a) == "pulse" and pio.sniff_kind(b) == "trajectory"
    with pytest.raises(ParseError, match="matches neither"):
        pio.sniff_kind(c)
