import numpy as np
import pytest

from pulseforge.errors import CalibrationError, MagnusWarning
from pulseforge.filters import (bilinear_infidelity, calibrate_amplitude, curve_geometry,
                                default_omegas, ff_amplitude, ff_detuning,
                                ff_multiplicative_detuning, filter_function, frame_vectors,
                                frequency_infidelity, infidelity, lambda_matrix,
                                magnus_smallness, robustness_flags, static_filter_values)
from pulseforge.invariants import InvariantTrajectory, TimeGrid
from pulseforge.noise import (ADDITIVE_DETUNING, MULTIPLICATIVE_DETUNING, BandOneOverF,
                              DeltaPSD, NoiseChannel)
from pulseforge.optimizer import case_channels, naive_reference
from pulseforge.pulses import build_pulse, pulse_to_invariants
from pulseforge.report import DEFAULT_GAUGE
from pulseforge.verify import random_trajectory

OMEGAS = default_omegas(60)


def _great_circle(n=801, w0=1.3):
    T = 2 * np.pi / w0
    grid = TimeGrid(T, n)
    t = grid.times
    return InvariantTrajectory(grid, np.full(n, np.pi / 2), np.zeros(n), w0 * t,
                               np.zeros(n), np.zeros(n), np.full(n, w0))


def _composite(kind):
    return pulse_to_invariants(build_pulse(kind), *DEFAULT_GAUGE)


def _constant_delta(delta=0.35, T=5.0, n=1201):
    grid = TimeGrid(T, n)
    t = grid.times
    g = 1.3 + 0.2 * np.sin(2 * np.pi * t / T)
    gd = 0.2 * 2 * np.pi / T * np.cos(2 * np.pi * t / T)
    z = 0.8 * t
    zd = np.full(n, 0.8)
    bd = delta + zd * np.cos(g)
    # exact beta from a fine cumulative integral is not needed; only rates enter
    b = np.concatenate([[0.0], np.cumsum(0.5 * (bd[1:] + bd[:-1]) * grid.dt)])
    return InvariantTrajectory(grid, g, b, z, gd, bd, zd)


# ---------------------------------------------------------------------------
# the rotation

def test_lambda_at_origin():
    np.testing.assert_allclose(lambda_matrix(0.0, 0.0, 0.0),
                               [[0, 0, 1], [-1, 0, 0], [0, -1, 0]], atol=1e-15)


def test_lambda_at_equator():
    np.testing.assert_allclose(lambda_matrix(np.pi / 2, 0.0, 0.0),
                               [[1, 0, 0], [0, 0, 1], [0, -1, 0]], atol=1e-15)


def test_lambda_is_rotation(rng):
    a = rng.uniform(-np.pi, np.pi, (3, 50))
    L = lambda_matrix(*a)
    eye = np.broadcast_to(np.eye(3), L.shape)
    np.testing.assert_allclose(L @ np.swapaxes(L, -1, -2), eye, atol=1e-12)
    np.testing.assert_allclose(np.linalg.det(L), 1.0, atol=1e-12)


# ---------------------------------------------------------------------------
# filter functions

def test_zero_sensitivity_zero_filter():
    traj = random_trajectory(0)
    tr = filter_function(traj, np.zeros((traj.grid.N, 3)), OMEGAS)
    assert np.all(tr.values == 0)


def test_great_circle_detuning_zero_at_dc():
    traj = _great_circle()
    assert ff_detuning(traj, [0.0]).values[0] <= 1e-20
    assert robustness_flags(traj)["detuning"]


def test_naive_static_values():
    fd, fo = static_filter_values(naive_reference())
    # sigma_z along a quarter turn; sigma_x is invariant under the x drive
    assert fd == pytest.approx(0.5, rel=1e-5)
    assert fo == pytest.approx((np.pi / 4) ** 2, rel=1e-12)


@pytest.mark.parametrize("kind,detuning,amplitude", [
    ("naive", False, False), ("short_corpse", True, False), ("corpse", True, False),
    ("bb1", False, True), ("cinbb", True, True), ("cinsk", True, True)])
def test_composite_flags(kind, detuning, amplitude):
    traj = naive_reference() if kind == "naive" else _composite(kind)
    flags = robustness_flags(traj)
    assert (bool(flags["detuning"]), bool(flags["amplitude"])) == (detuning, amplitude)


@pytest.mark.parametrize("T", [1e-2, 1e-4])
def test_short_pulse_limit(T):
    # |v| = 1/2 for detuning and |v| <= Omega/2 for amplitude
    traj = _constant_delta(T=T, n=101)
    fd, fo = static_filter_values(traj)
    omega_max = np.max(np.hypot(traj.gamma_dot, traj.zeta_dot * np.sin(traj.gamma)))
    assert fd <= 0.25 * T ** 2 * (1 + 1e-12)
    assert fo <= 0.25 * (omega_max * T) ** 2 * (1 + 1e-12)


def test_filter_at_zero_matches_static():
    traj = random_trajectory(4)
    fd, fo = static_filter_values(traj)
    assert ff_detuning(traj, [0.0]).values[0] == pytest.approx(fd, rel=1e-12)
    assert ff_amplitude(traj, [0.0]).values[0] == pytest.approx(fo, rel=1e-12)


def test_multiplicative_detuning_vanishes_without_detuning():
    # only rounding in cos(pi/2) and the RK4 solve survives
    assert np.max(ff_multiplicative_detuning(naive_reference(), OMEGAS).values) < 1e-20
    assert np.max(ff_multiplicative_detuning(_great_circle(), OMEGAS).values) < 1e-28


def test_multiplicative_detuning_constant_delta():
    traj = _constant_delta(0.35)
    np.testing.assert_allclose(ff_multiplicative_detuning(traj, OMEGAS).values,
                               0.35 ** 2 * ff_detuning(traj, OMEGAS).values, rtol=1e-8)


def test_multiplicative_generic_route_matches():
    traj = random_trajectory(6)
    chi = NoiseChannel("m", DeltaPSD(1.0), MULTIPLICATIVE_DETUNING).chi_trajectory(traj)
    generic = filter_function(traj, chi, OMEGAS).values
    np.testing.assert_allclose(ff_multiplicative_detuning(traj, OMEGAS).values, generic,
                               rtol=1e-8, atol=1e-14)


# ---------------------------------------------------------------------------
# infidelity

def test_delta_psd_sifts_dc_value():
    traj = random_trajectory(1)
    ch = NoiseChannel("d", DeltaPSD(0.3), ADDITIVE_DETUNING)
    fd, _ = static_filter_values(traj)
    total = infidelity(traj, [ch], warn=False).total
    assert total == pytest.approx(0.3 / (2 * np.pi) * fd, rel=1e-12)


def test_zero_noise_zero_infidelity():
    traj = random_trajectory(1)
    rep = infidelity(traj, [NoiseChannel("d", DeltaPSD(0.0))])
    assert rep.total == 0 and rep.xi2 == 0
    assert infidelity(traj, []).total == 0


def test_bilinear_vs_frequency_quadrature():
    traj = random_trajectory(2, n_points=401)
    chans = [NoiseChannel("b", BandOneOverF(1e-3, 1e-9, 1e-1), ADDITIVE_DETUNING)]
    a = infidelity(traj, chans, warn=False).contributions["b"]
    b = frequency_infidelity(traj, chans)["b"]
    assert a == pytest.approx(b, rel=1e-4)


def test_bilinear_dense_and_toeplitz_agree():
    traj = random_trajectory(3, n_points=2501)
    v = frame_vectors(traj, ADDITIVE_DETUNING.from_trajectory(traj))
    psd = BandOneOverF(1.0, 1e-9, 1e-1)
    fine = bilinear_infidelity(v, traj.grid, psd)
    coarse = bilinear_infidelity(v[::5], TimeGrid(traj.grid.T, 501), psd)
    assert fine == pytest.approx(coarse, rel=1e-4)


def test_calibration_identity_and_linearity():
    ref = naive_reference()
    chans = case_channels("A")
    a1 = calibrate_amplitude(ref, chans, 0.1)
    a2 = calibrate_amplitude(ref, chans, 0.2)
    assert a2 == pytest.approx(2 * a1, rel=1e-14)
    scaled = tuple(c.scaled(a1) for c in chans)
    assert infidelity(ref, scaled, warn=False).total == pytest.approx(0.1, rel=1e-12)
    b = calibrate_amplitude(ref, case_channels("B"), 0.1)
    assert b > 0 and b != a1


def test_calibration_needs_nonzero_reference():
    with pytest.raises(CalibrationError):
        calibrate_amplitude(naive_reference(), [NoiseChannel("d", DeltaPSD(0.0))], 0.1)


def test_smallness_single_term():
    traj = random_trajectory(0, T=3.0)
    rep = magnus_smallness(traj, [NoiseChannel("d", DeltaPSD(0.8))])
    assert rep == pytest.approx(0.8 / (2 * np.pi) * 0.25 * 3.0 ** 2)


def test_magnus_warning_fires():
    ref = naive_reference()
    loud = [NoiseChannel("d", DeltaPSD(100.0))]
    with pytest.warns(MagnusWarning):
        rep = infidelity(ref, loud)
    assert not rep.converged


# ---------------------------------------------------------------------------
# curve geometry

def test_great_circle_closes():
    d, b = curve_geometry(_great_circle())
    assert np.linalg.norm(d) < 1e-8


@pytest.mark.parametrize("seed", range(3))
def test_geometry_matches_static_values(seed):
    traj = random_trajectory(seed)
    d, b = curve_geometry(traj)
    fd, fo = static_filter_values(traj)
    assert d @ d == pytest.approx(4 * fd, rel=1e-10)
    assert b @ b == pytest.approx(4 * fo, rel=1e-10)
