import os
import subprocess
import sys

import numpy as np
import pytest

from pulseforge import kernels
from pulseforge.invariants import reverse_engineer
from pulseforge.verify import random_trajectory

compiled = pytest.mark.skipif("compiled" not in kernels.IMPLEMENTATIONS,
                              reason="compiled extension not built")


def _fields(seed=0, n=401):
    p = reverse_engineer(random_trajectory(seed, n_points=n))
    return [kernels.stages(a) for a in p.fields()], p.grid.dt


def test_stages_layout():
    st = kernels.stages(np.array([0.0, 2.0, 4.0]))
    np.testing.assert_array_equal(st, [0, 1, 2, 2, 3, 4])
    held = kernels.stages(np.array([0.0, 2.0, 4.0]), hold=True)
    np.testing.assert_array_equal(held, [0, 0, 0, 2, 2, 2])


def test_refined_stages():
    fine = np.arange(5.0)
    np.testing.assert_array_equal(kernels.stages_refined(fine), [0, 1, 2, 2, 3, 4])
    with pytest.raises(ValueError, match="odd"):
        kernels.stages_refined(np.arange(4.0))


def test_backend_name():
    assert kernels.BACKEND in ("compiled", "python")
    assert "python" in kernels.IMPLEMENTATIONS


@compiled
def test_invariants_compiled_matches_fallback():
    st, dt = _fields(1)
    a = kernels.rk4_invariants(*st, dt, 1.4, 0.2, -0.2, impl=kernels.IMPLEMENTATIONS["compiled"])
    b = kernels.rk4_invariants(*st, dt, 1.4, 0.2, -0.2, impl=kernels.IMPLEMENTATIONS["python"])
    for x, y in zip(a[:3], b[:3]):
        np.testing.assert_allclose(x, y, rtol=0, atol=1e-12)
    assert a[3] == b[3] == -1


@compiled
def test_unitaries_compiled_matches_fallback():
    st, dt = _fields(2)
    a = kernels.rk4_unitaries(*st, dt, impl=kernels.IMPLEMENTATIONS["compiled"])
    b = kernels.rk4_unitaries(*st, dt, impl=kernels.IMPLEMENTATIONS["python"])
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


@compiled
def test_batch_compiled_matches_fallback():
    st, dt = _fields(3)
    rng = np.random.default_rng(0)
    batch = [np.stack([s + 0.01 * rng.normal(size=s.size) for _ in range(4)]) for s in st]
    a = kernels.rk4_final_batch(*batch, dt, impl=kernels.IMPLEMENTATIONS["compiled"])
    b = kernels.rk4_final_batch(*batch, dt, impl=kernels.IMPLEMENTATIONS["python"])
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)
    single = kernels.rk4_unitaries(*(x[0] for x in batch), dt)[-1]
    np.testing.assert_allclose(a[0], single, atol=1e-12)


@pytest.mark.parametrize("name", sorted(kernels.IMPLEMENTATIONS))
def test_singularity_reported(name):
    n = 11
    st = [kernels.stages(np.full(n, v)) for v in (1.0, 0.0, 0.0)]
    *_, bad = kernels.rk4_invariants(*st, 0.1, 0.0, 0.0, 0.0,
                                     impl=kernels.IMPLEMENTATIONS[name])
    assert bad == 0


def test_pure_env_selects_fallback():
    env = dict(os.environ, PULSEFORGE_PURE="1")
    out = subprocess.run([sys.executable, "-c", "import pulseforge; print(pulseforge.BACKEND)"],
                         capture_output=True, text=True, env=env, timeout=120)
    assert out.stdout.strip() == "python"
