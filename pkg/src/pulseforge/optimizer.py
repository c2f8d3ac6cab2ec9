"""Neural-network trajectory synthesis.

A 1-32-32-2 tanh network maps normalized time to ``(gamma, zeta)``.  The
cost combines the first-order infidelity of every noise channel with
penalties that pin the gate angle, zero the drive at both ends and cap
the amplitude and its slew rate.  ``beta`` is solved so that the detuning
vanishes identically, so the network only ever describes two-axis pulses.

Everything differentiable is written in ``jax`` with 64-bit floats.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

import jax
import jax.numpy as jnp

from .errors import ConstraintError, PulseforgeError
from .filters import calibrate_amplitude, infidelity, kernel_matrix, static_filter_values
from .invariants import (TimeGrid, cos_theta_from_endpoints, forward_solve,
                         gate_from_invariants, reverse_engineer, zero_detuning_trajectory,
                         zxz_decompose)
from .noise import (ADDITIVE_DETUNING, MULTIPLICATIVE_AMPLITUDE, MULTIPLICATIVE_DETUNING,
                    BandOneOverF, DeltaPSD, NoiseChannel, OneOverFWithTail)
from .oracle import resolve_threads
from .pulses import naive_pulse

jax.config.update("jax_enable_x64", True)

LAYER_SIZES = (1, 32, 32, 2)
N_PARAMS = sum(a * b + b for a, b in zip(LAYER_SIZES[:-1], LAYER_SIZES[1:]))
TERM_NAMES = ("detuning", "amplitude", "theta", "omega_start", "omega_end",
              "amplitude_cap", "slew_cap")
CONSTRAINT_TOL = 1e-4


class NonFiniteGradientError(PulseforgeError):
    pass


# ---------------------------------------------------------------------------
# network

def _unflatten(flat):
    out, pos = [], 0
    for a, b in zip(LAYER_SIZES[:-1], LAYER_SIZES[1:]):
        w = flat[pos:pos + a * b].reshape(b, a)
        pos += a * b
        out.append((w, flat[pos:pos + b]))
        pos += b
    return out


def _forward(flat, x):
    h = x[None, :]
    layers = _unflatten(flat)
    for i, (w, b) in enumerate(layers):
        h = w @ h + b[:, None]
        if i < len(layers) - 1:
            h = jnp.tanh(h)
    return h[0], h[1]


@dataclass(frozen=True, eq=False)
class Mlp:
    """Flat parameter vector of the 1-32-32-2 network, layer by layer (W then b)."""

    params: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.params, dtype=float).ravel()
        if p.size != N_PARAMS:
            raise ValueError(f"expected {N_PARAMS} parameters, got {p.size}")
        object.__setattr__(self, "params", p)

    @classmethod
    def init(cls, seed: int) -> "Mlp":
        """Xavier-uniform weights, zero biases."""
        rng = np.random.default_rng(seed)
        parts = []
        for a, b in zip(LAYER_SIZES[:-1], LAYER_SIZES[1:]):
            lim = np.sqrt(6.0 / (a + b))
            parts += [rng.uniform(-lim, lim, a * b), np.zeros(b)]
        return cls(np.concatenate(parts))

    @classmethod
    def zeros(cls) -> "Mlp":
        return cls(np.zeros(N_PARAMS))

    def layers(self):
        return [(np.asarray(w), np.asarray(b)) for w, b in _unflatten(self.params)]


def mlp_forward(net: Mlp, t_normalized):
    """Network outputs ``(gamma, zeta)`` at normalized times in ``[-1, 1]``."""
    x = jnp.atleast_1d(jnp.asarray(t_normalized, dtype=float))
    g, z = _forward(jnp.asarray(net.params), x)
    g, z = np.asarray(g), np.asarray(z)
    if np.ndim(t_normalized) == 0:
        return float(g[0]), float(z[0])
    return g, z


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class CostConfig:
    """Everything that defines the cost.

    ``channels`` carry their PSDs at the calibrated amplitude.
    ``time_scale`` multiplies the normalized time before it enters the
    network; 1 reproduces a plain ``[-1, 1]`` input.
    """

    T: float
    t_ramp: float
    channels: tuple
    weights: tuple = (1.0, 1.0, 100.0, 100.0, 100.0, 100.0, 100.0)
    omega_max: float = 1.0
    n_points: int = 256
    eval_points: int = 1021
    stopband: tuple = (1e-9, 1e-1)
    amplitude: float = 1.0
    time_scale: float = 1.0
    learning_rate: float = 1e-3
    schedule: str = "constant"
    name: str = "custom"

    def __post_init__(self):
        c = tuple(float(x) for x in self.weights)
        if len(c) != 7 or any(x < 0 for x in c):
            raise ValueError("weights must be seven nonnegative numbers")
        if c[0] != c[1]:
            raise ValueError("infidelity weights c1 and c2 must be equal")
        if any(x < 10 * c[0] for x in c[2:]):
            raise ValueError("constraint weights c3..c7 must be at least 10 c1")
        if not (self.T > 0 and self.t_ramp > 0):
            raise ValueError("T and t_ramp must be positive")
        if self.schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if len(self.channels) > 2:
            raise ValueError("the cost has two infidelity terms; pass at most two channels")
        object.__setattr__(self, "weights", c)
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def grid(self):
        return TimeGrid(self.T, self.n_points)

    def with_points(self, n):
        return replace(self, n_points=int(n))


def case_channels(case: str, amplitude: float = 1.0):
    """Noise channels of the two benchmark cases at PSD amplitude ``amplitude``.

    The additive detuning channel carries gain 2 relative to the amplitude
    channel in both cases.
    """
    w0, wc = 1e-9, 1e-1
    if case == "A":
        return (NoiseChannel("detuning", BandOneOverF(amplitude, w0, wc), ADDITIVE_DETUNING, 2.0),
                NoiseChannel("amplitude", BandOneOverF(amplitude, w0, wc), MULTIPLICATIVE_AMPLITUDE))
    if case == "B":
        return (NoiseChannel("detuning", DeltaPSD(10.0 * amplitude), ADDITIVE_DETUNING, 2.0),
                NoiseChannel("amplitude", OneOverFWithTail(amplitude, w0, wc),
                             MULTIPLICATIVE_AMPLITUDE))
    raise ValueError(f"unknown case {case!r}; expected 'A' or 'B'")


def naive_reference(n_points=1024, theta=np.pi / 2):
    """Trajectory of the square ``X_theta`` pulse used for calibration."""
    return forward_solve(naive_pulse(theta, n_points), 0.5 * np.pi + 0.3, 0.2)


def calibrated_amplitude(case: str, target: float = 0.1, n_points: int = 1024):
    return calibrate_amplitude(naive_reference(n_points), case_channels(case), target)


PRESET_TIMES = {"A": 16 * np.pi, "B": 5 * np.pi}
PRESET_WEIGHTS = (10.0, 10.0, 100.0, 100.0, 100.0, 100.0, 100.0)

# restarts, schedule length, screening length and finalists per case
SYNTH_DEFAULTS = {
    "A": {"restarts": 10, "iters": 150_000, "screen": 15_000, "keep": 3},
    "B": {"restarts": 10, "iters": 50_000, "screen": 5_000, "keep": 3},
}


def preset(case: str) -> CostConfig:
    """Benchmark configuration with the amplitude calibrated on the naive pulse."""
    if case not in PRESET_TIMES:
        raise ValueError(f"unknown case {case!r}; expected 'A' or 'B'")
    amp = calibrated_amplitude(case)
    return CostConfig(T=PRESET_TIMES[case], t_ramp=0.5, channels=case_channels(case, amp),
                      weights=PRESET_WEIGHTS, amplitude=amp, time_scale=10.0,
                      learning_rate=1e-2, schedule="cosine", name=case)


# ---------------------------------------------------------------------------
# cost

_INTEGRANDS = {
    ADDITIVE_DETUNING.name: "detuning",
    MULTIPLICATIVE_AMPLITUDE.name: "amplitude",
    MULTIPLICATIVE_DETUNING.name: "zero",
}


def _channel_matrix(ch: NoiseChannel, grid: TimeGrid):
    if isinstance(ch.psd, DeltaPSD):
        w = grid.weights
        mat = ch.psd.weight / (2 * np.pi) * np.outer(w, w)
    else:
        mat = np.array(kernel_matrix(ch.psd, grid.T, grid.N))
    return ch.gain ** 2 * mat


def _deriv(y, dt):
    # same stencil as invariants.derivative: central inside, second-order ends
    mid = (y[2:] - y[:-2]) / (2 * dt)
    first = (-3 * y[0] + 4 * y[1] - y[2]) / (2 * dt)
    last = (3 * y[-1] - 4 * y[-2] + y[-3]) / (2 * dt)
    return jnp.concatenate([first[None], mid, last[None]])


class _CostModel:
    """Compiled cost pieces for one configuration and grid size."""

    def __init__(self, cfg: CostConfig, n_points: int | None = None):
        grid = TimeGrid(cfg.T, n_points or cfg.n_points)
        self.cfg, self.grid = cfg, grid
        self.dt = grid.dt
        self.x = jnp.asarray(cfg.time_scale * (2 * grid.times / cfg.T - 1))
        # the drive constraints are scored on the evaluation grid, so the
        # trained pulse cannot hide amplitude peaks between coarse samples
        fine = TimeGrid(cfg.T, cfg.eval_points)
        self.dt_fine = fine.dt
        self.x_fine = jnp.asarray(cfg.time_scale * (2 * fine.times / cfg.T - 1))
        # when the grids nest, one network pass serves both
        step, rem = divmod(fine.N - 1, grid.N - 1)
        self.nest = step if rem == 0 else 0
        kinds, mats = [], []
        for ch in cfg.channels:
            kind = _INTEGRANDS.get(ch.sensitivity.name)
            if kind is None:
                raise ValueError(f"no closed-form integrand for {ch.sensitivity.name}")
            kinds.append(kind)
            mats.append(jnp.asarray(_channel_matrix(ch, grid)))
        while len(kinds) < 2:
            kinds.append("zero")
            mats.append(jnp.zeros((grid.N, grid.N)))
        self.kinds, self.mats = tuple(kinds), tuple(mats)
        self.c = jnp.asarray(cfg.weights)
        self.terms = jax.jit(self._terms)
        self.value_and_grad = jax.jit(jax.value_and_grad(self._cost))

    def _d(self, y):
        return _deriv(y, self.dt)

    def _integrand(self, kind, g, z, gd, zd):
        sg, cg, sz, cz = jnp.sin(g), jnp.cos(g), jnp.sin(z), jnp.cos(z)
        if kind == "detuning":
            return 0.5 * jnp.stack([cg, sg * cz, sg * sz])
        if kind == "amplitude":
            return 0.5 * jnp.stack([zd * sg * sg, zd * sg * cg * cz + gd * sz,
                                    zd * sg * cg * sz - gd * cz])
        return jnp.zeros((3, g.shape[0]))

    def _terms(self, flat):
        cfg = self.cfg
        gf, zf = _forward(flat, self.x_fine)
        if self.nest:
            g, z = gf[::self.nest], zf[::self.nest]
        else:
            g, z = _forward(flat, self.x)
        gd, zd = self._d(g), self._d(z)
        sg, cg = jnp.sin(g), jnp.cos(g)
        infid = []
        for kind, mat in zip(self.kinds, self.mats):
            v = self._integrand(kind, g, z, gd, zd)
            infid.append(jnp.sum(v * (mat @ v.T).T))
        theta = jnp.abs(jnp.cos(z[0] - z[-1]) * sg[-1] * sg[0] + cg[-1] * cg[0])
        gfd = _deriv(gf, self.dt_fine)
        zfd = _deriv(zf, self.dt_fine)
        # guard the square root so its derivative stays finite at Omega = 0
        om = jnp.sqrt(jnp.maximum(gfd * gfd + (zfd * jnp.sin(gf)) ** 2, 1e-300))
        cap = jnp.mean(jnp.maximum(0.0, om / cfg.omega_max - 1.0))
        slew = jnp.mean(jnp.maximum(
            0.0, jnp.abs(_deriv(om, self.dt_fine)) * cfg.t_ramp / cfg.omega_max - 1.0))
        return jnp.stack([infid[0], infid[1], theta, om[0] / cfg.omega_max,
                          om[-1] / cfg.omega_max, cap, slew])

    def _cost(self, flat):
        return jnp.dot(self.c, self._terms(flat))


_MODELS = {}


def _model(cfg: CostConfig, n_points=None) -> _CostModel:
    key = (id(cfg), n_points or cfg.n_points)
    hit = _MODELS.get(key)
    if hit is None or hit[0] is not cfg:
        hit = (cfg, _CostModel(cfg, n_points))
        _MODELS[key] = hit
    return hit[1]


def cost_terms(net: Mlp, cfg: CostConfig, n_points=None) -> np.ndarray:
    """The seven unweighted cost terms."""
    return np.asarray(_model(cfg, n_points).terms(jnp.asarray(net.params)))


def cost(net: Mlp, cfg: CostConfig) -> float:
    return float(np.dot(cfg.weights, cost_terms(net, cfg)))


def gradient(net: Mlp, cfg: CostConfig) -> np.ndarray:
    """Reverse-mode gradient of the discretized cost; shape ``(1186,)``."""
    _, g = _model(cfg).value_and_grad(jnp.asarray(net.params))
    g = np.asarray(g)
    if not np.all(np.isfinite(g)):
        bad = np.flatnonzero(~np.isfinite(g))
        raise NonFiniteGradientError(
            f"{bad.size} non-finite gradient entries (first at index {bad[0]})")
    return g


# ---------------------------------------------------------------------------
# training

@dataclass(frozen=True, eq=False)
class TrainResult:
    params: Mlp
    history: np.ndarray
    trajectory: object
    pulse: object
    report: dict
    seed: int
    feasible: bool
    steps: int = 0
    elapsed: float = 0.0

    @property
    def total_infidelity(self):
        return self.report["infidelity"]["total"]


def _adam_chunk(model: _CostModel, length: int):
    b1, b2, eps = 0.9, 0.999, 1e-8

    def body(carry, lr):
        p, m, v, k, best_c, best_p = carry
        c, g = jax.value_and_grad(model._cost)(p)
        better = c < best_c
        best_c = jnp.where(better, c, best_c)
        best_p = jnp.where(better, p, best_p)
        k = k + 1
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1 ** k)
        vh = v / (1 - b2 ** k)
        p = p - lr * mh / (jnp.sqrt(vh) + eps)
        ok = jnp.all(jnp.isfinite(g))
        return (p, m, v, k, best_c, best_p), (c, ok)

    @jax.jit
    def run(carry, lrs):
        return jax.lax.scan(body, carry, lrs)

    return run


def _learning_rates(cfg, budget):
    k = np.arange(1, budget + 1)
    if cfg.schedule == "cosine":
        return cfg.learning_rate * 0.5 * (1 + np.cos(np.pi * k / budget)) + 1e-6
    return np.full(budget, cfg.learning_rate)


class _Run:
    """Resumable Adam run for one seed."""

    CHUNK = 1000

    def __init__(self, cfg, seed, budget):
        self.cfg, self.seed, self.budget = cfg, seed, int(budget)
        self.model = _model(cfg)
        p = jnp.asarray(Mlp.init(seed).params)
        z = jnp.zeros_like(p)
        self.carry = (p, z, z, jnp.asarray(0.0), jnp.asarray(jnp.inf), p)
        self.lrs = _learning_rates(cfg, self.budget)
        self.done = 0
        self.history = []
        self.elapsed = 0.0

    def advance(self, until):
        until = min(int(until), self.budget)
        t0 = time.perf_counter()
        while self.done < until:
            n = min(self.CHUNK, until - self.done)
            fn = _chunk_fn(self.model, n)
            self.carry, (cs, ok) = fn(self.carry, jnp.asarray(self.lrs[self.done:self.done + n]))
            if not bool(jnp.all(ok)):
                raise NonFiniteGradientError(
                    f"seed {self.seed}: non-finite gradient between steps {self.done} and "
                    f"{self.done + n}; last finite cost {float(self.carry[4]):.3e}")
            self.done += n
            self.history.append(float(self.carry[4]))
        self.elapsed += time.perf_counter() - t0
        return self

    @property
    def best_cost(self):
        return float(self.carry[4])

    def best_params(self):
        # the final iterate has not been scored yet; score it once
        p_last = self.carry[0]
        c_last = float(self.model._cost(p_last))
        if c_last < self.best_cost:
            return np.asarray(p_last), c_last
        return np.asarray(self.carry[5]), self.best_cost


_CHUNKS = {}


def _chunk_fn(model, n):
    key = (id(model), n)
    fn = _CHUNKS.get(key)
    if fn is None or fn[0] is not model:
        fn = (model, _adam_chunk(model, n))
        _CHUNKS[key] = fn
    return fn[1]


def trajectory_from_network(net: Mlp, cfg: CostConfig, n_points=None):
    """Evaluate the network on a grid and complete it into a trajectory."""
    grid = TimeGrid(cfg.T, n_points or cfg.eval_points)
    x = cfg.time_scale * (2 * grid.times / cfg.T - 1)
    g, z = mlp_forward(net, x)
    return zero_detuning_trajectory(grid, g, z)


def evaluate_network(net: Mlp, cfg: CostConfig, n_points=None) -> dict:
    """Report on the trajectory a network describes, at ``eval_points``."""
    n_eval = n_points or cfg.eval_points
    traj = trajectory_from_network(net, cfg, n_eval)
    terms = cost_terms(net, cfg, n_eval)
    train_terms = cost_terms(net, cfg)
    rep = infidelity(traj, cfg.channels, warn=False)
    gate = gate_from_invariants(traj)
    dec = zxz_decompose(gate)
    fd, fo = static_filter_values(traj)
    with np.errstate(all="ignore"):
        pulse = reverse_engineer_quiet(traj)
    constraints = {name: float(val) for name, val in zip(TERM_NAMES[2:], terms[2:])}
    return {
        "infidelity": {"total": rep.total, **rep.contributions},
        "xi2": rep.xi2,
        "terms": {n: float(v) for n, v in zip(TERM_NAMES, terms)},
        "train_terms": {n: float(v) for n, v in zip(TERM_NAMES, train_terms)},
        "cost": float(np.dot(cfg.weights, terms)),
        "cost_drift": float(np.dot(cfg.weights, terms) - np.dot(cfg.weights, train_terms)),
        "constraints": constraints,
        "feasible": all(v <= CONSTRAINT_TOL for v in constraints.values()),
        "zxz": {"theta": dec.theta, "psi1": dec.psi1, "psi2": dec.psi2},
        "cos_theta": cos_theta_from_endpoints(traj),
        "F_detuning_0": fd,
        "F_amplitude_0": fo,
        "max_abs_delta": float(np.max(np.abs(pulse.delta))),
        "max_omega": float(np.max(pulse.omega)),
    }, traj, pulse


def reverse_engineer_quiet(traj):
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return reverse_engineer(traj)


def lbfgs_polish(params, cfg: CostConfig, max_iter: int = 200):
    """L-BFGS refinement of Adam's best iterate; returns ``(params, cost)``.

    The penalties are not smooth at their thresholds, so the line search
    can stop early; the input is returned when nothing improves.
    """
    from scipy.optimize import minimize

    model = _model(cfg)
    p0 = np.asarray(params, dtype=float)
    c0 = float(model._cost(jnp.asarray(p0)))

    def fun(x):
        c, g = model.value_and_grad(jnp.asarray(x))
        return float(c), np.asarray(g, dtype=float)

    res = minimize(fun, p0, jac=True, method="L-BFGS-B", options={"maxiter": max_iter})
    if np.isfinite(res.fun) and res.fun < c0:
        return np.asarray(res.x), float(res.fun)
    return p0, c0


def _finish(run: _Run, polish: bool = False) -> TrainResult:
    params, _ = run.best_params()
    if polish:
        params, _ = lbfgs_polish(params, run.cfg)
    net = Mlp(params)
    report, traj, pulse = evaluate_network(net, run.cfg)
    return TrainResult(net, np.asarray(run.history), traj, pulse, report, run.seed,
                       report["feasible"], run.done, run.elapsed)


def train(cfg: CostConfig, seed: int, budget: int, polish: bool = False) -> TrainResult:
    """Adam on the full cost for ``budget`` iterations, keeping the best iterate.

    The returned parameters are the lowest-cost iterate seen.  The run is
    marked infeasible when any constraint term exceeds ``1e-4`` at the
    evaluation grid.  ``polish`` adds an L-BFGS pass after Adam.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    return _finish(_Run(cfg, seed, budget).advance(budget), polish)


def train_restarts(cfg: CostConfig, seeds, budget: int, keep: int | None = None,
                   screen: int | None = None, threads=None, log=None, polish=False):
    """Independent restarts with optional successive halving.

    Every seed runs ``screen`` iterations of its own ``budget``-long
    schedule; the ``keep`` runs with the lowest cost then finish the
    schedule.  With ``keep`` unset every run finishes.  Results are sorted
    by total infidelity, feasible runs first.
    """
    seeds = list(seeds)
    keep = len(seeds) if keep is None else max(1, min(keep, len(seeds)))
    screen = budget if screen is None else min(int(screen), budget)
    runs = [_Run(cfg, s, budget) for s in seeds]
    workers = resolve_threads(threads)

    def stage(rs, until):
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                list(pool.map(lambda r: r.advance(until), rs))
        else:
            for r in rs:
                r.advance(until)
                if log:
                    log(f"seed {r.seed}: {r.done} steps, best cost {r.best_cost:.4e}")

    stage(runs, screen)
    finalists = sorted(runs, key=lambda r: r.best_cost)[:keep]
    if screen < budget:
        stage(finalists, budget)
    results = [_finish(r, polish and r in finalists) for r in runs]
    return sorted(results, key=lambda r: (not r.feasible, r.total_infidelity))


def require_feasible(result: TrainResult):
    if not result.feasible:
        bad = {k: v for k, v in result.report["constraints"].items() if v > CONSTRAINT_TOL}
        raise ConstraintError(f"constraints above {CONSTRAINT_TOL:g}: {bad}")
    return result
