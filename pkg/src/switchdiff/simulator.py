"""Path simulation: Euler-Maruyama interleaved with thinned regime switching.

Each path owns three named substreams derived from (seed, path_index):
diffusion noise and per-step acceptance uniforms are bulk pre-drawn, while
jump-target selection, guard sub-division, and exponential proposal clocks
draw lazily from the event stream.  Trajectories are therefore bit-identical
for a fixed (seed, path_index, config) regardless of thread count or
scheduling, and ensemble aggregation writes into per-path slots so the
reduction order cannot matter either.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, GuardError
from .model import ModelSpec, RateKernel
from .rates import G_inverse, RateProfile

SCHEMES = ("per_step_thinning", "exponential_proposals")
THINNING_GUARD = 0.1  # largest admissible q_i(x) * dt without sub-division
SUBDIVISION_TARGET = 0.05  # sub-step jump probability aimed for when splitting
BLOWUP_RADIUS = 1e12
WILSON_Z = 1.959963984540054  # 95%

THREADS_ENV = "SWITCHDIFF_THREADS"


@dataclass
class SimConfig:
    """Discretization and stream identity for one path (or an ensemble base)."""

    dt: float
    horizon: float
    seed: int = 0
    path_index: int = 0
    switch_scheme: str = "per_step_thinning"
    stop_radius: Optional[float] = None
    record_stride: int = 1

    def __post_init__(self) -> None:
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not (self.horizon >= self.dt):
            raise ConfigurationError(
                f"horizon {self.horizon} must be at least one step dt = {self.dt}"
            )
        if self.switch_scheme not in SCHEMES:
            raise ConfigurationError(f"unknown switch scheme {self.switch_scheme!r}")
        if self.stop_radius is not None and not self.stop_radius > 0:
            raise ConfigurationError("stop_radius must be positive when set")
        if self.record_stride < 1 or self.record_stride != int(self.record_stride):
            raise ConfigurationError("record_stride must be a positive integer")
        if self.seed < 0 or self.path_index < 0:
            raise ConfigurationError("seed and path_index must be nonnegative")


@dataclass
class Trajectory:
    """Recorded path on the grid; the jump log is complete regardless of
    record_stride.  tau_h is the first grid time with |X| >= stop_radius."""

    times: np.ndarray
    x_path: np.ndarray
    regime_path: np.ndarray
    jumps: list = field(default_factory=list)  # (time, from, to)
    tau_h: Optional[float] = None
    exited: bool = False
    blew_up: bool = False


@dataclass
class CoupledTrajectory:
    """Pair (X, alpha, alpha_hat) under the basic coupling; alpha drives X,
    alpha_hat runs on the frozen-at-zero kernel."""

    times: np.ndarray
    x_path: np.ndarray
    alpha_path: np.ndarray
    alpha_hat_path: np.ndarray
    jumps_alpha: list = field(default_factory=list)
    jumps_alpha_hat: list = field(default_factory=list)
    vartheta: Optional[float] = None
    tau_h: Optional[float] = None
    exited: bool = False
    blew_up: bool = False

    @property
    def decoupled(self) -> bool:
        return self.vartheta is not None


def path_streams(seed: int, path_index: int):
    """Named per-path substreams: (noise, accept, event)."""
    root = np.random.SeedSequence(entropy=(int(seed), int(path_index)))
    children = root.spawn(3)
    return tuple(np.random.default_rng(c) for c in children)


def step(spec: ModelSpec, state, dt: float, noise) -> tuple:
    """Diffusion sub-step of the splitting: Euler-Maruyama with frozen regime.

    noise must already carry the sqrt(dt) scale (i.e. be N(0, dt I)).
    Returns (x', i) with the regime untouched; callers detect blow-up by
    checking finiteness of x'.
    """
    x, i = state
    x = np.atleast_1d(np.asarray(x, dtype=float))
    noise = np.atleast_1d(np.asarray(noise, dtype=float))
    if noise.shape != (spec.noise_dim,):
        raise ConfigurationError(
            f"noise has shape {noise.shape}, want ({spec.noise_dim},)"
        )
    x_new = x + spec.drift_at(x, i) * dt + spec.diffusion_at(x, i) @ noise
    return x_new, i


def _select_target(row, mass: float) -> int:
    """Locate mass in the consecutive rate intervals of the row (ascending j)."""
    acc = 0.0
    for j, r in row:
        acc += r
        if mass < acc:
            return j
    return row[-1][0]


def switch_step(
    kernel: RateKernel, x, i: int, dt: float, u_accept: float, u_select: float
) -> int:
    """One thinned switching decision; guard q_i(x) dt <= 0.1 or GuardError."""
    row = kernel.row(x, i)
    qi = 0.0
    for _, r in row:
        qi += r
    p = qi * dt
    if p > THINNING_GUARD:
        raise GuardError(
            f"q_i(x) dt = {p:.3f} exceeds {THINNING_GUARD}; sub-divide the step"
        )
    if u_accept < p:
        return _select_target(row, u_select * qi)
    return i


def _row_and_total(kernel: RateKernel, x, i: int):
    row = kernel.row(x, i)
    qi = 0.0
    for _, r in row:
        qi += r
    return row, qi


def simulate(spec: ModelSpec, config: SimConfig, x0, i0: int) -> Trajectory:
    """Integrate one path from (x0, i0) to the horizon (or tau_h / blow-up).

    Per step: Euler-Maruyama update of X with the current regime, then the
    switching decision with rates evaluated at the pre-step state.  Steps
    whose total rate violates the thinning guard are sub-divided.
    """
    if i0 < 1 or i0 != int(i0):
        raise ConfigurationError(f"initial regime must be a positive integer, got {i0}")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (spec.dim,):
        raise ConfigurationError(f"x0 has shape {x0.shape}, want ({spec.dim},)")
    n_steps = int(round(config.horizon / config.dt))
    if n_steps < 1:
        raise ConfigurationError("horizon shorter than one step")
    rng_noise, rng_accept, rng_event = path_streams(config.seed, config.path_index)
    noise = rng_noise.standard_normal((n_steps, spec.noise_dim))
    accept = rng_accept.random(n_steps)

    if config.switch_scheme == "exponential_proposals":
        if spec.rate_kernel.global_bound is None:
            raise ConfigurationError(
                "exponential_proposals needs kernel.global_bound; none declared"
            )

    scalar = (
        spec.dim == 1
        and spec.noise_dim == 1
        and spec.scalar_drift is not None
        and spec.scalar_diffusion is not None
    )
    if scalar:
        return _simulate_scalar(spec, config, float(x0[0]), int(i0), noise, accept, rng_event, n_steps)
    return _simulate_vector(spec, config, x0, int(i0), noise, accept, rng_event, n_steps)


def _simulate_scalar(spec, config, x0, i0, noise, accept, rng_event, n_steps):
    dt = config.dt
    sq = math.sqrt(dt)
    drift = spec.scalar_drift
    diffusion = spec.scalar_diffusion
    kernel = spec.rate_kernel
    cache = kernel.x_independent
    rows: dict = {}
    stride = config.record_stride
    h = config.stop_radius
    thinning = config.switch_scheme == "per_step_thinning"
    M = kernel.global_bound
    event = rng_event.random
    expo = rng_event.exponential

    m_rec = n_steps // stride + 2
    rec_t = np.empty(m_rec)
    rec_x = np.empty(m_rec)
    rec_i = np.empty(m_rec, dtype=np.int64)
    jumps: list = []

    x = x0
    i = i0
    rec_t[0] = 0.0
    rec_x[0] = x
    rec_i[0] = i
    ri = 0
    tau_h = None
    exited = False
    blew = False

    if h is not None and abs(x) >= h:
        tau_h, exited = 0.0, True
        n_steps = 0

    if thinning:
        def lookup(xx, ii):
            if cache:
                cached = rows.get(ii)
                if cached is None:
                    cached = _row_and_total(kernel, xx, ii)
                    rows[ii] = cached
                return cached
            return _row_and_total(kernel, xx, ii)
    else:
        next_prop = expo(1.0 / M) if n_steps else math.inf

    nv = noise[:, 0]
    for k in range(n_steps):
        ox = x
        x = ox + drift(ox, i) * dt + diffusion(ox, i) * (sq * nv[k])
        t = (k + 1) * dt
        if not (-BLOWUP_RADIUS < x < BLOWUP_RADIUS):
            blew = True
            ri += 1
            rec_t[ri], rec_x[ri], rec_i[ri] = t, x, i
            break

        if thinning:
            row, qi = lookup(ox, i)
            p = qi * dt
            if p > THINNING_GUARD:
                m = int(math.ceil(p / SUBDIVISION_TARGET))
                sub = dt / m
                base = t - dt
                for s in range(m):
                    if event() < qi * sub:
                        j = _select_target(row, event() * qi)
                        jumps.append((base + (s + 1) * sub, i, j))
                        i = j
                        row, qi = lookup(ox, i)
            elif accept[k] < p:
                j = _select_target(row, event() * qi)
                jumps.append((t, i, j))
                i = j
        else:
            while next_prop <= t:
                row, qi = _row_and_total(kernel, ox, i)
                if qi > M * (1 + 1e-12):
                    raise GuardError(f"total rate {qi} exceeds global bound {M}")
                if qi > 0.0 and event() < qi / M:
                    j = _select_target(row, event() * qi)
                    jumps.append((next_prop, i, j))
                    i = j
                next_prop += expo(1.0 / M)

        if h is not None and abs(x) >= h:
            tau_h, exited = t, True
            ri += 1
            rec_t[ri], rec_x[ri], rec_i[ri] = t, x, i
            break
        if (k + 1) % stride == 0 or k == n_steps - 1:
            ri += 1
            rec_t[ri], rec_x[ri], rec_i[ri] = t, x, i

    m = ri + 1
    return Trajectory(
        times=rec_t[:m].copy(),
        x_path=rec_x[:m].copy().reshape(m, 1),
        regime_path=rec_i[:m].copy(),
        jumps=jumps,
        tau_h=tau_h,
        exited=exited,
        blew_up=blew,
    )


def _simulate_vector(spec, config, x0, i0, noise, accept, rng_event, n_steps):
    dt = config.dt
    sq = math.sqrt(dt)
    kernel = spec.rate_kernel
    cache = kernel.x_independent
    rows: dict = {}
    stride = config.record_stride
    h = config.stop_radius
    thinning = config.switch_scheme == "per_step_thinning"
    M = kernel.global_bound
    event = rng_event.random
    expo = rng_event.exponential
    n = spec.dim

    # validated first evaluation catches shape bugs early
    spec.drift_at(x0, i0)
    spec.diffusion_at(x0, i0)
    drift = spec.drift
    diffusion = spec.diffusion

    m_rec = n_steps // stride + 2
    rec_t = np.empty(m_rec)
    rec_x = np.empty((m_rec, n))
    rec_i = np.empty(m_rec, dtype=np.int64)
    jumps: list = []

    x = x0.astype(float).copy()
    i = i0
    rec_t[0] = 0.0
    rec_x[0] = x
    rec_i[0] = i
    ri = 0
    tau_h = None
    exited = False
    blew = False

    if h is not None and float(np.linalg.norm(x)) >= h:
        tau_h, exited = 0.0, True
        n_steps = 0

    if not thinning:
        next_prop = expo(1.0 / M) if n_steps else math.inf

    for k in range(n_steps):
        ox = x
        x = ox + np.asarray(drift(ox, i), dtype=float) * dt + np.asarray(
            diffusion(ox, i), dtype=float
        ) @ (sq * noise[k])
        t = (k + 1) * dt
        r = float(np.linalg.norm(x))
        if not (r < BLOWUP_RADIUS):
            blew = True
            ri += 1
            rec_t[ri], rec_x[ri], rec_i[ri] = t, x, i
            break

        if thinning:
            if cache:
                cached = rows.get(i)
                if cached is None:
                    cached = _row_and_total(kernel, ox, i)
                    rows[i] = cached
                row, qi = cached
            else:
                row, qi = _row_and_total(kernel, ox, i)
            p = qi * dt
            if p > THINNING_GUARD:
                m = int(math.ceil(p / SUBDIVISION_TARGET))
                sub = dt / m
                base = t - dt
                for s in range(m):
                    if event() < qi * sub:
                        j = _select_target(row, event() * qi)
                        jumps.append((base + (s + 1) * sub, i, j))
                        i = j
                        if cache and i in rows:
                            row, qi = rows[i]
                        else:
                            row, qi = _row_and_total(kernel, ox, i)
                            if cache:
                                rows[i] = (row, qi)
            elif accept[k] < p:
                j = _select_target(row, event() * qi)
                jumps.append((t, i, j))
                i = j
        else:
            while next_prop <= t:
                row, qi = _row_and_total(kernel, ox, i)
                if qi > M * (1 + 1e-12):
                    raise GuardError(f"total rate {qi} exceeds global bound {M}")
                if qi > 0.0 and event() < qi / M:
                    j = _select_target(row, event() * qi)
                    jumps.append((next_prop, i, j))
                    i = j
                next_prop += expo(1.0 / M)

        if h is not None and r >= h:
            tau_h, exited = t, True
            ri += 1
            rec_t[ri], rec_x[ri], rec_i[ri] = t, x, i
            break
        if (k + 1) % stride == 0 or k == n_steps - 1:
            ri += 1
            rec_t[ri], rec_x[ri], rec_i[ri] = t, x, i

    m = ri + 1
    return Trajectory(
        times=rec_t[:m].copy(),
        x_path=rec_x[:m].copy(),
        regime_path=rec_i[:m].copy(),
        jumps=jumps,
        tau_h=tau_h,
        exited=exited,
        blew_up=blew,
    )


def simulate_coupled(spec: ModelSpec, config: SimConfig, x0, i0: int) -> CoupledTrajectory:
    """Basic coupling of (alpha, alpha_hat): alpha drives X with rates
    q(X(t)), alpha_hat runs on the frozen kernel q(0); matched moves fire
    jointly at rate min(q_kj(x), q_lj(0)), discrepancy moves at the positive
    parts.  vartheta is the first time the regimes differ.  Switching uses
    per-step thinning regardless of config.switch_scheme.
    """
    if i0 < 1:
        raise ConfigurationError(f"initial regime must be positive, got {i0}")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (spec.dim,):
        raise ConfigurationError(f"x0 has shape {x0.shape}, want ({spec.dim},)")
    n_steps = int(round(config.horizon / config.dt))
    rng_noise, rng_accept, rng_event = path_streams(config.seed, config.path_index)
    noise = rng_noise.standard_normal((n_steps, spec.noise_dim))
    accept = rng_accept.random(n_steps)
    event = rng_event.random
    kernel = spec.rate_kernel
    dt = config.dt
    sq = math.sqrt(dt)
    h = config.stop_radius
    stride = config.record_stride
    zero = np.zeros(spec.dim)
    frozen_rows: dict = {}

    def frozen(l: int):
        cached = frozen_rows.get(l)
        if cached is None:
            cached = dict(kernel.row(zero, l))
            frozen_rows[l] = cached
        return cached

    spec.drift_at(x0, i0)
    spec.diffusion_at(x0, i0)
    drift = spec.drift
    diffusion = spec.diffusion

    m_rec = n_steps // stride + 2
    rec_t = np.empty(m_rec)
    rec_x = np.empty((m_rec, spec.dim))
    rec_a = np.empty(m_rec, dtype=np.int64)
    rec_b = np.empty(m_rec, dtype=np.int64)
    jumps_a: list = []
    jumps_b: list = []

    x = x0.astype(float).copy()
    a = i0  # alpha, drives X
    b = i0  # alpha_hat, frozen kernel
    rec_t[0], rec_x[0], rec_a[0], rec_b[0] = 0.0, x, a, b
    ri = 0
    vartheta = None
    tau_h = None
    exited = False
    blew = False

    if h is not None and float(np.linalg.norm(x)) >= h:
        tau_h, exited = 0.0, True
        n_steps = 0

    for k in range(n_steps):
        ox = x
        x = ox + np.asarray(drift(ox, a), dtype=float) * dt + np.asarray(
            diffusion(ox, a), dtype=float
        ) @ (sq * noise[k])
        t = (k + 1) * dt
        r = float(np.linalg.norm(x))
        if not (r < BLOWUP_RADIUS):
            blew = True
            ri += 1
            rec_t[ri], rec_x[ri], rec_a[ri], rec_b[ri] = t, x, a, b
            break

        rates_a = dict(kernel.row(ox, a))
        rates_b = frozen(b)
        targets = sorted(set(rates_a) | set(rates_b))
        qtot = 0.0
        events = []  # (rate, kind, j) with kind 0 joint, 1 alpha, 2 alpha_hat
        for j in targets:
            ra = rates_a.get(j, 0.0) if j != a else 0.0
            rb = rates_b.get(j, 0.0) if j != b else 0.0
            m = ra if ra < rb else rb
            if m > 0.0:
                events.append((m, 0, j))
            if ra - m > 0.0:
                events.append((ra - m, 1, j))
            if rb - m > 0.0:
                events.append((rb - m, 2, j))
            qtot += ra if ra > rb else rb

        def fire(jump_t: float, u: float) -> None:
            nonlocal a, b, vartheta
            mass = u * qtot
            acc = 0.0
            kind, j = 1, a
            for rate, kd, tj in events:
                acc += rate
                if mass < acc:
                    kind, j = kd, tj
                    break
            if kind == 0:
                jumps_a.append((jump_t, a, j))
                jumps_b.append((jump_t, b, j))
                a = j
                b = j
            elif kind == 1:
                jumps_a.append((jump_t, a, j))
                a = j
            else:
                jumps_b.append((jump_t, b, j))
                b = j
            if vartheta is None and a != b:
                vartheta = jump_t

        p = qtot * dt
        if p > THINNING_GUARD:
            msub = int(math.ceil(p / SUBDIVISION_TARGET))
            sub = dt / msub
            base = t - dt
            for s in range(msub):
                if event() < qtot * sub:
                    fire(base + (s + 1) * sub, event())
                    break  # rates changed; next grid step rebuilds the table
        elif accept[k] < p:
            fire(t, event())

        if h is not None and r >= h:
            tau_h, exited = t, True
            ri += 1
            rec_t[ri], rec_x[ri], rec_a[ri], rec_b[ri] = t, x, a, b
            break
        if (k + 1) % stride == 0 or k == n_steps - 1:
            ri += 1
            rec_t[ri], rec_x[ri], rec_a[ri], rec_b[ri] = t, x, a, b

    m = ri + 1
    return CoupledTrajectory(
        times=rec_t[:m].copy(),
        x_path=rec_x[:m].copy(),
        alpha_path=rec_a[:m].copy(),
        alpha_hat_path=rec_b[:m].copy(),
        jumps_alpha=jumps_a,
        jumps_alpha_hat=jumps_b,
        vartheta=vartheta,
        tau_h=tau_h,
        exited=exited,
        blew_up=blew,
    )


# ---------------------------------------------------------------------------
# Path functionals and the ensemble runner


def occupation_fraction(traj: Trajectory, regime: int) -> float:
    """Exact Lebesgue fraction of time spent in the regime, from the jump log."""
    t_end = float(traj.times[-1])
    if t_end == 0.0:
        return 1.0 if int(traj.regime_path[0]) == regime else 0.0
    acc = 0.0
    cur = int(traj.regime_path[0])
    prev = 0.0
    for tj, _, to in traj.jumps:
        if tj > t_end:
            break
        if cur == regime:
            acc += tj - prev
        prev = tj
        cur = to
    if cur == regime:
        acc += t_end - prev
    return acc / t_end


class StayInBall:
    """Indicator that the recorded path never left the ball of radius h."""

    kind = "binary"

    def __init__(self, h: float) -> None:
        self.h = h
        self.name = f"stay_in_ball(h={h:g})"

    def evaluate(self, traj: Trajectory) -> float:
        if traj.blew_up or traj.exited:
            return 0.0
        sup = float(np.max(np.linalg.norm(traj.x_path, axis=1)))
        return 1.0 if sup < self.h else 0.0


class ConvergesToZero:
    """Indicator of |X(T)| < tol with the path confined to the ball up to T."""

    kind = "binary"

    def __init__(self, tol: float, T: Optional[float] = None) -> None:
        self.tol = tol
        self.T = T
        self.name = f"converges_to_zero(tol={tol:g})"

    def evaluate(self, traj: Trajectory) -> float:
        if traj.blew_up or traj.exited:
            return 0.0
        times = traj.times
        idx = times.size - 1 if self.T is None else int(np.searchsorted(times, self.T, "right")) - 1
        if idx < 0:
            return 0.0
        return 1.0 if float(np.linalg.norm(traj.x_path[idx])) < self.tol else 0.0


class SupRatio:
    """Indicator that sup_{t in [T0, T]} V(X(t)) / G_inverse(-lam t) <= 1."""

    kind = "binary"

    def __init__(self, V: Callable, profile: RateProfile, lam: float, T0: float) -> None:
        self.V = V
        self.profile = profile
        self.lam = lam
        self.T0 = T0
        self.name = f"sup_ratio(lambda={lam:g})"

    def evaluate(self, traj: Trajectory) -> float:
        if traj.blew_up or traj.exited:
            return 0.0
        mask = traj.times >= self.T0
        if not np.any(mask):
            return 0.0
        vs = np.array([float(self.V(xx)) for xx in traj.x_path[mask]])
        env = np.atleast_1d(
            np.asarray(G_inverse(self.profile, -self.lam * traj.times[mask]), dtype=float)
        )
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(vs == 0.0, 0.0, vs / env)
        ratios = np.where((env == 0.0) & (vs > 0.0), np.inf, ratios)
        return 1.0 if float(np.max(ratios)) <= 1.0 + 1e-12 else 0.0


class Occupation:
    """Time fraction spent in one regime (a [0,1]-valued average)."""

    kind = "fraction"

    def __init__(self, regime: int) -> None:
        self.regime = regime
        self.name = f"occupation(i={regime})"

    def evaluate(self, traj: Trajectory) -> float:
        return occupation_fraction(traj, self.regime)


def wilson_interval(successes: int, n: int, z: float = WILSON_Z):
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        return 0.0, 1.0
    p = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class FunctionalEstimate:
    name: str
    kind: str
    estimate: float
    ci_low: float
    ci_high: float

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "estimate": self.estimate,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
        }


@dataclass
class EnsembleSummary:
    n_paths: int
    n_blowups: int
    n_exited: int
    seed: int
    threads: int
    functionals: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n_paths": self.n_paths,
            "n_blowups": self.n_blowups,
            "n_exited": self.n_exited,
            "seed": self.seed,
            "threads": self.threads,
            "functionals": [f.to_dict() for f in self.functionals],
        }

    def estimate(self, name_prefix: str) -> FunctionalEstimate:
        for f in self.functionals:
            if f.name.startswith(name_prefix):
                return f
        raise KeyError(name_prefix)


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{THREADS_ENV}={raw!r} is not an integer") from exc
    if n < 1:
        raise ConfigurationError(f"{THREADS_ENV} must be >= 1, got {n}")
    return n


def run_ensemble(
    spec: ModelSpec,
    lyap,
    config: SimConfig,
    n_paths: int,
    functionals: Sequence,
    x0,
    i0: int,
    collect: Optional[Callable[[Trajectory], object]] = None,
) -> tuple[EnsembleSummary, list]:
    """Simulate n_paths independent paths and aggregate the functionals.

    Path p runs with path_index = config.path_index + p.  Results land in
    per-path slots, so estimates are independent of the worker schedule.
    collect(traj), when given, retains a per-path reduction (e.g. the
    trajectory itself for rate estimation); kept None for large ensembles.
    """
    if n_paths < 1:
        raise ConfigurationError(f"n_paths must be >= 1, got {n_paths}")
    threads = thread_count()
    values = np.empty((len(functionals), n_paths))
    flags = np.zeros((2, n_paths), dtype=bool)  # blow-ups, exits
    collected: list = [None] * n_paths

    def work(p: int) -> None:
        cfg = replace(config, path_index=config.path_index + p)
        traj = simulate(spec, config=cfg, x0=x0, i0=i0)
        for fi, fn in enumerate(functionals):
            values[fi, p] = float(fn.evaluate(traj))
        flags[0, p] = traj.blew_up
        flags[1, p] = traj.exited
        if collect is not None:
            collected[p] = collect(traj)

    if threads == 1:
        for p in range(n_paths):
            work(p)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, range(n_paths)))

    estimates = []
    for fi, fn in enumerate(functionals):
        vals = values[fi]
        if getattr(fn, "kind", "binary") == "binary":
            k = int(np.sum(vals > 0.5))
            lo, hi = wilson_interval(k, n_paths)
            estimates.append(FunctionalEstimate(fn.name, "binary", k / n_paths, lo, hi))
        else:
            est = float(np.mean(vals))
            if n_paths > 1:
                se = float(np.std(vals, ddof=1)) / math.sqrt(n_paths)
            else:
                se = 0.0
            estimates.append(
                FunctionalEstimate(
                    fn.name,
                    "fraction",
                    est,
                    max(0.0, est - WILSON_Z * se),
                    min(1.0, est + WILSON_Z * se),
                )
            )
    summary = EnsembleSummary(
        n_paths=n_paths,
        n_blowups=int(np.sum(flags[0])),
        n_exited=int(np.sum(flags[1])),
        seed=config.seed,
        threads=threads,
        functionals=estimates,
    )
    return summary, collected


def write_trajectory_csv(path: str, traj: Trajectory) -> None:
    """Columns (t, x_1..x_n, regime); shortest-roundtrip float formatting."""
    n = traj.x_path.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"x{k+1}" for k in range(n)] + ["regime"])
        for m in range(traj.times.size):
            writer.writerow(
                [repr(float(traj.times[m]))]
                + [repr(float(v)) for v in traj.x_path[m]]
                + [int(traj.regime_path[m])]
            )
