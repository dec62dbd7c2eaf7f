"""Fixed-step integration of the network flows with convergence tracking.

The integrator propagates exclusively through the per-agent update law (one
DerivativePlan built once per run); the independently assembled drift form
is never consulted, so trajectories exercise the agent-level code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    DerivativePlan,
    NetworkState,
    ResidualReport,
    residuals,
    stack_state,
    unstack_state,
)
from .graph import Topology
from .linalg import as_vector, solve_least_squares

# Samples with V below this floor are excluded from rate fitting.
V_FLOOR = 1e-14


class NonFiniteStateError(RuntimeError):
    """The integration produced NaN/Inf; carries the offending time."""

    def __init__(self, time: float):
        super().__init__(f"state became non-finite at t={time:.6g}")
        self.time = time


class InsufficientSamplesError(ValueError):
    """Too few usable samples to fit a convergence rate."""


@dataclass(frozen=True)
class SimConfig:
    """Integration settings.

    step_size None means auto: h = 0.9 * 2 / rho with rho a Gershgorin bound
    on the drift spectral radius, capped at 0.1.  init_mode is "zeros" or
    "random" (uniform in [-amplitude, amplitude], seeded by rng_seed).
    """

    step_size: float | None = None
    max_time: float = 100.0
    stationarity_tol: float = 1e-10
    record_every: int = 10
    rng_seed: int = 0
    init_mode: str = "zeros"
    init_amplitude: float = 1.0
    record_states: bool = False

    def __post_init__(self):
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError("step_size must be positive or None for auto")
        if not self.max_time > 0:
            raise ValueError("max_time must be positive")
        if not self.stationarity_tol > 0:
            raise ValueError("stationarity_tol must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.init_mode not in ("zeros", "random"):
            raise ValueError(f"unknown init_mode {self.init_mode!r}")
        if not self.init_amplitude >= 0:
            raise ValueError("init_amplitude must be >= 0")


@dataclass(frozen=True)
class TrajectorySample:
    time: float
    v: float
    residuals: ResidualReport | None = None
    state: NetworkState | None = None


@dataclass(frozen=True)
class Trajectory:
    """Recorded samples with strictly increasing times and finite V."""

    samples: tuple

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        times = [s.time for s in self.samples]
        if any(t1 >= t2 for t1, t2 in zip(times, times[1:])):
            raise ValueError("sample times must be strictly increasing")
        if any(not math.isfinite(s.v) for s in self.samples):
            raise ValueError("V values must be finite")

    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.samples])

    def values(self) -> np.ndarray:
        return np.array([s.v for s in self.samples])


@dataclass(frozen=True)
class SimResult:
    trajectory: Trajectory
    final_state: NetworkState
    step_size: float
    stop_reason: str  # "stationary" | "max_time"
    steps: int
    reference: np.ndarray  # solution V was measured against


def zero_state(part) -> NetworkState:
    """All-zeros state matching the partition's shapes."""
    _, _, _, dim = _layout(part)
    return unstack_state(part, np.zeros(dim))


def random_state(part, rng: np.random.Generator, amplitude: float = 1.0) -> NetworkState:
    """Uniform [-amplitude, amplitude] state matching the partition's shapes."""
    _, _, _, dim = _layout(part)
    return unstack_state(part, rng.uniform(-amplitude, amplitude, size=dim))


def _layout(part):
    from .dynamics import flat_slices

    return flat_slices(part)


def closeness_metric(s: NetworkState, x_star, part) -> float:
    """Half squared distance of the solution states to a reference solution.

    Row scheme: sums over the clusters' stacked states against the full
    x_star.  Column scheme: sums over every agent against its cluster's slice
    of x_star.
    """
    x_star = as_vector(x_star)
    if x_star.shape[0] != part.total_cols:
        raise ValueError(
            f"reference has {x_star.shape[0]} entries, expected {part.total_cols}"
        )
    total = 0.0
    if part.scheme == "row":
        for i in range(part.cluster_count):
            diff = np.concatenate(s.x[i]) - x_star
            total += float(diff @ diff)
    else:
        start = 0
        for i, n_i in enumerate(part.cluster_cols):
            ref = x_star[start : start + n_i]
            start += n_i
            for x_ij in s.x[i]:
                diff = x_ij - ref
                total += float(diff @ diff)
    return 0.5 * total


def _step_from_matrix(matrix: np.ndarray) -> float:
    rho = float(np.max(np.sum(np.abs(matrix), axis=1))) if matrix.size else 0.0
    if rho == 0.0:
        return 0.1
    return min(0.9 * 2.0 / rho, 0.1)


def auto_step_size(part, topo: Topology) -> float:
    """h = 0.9 * 2 / rho, rho = Gershgorin bound on the flow's spectral radius,
    capped at 0.1."""
    return _step_from_matrix(DerivativePlan(part, topo).matrix)


def integrate(
    part,
    topo: Topology,
    cfg: SimConfig,
    *,
    initial_state: NetworkState | None = None,
    x_reference=None,
) -> SimResult:
    """Propagate the per-agent flow with classical fixed-step RK4.

    Stops at max_time or as soon as the derivative max-norm falls below
    stationarity_tol.  V is measured against x_reference when given, else
    against the minimum-norm least-squares solution of the reassembled
    system.
    """
    plan = DerivativePlan(part, topo)
    h = cfg.step_size if cfg.step_size is not None else _step_from_matrix(plan.matrix)
    if initial_state is None:
        if cfg.init_mode == "zeros":
            state0 = zero_state(part)
        else:
            rng = np.random.default_rng(cfg.rng_seed)
            state0 = random_state(part, rng, cfg.init_amplitude)
    else:
        state0 = initial_state
    if x_reference is None:
        ref = solve_least_squares(*part.reassemble())
    else:
        ref = as_vector(x_reference)

    y = stack_state(part, state0)
    samples = []

    def record(t: float, vec: np.ndarray) -> None:
        snap = unstack_state(part, vec, time=t)
        v = closeness_metric(snap, ref, part)
        if not math.isfinite(v):
            raise NonFiniteStateError(t)
        samples.append(
            TrajectorySample(
                time=t,
                v=v,
                residuals=residuals(part, topo, snap),
                state=snap if cfg.record_states else None,
            )
        )

    t = 0.0
    steps = 0
    stop_reason = "max_time"
    half = 0.5 * h
    sixth = h / 6.0
    # overflow during a divergent run is reported via NonFiniteStateError,
    # so the intermediate warnings carry no information
    with np.errstate(over="ignore", invalid="ignore"):
        record(t, y)
        d = plan.evaluate(y)
        while t < cfg.max_time:
            if float(np.max(np.abs(d))) < cfg.stationarity_tol:
                stop_reason = "stationary"
                break
            k1 = d
            k2 = plan.evaluate(y + half * k1)
            k3 = plan.evaluate(y + half * k2)
            k4 = plan.evaluate(y + h * k3)
            y = y + sixth * (k1 + 2.0 * (k2 + k3) + k4)
            steps += 1
            t = steps * h
            if not np.all(np.isfinite(y)):
                raise NonFiniteStateError(t)
            d = plan.evaluate(y)
            if steps % cfg.record_every == 0:
                record(t, y)
        if not samples or samples[-1].time < t:
            record(t, y)
    return SimResult(
        trajectory=Trajectory(tuple(samples)),
        final_state=unstack_state(part, y, time=t),
        step_size=h,
        stop_reason=stop_reason,
        steps=steps,
        reference=ref,
    )


def _fit_line(t: np.ndarray, values: np.ndarray) -> tuple:
    """Least-squares line fit; returns (slope, intercept, r_squared)."""
    slope, intercept = np.polyfit(t, values, 1)
    pred = slope * t + intercept
    ss_res = float(np.sum((values - pred) ** 2))
    ss_tot = float(np.sum((values - np.mean(values)) ** 2))
    if ss_tot == 0.0:
        # all values identical: the constant fit is exact
        r2 = 1.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


def fit_convergence_rate(traj: Trajectory) -> tuple:
    """Slope and R^2 of a line fit to ln V(t) over the decaying window.

    The window runs over all samples with V above the 1e-14 floor; at least
    ten of them are required.
    """
    t = traj.times()
    v = traj.values()
    mask = v > V_FLOOR
    if int(np.count_nonzero(mask)) < 10:
        raise InsufficientSamplesError(
            f"need >= 10 samples with V > {V_FLOOR:g}, "
            f"have {int(np.count_nonzero(mask))}"
        )
    slope, _, r2 = _fit_line(t[mask], np.log(v[mask]))
    return slope, r2
