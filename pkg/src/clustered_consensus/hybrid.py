"""Impulsive hybrid simulation of clustered consensus.

Between impulses the state flows as ``dx/dt = -L x + w(t)``; at each impulse
time ``t_k`` it is reset to ``x(t_k+) = P_e x(t_k)``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.integrate import simpson

from .graph import ClusteredNetwork, build_laplacian, validate_network
from .linalg import mat_exp

FLOW = "flow"
PRE_JUMP = "pre_jump"
POST_JUMP = "post_jump"

_TIME_TOL = 1e-9


class InvalidNetworkError(ValueError):
    pass


@dataclass(frozen=True)
class ImpulseSchedule:
    """Strictly increasing reset times with interval bounds ``[delta_min, delta_max]``."""

    times: tuple[float, ...]
    delta_min: float
    delta_max: float
    t0: float = 0.0

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", times)
        if not self.delta_min > 0:
            raise ValueError("delta_min must be positive")
        if self.delta_max < self.delta_min:
            raise ValueError("delta_max must be at least delta_min")
        prev = self.t0
        for t in times:
            gap = t - prev
            if gap <= 0:
                raise ValueError("impulse times must be strictly increasing and after t0")
            if gap < self.delta_min - _TIME_TOL or gap > self.delta_max + _TIME_TOL:
                raise ValueError(f"interval {gap:g} ending at t={t:g} outside "
                                 f"[{self.delta_min:g}, {self.delta_max:g}]")
            prev = t

    @classmethod
    def uniform(cls, delta: float, horizon: float, t0: float = 0.0) -> "ImpulseSchedule":
        if not delta > 0:
            raise ValueError("delta must be positive")
        count = int(math.floor((horizon - t0) / delta + _TIME_TOL))
        return cls(tuple(t0 + k * delta for k in range(1, count + 1)), delta, delta, t0)

    @classmethod
    def random(cls, delta_min: float, delta_max: float, horizon: float, seed: int,
               t0: float = 0.0) -> "ImpulseSchedule":
        """Uniform random spacing; the first ``k`` gaps depend only on ``seed``."""
        gaps = random_intervals(delta_min, delta_max, seed)
        times = []
        t = t0
        for gap in gaps:
            t += gap
            if t > horizon + _TIME_TOL:
                break
            times.append(t)
        return cls(tuple(times), delta_min, delta_max, t0)

    @classmethod
    def explicit(cls, times: Sequence[float], delta_min: float | None = None,
                 delta_max: float | None = None, t0: float = 0.0) -> "ImpulseSchedule":
        gaps = np.diff(np.concatenate([[t0], np.asarray(times, dtype=float)]))
        if delta_min is None:
            delta_min = float(gaps.min()) if gaps.size else 1.0
        if delta_max is None:
            delta_max = float(gaps.max()) if gaps.size else delta_min
        return cls(tuple(times), delta_min, delta_max, t0)

    @property
    def intervals(self) -> np.ndarray:
        return np.diff(np.concatenate([[self.t0], self.times]))

    def average_interval(self) -> float:
        iv = self.intervals
        return float(iv.mean()) if iv.size else float("nan")

    def within(self, horizon: float) -> tuple[float, ...]:
        return tuple(t for t in self.times if t <= horizon + _TIME_TOL)


def random_intervals(delta_min: float, delta_max: float, seed: int) -> Iterator[float]:
    if not 0 < delta_min <= delta_max:
        raise ValueError("need 0 < delta_min <= delta_max")
    rng = np.random.default_rng(seed)
    while True:
        yield float(rng.uniform(delta_min, delta_max))


class Disturbance:
    """Per-agent disturbance ``w(t)``; subclasses implement :meth:`evaluate`."""

    kind = "abstract"

    def evaluate(self, t: float, n: int) -> np.ndarray:
        raise NotImplementedError

    def is_zero(self) -> bool:
        return False

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroDisturbance(Disturbance):
    kind = "zero"

    def evaluate(self, t, n):
        return np.zeros(n)

    def is_zero(self):
        return True

    def to_dict(self):
        return {"kind": "zero"}


@dataclass(frozen=True)
class Sinusoid(Disturbance):
    """``amplitude * sin(omega t + phase)`` on the agents selected by ``mask`` (all when None)."""

    amplitude: float
    omega: float
    phase: float = 0.0
    mask: tuple[float, ...] | None = None

    kind = "sinusoid"

    def __post_init__(self):
        if self.mask is not None:
            object.__setattr__(self, "mask", tuple(float(v) for v in self.mask))

    def evaluate(self, t, n):
        value = self.amplitude * math.sin(self.omega * t + self.phase)
        if self.mask is None:
            return np.full(n, value)
        if len(self.mask) != n:
            raise ValueError(f"mask has length {len(self.mask)}, expected {n}")
        return value * np.asarray(self.mask)

    def is_zero(self):
        return self.amplitude == 0 or (self.mask is not None and not any(self.mask))

    def to_dict(self):
        return {"kind": "sinusoid", "amplitude": self.amplitude, "omega": self.omega,
                "phase": self.phase, "mask": None if self.mask is None else list(self.mask)}


@dataclass(frozen=True)
class Windowed(Disturbance):
    """``inner`` restricted to ``start <= t < end``, zero elsewhere."""

    inner: Disturbance
    start: float
    end: float

    kind = "windowed"

    def __post_init__(self):
        if not self.end > self.start:
            raise ValueError("window end must be after start")
        if not (math.isfinite(self.start) and math.isfinite(self.end)):
            raise ValueError("window bounds must be finite")

    def evaluate(self, t, n):
        if self.start <= t < self.end:
            return self.inner.evaluate(t, n)
        return np.zeros(n)

    def is_zero(self):
        return self.inner.is_zero()

    def to_dict(self):
        return {"kind": "windowed", "inner": self.inner.to_dict(), "start": self.start, "end": self.end}


def disturbance_from_dict(spec: dict) -> Disturbance:
    kind = spec.get("kind")
    if kind == "zero":
        return ZeroDisturbance()
    if kind == "sinusoid":
        return Sinusoid(float(spec["amplitude"]), float(spec["omega"]),
                        float(spec.get("phase", 0.0)), spec.get("mask"))
    if kind == "windowed":
        return Windowed(disturbance_from_dict(spec["inner"]), float(spec["start"]), float(spec["end"]))
    raise ValueError(f"unknown disturbance kind {kind!r}")


def disturbance_norm(w: Disturbance, horizon: float, step: float, n: int = 1) -> float:
    """``(integral_0^T w.w dt) ** 0.5`` by composite Simpson on a grid of about ``step``."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if w.is_zero():
        return 0.0
    intervals = max(2, int(math.ceil(horizon / step)))
    intervals += intervals % 2
    ts = np.linspace(0.0, horizon, intervals + 1)
    energy = np.array([np.dot(v, v) for v in (w.evaluate(t, n) for t in ts)])
    return math.sqrt(max(simpson(energy, x=ts), 0.0))


@dataclass
class HybridTrajectory:
    times: np.ndarray
    states: np.ndarray
    tags: tuple[str, ...]
    step: float
    metadata: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.states.shape[1]

    @property
    def terminal(self) -> np.ndarray:
        return self.states[-1]

    def jump_indices(self) -> list[tuple[int, int]]:
        """(pre_jump, post_jump) index pairs in time order."""
        pre = [i for i, tag in enumerate(self.tags) if tag == PRE_JUMP]
        return [(i, i + 1) for i in pre]

    def segments(self) -> list[tuple[int, int]]:
        """Inclusive index ranges of flow segments, split at jumps."""
        bounds = []
        start = 0
        for pre, post in self.jump_indices():
            bounds.append((start, pre))
            start = post
        bounds.append((start, len(self.tags) - 1))
        return bounds

    def with_states(self, states: np.ndarray) -> "HybridTrajectory":
        return HybridTrajectory(self.times, states, self.tags, self.step, dict(self.metadata))

    def csv_text(self) -> str:
        buf = io.StringIO()
        header = ["t", "tag"] + [f"x{i + 1}" for i in range(self.size)]
        buf.write(",".join(header) + "\n")
        for t, tag, row in zip(self.times, self.tags, self.states):
            buf.write(f"{t:.12g},{tag}," + ",".join(f"{v:.12g}" for v in row) + "\n")
        return buf.getvalue()

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.csv_text())


def apply_impulse(x, network: ClusteredNetwork) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (network.size,):
        raise ValueError(f"state has shape {x.shape}, expected ({network.size},)")
    return network.p_e @ x


def _segment_times(a: float, b: float, step: float) -> list[float]:
    """Grid points ``i * step`` strictly inside (a, b), then b."""
    first = int(math.floor(a / step)) + 1
    out = []
    i = first
    while True:
        g = i * step
        if g >= b - _TIME_TOL * step:
            break
        if g > a + _TIME_TOL * step:
            out.append(g)
        i += 1
    out.append(b)
    return out


class _ExactFlow:
    def __init__(self, lap):
        self.neg_lap = -lap
        self._cache: dict[float, np.ndarray] = {}

    def propagator(self, dt: float) -> np.ndarray:
        key = round(dt, 12)
        m = self._cache.get(key)
        if m is None:
            m = mat_exp(self.neg_lap, dt)
            self._cache[key] = m
        return m

    def advance(self, x, t, dt):
        return self.propagator(dt) @ x


class _Rk4Flow:
    def __init__(self, lap, w: Disturbance, step: float):
        self.lap = lap
        self.w = w
        self.step = step
        self.n = lap.shape[0]

    def _rhs(self, t, x):
        return -self.lap @ x + self.w.evaluate(t, self.n)

    def advance(self, x, t, dt):
        # dt never exceeds step: samples are at most one grid spacing apart
        h = dt
        k1 = self._rhs(t, x)
        k2 = self._rhs(t + h / 2, x + h / 2 * k1)
        k3 = self._rhs(t + h / 2, x + h / 2 * k2)
        k4 = self._rhs(t + h, x + h * k3)
        return x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def simulate(network: ClusteredNetwork, x0, schedule: ImpulseSchedule, w: Disturbance | None = None,
             horizon: float = 10.0, mode: str = "exact", step: float = 1e-3,
             force: bool = False) -> HybridTrajectory:
    """Integrate the hybrid system from ``t = schedule.t0`` to ``horizon``.

    Samples lie on the grid ``i * step`` plus a (pre_jump, post_jump) pair at
    every impulse time ``<= horizon`` and a final sample at ``horizon``.
    ``mode="exact"`` propagates with matrix exponentials and needs ``w`` zero;
    ``mode="rk4"`` uses classical fixed-step Runge-Kutta with the step
    shortened at segment ends.
    """
    w = ZeroDisturbance() if w is None else w
    x = np.array(x0, dtype=float)
    n = network.size
    if x.shape != (n,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({n},)")
    if not step > 0:
        raise ValueError("step must be positive")
    if not horizon > schedule.t0:
        raise ValueError("horizon must exceed the start time")
    if mode not in ("exact", "rk4"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "exact" and not w.is_zero():
        raise ValueError("exact mode requires a zero disturbance; use mode='rk4'")
    if not force:
        report = validate_network(network)
        if not report.passed:
            names = ", ".join(c.name for c in report.failures())
            raise InvalidNetworkError(f"network validation failed: {names}")

    impulses = schedule.within(horizon)
    gaps = np.diff(np.concatenate([[schedule.t0], impulses]))
    if gaps.size and step >= gaps.min() - _TIME_TOL:
        raise ValueError(f"step {step:g} is not smaller than the shortest impulse interval {gaps.min():g}")

    lap = build_laplacian(network)
    flow = _ExactFlow(lap) if mode == "exact" else _Rk4Flow(lap, w, step)

    times = [schedule.t0]
    states = [x.copy()]
    tags = [FLOW]
    t = schedule.t0
    boundaries = [(tk, True) for tk in impulses]
    if not impulses or impulses[-1] < horizon - _TIME_TOL:
        boundaries.append((horizon, False))
    for b, is_impulse in boundaries:
        for s in _segment_times(t, b, step):
            x = flow.advance(x, t, s - t)
            t = s
            times.append(t)
            states.append(x.copy())
            tags.append(PRE_JUMP if (is_impulse and s == b) else FLOW)
        if is_impulse:
            x = network.p_e @ x
            times.append(t)
            states.append(x.copy())
            tags.append(POST_JUMP)

    metadata = {"mode": mode, "forced": bool(force), "impulses": len(impulses), "horizon": horizon}
    return HybridTrajectory(np.array(times), np.array(states), tuple(tags), step, metadata)
