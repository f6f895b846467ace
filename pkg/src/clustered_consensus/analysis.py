"""Consensus diagnostics over simulated or predicted trajectories."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph import ClusteredNetwork, build_laplacian
from .hybrid import FLOW, Disturbance, HybridTrajectory
from .linalg import embed_leader_matrix, inf_norm, left_null_vector, mat_exp, stationary_distribution

CONVERGENCE_TOL = 1e-10


@dataclass(frozen=True)
class ConsensusPrediction:
    c: np.ndarray
    value: float | None
    k_used: int
    residual: float
    converged: bool


@dataclass(frozen=True)
class HinfReport:
    J: float
    z_energy: float
    w_energy: float
    rho: float

    @property
    def ratio(self) -> float:
        denom = self.rho ** 2 * self.w_energy
        return self.z_energy / denom if denom > 0 else float("inf")

    def to_dict(self) -> dict:
        return {"J": self.J, "z_energy": self.z_energy, "w_energy": self.w_energy,
                "rho": self.rho, "ratio": self.ratio}


@dataclass(frozen=True)
class LyapunovTrace:
    times: np.ndarray
    values: np.ndarray
    tags: tuple[str, ...]

    def __iter__(self):
        return iter(zip(self.times.tolist(), self.values.tolist(), self.tags))

    def jump_pairs(self) -> list[tuple[float, float, float]]:
        """(time, V before, V after) for every impulse."""
        out = []
        for i, tag in enumerate(self.tags):
            if tag == "pre_jump":
                out.append((float(self.times[i]), float(self.values[i]), float(self.values[i + 1])))
        return out


def spread(x) -> float:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("spread of an empty vector")
    return float(x.max() - x.min())


def limit_product(network: ClusteredNetwork, intervals: Sequence[float], x0=None,
                  tol: float = CONVERGENCE_TOL) -> ConsensusPrediction:
    """Product ``P_e e^{-L d_k} ... P_e e^{-L d_1}`` and its rank-one limit ``1 c^T``.

    ``c`` is the mean row of the product. A residual above ``tol`` flags the
    prediction as not converged instead of raising.
    """
    intervals = [float(d) for d in intervals]
    if not intervals:
        raise ValueError("at least one interval is required")
    lap = build_laplacian(network)
    cache: dict[float, np.ndarray] = {}
    prod = np.eye(network.size)
    for d in intervals:
        factor = cache.get(d)
        if factor is None:
            factor = network.p_e @ mat_exp(-lap, d)
            cache[d] = factor
        prod = factor @ prod
    c = prod.mean(axis=0)
    residual = inf_norm(prod - np.outer(np.ones(network.size), c))
    value = None if x0 is None else float(c @ np.asarray(x0, dtype=float))
    return ConsensusPrediction(c, value, len(intervals), residual, residual < tol)


def closed_form_weights(network: ClusteredNetwork, p_l) -> np.ndarray:
    """Row vector ``phi^T Q / sum(phi)`` of the leaders-only consensus formula.

    Row ``tau`` of ``Q`` holds the normalized left null vector of cluster
    ``tau``'s Laplacian block in that cluster's columns.
    """
    p_l = np.asarray(p_l, dtype=float)
    expected = embed_leader_matrix(p_l, network.partition.leaders, network.size)
    if np.max(np.abs(expected - network.p_e)) > 1e-12:
        raise ValueError("network jump matrix is not the leaders-only embedding of p_l")
    phi = stationary_distribution(p_l)
    lap = build_laplacian(network)
    q = np.zeros((network.cluster_count, network.size))
    for tau, cluster in enumerate(network.partition.clusters):
        idx = list(cluster)
        q[tau, idx] = left_null_vector(lap[np.ix_(idx, idx)])
    return phi @ q / phi.sum()


def predict_consensus_closed_form(network: ClusteredNetwork, p_l, x0) -> float:
    return float(closed_form_weights(network, p_l) @ np.asarray(x0, dtype=float))


def disagreement(traj: HybridTrajectory, c, x0) -> HybridTrajectory:
    c = np.asarray(c, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if c.shape != x0.shape or c.shape != (traj.size,):
        raise ValueError("c, x0 and trajectory dimension must agree")
    return traj.with_states(traj.states - float(c @ x0))


def _segment_integral(times, values, t_start, t_end):
    mask = (times >= t_start - 1e-12) & (times <= t_end + 1e-12)
    ts = times[mask]
    vs = values[mask]
    if ts.size < 2:
        return 0.0
    return float(np.sum(0.5 * (vs[1:] + vs[:-1]) * np.diff(ts)))


def hinf_index(traj: HybridTrajectory, w: Disturbance, rho: float, horizon: float,
               t_start: float = 0.0) -> HinfReport:
    """``J = int (z.z - rho^2 w.w) dt`` over ``(t_start, horizon]`` with ``z = psi``.

    Trapezoid rule on the trajectory samples, one flow segment at a time;
    jumps carry no integral mass.
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    if horizon > traj.times[-1] + 1e-9:
        raise ValueError(f"horizon {horizon} exceeds trajectory end {traj.times[-1]}")
    n = traj.size
    z2 = np.einsum("ij,ij->i", traj.states, traj.states)
    w2 = np.array([float(np.dot(v, v)) for v in (w.evaluate(t, n) for t in traj.times)])
    z_energy = 0.0
    w_energy = 0.0
    for lo, hi in traj.segments():
        ts = traj.times[lo:hi + 1]
        z_energy += _segment_integral(ts, z2[lo:hi + 1], t_start, horizon)
        w_energy += _segment_integral(ts, w2[lo:hi + 1], t_start, horizon)
    return HinfReport(z_energy - rho ** 2 * w_energy, z_energy, w_energy, float(rho))


def lyapunov_trace(traj: HybridTrajectory, p) -> LyapunovTrace:
    """``V = psi^T P psi`` at every sample (both sides of each impulse)."""
    p = np.asarray(p, dtype=float)
    if p.shape != (traj.size, traj.size):
        raise ValueError(f"P has shape {p.shape}, expected {(traj.size, traj.size)}")
    values = np.einsum("ij,jk,ik->i", traj.states, p, traj.states)
    return LyapunovTrace(traj.times.copy(), values, traj.tags)


def check_product_bound(network: ClusteredNetwork, t: float) -> float:
    """Largest ``gamma`` with ``P_e e^{-Lt} >= gamma (P_e + e^{-Lt})`` entrywise."""
    if not t > 0:
        raise ValueError("t must be positive")
    e = mat_exp(-build_laplacian(network), t)
    prod = network.p_e @ e
    total = network.p_e + e
    support = total > 0
    return float(np.min(prod[support] / total[support]))


def decay_fit(vtrace, t0: float = 0.0) -> float:
    """Exponential decay rate of ``V`` from a least-squares fit of ``ln V`` against time.

    Accepts a :class:`LyapunovTrace` (only flow samples are used) or a pair
    ``(times, values)``. Samples before ``t0`` and non-positive values are
    dropped. Positive result means decay.
    """
    if isinstance(vtrace, LyapunovTrace):
        keep = np.array([tag == FLOW for tag in vtrace.tags])
        times, values = vtrace.times[keep], vtrace.values[keep]
    else:
        times, values = (np.asarray(a, dtype=float) for a in vtrace)
    mask = (times >= t0) & (values > 0)
    if np.count_nonzero(mask) < 2:
        raise ValueError("fewer than two positive samples to fit")
    slope, _ = np.polyfit(times[mask], np.log(values[mask]), 1)
    return float(-slope)


def convergence_time(traj: HybridTrajectory, tol: float = 1e-6) -> float | None:
    """Earliest sample time from which the spread stays at or below ``tol``; None if never."""
    spreads = traj.states.max(axis=1) - traj.states.min(axis=1)
    above = np.flatnonzero(spreads > tol)
    if above.size == 0:
        return float(traj.times[0])
    last = above[-1]
    if last == len(spreads) - 1:
        return None
    return float(traj.times[last + 1])
