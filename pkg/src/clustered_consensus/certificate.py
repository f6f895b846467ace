"""Verification of robust consensus certificates ``(P, alpha, rho, beta)``.

A certificate is checked against two matrix inequalities:

* flow:  ``[[-P L - L^T P + alpha P, P], [P, -rho^2 I]] < 0``
* jump:  ``P_e^T P P_e - beta P < 0``, cross-checked against the
  Schur-complement form ``[[-beta P, P_e^T], [P_e, -P^{-1}]] < 0``.

Solutions whose ``P`` annihilates the cluster indicator vectors can never be
strictly feasible, so each report distinguishes strict feasibility from
negative semidefiniteness whose null space is carried by cluster indicators.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import lyapunov_trace
from .graph import ClusteredNetwork, ClusterPartition, build_laplacian
from .hybrid import FLOW, Disturbance, HybridTrajectory
from .linalg import SingularMatrixError, inf_norm, inverse, sym_eig

log = logging.getLogger(__name__)

STRICT = "strict"
STRUCTURED = "semidefinite_with_structured_null"
FAIL = "fail"

EPS_REL = 1e-8
ALIGN_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Certificate:
    P: np.ndarray = field(repr=False)
    alpha: float
    rho: float
    beta: float
    n0: int = 1
    t_avg: float = 1.0

    def __post_init__(self):
        p = np.array(self.P, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("P must be square")
        if not np.all(np.isfinite(p)):
            raise ValueError("P has non-finite entries")
        if np.max(np.abs(p - p.T), initial=0.0) > 1e-10:
            raise ValueError("P must be symmetric")
        p = 0.5 * (p + p.T)
        p.setflags(write=False)
        object.__setattr__(self, "P", p)
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if int(self.n0) != self.n0 or self.n0 < 1:
            raise ValueError("n0 must be a positive integer")
        if not self.t_avg > 0:
            raise ValueError("t_avg must be positive")

    @property
    def eta(self) -> float:
        return convergence_rate(self)

    def min_eigenvalue(self) -> float:
        return float(sym_eig(self.P)[0][0])

    def is_psd(self, tol: float = 1e-10) -> bool:
        return self.min_eigenvalue() >= -tol * max(inf_norm(self.P), 1.0)

    def to_dict(self) -> dict:
        return {"P": self.P.tolist(), "alpha": self.alpha, "rho": self.rho, "beta": self.beta,
                "n0": int(self.n0), "t_avg": self.t_avg}


@dataclass(frozen=True, eq=False)
class LmiReport:
    form: str
    max_eigenvalue: float
    near_zero_count: int
    null_state_alignment: float
    verdict: str
    eps: float
    norm: float
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def margin(self) -> float:
        """Distance of the largest eigenvalue below zero (negative when violated)."""
        return -self.max_eigenvalue

    def at_least_structured(self) -> bool:
        return self.verdict in (STRICT, STRUCTURED)

    def to_dict(self) -> dict:
        return {"form": self.form, "verdict": self.verdict, "max_eigenvalue": self.max_eigenvalue,
                "near_zero_count": self.near_zero_count,
                "null_state_alignment": self.null_state_alignment,
                "eps": self.eps, "norm": self.norm, "eigenvalues": self.eigenvalues.tolist()}


@dataclass(frozen=True)
class JumpReport:
    quadratic: LmiReport
    schur: LmiReport | None
    agreement: bool | None

    def to_dict(self) -> dict:
        return {"quadratic_form": self.quadratic.to_dict(),
                "schur_form": None if self.schur is None else self.schur.to_dict(),
                "agreement": self.agreement}


def _indicator_basis(partition: ClusterPartition) -> np.ndarray:
    e = partition.indicator_matrix()
    return e / np.sqrt(e.sum(axis=0))


def classify(matrix, state_dim: int, partition: ClusterPartition, form: str,
             eps_rel: float = EPS_REL, align_tol: float = ALIGN_TOL) -> LmiReport:
    """Spectrum-based verdict for ``matrix < 0``.

    Near-null eigenvectors (``|lambda| <= eps``) are allowed only if there are
    at most ``m`` of them and the first ``state_dim`` components of each lie in
    the span of the cluster indicators.
    """
    m = np.asarray(matrix, dtype=float)
    m = 0.5 * (m + m.T)
    w, v = sym_eig(m)
    norm = inf_norm(m)
    eps = eps_rel * norm
    near = np.flatnonzero(np.abs(w) <= eps)
    basis = _indicator_basis(partition)
    alignment = 0.0
    for k in near:
        s = v[:state_dim, k]
        alignment = max(alignment, float(np.linalg.norm(s - basis @ (basis.T @ s))))
    lam_max = float(w[-1])
    if lam_max < -eps:
        verdict = STRICT
    elif lam_max <= eps and near.size <= partition.cluster_count and alignment <= align_tol:
        verdict = STRUCTURED
    else:
        verdict = FAIL
    return LmiReport(form, lam_max, int(near.size), alignment, verdict, eps, norm, w)


def flow_matrix(cert: Certificate, lap) -> np.ndarray:
    p = cert.P
    n = p.shape[0]
    top = -p @ lap - lap.T @ p + cert.alpha * p
    return np.block([[top, p], [p, -cert.rho ** 2 * np.eye(n)]])


def jump_matrix(cert: Certificate, p_e) -> np.ndarray:
    return p_e.T @ cert.P @ p_e - cert.beta * cert.P


def schur_jump_matrix(cert: Certificate, p_e) -> np.ndarray:
    return np.block([[-cert.beta * cert.P, p_e.T], [p_e, -inverse(cert.P)]])


def _check_dims(cert: Certificate, network: ClusteredNetwork):
    if cert.P.shape != (network.size, network.size):
        raise ValueError(f"P is {cert.P.shape}, network has {network.size} agents")


def check_lmi_flow(cert: Certificate, network: ClusteredNetwork, lap=None, **kw) -> LmiReport:
    _check_dims(cert, network)
    lap = build_laplacian(network) if lap is None else np.asarray(lap, dtype=float)
    if lap.shape != cert.P.shape:
        raise ValueError("Laplacian and P dimensions differ")
    return classify(flow_matrix(cert, lap), network.size, network.partition, "flow", **kw)


def check_lmi_jump(cert: Certificate, network: ClusteredNetwork, **kw) -> JumpReport:
    _check_dims(cert, network)
    quadratic = classify(jump_matrix(cert, network.p_e), network.size, network.partition, "jump", **kw)
    try:
        m_schur = schur_jump_matrix(cert, network.p_e)
    except SingularMatrixError:
        return JumpReport(quadratic, None, None)
    schur = classify(m_schur, network.size, network.partition, "jump_schur", **kw)
    return JumpReport(quadratic, schur, schur.verdict == quadratic.verdict)


def convergence_rate(cert: Certificate) -> float:
    return cert.alpha - math.log(cert.beta) / cert.t_avg


def project_cluster_structure(p, partition: ClusterPartition) -> np.ndarray:
    """Nearest (Frobenius) symmetric matrix that is block diagonal by cluster with zero block row sums."""
    p = np.asarray(p, dtype=float)
    p = 0.5 * (p + p.T)
    out = np.zeros_like(p)
    for cluster in partition.clusters:
        idx = list(cluster)
        k = len(idx)
        center = np.eye(k) - np.full((k, k), 1.0 / k)
        out[np.ix_(idx, idx)] = center @ p[np.ix_(idx, idx)] @ center
    return out


@dataclass
class EmpiricalReport:
    passed: bool
    jump_violations: list[tuple[float, float]]
    flow_violations: list[tuple[float, float]]
    max_jump_ratio: float
    jumps_checked: int
    flow_points_checked: int
    slack: float

    def to_dict(self) -> dict:
        worst_jump = max((v for _, v in self.jump_violations), default=0.0)
        worst_flow = max((v for _, v in self.flow_violations), default=0.0)
        return {"passed": self.passed, "jumps_checked": self.jumps_checked,
                "flow_points_checked": self.flow_points_checked,
                "jump_violation_count": len(self.jump_violations),
                "flow_violation_count": len(self.flow_violations),
                "worst_jump_excess": worst_jump, "worst_flow_excess": worst_flow,
                "max_jump_ratio": self.max_jump_ratio, "slack": self.slack}


def empirical_certificate_check(cert: Certificate, traj: HybridTrajectory, w: Disturbance,
                                stride: int = 1, slack: float = 1e-6) -> EmpiricalReport:
    """Check the Lyapunov conditions along a disagreement trajectory.

    Jumps: ``V(t_k+) <= beta V(t_k)``. Flow: ``dV/dt + alpha V + z.z - rho^2 w.w < 0``
    with ``dV/dt`` from central differences at every ``stride``-th interior
    flow sample. Violations beyond ``slack`` are listed as (time, excess).
    """
    if stride < 1 or stride > len(traj.times):
        raise ValueError(f"stride must be in [1, {len(traj.times)}]")
    trace = lyapunov_trace(traj, cert.P)
    v = trace.values
    t = traj.times

    jump_violations = []
    max_ratio = 0.0
    pairs = traj.jump_indices()
    for pre, post in pairs:
        excess = v[post] - cert.beta * v[pre]
        if v[pre] > 0:
            max_ratio = max(max_ratio, v[post] / v[pre])
        if excess > slack:
            jump_violations.append((float(t[pre]), float(excess)))

    flow_violations = []
    checked = 0
    n = traj.size
    for lo, hi in traj.segments():
        for i in range(lo + 1, hi, stride):
            if traj.tags[i] != FLOW:
                continue
            vdot = (v[i + 1] - v[i - 1]) / (t[i + 1] - t[i - 1])
            z = traj.states[i]
            wi = w.evaluate(t[i], n)
            q = vdot + cert.alpha * v[i] + float(z @ z) - cert.rho ** 2 * float(wi @ wi)
            checked += 1
            if q > slack:
                flow_violations.append((float(t[i]), float(q)))

    passed = not jump_violations and not flow_violations
    return EmpiricalReport(passed, jump_violations, flow_violations, max_ratio, len(pairs), checked, slack)


@dataclass
class SearchResult:
    certificate: Certificate | None
    P: np.ndarray
    flow: LmiReport | None
    jump: JumpReport | None
    penalties: list[float]
    reason: str = ""


def _cluster_complement_basis(partition: ClusterPartition) -> list[tuple[list[int], np.ndarray]]:
    out = []
    for cluster in partition.clusters:
        k = len(cluster)
        if k < 2:
            continue
        # orthonormal basis of the complement of the ones vector
        q, _ = np.linalg.qr(np.column_stack([np.ones(k), np.eye(k)[:, : k - 1]]))
        out.append((list(cluster), q[:, 1:]))
    return out


def _orth_complement(vectors: np.ndarray, dim: int) -> np.ndarray:
    if vectors.size == 0:
        return np.eye(dim)
    q, _ = np.linalg.qr(vectors, mode="complete")
    return q[:, vectors.shape[1]:]


def search_certificate(network: ClusteredNetwork, alpha: float, rho: float, beta: float,
                       iterations: int = 300, seed: int = 0, init_scale: float = 1.0,
                       min_eig: float = 1.0, margin: float = 1e-6, t_avg: float = 1.0,
                       n0: int = 1) -> SearchResult:
    """Projected-gradient search for a structured ``P``.

    ``P`` is restricted to ``sum_tau U_tau S_tau U_tau^T`` where ``U_tau`` spans
    the zero-sum vectors of cluster ``tau`` and ``S_tau >= min_eig I``. The
    objective is the sum of hinge penalties on the top eigenvalues of both
    inequalities, each restricted to the complement of its structural null
    directions. Steps are accepted only when the penalty decreases.
    """
    n = network.size
    lap = build_laplacian(network)
    p_e = network.p_e
    blocks = _cluster_complement_basis(network.partition)
    if not blocks:
        return SearchResult(None, np.zeros((n, n)), None, None, [],
                            "every cluster is a single agent; no nontrivial structured P")

    ind = network.partition.indicator_matrix()
    flow_basis = _orth_complement(np.vstack([ind, np.zeros((n, ind.shape[1]))]), 2 * n)
    jump_basis = _orth_complement(np.ones((n, 1)), n)
    rng = np.random.default_rng(seed)

    def assemble(ss):
        p = np.zeros((n, n))
        for (idx, u), s in zip(blocks, ss):
            p[np.ix_(idx, idx)] = u @ s @ u.T
        return p

    def project(ss):
        out = []
        for s in ss:
            s = 0.5 * (s + s.T)
            w, v = np.linalg.eigh(s)
            out.append((v * np.maximum(w, min_eig)) @ v.T)
        return out

    def top(mat, basis):
        r = basis.T @ mat @ basis
        w, v = np.linalg.eigh(0.5 * (r + r.T))
        return w[-1], basis @ v[:, -1]

    def evaluate(ss):
        p = assemble(ss)
        cert_like = Certificate(p, alpha, rho, beta, n0, t_avg)
        lf, uf = top(flow_matrix(cert_like, lap), flow_basis)
        lj, uj = top(jump_matrix(cert_like, p_e), jump_basis)
        penalty = max(lf + margin, 0.0) + max(lj + margin, 0.0)
        grad = np.zeros((n, n))
        if lf + margin > 0:
            a, b = uf[:n], uf[n:]
            la = lap @ a
            grad += -(np.outer(a, la) + np.outer(la, a)) + alpha * np.outer(a, a) + np.outer(a, b) + np.outer(b, a)
        if lj + margin > 0:
            pv = p_e @ uj
            grad += np.outer(pv, pv) - beta * np.outer(uj, uj)
        sgrad = [u.T @ grad[np.ix_(idx, idx)] @ u for idx, u in blocks]
        return penalty, sgrad

    ss = []
    for _, u in blocks:
        k = u.shape[1]
        noise = rng.normal(size=(k, k))
        ss.append(init_scale * np.eye(k) + 0.1 * init_scale * (noise + noise.T) / 2)
    ss = project(ss)

    penalty, grad = evaluate(ss)
    history = [penalty]
    lr = 1.0
    for _ in range(iterations):
        if penalty == 0.0:
            break
        accepted = False
        for _ in range(40):
            trial = project([s - lr * g for s, g in zip(ss, grad)])
            trial_penalty, trial_grad = evaluate(trial)
            if trial_penalty < penalty:
                accepted = True
                break
            lr *= 0.5
        if not accepted:
            break
        ss, penalty, grad = trial, trial_penalty, trial_grad
        history.append(penalty)
        lr *= 2.0

    p = assemble(ss)
    cert = Certificate(p, alpha, rho, beta, n0, t_avg)
    flow = check_lmi_flow(cert, network)
    jump = check_lmi_jump(cert, network)
    found = flow.at_least_structured() and jump.quadratic.at_least_structured()
    if not found:
        log.info("no certificate: flow max eig %.3e (%s), jump max eig %.3e (%s), penalty %.3e",
                 flow.max_eigenvalue, flow.verdict, jump.quadratic.max_eigenvalue, jump.quadratic.verdict, penalty)
    return SearchResult(cert if found else None, p, flow, jump, history,
                        "found" if found else "penalty did not reach zero on both inequalities")
