"""Scenario documents: parsing, validation with field paths, and normalized serialization.

The field-by-field schema is documented in ``docs/scenario-schema.md``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from itertools import islice
from pathlib import Path
from typing import Any

import numpy as np

from .certificate import Certificate, project_cluster_structure
from .graph import ClusteredNetwork, ClusterPartition, DirectedWeightedGraph, ModelError
from .hybrid import Disturbance, ImpulseSchedule, ZeroDisturbance, disturbance_from_dict, random_intervals
from .linalg import embed_leader_matrix

BUNDLED = ("paper-fig1", "paper-fig1-leaders-only", "paper-fig2")


_FLAT_ARRAY = re.compile(r"\[[^\[\]{}\"]*\]")


def compact_json(doc) -> str:
    """Indented JSON with innermost arrays (vectors, matrix rows) kept on one line."""
    text = json.dumps(doc, indent=2, sort_keys=True)
    return _FLAT_ARRAY.sub(lambda m: re.sub(r"\s+", " ", m.group(0)).replace("[ ", "[").replace(" ]", "]"),
                           text) + "\n"


class ScenarioError(ValueError):
    """Malformed scenario document; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


def _require(obj: dict, key: str, path: str):
    if not isinstance(obj, dict):
        raise ScenarioError(path, "expected an object")
    if key not in obj:
        raise ScenarioError(f"{path}.{key}" if path else key, "missing required field")
    return obj[key]


def _number(value, path: str, positive=False, nonnegative=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(path, f"expected a number, got {type(value).__name__}")
    value = float(value)
    if not math.isfinite(value):
        raise ScenarioError(path, "must be finite")
    if positive and not value > 0:
        raise ScenarioError(path, "must be positive")
    if nonnegative and value < 0:
        raise ScenarioError(path, "must be nonnegative")
    return value


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(path, "expected an integer")
    return value


def _vector(value, path: str) -> list[float]:
    if not isinstance(value, list):
        raise ScenarioError(path, "expected an array of numbers")
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _matrix(value, path: str) -> list[list[float]]:
    if not isinstance(value, list) or not value:
        raise ScenarioError(path, "expected a nonempty array of rows")
    rows = [_vector(r, f"{path}[{i}]") for i, r in enumerate(value)]
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise ScenarioError(f"{path}[{i}]", f"row has {len(r)} entries, expected {width}")
    return rows


def _bool(value, path: str) -> bool:
    if not isinstance(value, bool):
        raise ScenarioError(path, "expected true or false")
    return value


@dataclass
class ClusterSpec:
    agents: list[int]
    leader: int
    edges: list[list[float]]

    def to_dict(self) -> dict:
        return {"agents": list(self.agents), "leader": self.leader,
                "edges": [[int(a), int(b), float(w)] for a, b, w in self.edges]}


@dataclass
class ScheduleSpec:
    kind: str
    delta: float | None = None
    delta_min: float | None = None
    delta_max: float | None = None
    seed: int | None = None
    times: list[float] | None = None

    def build(self, horizon: float) -> ImpulseSchedule:
        if self.kind == "uniform":
            return ImpulseSchedule.uniform(self.delta, horizon)
        if self.kind == "random":
            return ImpulseSchedule.random(self.delta_min, self.delta_max, horizon, self.seed)
        return ImpulseSchedule.explicit(self.times, self.delta_min, self.delta_max)

    def intervals(self, count: int) -> list[float]:
        """Interval sequence used for the product limit (explicit lists are used as given)."""
        if self.kind == "uniform":
            return [self.delta] * count
        if self.kind == "random":
            return list(islice(random_intervals(self.delta_min, self.delta_max, self.seed), count))
        return ImpulseSchedule.explicit(self.times, self.delta_min, self.delta_max).intervals.tolist()

    def to_dict(self) -> dict:
        if self.kind == "uniform":
            return {"kind": "uniform", "delta": self.delta}
        if self.kind == "random":
            return {"kind": "random", "delta_min": self.delta_min, "delta_max": self.delta_max,
                    "seed": self.seed}
        return {"kind": "explicit", "times": list(self.times),
                "delta_min": self.delta_min, "delta_max": self.delta_max}


@dataclass
class CertificateSpec:
    P: list[list[float]]
    alpha: float
    rho: float
    beta: float
    n0: int = 1
    t_avg: float | None = None
    restore_structure: bool = False

    def build(self, network: ClusteredNetwork, default_t_avg: float) -> Certificate:
        p = np.asarray(self.P, dtype=float)
        if self.restore_structure:
            p = project_cluster_structure(p, network.partition)
        t_avg = self.t_avg if self.t_avg is not None else default_t_avg
        return Certificate(p, self.alpha, self.rho, self.beta, self.n0, t_avg)

    def to_dict(self) -> dict:
        return {"P": [list(r) for r in self.P], "alpha": self.alpha, "rho": self.rho, "beta": self.beta,
                "n0": self.n0, "t_avg": self.t_avg, "restore_structure": self.restore_structure}


@dataclass
class AnalysesSpec:
    limit_terms: int = 1000
    consensus_tol: float = 1e-6
    hinf: bool = True
    lyapunov: bool = True
    closed_form: bool = False
    product_bound: bool = True
    reference_consensus_value: float | None = None

    def to_dict(self) -> dict:
        return {"limit_terms": self.limit_terms, "consensus_tol": self.consensus_tol, "hinf": self.hinf,
                "lyapunov": self.lyapunov, "closed_form": self.closed_form,
                "product_bound": self.product_bound,
                "reference_consensus_value": self.reference_consensus_value}


@dataclass
class Scenario:
    name: str
    clusters: list[ClusterSpec]
    x0: list[float]
    schedule: ScheduleSpec
    horizon: float
    p_e: list[list[float]] | None = None
    p_l: list[list[float]] | None = None
    disturbance: Disturbance = field(default_factory=ZeroDisturbance)
    mode: str = "exact"
    step: float = 1e-3
    certificate: CertificateSpec | None = None
    analyses: AnalysesSpec = field(default_factory=AnalysesSpec)
    description: str = ""

    @property
    def size(self) -> int:
        return sum(len(c.agents) for c in self.clusters)

    def network(self) -> ClusteredNetwork:
        n = self.size
        edges = [(int(a), int(b), float(w)) for c in self.clusters for a, b, w in c.edges]
        partition = ClusterPartition(tuple(tuple(c.agents) for c in self.clusters),
                                     tuple(c.leader for c in self.clusters))
        graph = DirectedWeightedGraph(n, tuple(edges))
        if self.p_l is not None:
            p_e = embed_leader_matrix(self.p_l, partition.leaders, n)
        else:
            p_e = np.asarray(self.p_e, dtype=float)
        return ClusteredNetwork(graph, partition, p_e)

    def impulse_schedule(self) -> ImpulseSchedule:
        return self.schedule.build(self.horizon)

    def with_uniform_delta(self, delta: float) -> "Scenario":
        return replace(self, schedule=ScheduleSpec("uniform", delta=float(delta)))

    def to_dict(self) -> dict:
        network: dict[str, Any] = {"clusters": [c.to_dict() for c in self.clusters]}
        if self.p_l is not None:
            network["p_l"] = [list(r) for r in self.p_l]
        else:
            network["p_e"] = [list(r) for r in self.p_e]
        return {
            "name": self.name,
            "description": self.description,
            "network": network,
            "x0": list(self.x0),
            "schedule": self.schedule.to_dict(),
            "disturbance": self.disturbance.to_dict(),
            "horizon": self.horizon,
            "mode": self.mode,
            "step": self.step,
            "certificate": None if self.certificate is None else self.certificate.to_dict(),
            "analyses": self.analyses.to_dict(),
        }

    def dumps(self) -> str:
        return compact_json(self.to_dict())


def _parse_cluster(obj, path: str) -> ClusterSpec:
    agents_raw = _require(obj, "agents", path)
    if not isinstance(agents_raw, list) or not agents_raw:
        raise ScenarioError(f"{path}.agents", "expected a nonempty array of agent indices")
    agents = [_integer(a, f"{path}.agents[{i}]") for i, a in enumerate(agents_raw)]
    leader = _integer(_require(obj, "leader", path), f"{path}.leader")
    edges_raw = obj.get("edges", [])
    if not isinstance(edges_raw, list):
        raise ScenarioError(f"{path}.edges", "expected an array of [from, to, weight]")
    edges = []
    for i, e in enumerate(edges_raw):
        epath = f"{path}.edges[{i}]"
        if not isinstance(e, list) or len(e) != 3:
            raise ScenarioError(epath, "expected [from, to, weight]")
        src = _integer(e[0], f"{epath}[0]")
        dst = _integer(e[1], f"{epath}[1]")
        weight = _number(e[2], f"{epath}[2]", positive=True)
        if src not in agents or dst not in agents:
            raise ScenarioError(epath, f"edge {src}->{dst} leaves the cluster")
        edges.append([src, dst, weight])
    return ClusterSpec(agents, leader, edges)


def _parse_schedule(obj, path: str) -> ScheduleSpec:
    kind = _require(obj, "kind", path)
    if kind == "uniform":
        return ScheduleSpec("uniform", delta=_number(_require(obj, "delta", path), f"{path}.delta", positive=True))
    if kind == "random":
        dmin = _number(_require(obj, "delta_min", path), f"{path}.delta_min", positive=True)
        dmax = _number(_require(obj, "delta_max", path), f"{path}.delta_max", positive=True)
        if dmax < dmin:
            raise ScenarioError(f"{path}.delta_max", "must be at least delta_min")
        seed = _integer(_require(obj, "seed", path), f"{path}.seed")
        return ScheduleSpec("random", delta_min=dmin, delta_max=dmax, seed=seed)
    if kind == "explicit":
        times = _vector(_require(obj, "times", path), f"{path}.times")
        dmin = obj.get("delta_min")
        dmax = obj.get("delta_max")
        dmin = None if dmin is None else _number(dmin, f"{path}.delta_min", positive=True)
        dmax = None if dmax is None else _number(dmax, f"{path}.delta_max", positive=True)
        try:
            ImpulseSchedule.explicit(times, dmin, dmax)
        except ValueError as exc:
            raise ScenarioError(f"{path}.times", str(exc)) from None
        return ScheduleSpec("explicit", delta_min=dmin, delta_max=dmax, times=times)
    raise ScenarioError(f"{path}.kind", f"unknown schedule kind {kind!r}")


def _parse_disturbance(obj, path: str) -> Disturbance:
    if not isinstance(obj, dict):
        raise ScenarioError(path, "expected an object")
    kind = _require(obj, "kind", path)
    if kind == "sinusoid":
        for key in ("amplitude", "omega"):
            _number(_require(obj, key, path), f"{path}.{key}")
        if "phase" in obj:
            _number(obj["phase"], f"{path}.phase")
        if obj.get("mask") is not None:
            _vector(obj["mask"], f"{path}.mask")
    elif kind == "windowed":
        _parse_disturbance(_require(obj, "inner", path), f"{path}.inner")
        _number(_require(obj, "start", path), f"{path}.start")
        _number(_require(obj, "end", path), f"{path}.end")
    elif kind != "zero":
        raise ScenarioError(f"{path}.kind", f"unknown disturbance kind {kind!r}")
    try:
        return disturbance_from_dict(obj)
    except (ValueError, KeyError) as exc:
        raise ScenarioError(path, str(exc)) from None


def _parse_certificate(obj, path: str, n: int) -> CertificateSpec:
    p = _matrix(_require(obj, "P", path), f"{path}.P")
    if len(p) != n or len(p[0]) != n:
        raise ScenarioError(f"{path}.P", f"expected a {n}x{n} matrix")
    alpha = _number(_require(obj, "alpha", path), f"{path}.alpha", positive=True)
    rho = _number(_require(obj, "rho", path), f"{path}.rho", positive=True)
    beta = _number(_require(obj, "beta", path), f"{path}.beta", positive=True)
    if not beta < 1:
        raise ScenarioError(f"{path}.beta", "must lie in (0, 1)")
    n0 = _integer(obj.get("n0", 1), f"{path}.n0")
    if n0 < 1:
        raise ScenarioError(f"{path}.n0", "must be a positive integer")
    t_avg = obj.get("t_avg")
    t_avg = None if t_avg is None else _number(t_avg, f"{path}.t_avg", positive=True)
    restore = _bool(obj.get("restore_structure", False), f"{path}.restore_structure")
    return CertificateSpec(p, alpha, rho, beta, n0, t_avg, restore)


def _parse_analyses(obj, path: str) -> AnalysesSpec:
    if not isinstance(obj, dict):
        raise ScenarioError(path, "expected an object")
    out = AnalysesSpec()
    known = set(out.to_dict())
    for key in obj:
        if key not in known:
            raise ScenarioError(f"{path}.{key}", "unknown field")
    if "limit_terms" in obj:
        out.limit_terms = _integer(obj["limit_terms"], f"{path}.limit_terms")
        if out.limit_terms < 1:
            raise ScenarioError(f"{path}.limit_terms", "must be at least 1")
    if "consensus_tol" in obj:
        out.consensus_tol = _number(obj["consensus_tol"], f"{path}.consensus_tol", positive=True)
    for key in ("hinf", "lyapunov", "closed_form", "product_bound"):
        if key in obj:
            setattr(out, key, _bool(obj[key], f"{path}.{key}"))
    ref = obj.get("reference_consensus_value")
    out.reference_consensus_value = None if ref is None else _number(ref, f"{path}.reference_consensus_value")
    return out


_TOP_LEVEL = {"name", "description", "network", "x0", "schedule", "disturbance", "horizon", "mode",
              "step", "certificate", "analyses"}


def from_dict(doc: Any) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("", "scenario must be a JSON object")
    for key in doc:
        if key not in _TOP_LEVEL:
            raise ScenarioError(key, "unknown field")
    name = doc.get("name", "scenario")
    if not isinstance(name, str):
        raise ScenarioError("name", "expected a string")
    description = doc.get("description", "")
    if not isinstance(description, str):
        raise ScenarioError("description", "expected a string")

    net = _require(doc, "network", "")
    clusters_raw = _require(net, "clusters", "network")
    if not isinstance(clusters_raw, list) or not clusters_raw:
        raise ScenarioError("network.clusters", "expected a nonempty array")
    clusters = [_parse_cluster(c, f"network.clusters[{i}]") for i, c in enumerate(clusters_raw)]
    n = sum(len(c.agents) for c in clusters)

    has_pe, has_pl = "p_e" in net, "p_l" in net
    if has_pe == has_pl:
        raise ScenarioError("network", "give exactly one of p_e and p_l")
    p_e = p_l = None
    if has_pe:
        p_e = _matrix(net["p_e"], "network.p_e")
        if len(p_e) != n or len(p_e[0]) != n:
            raise ScenarioError("network.p_e", f"expected a {n}x{n} matrix")
    else:
        p_l = _matrix(net["p_l"], "network.p_l")
        if len(p_l) != len(clusters) or len(p_l[0]) != len(clusters):
            raise ScenarioError("network.p_l", f"expected a {len(clusters)}x{len(clusters)} matrix")

    x0 = _vector(_require(doc, "x0", ""), "x0")
    if len(x0) != n:
        raise ScenarioError("x0", f"has {len(x0)} entries, network has {n} agents")
    horizon = _number(_require(doc, "horizon", ""), "horizon", positive=True)
    schedule = _parse_schedule(_require(doc, "schedule", ""), "schedule")
    disturbance = _parse_disturbance(doc.get("disturbance", {"kind": "zero"}), "disturbance")
    mode = doc.get("mode", "exact")
    if mode not in ("exact", "rk4"):
        raise ScenarioError("mode", "must be 'exact' or 'rk4'")
    if mode == "exact" and not disturbance.is_zero():
        raise ScenarioError("mode", "exact mode requires a zero disturbance")
    step = _number(doc.get("step", 1e-3), "step", positive=True)
    cert_raw = doc.get("certificate")
    certificate = None if cert_raw is None else _parse_certificate(cert_raw, "certificate", n)
    analyses = _parse_analyses(doc.get("analyses", {}), "analyses")

    scenario = Scenario(name, clusters, x0, schedule, horizon, p_e, p_l, disturbance, mode, step,
                        certificate, analyses, description)
    try:
        scenario.network()
    except (ModelError, ValueError) as exc:
        raise ScenarioError("network", str(exc)) from None
    return scenario


def loads(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"line {exc.lineno}, column {exc.colno}", exc.msg) from None
    return from_dict(doc)


def bundled_path(name: str):
    return resources.files("clustered_consensus").joinpath("scenarios", f"{name}.json")


def load(path_or_name) -> Scenario:
    """Load a scenario file, or a bundled scenario by name (e.g. ``paper-fig1``)."""
    path = Path(path_or_name)
    if path.exists():
        return loads(path.read_text(encoding="utf-8"))
    if str(path_or_name) in BUNDLED:
        return loads(bundled_path(str(path_or_name)).read_text(encoding="utf-8"))
    raise FileNotFoundError(f"no scenario file or bundled scenario named {path_or_name!r}")
