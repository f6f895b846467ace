"""Consensus of single-integrator agents over clustered networks with hybrid communication.

Continuous-time diffusion runs inside each cluster; at impulse times the
states are reset through a row-stochastic matrix that links the clusters.
"""

from .graph import ClusteredNetwork, ClusterPartition, DirectedWeightedGraph, build_laplacian, validate_network
from .hybrid import ImpulseSchedule, Sinusoid, Windowed, ZeroDisturbance, simulate
from .analysis import limit_product, predict_consensus_closed_form
from .certificate import Certificate, check_lmi_flow, check_lmi_jump

__all__ = [
    "Certificate",
    "ClusterPartition",
    "ClusteredNetwork",
    "DirectedWeightedGraph",
    "ImpulseSchedule",
    "Sinusoid",
    "Windowed",
    "ZeroDisturbance",
    "build_laplacian",
    "check_lmi_flow",
    "check_lmi_jump",
    "limit_product",
    "predict_consensus_closed_form",
    "simulate",
    "validate_network",
]

__version__ = "0.1.0"
