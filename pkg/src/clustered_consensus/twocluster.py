"""The seven-agent, two-cluster benchmark (clusters of 4 and 3 agents).

Agent indices are zero-based: the leaders are agents 0 and 4.
"""

import numpy as np

from .graph import ClusteredNetwork

L1 = np.array([
    [2.0, -1.0, 0.0, -1.0],
    [-1.0, 2.0, -1.0, 0.0],
    [-1.0, -1.0, 2.0, 0.0],
    [-1.0, -1.0, 0.0, 2.0],
])

L2 = np.array([
    [3.0, -3.0, 0.0],
    [0.0, 2.0, -2.0],
    [-1.0, 0.0, 1.0],
])

LEADERS = (0, 4)

P_E = np.array([
    [0.5, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0],
    [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 0.1, 0.1, 0.0, 0.8, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
])

P_L = np.array([
    [0.45, 0.55],
    [0.55, 0.45],
])

X0 = np.array([0.0, -1.0, -2.0, -4.0, 2.0, 3.0, 4.0])

# reference LMI solution, two decimals, for alpha = 1, rho = 1, beta = 0.7
REFERENCE_P = np.array([
    [2.36, -0.69, -0.42, -1.25, 0.0, 0.0, 0.0],
    [-0.69, 2.36, -1.25, -0.42, 0.0, 0.0, 0.0],
    [-0.42, -1.25, 1.97, -0.30, 0.0, 0.0, 0.0],
    [-1.25, -0.42, -0.30, 1.96, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 2.02, -1.6, -0.39],
    [0.0, 0.0, 0.0, 0.0, -1.6, 2.94, -1.30],
    [0.0, 0.0, 0.0, 0.0, -0.39, -1.3, 1.69],
])

ALPHA = 1.0
RHO = 1.0
BETA = 0.7

# reference consensus value quoted for the leaders-only variant
REFERENCE_LEADERS_ONLY_CONSENSUS = 2.513

DISTURBANCE_AMPLITUDE = 0.1
DISTURBANCE_OMEGA = 2.0


def laplacian() -> np.ndarray:
    lap = np.zeros((7, 7))
    lap[:4, :4] = L1
    lap[4:, 4:] = L2
    return lap


def network(leaders_only: bool = False) -> ClusteredNetwork:
    if leaders_only:
        return ClusteredNetwork.from_laplacians([L1, L2], LEADERS, p_l=P_L)
    return ClusteredNetwork.from_laplacians([L1, L2], LEADERS, p_e=P_E)
