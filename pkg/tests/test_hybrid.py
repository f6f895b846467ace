import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clustered_consensus import twocluster
from clustered_consensus.graph import ClusteredNetwork
from clustered_consensus.hybrid import (
    FLOW, POST_JUMP, PRE_JUMP, ImpulseSchedule, InvalidNetworkError, Sinusoid, Windowed,
    ZeroDisturbance, apply_impulse, disturbance_from_dict, disturbance_norm, random_intervals,
    simulate,
)
from clustered_consensus.linalg import left_null_vector

X0 = twocluster.X0


def test_apply_impulse_benchmark(net4):
    x = apply_impulse(X0, net4)
    assert x[0] == pytest.approx(1.5, abs=1e-15)
    assert x[4] == pytest.approx(1.3, abs=1e-15)
    unchanged = [1, 2, 3, 5, 6]
    assert np.array_equal(x[unchanged], X0[unchanged])


def test_apply_impulse_identity_and_consensus(net4):
    net = ClusteredNetwork.from_laplacians([twocluster.L1, twocluster.L2], twocluster.LEADERS, p_e=np.eye(7))
    assert np.array_equal(apply_impulse(X0, net), X0)
    assert np.allclose(apply_impulse(np.ones(7), net4), np.ones(7), atol=1e-15)
    with pytest.raises(ValueError):
        apply_impulse(np.ones(3), net4)


def test_single_agent_is_constant():
    net = ClusteredNetwork.from_laplacians([np.zeros((1, 1))], [0], p_e=np.eye(1))
    traj = simulate(net, [3.25], ImpulseSchedule((), 1.0, 1.0), horizon=5.0, step=0.1)
    assert np.all(traj.states == 3.25)
    assert traj.times[-1] == 5.0


def test_sample_layout(net4):
    traj = simulate(net4, X0, ImpulseSchedule.uniform(0.5, 2.0), horizon=2.2, step=0.1)
    assert traj.times[0] == 0.0 and traj.times[-1] == pytest.approx(2.2)
    pairs = traj.jump_indices()
    assert [traj.times[i] for i, _ in pairs] == pytest.approx([0.5, 1.0, 1.5, 2.0])
    for pre, post in pairs:
        assert traj.tags[pre] == PRE_JUMP and traj.tags[post] == POST_JUMP
        assert traj.times[pre] == traj.times[post]
        assert np.allclose(traj.states[post], net4.p_e @ traj.states[pre], atol=1e-15)
    assert np.all(np.diff(traj.times) >= 0)
    assert traj.metadata["impulses"] == 4


def test_impulses_beyond_horizon_are_ignored(net4):
    traj = simulate(net4, X0, ImpulseSchedule.uniform(0.5, 10.0), horizon=1.2, step=0.1)
    assert traj.metadata["impulses"] == 2


def test_step_must_be_below_shortest_interval(net4):
    with pytest.raises(ValueError):
        simulate(net4, X0, ImpulseSchedule.uniform(0.5, 5.0), horizon=5.0, step=0.5)


def test_exact_mode_requires_zero_disturbance(net4):
    with pytest.raises(ValueError):
        simulate(net4, X0, ImpulseSchedule.uniform(0.5, 5.0), w=Sinusoid(0.1, 2.0), horizon=5.0)


def test_invalid_network_needs_force():
    net = ClusteredNetwork.from_laplacians([twocluster.L1, twocluster.L2], twocluster.LEADERS, p_e=np.eye(7))
    sched = ImpulseSchedule.uniform(0.5, 2.0)
    with pytest.raises(InvalidNetworkError):
        simulate(net, X0, sched, horizon=2.0, step=0.1)
    traj = simulate(net, X0, sched, horizon=2.0, step=0.1, force=True)
    assert traj.metadata["forced"] is True


def test_schedule_validation():
    with pytest.raises(ValueError):
        ImpulseSchedule((0.5, 0.4), 0.1, 1.0)
    with pytest.raises(ValueError):
        ImpulseSchedule((0.5, 2.0), 0.1, 1.0)
    with pytest.raises(ValueError):
        ImpulseSchedule((0.5,), 0.0, 1.0)
    with pytest.raises(ValueError):
        ImpulseSchedule.uniform(0.0, 1.0)


def test_random_schedule_is_seeded_and_bounded():
    a = ImpulseSchedule.random(0.2, 0.8, 20.0, seed=4)
    b = ImpulseSchedule.random(0.2, 0.8, 20.0, seed=4)
    assert a == b
    assert np.all((a.intervals >= 0.2) & (a.intervals <= 0.8))
    gen = random_intervals(0.2, 0.8, seed=4)
    assert np.allclose([next(gen) for _ in range(5)], a.intervals[:5])


@pytest.mark.parametrize("mode", ["exact", "rk4"])
def test_cluster_weighted_average_conserved_during_flow(net4, mode):
    # r_tau^T x_tau is invariant between impulses since r_tau^T L_tau = 0
    traj = simulate(net4, X0, ImpulseSchedule.uniform(0.5, 3.0), horizon=3.0, mode=mode, step=0.01)
    blocks = [(slice(0, 4), left_null_vector(twocluster.L1)), (slice(4, 7), left_null_vector(twocluster.L2))]
    for lo, hi in traj.segments():
        for sl, r in blocks:
            vals = traj.states[lo:hi + 1, sl] @ r
            assert np.ptp(vals) < 1e-12


def test_semigroup_restart(net4):
    sched = ImpulseSchedule.uniform(0.5, 6.0)
    full = simulate(net4, X0, sched, horizon=6.0, step=0.05)
    first = simulate(net4, X0, sched, horizon=2.25, step=0.05)
    rest = ImpulseSchedule(tuple(t for t in sched.times if t > 2.25), 0.25, 0.5, t0=2.25)
    second = simulate(net4, first.terminal, rest, horizon=6.0, step=0.05)
    assert np.allclose(second.terminal, full.terminal, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(value=st.floats(-100, 100), delta=st.floats(0.2, 2.0))
def test_consensus_is_absorbing(value, delta):
    traj = simulate(twocluster.network(), np.full(7, value), ImpulseSchedule.uniform(delta, 5.0), horizon=5.0, step=0.1)
    assert np.max(np.abs(traj.states - value)) <= 1e-12 * max(1.0, abs(value))


def test_exact_and_rk4_agree(net4):
    sched = ImpulseSchedule.uniform(0.5, 10.0)
    a = simulate(net4, X0, sched, horizon=10.0, mode="exact", step=1e-3)
    b = simulate(net4, X0, sched, horizon=10.0, mode="rk4", step=1e-3)
    assert np.array_equal(a.times, b.times) and a.tags == b.tags
    assert np.max(np.abs(a.states - b.states)) < 1e-8


def test_rk4_forced_response_matches_variation_of_constants():
    # scalar single agent: x' = a sin(wt), x(0)=0 -> x = a (1 - cos wt) / w
    net = ClusteredNetwork.from_laplacians([np.zeros((1, 1))], [0], p_e=np.eye(1))
    traj = simulate(net, [0.0], ImpulseSchedule((), 1.0, 1.0), w=Sinusoid(0.3, 2.0), horizon=4.0,
                    mode="rk4", step=1e-2)
    expected = 0.3 * (1 - np.cos(2.0 * traj.times)) / 2.0
    assert np.max(np.abs(traj.states[:, 0] - expected)) < 1e-9


def test_disturbance_norms():
    assert disturbance_norm(ZeroDisturbance(), 5.0, 0.01, n=3) == 0.0
    assert disturbance_norm(Sinusoid(1.0, 1.0), 2 * math.pi, 1e-3) == pytest.approx(math.sqrt(math.pi), abs=1e-9)
    t = 30.0
    expected = math.sqrt(7 * 0.01 * (t / 2 - math.sin(4 * t) / 8))
    assert disturbance_norm(Sinusoid(0.1, 2.0), t, 1e-3, n=7) == pytest.approx(expected, rel=1e-9)


def test_disturbance_shapes_and_round_trip():
    s = Sinusoid(0.5, 3.0, phase=0.2, mask=(1, 0, 1))
    v = s.evaluate(0.7, 3)
    assert v[1] == 0.0 and v[0] == pytest.approx(0.5 * math.sin(3.0 * 0.7 + 0.2))
    win = Windowed(s, 1.0, 2.0)
    assert np.all(win.evaluate(0.5, 3) == 0.0) and np.array_equal(win.evaluate(1.5, 3), s.evaluate(1.5, 3))
    for d in (ZeroDisturbance(), s, win):
        assert disturbance_from_dict(d.to_dict()).to_dict() == d.to_dict()


def test_csv_layout(net4):
    traj = simulate(net4, X0, ImpulseSchedule.uniform(0.5, 1.0), horizon=1.0, step=0.25)
    lines = traj.csv_text().splitlines()
    assert lines[0] == "t,tag,x1,x2,x3,x4,x5,x6,x7"
    assert lines[1].startswith("0,flow,0,-1,-2,-4,2,3,4")
    assert len(lines) == 1 + len(traj.times)
    assert {line.split(",")[1] for line in lines[1:]} == {FLOW, PRE_JUMP, POST_JUMP}
