import numpy as np
import pytest

from oracles import RMSE_100_LOS_CALIBRATED, velocity_rmse as oracle_rmse
from v2v_isac.channel import BlockingLevel, link_preset, sinr
from v2v_isac.env import (
    MOD_BITS,
    SCENARIOS,
    EnvStateError,
    LinkEnv,
    MdpAction,
    RewardMode,
    RewardWeights,
    compute_reward,
    rescored,
    throughput_packets,
)
from v2v_isac.sensing import SensingParams
from v2v_isac.traffic import PacketLedger, TrafficParams


class ScriptedRng:
    """Stand-in generator replaying fixed uniforms and Poisson counts."""

    def __init__(self, uniforms=(), counts=()):
        self.uniforms = list(uniforms)
        self.counts = list(counts)

    def random(self):
        return self.uniforms.pop(0)

    def poisson(self, lam):
        return self.counts.pop(0)


def make_env(blocking=(0.7, 0.1, 0.1, 0.1), per_probs=(0.1, 0.1, 0.8), lam=9.0, mode="aou"):
    link = link_preset("calibrated", blocking_probs=blocking, per_probs=per_probs)
    return LinkEnv(link, SensingParams(), TrafficParams(lambda_slot=lam), RewardWeights(mode=mode))


def test_reset_los_state():
    env = make_env(blocking=(1, 0, 0, 0))
    state = env.reset(np.random.default_rng(0))
    assert state.q == 0
    assert state.eta == pytest.approx(345.8, abs=0.05)


def test_reset_deterministic_and_empty():
    for seed in range(5):
        a = make_env().reset(np.random.default_rng(seed))
        b = make_env().reset(np.random.default_rng(seed))
        assert a == b and a.q == 0


def test_step_before_reset():
    with pytest.raises(EnvStateError):
        make_env().step(MdpAction(6, 100))


def test_step_composed_example():
    env = make_env(blocking=(1, 0, 0, 0))
    env.reset(ScriptedRng(uniforms=[0.5, 0.5]))
    env.ledger = PacketLedger(200, 4000, ages=range(9, -1, -1))
    env._channel_rng = ScriptedRng(uniforms=[0.95, 0.3])  # b' -> 0.003, next blocking -> LoS
    env._traffic_rng = ScriptedRng(counts=[6])
    state, out = env.step(MdpAction(6, 100))

    assert out.served == 9
    assert out.q_end == 7 and state.q == 7
    assert out.dropped == 0
    assert out.per == 0.003
    assert out.delivered_rate_pkts == pytest.approx(8.973, abs=1e-12)
    assert out.delivered_rate_bps == pytest.approx(143.568e6, rel=1e-12)
    assert out.attempted_pkts == pytest.approx(9.6)
    assert out.velocity_rmse == pytest.approx(RMSE_100_LOS_CALIBRATED, rel=1e-9)
    assert out.aou_avg == pytest.approx(1 / 8)
    assert out.reward == pytest.approx(-(1e-5 * 0.125 + RMSE_100_LOS_CALIBRATED), rel=1e-12)
    assert out.blocking_next == BlockingLevel.LOS


def test_only_sensing_term_on_idle_link():
    env = make_env(lam=0.0)
    env.reset(np.random.default_rng(2))
    eta = env.eta
    _, out = env.step(MdpAction(1, 1))
    assert (out.served, out.dropped, out.q_end) == (0, 0, 0)
    assert out.reward == pytest.approx(-oracle_rmse(1, eta), rel=1e-12)


def test_degenerate_blocking_resample():
    env = make_env(blocking=(0, 0, 0, 1))
    env.reset(np.random.default_rng(3))
    for _ in range(50):
        _, out = env.step(MdpAction(2, 10))
        assert out.blocking_next == BlockingLevel.V3


def test_reward_uses_pre_resample_sinr():
    env = make_env()
    state = env.reset(np.random.default_rng(9))
    for _ in range(200):
        new_state, out = env.step(MdpAction(4, 50))
        assert out.eta == state.eta
        assert out.velocity_rmse == pytest.approx(oracle_rmse(50, state.eta), rel=1e-12)
        assert new_state.eta == out.eta_next
        state = new_state


def test_throughput_examples():
    link = link_preset("calibrated")
    eta = sinr(BlockingLevel.LOS, link)
    tp = throughput_packets(MdpAction(6, 100), eta, 0.003, link, 512, 4000, queued=20)
    assert tp.attempted_pkts == pytest.approx(9.6)
    assert tp.service_capacity == 9
    assert tp.delivered_pkts == pytest.approx(8.973)
    tp = throughput_packets(MdpAction(1, 1), eta, 0.0, link, 512, 4000)
    assert tp.attempted_pkts == pytest.approx(0.016) and tp.service_capacity == 0
    tp = throughput_packets(MdpAction(6, 100), eta, 1.0, link, 512, 4000)
    assert tp.service_capacity == 9 and tp.delivered_pkts == 0.0
    tp = throughput_packets(MdpAction(6, 100), eta, 0.0, link, 512, 4000, queued=4)
    assert tp.delivered_pkts == 4.0


def test_blocked_links_carry_nothing():
    link = link_preset("calibrated")
    for level in (BlockingLevel.V2, BlockingLevel.V3):
        tp = throughput_packets(MdpAction(6, 100), sinr(level, link), 0.0, link, 512, 4000)
        assert tp.service_capacity == 0


def test_throughput_rejects_bad_action():
    link = link_preset("calibrated")
    with pytest.raises(ValueError):
        throughput_packets(MdpAction(3, 10), 10.0, 0.0, link, 512, 4000)


def test_step_rejects_frames_out_of_range():
    env = make_env()
    env.reset(np.random.default_rng(0))
    with pytest.raises(ValueError):
        env.step(MdpAction(2, 101))


def test_reward_examples():
    w = RewardWeights()
    assert compute_reward(50, 0, 0.1, 10, w) == pytest.approx(-0.1006)
    assert compute_reward(0, 0, 0, 0, w) == 0
    assert compute_reward(0, 100, 0.5, 0, RewardWeights(mode="queue")) == pytest.approx(-0.501)


def test_reward_mode_changes_only_reward():
    a, b = make_env(mode="aou"), make_env(mode="queue")
    a.reset(np.random.default_rng(4), np.random.default_rng(5))
    b.reset(np.random.default_rng(4), np.random.default_rng(5))
    rng = np.random.default_rng(6)
    for _ in range(300):
        action = MdpAction(MOD_BITS[rng.integers(4)], int(rng.integers(1, 101)))
        _, oa = a.step(action)
        _, ob = b.step(action)
        assert rescored(oa, b.weights) == ob
        assert oa.q_end == ob.q_end and oa.velocity_rmse == ob.velocity_rmse


def test_actions_do_not_change_random_streams():
    a, b = make_env(), make_env()
    a.reset(np.random.default_rng(12))
    b.reset(np.random.default_rng(12))
    for _ in range(300):
        _, oa = a.step(MdpAction(1, 1))
        _, ob = b.step(MdpAction(6, 100))
        assert (oa.blocking, oa.per, oa.arrivals_offered) == (ob.blocking, ob.per, ob.arrivals_offered)


def test_features():
    env = make_env()
    env.reset(np.random.default_rng(0))
    feats = env.features(type(env.state)(q=50, eta=1000.0))
    assert feats.tolist() == pytest.approx([0.25, 1.0])


def test_action_indices_round_trip():
    for i in range(4):
        for j in (0, 41, 99):
            action = MdpAction.from_indices(i, j)
            assert action.indices() == (i, j)
    assert MdpAction.from_indices(3, 99) == MdpAction(6, 100)


def test_invalid_config_rejected():
    link = link_preset("calibrated", per_probs=(0.5, 0.5, 0.5))
    with pytest.raises(ValueError, match="sum to 1.5"):
        LinkEnv(link, SensingParams(), TrafficParams())


def test_negative_weights_rejected():
    with pytest.raises(ValueError):
        RewardWeights(w1=-1)
    assert RewardWeights(mode="queue").mode is RewardMode.QUEUE


def test_scenario_presets():
    assert SCENARIOS["poor"].blocking_probs == (0.1, 0.1, 0.1, 0.7)
    assert SCENARIOS["poor"].per_probs == (0.8, 0.1, 0.1)
    assert SCENARIOS["strong"].blocking_probs[0] == 0.7
    assert [SCENARIOS[s].lambda_slot for s in ("poor", "normal", "strong")] == [2.0, 6.0, 9.0]
