"""Slot-level MDP for the V2V sensing/communication link.

State is ``(q, eta)``: queue length and the SINR in effect for the coming
slot. An action picks the modulation order and the number of OFDM frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import NamedTuple

import numpy as np

from .channel import (
    BlockingLevel,
    LinkParams,
    alignment_fraction,
    effective_rate_bps,
    sample_categorical,
    sinr,
    validate_config,
)
from .sensing import SensingParams, velocity_rmse
from .traffic import PacketLedger, TrafficParams, sample_arrivals

MOD_BITS = (1, 2, 4, 6)


class RewardMode(str, Enum):
    AOU = "aou"
    QUEUE = "queue"


@dataclass(frozen=True)
class RewardWeights:
    w1: float = 1e-5
    w2: float = 1.0
    w3: float = 1e-5
    mode: RewardMode = RewardMode.AOU

    def __post_init__(self):
        object.__setattr__(self, "mode", RewardMode(self.mode))
        if min(self.w1, self.w2, self.w3) < 0:
            raise ValueError("reward weights must be non-negative")


@dataclass(frozen=True)
class MdpState:
    q: int
    eta: float


@dataclass(frozen=True)
class MdpAction:
    mod_bits: int
    n_frames: int

    @classmethod
    def from_indices(cls, mod_index: int, frame_index: int) -> "MdpAction":
        return cls(MOD_BITS[mod_index], frame_index + 1)

    def indices(self) -> tuple[int, int]:
        return MOD_BITS.index(self.mod_bits), self.n_frames - 1


@dataclass(frozen=True)
class StepOutcome:
    reward: float
    q_end: int
    dropped: int
    delivered_rate_pkts: float
    delivered_rate_bps: float
    velocity_rmse: float
    aou_avg: float
    blocking_next: BlockingLevel
    eta_next: float
    # slot context, for logging
    blocking: BlockingLevel
    eta: float
    per: float
    served: int
    arrivals_offered: int
    attempted_pkts: float
    capacity_bps: float
    mod_bits: int
    n_frames: int


class Throughput(NamedTuple):
    attempted_pkts: float
    service_capacity: int
    delivered_pkts: float


class EnvStateError(RuntimeError):
    """Environment used before :meth:`LinkEnv.reset`."""


def throughput_packets(
    action: MdpAction,
    eta: float,
    per: float,
    link: LinkParams,
    n_subcarriers: int,
    packet_bytes: int,
    queued: int | None = None,
    fraction: float | None = None,
) -> Throughput:
    """Packets the action can push through one slot.

    The OFDM payload ``N*m*n/8`` bytes is capped by what the alignment-discounted
    capacity carries in a slot. Service is the floor of that (no fractional
    carry). ``delivered`` discounts the packets actually served, i.e.
    ``min(queued, service)`` when ``queued`` is given, by the PER.
    """
    if action.mod_bits not in MOD_BITS or action.n_frames < 1:
        raise ValueError(f"invalid action {action}")
    ofdm_pkts = n_subcarriers * action.mod_bits * action.n_frames / (8.0 * packet_bytes)
    capacity_pkts = effective_rate_bps(eta, link, fraction) * link.slot_s / (8.0 * packet_bytes)
    attempted = min(ofdm_pkts, capacity_pkts)
    service = int(math.floor(attempted))
    served = service if queued is None else min(queued, service)
    return Throughput(attempted, service, (1.0 - per) * served)


def compute_reward(aou_avg: float, q: float, rmse: float, dropped: float, weights: RewardWeights) -> float:
    """Negative weighted cost; the first term is buffer AoU or raw queue length."""
    first = aou_avg if weights.mode is RewardMode.AOU else q
    return -(weights.w1 * first + weights.w2 * rmse + weights.w3 * dropped)


class LinkEnv:
    """One V2V link with its transmit buffer.

    Randomness comes from two generators handed to :meth:`reset`: the
    channel stream drives blocking and PER draws, the traffic stream drives
    arrivals. Every slot consumes exactly two channel uniforms and one
    Poisson draw regardless of the action, so runs with different agents
    see identical channel and arrival traces.
    """

    def __init__(
        self,
        link: LinkParams,
        sensing: SensingParams,
        traffic: TrafficParams,
        weights: RewardWeights = RewardWeights(),
        sinr_db_center: float = 0.0,
        sinr_db_scale: float = 30.0,
    ):
        problems = validate_config(link, sensing, traffic)
        if problems:
            raise ValueError("invalid environment configuration: " + "; ".join(problems))
        self.link = link
        self.sensing = sensing
        self.traffic = traffic
        self.weights = weights
        self.sinr_db_center = sinr_db_center
        self.sinr_db_scale = sinr_db_scale

        self._eta_by_level = tuple(sinr(level, link) for level in BlockingLevel)
        self._full_fraction = alignment_fraction(link).fraction
        self.ledger = PacketLedger(traffic.q_max, traffic.packet_bytes)
        self._channel_rng: np.random.Generator | None = None
        self._traffic_rng: np.random.Generator | None = None
        self.blocking = BlockingLevel.LOS
        self.per = link.per_values[0]
        self._aligning = True

    @property
    def eta(self) -> float:
        return self._eta_by_level[self.blocking]

    @property
    def state(self) -> MdpState:
        return MdpState(len(self.ledger), self.eta)

    def with_weights(self, weights: RewardWeights) -> "LinkEnv":
        return LinkEnv(self.link, self.sensing, self.traffic, weights, self.sinr_db_center, self.sinr_db_scale)

    def features(self, state: MdpState) -> np.ndarray:
        """Normalized observation: ``q/q_max`` and scaled SINR in dB."""
        eta_db = 10.0 * math.log10(state.eta)
        return np.array(
            [state.q / self.traffic.q_max, (eta_db - self.sinr_db_center) / self.sinr_db_scale]
        )

    def reset(self, channel_rng: np.random.Generator, traffic_rng: np.random.Generator | None = None) -> MdpState:
        self._channel_rng = channel_rng
        self._traffic_rng = traffic_rng if traffic_rng is not None else channel_rng
        self.ledger.clear()
        self.blocking = BlockingLevel(sample_categorical(self.link.blocking_probs, channel_rng))
        self.per = self.link.per_values[sample_categorical(self.link.per_probs, channel_rng)]
        self._aligning = True
        return self.state

    def step(self, action: MdpAction) -> tuple[MdpState, StepOutcome]:
        if self._channel_rng is None:
            raise EnvStateError("step() called before reset()")
        if not 1 <= action.n_frames <= self.sensing.n_frames_max:
            raise ValueError(f"n_frames={action.n_frames} outside [1, {self.sensing.n_frames_max}]")
        link = self.link
        eta, blocking = self.eta, self.blocking

        offered = sample_arrivals(self.traffic.lambda_slot, self._traffic_rng)
        fraction = self._full_fraction if self._aligning else 1.0
        capacity_bps = effective_rate_bps(eta, link, fraction)
        tp = throughput_packets(
            action, eta, 0.0, link, self.sensing.n_subcarriers, self.traffic.packet_bytes, fraction=fraction
        )
        report = self.ledger.advance(offered, tp.service_capacity)
        rmse = velocity_rmse(action.n_frames, eta, self.sensing)

        self.per = link.per_values[sample_categorical(link.per_probs, self._channel_rng)]
        delivered = (1.0 - self.per) * report.served
        reward = compute_reward(report.aou_avg, report.q_end, rmse, report.dropped, self.weights)

        previous = self.blocking
        self.blocking = BlockingLevel(sample_categorical(link.blocking_probs, self._channel_rng))
        self._aligning = self.blocking != previous if link.align_on_block_change else True

        outcome = StepOutcome(
            reward=reward,
            q_end=report.q_end,
            dropped=report.dropped,
            delivered_rate_pkts=delivered,
            delivered_rate_bps=delivered * self.traffic.packet_bytes * 8.0 / link.slot_s,
            velocity_rmse=rmse,
            aou_avg=report.aou_avg,
            blocking_next=self.blocking,
            eta_next=self.eta,
            blocking=blocking,
            eta=eta,
            per=self.per,
            served=report.served,
            arrivals_offered=offered,
            attempted_pkts=tp.attempted_pkts,
            capacity_bps=capacity_bps,
            mod_bits=action.mod_bits,
            n_frames=action.n_frames,
        )
        return self.state, outcome


def rescored(outcome: StepOutcome, weights: RewardWeights) -> StepOutcome:
    """Same slot metrics under a different reward definition."""
    return replace(
        outcome,
        reward=compute_reward(outcome.aou_avg, outcome.q_end, outcome.velocity_rmse, outcome.dropped, weights),
    )


@dataclass(frozen=True)
class Scenario:
    blocking_probs: tuple[float, ...]
    per_probs: tuple[float, ...]
    lambda_slot: float


# Arrival means are the per-second rates 40k/120k/180k times the 2 ms slot,
# scaled down 40x so offered load stays comparable to the per-slot OFDM payload.
SCENARIOS: dict[str, Scenario] = {
    "poor": Scenario((0.1, 0.1, 0.1, 0.7), (0.8, 0.1, 0.1), 2.0),
    "normal": Scenario((0.1, 0.7, 0.1, 0.1), (0.1, 0.8, 0.1), 6.0),
    "strong": Scenario((0.7, 0.1, 0.1, 0.1), (0.1, 0.1, 0.8), 9.0),
}
