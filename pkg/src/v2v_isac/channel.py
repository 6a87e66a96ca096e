"""Blocking-dependent mmWave V2V link model.

Path loss, SINR, beam-alignment overhead and alignment-discounted Shannon
rate for a single 60 GHz link whose line of sight may be obstructed by up to
three vehicles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import NamedTuple, Sequence

import numpy as np

SPEED_OF_LIGHT = 3.0e8  # m/s; rounded value used by all resolution figures
ATMOSPHERIC_DB_PER_M = 15.0 / 1000.0  # oxygen absorption at 60 GHz

# Per blocking level, ordered LoS, 1V, 2V, 3V.
PATH_LOSS_EXPONENTS = (2.10, 1.22, 0.453, 0.240)
PATH_LOSS_INTERCEPTS_DB = (75.1, 94.6, 126.0, 135.0)
INTERFERENCE_TO_NOISE_DB = (24.0, 24.5, 37.0, 37.5)

PROB_TOLERANCE = 1e-9


class InfeasibleBeamwidthError(ValueError):
    """Alignment would consume the whole slot."""


class BlockingLevel(IntEnum):
    """Number of vehicles obstructing the line of sight."""

    LOS = 0
    V1 = 1
    V2 = 2
    V3 = 3

    @property
    def delta(self) -> float:
        return PATH_LOSS_EXPONENTS[self]

    @property
    def beta(self) -> float:
        return PATH_LOSS_INTERCEPTS_DB[self]

    @property
    def inr_db(self) -> float:
        return INTERFERENCE_TO_NOISE_DB[self]

    @property
    def label(self) -> str:
        return ("LoS", "1V", "2V", "3V")[self]


class PathLoss(NamedTuple):
    loss_db: float
    gain_linear: float


class Alignment(NamedTuple):
    tau_s: float
    fraction: float


@dataclass(frozen=True)
class LinkParams:
    """Physical-layer constants of the link.

    ``pilot_s`` defaults to 1% of the slot. Probability vectors are indexed
    by blocking level (``blocking_probs``) and by PER entry (``per_probs``).
    """

    carrier_hz: float = 60e9
    bandwidth_hz: float = 2.16e9
    noise_dbm_hz: float = -174.0
    tx_power_dbm: float = 15.0
    antenna_gain_linear: float = 10 ** 2.5
    sector_beamwidth_deg: float = 45.0
    halfpower_beamwidth_deg: float = 10.0
    pilot_s: float = 0.01 * 0.002
    slot_s: float = 0.002
    distance_m: float = 10.0
    blocking_probs: tuple[float, ...] = (0.7, 0.1, 0.1, 0.1)
    per_values: tuple[float, ...] = (0.10, 0.01, 0.003)
    per_probs: tuple[float, ...] = (0.1, 0.1, 0.8)
    align_on_block_change: bool = False

    def __post_init__(self):
        # accept lists from config parsing; keep the dataclass hashable
        for name in ("blocking_probs", "per_values", "per_probs"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))


# Antenna presets. "paper-nominal" keeps the tabulated gain of 1.5 and the
# 50 m maximum range; "calibrated" uses 25 dBi per end over 10 m so that the
# LoS link actually supports multi-Gbps rates.
LINK_PRESETS: dict[str, dict] = {
    "paper-nominal": {"antenna_gain_linear": 1.5, "distance_m": 50.0},
    "calibrated": {"antenna_gain_linear": 10 ** 2.5, "distance_m": 10.0},
}


def link_preset(name: str, **overrides) -> LinkParams:
    try:
        base = LINK_PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown link preset {name!r}; choose from {sorted(LINK_PRESETS)}") from None
    return LinkParams(**{**base, **overrides})


def path_loss(distance_m: float, level: BlockingLevel) -> PathLoss:
    """Log-distance path loss with blocking-dependent fit plus 15 dB/km absorption."""
    if not distance_m > 0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    level = BlockingLevel(level)
    loss_db = (
        10.0 * level.delta * math.log10(distance_m)
        + level.beta
        + ATMOSPHERIC_DB_PER_M * distance_m
    )
    return PathLoss(loss_db, 10.0 ** (-loss_db / 10.0))


def check_probabilities(probs: Sequence[float], name: str = "probs") -> list[str]:
    """Return human-readable problems with a probability vector (empty if fine)."""
    problems = []
    arr = np.asarray(probs, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        return [f"{name} must be a non-empty vector"]
    if not np.all(np.isfinite(arr)):
        problems.append(f"{name} has non-finite entries")
    elif np.any(arr < 0):
        problems.append(f"{name} has negative entries")
    total = float(arr.sum())
    if abs(total - 1.0) > PROB_TOLERANCE:
        problems.append(f"{name}: probabilities sum to {total:g}")
    return problems


def sample_categorical(probs: Sequence[float], rng: np.random.Generator) -> int:
    """Draw an index with ``P(i) = probs[i]`` by inverse-CDF on one uniform.

    Exactly one uniform is consumed per call, so two scenarios driven by the
    same stream see common random numbers.
    """
    problems = check_probabilities(probs)
    if problems:
        raise ValueError("; ".join(problems))
    cdf = np.cumsum(probs)
    u = rng.random() * cdf[-1]
    return int(np.searchsorted(cdf, u, side="right"))


def noise_floor_dbm(params: LinkParams) -> float:
    return params.noise_dbm_hz + 10.0 * math.log10(params.bandwidth_hz)


def sinr_db(level: BlockingLevel, params: LinkParams) -> float:
    """Link SINR in dB.

    The interference term is an interference-to-noise ratio per blocking
    level, so the denominator is ``N0*B*(1 + INR)``. Everything is summed in
    dB to avoid underflow of the linear path gain.
    """
    level = BlockingLevel(level)
    received = (
        params.tx_power_dbm
        + 2.0 * 10.0 * math.log10(params.antenna_gain_linear)
        - path_loss(params.distance_m, level).loss_db
    )
    denominator = noise_floor_dbm(params) + 10.0 * math.log10(1.0 + 10.0 ** (level.inr_db / 10.0))
    return received - denominator


def sinr(level: BlockingLevel, params: LinkParams) -> float:
    return 10.0 ** (sinr_db(level, params) / 10.0)


def alignment_fraction(params: LinkParams) -> Alignment:
    """Alignment time ``(psi/phi)^2 * T_p`` and the share of the slot left for data."""
    psi, phi = params.sector_beamwidth_deg, params.halfpower_beamwidth_deg
    tau = (psi * psi) / (phi * phi) * params.pilot_s
    if tau >= params.slot_s:
        raise InfeasibleBeamwidthError(
            f"alignment time {tau:g} s does not fit in slot of {params.slot_s:g} s"
        )
    return Alignment(tau, 1.0 - tau / params.slot_s)


def effective_rate_bps(eta: float, params: LinkParams, fraction: float | None = None) -> float:
    """Alignment-discounted Shannon rate in bits/s."""
    if fraction is None:
        fraction = alignment_fraction(params).fraction
    return fraction * params.bandwidth_hz * math.log2(1.0 + eta)


def validate_config(params: LinkParams, sensing=None, traffic=None) -> list[str]:
    """Collect every constraint violation; an empty list means the config is usable.

    ``sensing`` and ``traffic`` are optional :class:`SensingParams` and
    :class:`TrafficParams`; checks touching them are skipped when absent.
    """
    violations: list[str] = []
    violations += check_probabilities(params.blocking_probs, "blocking_probs")
    violations += check_probabilities(params.per_probs, "per_probs")
    if len(params.blocking_probs) != len(BlockingLevel):
        violations.append(f"blocking_probs needs {len(BlockingLevel)} entries, got {len(params.blocking_probs)}")
    if len(params.per_probs) != len(params.per_values):
        violations.append(
            f"per_probs has {len(params.per_probs)} entries but per_values has {len(params.per_values)}"
        )
    if any(not 0.0 <= b <= 1.0 for b in params.per_values):
        violations.append("per_values entries must lie in [0, 1]")
    for name in ("slot_s", "pilot_s", "distance_m", "bandwidth_hz", "carrier_hz", "antenna_gain_linear"):
        if not getattr(params, name) > 0:
            violations.append(f"{name} must be positive")
    psi, phi = params.sector_beamwidth_deg, params.halfpower_beamwidth_deg
    if params.slot_s > 0 and phi * phi <= (params.pilot_s / params.slot_s) * psi * psi:
        # equality leaves zero time for data
        violations.append(
            "beamwidth infeasible: phi^2 must exceed (T_p/slot) * psi^2 "
            f"({phi:g}^2 vs {params.pilot_s / params.slot_s:g} * {psi:g}^2)"
        )

    if sensing is not None:
        if sensing.carrier_hz != params.carrier_hz or sensing.bandwidth_hz != params.bandwidth_hz:
            violations.append("sensing carrier/bandwidth differ from the link's")
        if sensing.n_subcarriers < 1:
            violations.append("n_subcarriers must be >= 1")
        elif sensing.frame_period_s <= 0:
            violations.append("frame_period_s must be positive")
        else:
            # subcarrier orthogonality needs v_max well below c*df/(2 f_c)
            v_limit = SPEED_OF_LIGHT * sensing.subcarrier_spacing_hz / (2.0 * sensing.carrier_hz)
            if 10.0 * sensing.v_max >= v_limit:
                violations.append(
                    f"v_max={sensing.v_max:g} m/s is not << {v_limit:g} m/s (orthogonality)"
                )
        if sensing.n_frames_max < 1:
            violations.append("n_frames_max must be >= 1")

    if traffic is not None:
        if traffic.lambda_slot < 0:
            violations.append("lambda_slot must be non-negative")
        if traffic.q_max < 1:
            violations.append("q_max must be >= 1")
        if traffic.packet_bytes <= 0:
            violations.append("packet_bytes must be positive")
    return violations
