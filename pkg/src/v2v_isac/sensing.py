"""OFDM radar resolution and velocity-estimation accuracy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .channel import SPEED_OF_LIGHT


@dataclass(frozen=True)
class SensingParams:
    """Radar-side waveform parameters.

    ``frame_period_s`` is the spacing between OFDM frames. Its default tiles
    a 2 ms slot with 100 frames. ``resolution_period_s`` optionally replaces
    it in the velocity-resolution formula only.
    """

    n_subcarriers: int = 512
    carrier_hz: float = 60e9
    bandwidth_hz: float = 2.16e9
    frame_period_s: float = 2e-5
    n_frames_max: int = 100
    v_max: float = 50.0
    d_max: float = 50.0
    resolution_period_s: float | None = None

    @property
    def subcarrier_spacing_hz(self) -> float:
        return self.bandwidth_hz / self.n_subcarriers


class Resolution(NamedTuple):
    delta_d_m: float
    delta_v_ms: float


def _check_frames(n_frames: int, params: SensingParams) -> None:
    if not 1 <= n_frames <= params.n_frames_max:
        raise ValueError(f"n_frames={n_frames} outside [1, {params.n_frames_max}]")


def resolutions(n_frames: int, params: SensingParams) -> Resolution:
    """Range and velocity resolution for ``n_frames`` frames."""
    _check_frames(n_frames, params)
    c = SPEED_OF_LIGHT
    period = params.resolution_period_s or params.frame_period_s
    delta_d = c / (2.0 * params.n_subcarriers * params.subcarrier_spacing_hz)
    delta_v = c / (2.0 * n_frames * params.carrier_hz * period)
    return Resolution(delta_d, delta_v)


def velocity_rmse(n_frames: int, eta: float, params: SensingParams) -> float:
    """Velocity RMSE in m/s, falling as ``1/(n_frames * sqrt(eta))``."""
    if not eta > 0:
        raise ValueError(f"SINR must be positive, got {eta}")
    if n_frames < 1:
        raise ValueError(f"n_frames must be >= 1, got {n_frames}")
    return SPEED_OF_LIGHT / (
        2.0 * n_frames * params.frame_period_s * params.carrier_hz * math.sqrt(2.0 * eta)
    )
