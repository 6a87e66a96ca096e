"""Rollout storage and generalized advantage estimation."""

from __future__ import annotations

import numpy as np

from .objectives import Batch


class BufferStateError(RuntimeError):
    pass


class RolloutBuffer:
    """Fixed-capacity trajectory store.

    Episode boundaries are truncations, not terminal states: the value of
    the true successor state at a boundary is stored in ``cut_value`` and
    used to bootstrap, while the advantage recursion stops there.
    """

    def __init__(self, capacity: int, obs_dim: int = 2):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.mod_idx = np.zeros(capacity, dtype=np.int64)
        self.frame_idx = np.zeros(capacity, dtype=np.int64)
        self.log_prob = np.zeros(capacity)
        self.rewards = np.zeros(capacity)
        self.values = np.zeros(capacity)
        self.episode_end = np.zeros(capacity, dtype=bool)
        self.cut_value = np.zeros(capacity)
        self.advantages = np.zeros(capacity)
        self.returns = np.zeros(capacity)
        self.size = 0
        self.finalized = False

    def __len__(self) -> int:
        return self.size

    @property
    def full(self) -> bool:
        return self.size == self.capacity

    def add(self, obs, mod_idx: int, frame_idx: int, log_prob: float, reward: float, value: float,
            episode_end: bool = False, cut_value: float = 0.0) -> None:
        if self.full:
            raise BufferStateError("rollout buffer is full")
        i = self.size
        self.obs[i] = obs
        self.mod_idx[i] = mod_idx
        self.frame_idx[i] = frame_idx
        self.log_prob[i] = log_prob
        self.rewards[i] = reward
        self.values[i] = value
        self.episode_end[i] = episode_end
        self.cut_value[i] = cut_value
        self.size += 1
        self.finalized = False

    def clear(self) -> None:
        self.size = 0
        self.finalized = False

    def batch(self) -> Batch:
        if not self.finalized:
            raise BufferStateError("advantages not computed; call compute_gae first")
        n = self.size
        return Batch(self.obs[:n].copy(), self.mod_idx[:n].copy(), self.frame_idx[:n].copy(),
                     self.log_prob[:n].copy(), self.advantages[:n].copy(), self.returns[:n].copy())


def compute_gae(buffer: RolloutBuffer, gamma: float, lambda_gae: float, bootstrap_value: float) -> RolloutBuffer:
    """Fill advantages and returns in place.

    ``delta_t = r_t + gamma*V_{t+1} - V_t`` and
    ``A_t = delta_t + gamma*lambda*A_{t+1}``; returns are ``A + V``. With
    ``lambda_gae = 1`` the returns are discounted reward sums bootstrapped
    by ``bootstrap_value``; with 0 the advantage is the one-step TD error.
    """
    n = buffer.size
    if n == 0:
        raise BufferStateError("cannot compute advantages of an empty buffer")
    carry = 0.0
    next_value = bootstrap_value
    for t in range(n - 1, -1, -1):
        if buffer.episode_end[t]:
            next_value, carry = buffer.cut_value[t], 0.0
        delta = buffer.rewards[t] + gamma * next_value - buffer.values[t]
        carry = delta + gamma * lambda_gae * carry
        buffer.advantages[t] = carry
        next_value = buffer.values[t]
    buffer.returns[:n] = buffer.advantages[:n] + buffer.values[:n]
    buffer.finalized = True
    return buffer
