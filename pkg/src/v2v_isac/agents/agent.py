"""A2C and PPO-clip agents over the factored (modulation, frames) action."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..env import MOD_BITS, MdpAction
from .buffer import BufferStateError, RolloutBuffer, compute_gae
from .network import PolicyValueNet, log_softmax
from .objectives import combined_objective
from .optim import Adam, clip_grad_norm

AGENT_KINDS = ("ppo", "a2c")


@dataclass(frozen=True)
class AgentConfig:
    hidden: int = 64
    lr: float = 3e-4
    gamma: float = 0.99
    # One-step TD advantages for both agents. Blocking is redrawn every slot,
    # so long traces mostly add variance; 0.95 is the usual PPO choice.
    gae_lambda: float = 0.0
    clip_eps: float = 0.2
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    rollout: int = 256
    minibatch: int = 64
    epochs: int = 4
    max_grad_norm: float | None = 0.5
    normalize_advantages: bool = True
    scale_rewards: bool = True


class ActionSample(NamedTuple):
    mod_idx: int
    frame_idx: int
    log_prob: float

    @property
    def action(self) -> MdpAction:
        return MdpAction.from_indices(self.mod_idx, self.frame_idx)


def _inverse_cdf(log_probs: np.ndarray, u: float) -> int:
    cdf = np.cumsum(np.exp(log_probs))
    return min(int(np.searchsorted(cdf, u * cdf[-1], side="right")), len(cdf) - 1)


def sample_action(mod_logits, frame_logits, rng: np.random.Generator | None = None,
                  greedy: bool = False) -> ActionSample:
    """One categorical draw per head; ``greedy`` takes the first argmax instead."""
    mod_logits = np.asarray(mod_logits, dtype=float).ravel()
    frame_logits = np.asarray(frame_logits, dtype=float).ravel()
    if not (np.all(np.isfinite(mod_logits)) and np.all(np.isfinite(frame_logits))):
        raise FloatingPointError("non-finite policy logits")
    lp_m = log_softmax(mod_logits)
    lp_f = log_softmax(frame_logits)
    if greedy:
        i, j = int(np.argmax(mod_logits)), int(np.argmax(frame_logits))
    else:
        if rng is None:
            raise ValueError("stochastic sampling needs an rng")
        i = _inverse_cdf(lp_m, rng.random())
        j = _inverse_cdf(lp_f, rng.random())
    return ActionSample(i, j, float(lp_m[i] + lp_f[j]))


class RunningMeanStd:
    """Streaming mean/variance (parallel-merge form)."""

    def __init__(self):
        self.mean = 0.0
        self.var = 1.0
        self.count = 1e-4

    def update(self, x: float) -> None:
        delta = x - self.mean
        total = self.count + 1.0
        self.mean += delta / total
        self.var = (self.var * self.count + delta * delta * self.count / total) / total
        self.count = total


class Agent:
    """Actor-critic agent; ``kind`` selects the A2C or PPO-clip update."""

    def __init__(self, kind: str, config: AgentConfig = AgentConfig(), n_frames: int = 100,
                 obs_dim: int = 2, init_rng: np.random.Generator | None = None,
                 rng: np.random.Generator | None = None):
        if kind not in AGENT_KINDS:
            raise ValueError(f"agent kind must be one of {AGENT_KINDS}, got {kind!r}")
        self.kind = kind
        self.config = config
        self.net = PolicyValueNet(obs_dim, config.hidden, len(MOD_BITS), n_frames, rng=init_rng)
        self.optimizer = Adam(self.net.shapes(), lr=config.lr)
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self._return_stats = RunningMeanStd()
        self._discounted = 0.0

    def act(self, obs, greedy: bool = False) -> tuple[ActionSample, float]:
        cache = self.net.forward(obs)
        sample = sample_action(cache.mod_logits[0], cache.frame_logits[0], self.rng, greedy)
        return sample, float(cache.value[0])

    def value(self, obs) -> float:
        return float(self.net.forward(obs).value[0])

    def scale_reward(self, reward: float, episode_end: bool = False) -> float:
        """Divide by the running std of the discounted return (identity when disabled)."""
        if not self.config.scale_rewards:
            return reward
        self._discounted = self._discounted * self.config.gamma + reward
        self._return_stats.update(self._discounted)
        if episode_end:
            self._discounted = 0.0
        return reward / np.sqrt(self._return_stats.var + 1e-8)

    def finalize(self, buffer: RolloutBuffer, bootstrap_value: float) -> RolloutBuffer:
        return compute_gae(buffer, self.config.gamma, self.config.gae_lambda, bootstrap_value)

    def _step(self, batch) -> dict[str, float]:
        cfg = self.config
        if cfg.normalize_advantages and len(batch) > 1:
            adv = batch.advantages
            batch.advantages = (adv - adv.mean()) / (adv.std() + 1e-8)
        result = combined_objective(self.net, batch, self.kind, epsilon=cfg.clip_eps,
                                    value_coef=cfg.value_coef, entropy_coef=cfg.entropy_coef)
        result.stats["grad_norm"] = clip_grad_norm(result.grads, cfg.max_grad_norm)
        self.optimizer.step(self.net.params, result.grads)
        result.stats["loss"] = result.loss
        return result.stats

    def update(self, buffer: RolloutBuffer) -> dict[str, float]:
        """One A2C step on the whole rollout, or ``epochs`` passes of PPO minibatches.

        Returned statistics are averaged over gradient steps; for PPO
        ``initial_ratio`` is the mean ratio on the first minibatch, taken
        before any parameter changed.
        """
        if not buffer.finalized:
            raise BufferStateError("buffer not finalized")
        batch = buffer.batch()
        if self.kind == "a2c":
            return self._step(batch)

        cfg = self.config
        history: list[dict[str, float]] = []
        n = len(batch)
        for _ in range(cfg.epochs):
            order = self.rng.permutation(n)
            for start in range(0, n, cfg.minibatch):
                history.append(self._step(batch.subset(order[start:start + cfg.minibatch])))
        stats = {k: float(np.mean([h[k] for h in history])) for k in history[0]}
        stats["initial_ratio"] = history[0]["ratio_mean"]
        return stats
