"""Policy-gradient and value losses with analytic gradients.

All losses are written for minimization: the A2C and PPO objectives are
negated. Advantages and returns are constants of the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import ForwardCache, PolicyValueNet, log_softmax


@dataclass
class Batch:
    obs: np.ndarray
    mod_idx: np.ndarray
    frame_idx: np.ndarray
    old_log_prob: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray

    def __len__(self) -> int:
        return len(self.obs)

    def subset(self, idx: np.ndarray) -> "Batch":
        return Batch(self.obs[idx], self.mod_idx[idx], self.frame_idx[idx],
                     self.old_log_prob[idx], self.advantages[idx], self.returns[idx])


@dataclass
class ObjectiveResult:
    loss: float
    grads: dict[str, np.ndarray]
    stats: dict[str, float] = field(default_factory=dict)


def clip_term(ratio, advantage, epsilon):
    """Pessimistic PPO term ``min(r*A, clip(r, 1-eps, 1+eps)*A)``."""
    ratio = np.asarray(ratio, dtype=float)
    return np.minimum(ratio * advantage, np.clip(ratio, 1.0 - epsilon, 1.0 + epsilon) * advantage)


def joint_log_prob(cache: ForwardCache, mod_idx, frame_idx):
    """Per-sample log-probability of the factored action plus both log-softmax tables."""
    lp_m = log_softmax(cache.mod_logits)
    lp_f = log_softmax(cache.frame_logits)
    rows = np.arange(len(lp_m))
    return lp_m[rows, mod_idx] + lp_f[rows, frame_idx], lp_m, lp_f


def _logp_head_grads(d_logp, lp_m, lp_f, mod_idx, frame_idx):
    # d log softmax(z)_a / dz = onehot(a) - softmax(z)
    rows = np.arange(len(d_logp))
    g_m = -np.exp(lp_m) * d_logp[:, None]
    g_m[rows, mod_idx] += d_logp
    g_f = -np.exp(lp_f) * d_logp[:, None]
    g_f[rows, frame_idx] += d_logp
    return g_m, g_f


def _entropy(lp):
    p = np.exp(lp)
    h = -(p * lp).sum(axis=-1)
    dh = -p * (lp + h[:, None])
    return h, dh


def _policy_part(kind, cache, batch, epsilon):
    n = len(batch)
    logp, lp_m, lp_f = joint_log_prob(cache, batch.mod_idx, batch.frame_idx)
    adv = batch.advantages
    stats = {}
    if kind == "a2c":
        loss = -float(np.mean(logp * adv))
        d_logp = -adv / n
    elif kind == "ppo":
        ratio = np.exp(logp - batch.old_log_prob)
        unclipped = ratio * adv
        clipped = np.clip(ratio, 1.0 - epsilon, 1.0 + epsilon) * adv
        loss = -float(np.mean(np.minimum(unclipped, clipped)))
        # the clipped branch is constant in theta
        d_logp = -np.where(unclipped <= clipped, unclipped, 0.0) / n
        stats["ratio_mean"] = float(ratio.mean())
        stats["clip_fraction"] = float(np.mean(np.abs(ratio - 1.0) > epsilon))
    else:
        raise ValueError(f"unknown policy objective {kind!r}")
    g_m, g_f = _logp_head_grads(d_logp, lp_m, lp_f, batch.mod_idx, batch.frame_idx)
    return loss, g_m, g_f, lp_m, lp_f, stats


def combined_objective(net: PolicyValueNet, batch: Batch, kind: str, epsilon: float = 0.2,
                       value_coef: float = 0.5, entropy_coef: float = 0.0,
                       policy_coef: float = 1.0) -> ObjectiveResult:
    """``policy_coef*policy + value_coef*value - entropy_coef*entropy`` and its gradient."""
    cache = net.forward(batch.obs)
    n = len(batch)
    policy_loss, g_m, g_f, lp_m, lp_f, stats = _policy_part(kind, cache, batch, epsilon)
    g_m *= policy_coef
    g_f *= policy_coef

    err = cache.value - batch.returns
    value_loss = float(np.mean(err ** 2))
    g_v = value_coef * 2.0 * err / n

    h_m, dh_m = _entropy(lp_m)
    h_f, dh_f = _entropy(lp_f)
    entropy = float(np.mean(h_m + h_f))
    if entropy_coef:
        g_m = g_m - entropy_coef * dh_m / n
        g_f = g_f - entropy_coef * dh_f / n

    loss = policy_coef * policy_loss + value_coef * value_loss - entropy_coef * entropy
    grads = net.backward(cache, g_m, g_f, g_v)
    stats.update(policy_loss=policy_loss, value_loss=value_loss, entropy=entropy)
    return ObjectiveResult(loss, grads, stats)


def a2c_objective(net: PolicyValueNet, batch: Batch) -> ObjectiveResult:
    """Negated ``mean(log pi(a|s) * A)``."""
    return combined_objective(net, batch, "a2c", value_coef=0.0, entropy_coef=0.0)


def ppo_clip_objective(net: PolicyValueNet, batch: Batch, epsilon: float = 0.2) -> ObjectiveResult:
    if epsilon <= 0:
        raise ValueError("clip epsilon must be positive")
    return combined_objective(net, batch, "ppo", epsilon=epsilon, value_coef=0.0, entropy_coef=0.0)


def value_objective(net: PolicyValueNet, batch: Batch) -> ObjectiveResult:
    """Mean squared error between the value head and the returns."""
    return combined_objective(net, batch, "a2c", value_coef=1.0, entropy_coef=0.0, policy_coef=0.0)


def entropy_objective(net: PolicyValueNet, batch: Batch) -> ObjectiveResult:
    """Negated mean joint entropy (the bonus term on its own)."""
    return combined_objective(net, batch, "a2c", value_coef=0.0, entropy_coef=1.0, policy_coef=0.0)
