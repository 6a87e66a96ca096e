"""Two-layer tanh MLP with two categorical heads and a value head.

Gradients are derived by hand for this fixed architecture; there is no
autodiff graph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PARAM_NAMES = ("W1", "b1", "W2", "b2", "Wm", "bm", "Wf", "bf", "Wv", "bv")


@dataclass
class ForwardCache:
    x: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    mod_logits: np.ndarray
    frame_logits: np.ndarray
    value: np.ndarray


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


class PolicyValueNet:
    """Shared trunk feeding a modulation head, a frame-count head and a value head.

    Parameters live in ``self.params`` keyed by :data:`PARAM_NAMES`; weight
    matrices are stored ``(fan_in, fan_out)`` so a batch is ``x @ W + b``.
    """

    def __init__(self, obs_dim: int = 2, hidden: int = 64, n_mod: int = 4, n_frames: int = 100,
                 rng: np.random.Generator | None = None):
        self.obs_dim = obs_dim
        self.hidden = hidden
        self.n_mod = n_mod
        self.n_frames = n_frames
        self.params = {name: np.zeros(shape) for name, shape in self.shapes().items()}
        if rng is not None:
            self.init_weights(rng)

    def shapes(self) -> dict[str, tuple[int, ...]]:
        h = self.hidden
        return {
            "W1": (self.obs_dim, h), "b1": (h,),
            "W2": (h, h), "b2": (h,),
            "Wm": (h, self.n_mod), "bm": (self.n_mod,),
            "Wf": (h, self.n_frames), "bf": (self.n_frames,),
            "Wv": (h, 1), "bv": (1,),
        }

    def init_weights(self, rng: np.random.Generator) -> None:
        """Orthogonal init: gain sqrt(2) for the trunk, 0.01 for policy heads, 1 for value."""
        gains = {"W1": np.sqrt(2), "W2": np.sqrt(2), "Wm": 0.01, "Wf": 0.01, "Wv": 1.0}
        for name, gain in gains.items():
            self.params[name] = gain * _orthogonal(self.params[name].shape, rng)
        for name in ("b1", "b2", "bm", "bf", "bv"):
            self.params[name] = np.zeros_like(self.params[name])

    def forward(self, x: np.ndarray) -> ForwardCache:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[-1] != self.obs_dim:
            raise ValueError(f"expected {self.obs_dim} features, got {x.shape[-1]}")
        p = self.params
        h1 = np.tanh(x @ p["W1"] + p["b1"])
        h2 = np.tanh(h1 @ p["W2"] + p["b2"])
        return ForwardCache(
            x=x,
            h1=h1,
            h2=h2,
            mod_logits=h2 @ p["Wm"] + p["bm"],
            frame_logits=h2 @ p["Wf"] + p["bf"],
            value=(h2 @ p["Wv"] + p["bv"])[:, 0],
        )

    def backward(self, cache: ForwardCache, d_mod: np.ndarray, d_frame: np.ndarray,
                 d_value: np.ndarray) -> dict[str, np.ndarray]:
        """Parameter gradients given loss gradients w.r.t. the three head outputs."""
        p = self.params
        d_value = np.asarray(d_value, dtype=float).reshape(-1, 1)
        grads = {
            "Wm": cache.h2.T @ d_mod, "bm": d_mod.sum(axis=0),
            "Wf": cache.h2.T @ d_frame, "bf": d_frame.sum(axis=0),
            "Wv": cache.h2.T @ d_value, "bv": d_value.sum(axis=0),
        }
        dh2 = d_mod @ p["Wm"].T + d_frame @ p["Wf"].T + d_value @ p["Wv"].T
        dz2 = dh2 * (1.0 - cache.h2 ** 2)
        grads["W2"] = cache.h1.T @ dz2
        grads["b2"] = dz2.sum(axis=0)
        dz1 = (dz2 @ p["W2"].T) * (1.0 - cache.h1 ** 2)
        grads["W1"] = cache.x.T @ dz1
        grads["b1"] = dz1.sum(axis=0)
        return grads

    def copy(self) -> "PolicyValueNet":
        other = PolicyValueNet(self.obs_dim, self.hidden, self.n_mod, self.n_frames)
        other.params = {k: v.copy() for k, v in self.params.items()}
        return other


def _orthogonal(shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    rows, cols = shape
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    return q if rows >= cols else q.T
