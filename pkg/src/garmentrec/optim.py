"""Small first-order optimizers shared by the curve and pose fits."""
from __future__ import annotations

import numpy as np


class DivergenceError(RuntimeError):
    """An optimizer produced a non-finite objective or parameter."""


class Adam:
    """Adam on a flat float64 parameter vector; state is plain arrays for checkpointing."""

    def __init__(self, size: int, lr, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = np.broadcast_to(np.asarray(lr, dtype=np.float64), (size,)).copy()
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, x: np.ndarray, g: np.ndarray, scale: float = 1.0) -> np.ndarray:
        if not np.all(np.isfinite(g)):
            raise DivergenceError("optimization diverged")
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * g
        self.v = self.beta2 * self.v + (1 - self.beta2) * g * g
        mh = self.m / (1 - self.beta1 ** self.t)
        vh = self.v / (1 - self.beta2 ** self.t)
        return x - scale * self.lr * mh / (np.sqrt(vh) + self.eps)

    def state_dict(self) -> dict:
        return {"m": self.m.copy(), "v": self.v.copy(), "t": np.int64(self.t), "lr": self.lr.copy()}

    def load_state_dict(self, d: dict) -> None:
        self.m = np.asarray(d["m"], float).copy()
        self.v = np.asarray(d["v"], float).copy()
        self.t = int(d["t"])
        self.lr = np.asarray(d["lr"], float).copy()
