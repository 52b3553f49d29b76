"""Adam, the cosine learning-rate schedule, and early stopping."""

from __future__ import annotations

import math

import numpy as np

from .tensor import ShapeError, Tensor


class Adam:
    """Bias-corrected Adam over a fixed parameter list.

    Moment buffers mirror parameter shapes; ``step`` applies the update
    in place using the given learning rate (or the constructor default).
    """

    def __init__(self, params: list[Tensor], lr: float = 1e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ValueError(f"lr must be positive, got {lr}")
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self, lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                g = np.zeros_like(p.data)
            else:
                if p.grad.shape != p.data.shape:
                    raise ShapeError(
                        f"gradient shape {p.grad.shape} drifted from parameter {p.data.shape}")
                g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def cosine_lr(epoch: int, max_epochs: int, base_lr: float) -> float:
    """base_lr * 0.5 * (1 + cos(pi * epoch / max_epochs))."""
    if not 0 <= epoch <= max_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {max_epochs}]")
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * epoch / max_epochs))


class EarlyStopping:
    """Stop after `patience` epochs without improvement beyond `min_delta`."""

    def __init__(self, patience: int, min_delta: float = 1e-5):
        if patience < 1:
            raise ValueError(f"patience must be >= 1, got {patience}")
        self.patience = patience
        self.min_delta = min_delta
        self.best = math.inf
        self.best_epoch = -1
        self.stale = 0

    def update(self, loss: float, epoch: int) -> bool:
        """Record one epoch's monitored loss; True means stop now."""
        if loss < self.best - self.min_delta:
            self.best = loss
            self.best_epoch = epoch
            self.stale = 0
            return False
        self.stale += 1
        return self.stale >= self.patience
