"""AdamW, global-norm gradient clipping, and the linear LR schedule."""

from __future__ import annotations

import numpy as np

from .autograd import Tensor
from .errors import ConfigError


def lr_at(step: int, total_steps: int, config) -> float:
    """Linear warmup from 0 over config.warmup_steps, then linear decay
    hitting 0 exactly at total_steps. config needs base_lr and warmup_steps.
    """
    if total_steps < 1:
        raise ValueError(f"total_steps must be >= 1, got {total_steps}")
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    warmup = int(config.warmup_steps)
    if warmup >= total_steps:
        raise ConfigError(f"warmup_steps ({warmup}) must be below total steps ({total_steps})")
    base = float(config.base_lr)
    if step < warmup:
        return base * step / warmup
    return base * (total_steps - step) / (total_steps - warmup)


def clip_global_norm(params, max_norm: float = 1.0) -> float:
    """Scale every gradient so their joint L2 norm is at most max_norm.
    Accepts a name → Tensor table or any iterable of Tensors; returns the
    pre-clip norm."""
    tensors = list(params.values() if hasattr(params, "values") else params)
    total = 0.0
    for t in tensors:
        if t.grad is not None:
            total += float(np.sum(t.grad.astype(np.float64) ** 2))
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0.0:
        factor = max_norm / norm
        for t in tensors:
            if t.grad is not None:
                t.grad *= factor
    return norm


class AdamW:
    """Decoupled weight decay Adam over a name → Tensor parameter table.

    Parameters with requires_grad=False (or no accumulated gradient this
    step) are left alone; decay is applied to every updated parameter.
    """

    def __init__(self, params: dict, betas=(0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.01):
        self.params = params
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self._m = {k: np.zeros_like(v.data) for k, v in params.items()}
        self._v = {k: np.zeros_like(v.data) for k, v in params.items()}

    def step(self, lr: float) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            if not p.requires_grad or p.grad is None:
                continue
            g = p.grad
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            if self.weight_decay:
                p.data -= (lr * self.weight_decay) * p.data
            mhat = m / bc1
            vhat = v / bc2
            p.data -= lr * mhat / (np.sqrt(vhat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None
