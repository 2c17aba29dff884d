"""Adam and RMSProp, written out over parameter tensors.

Both skip parameters with requires_grad=False, so a frozen embedding
layer never accumulates state or updates.
"""

from __future__ import annotations

import torch

from ..validation import require, require_positive


class Optimizer:
    def __init__(self, params, lr: float):
        require_positive(lr, "lr")
        self.params = [p for p in params if p.requires_grad]
        require(len(self.params) > 0, "no trainable parameters")
        self.lr = lr
        self.t = 0

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        raise NotImplementedError


class Adam(Optimizer):
    def __init__(self, params, lr: float = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        super().__init__(params, lr)
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.m = [torch.zeros_like(p) for p in self.params]
        self.v = [torch.zeros_like(p) for p in self.params]

    @torch.no_grad()
    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m.mul_(b1).add_(g, alpha=1.0 - b1)
            v.mul_(b2).addcmul_(g, g, value=1.0 - b2)
            denom = (v / bias2).sqrt_().add_(self.eps)
            p.addcdiv_(m / bias1, denom, value=-self.lr)


class RMSProp(Optimizer):
    def __init__(self, params, lr: float = 1e-3, decay: float = 0.99,
                 eps: float = 1e-8):
        super().__init__(params, lr)
        self.decay = decay
        self.eps = eps
        self.sq = [torch.zeros_like(p) for p in self.params]

    @torch.no_grad()
    def step(self):
        self.t += 1
        for p, sq in zip(self.params, self.sq):
            if p.grad is None:
                continue
            g = p.grad
            sq.mul_(self.decay).addcmul_(g, g, value=1.0 - self.decay)
            p.addcdiv_(g, sq.sqrt().add_(self.eps), value=-self.lr)


def make_optimizer(name: str, params, lr: float = 1e-3) -> Optimizer:
    if name == "adam":
        return Adam(params, lr=lr)
    if name == "rmsprop":
        return RMSProp(params, lr=lr)
    from ..errors import ConfigError

    raise ConfigError(f"unknown optimizer {name!r}, expected adam or rmsprop")
