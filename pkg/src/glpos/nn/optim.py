import numpy as np


def clip_grad_norm(params, max_norm):
    """Scale gradients in place so their global L2 norm is at most ``max_norm``."""
    grads = [p.grad for p in params if p.grad is not None]
    if not grads:
        return 0.0
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if max_norm is not None and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for g in grads:
            g *= scale
    return norm


class Adam:
    """Adam with bias correction; ``weight_decay`` > 0 with ``decoupled=True``
    gives AdamW."""

    def __init__(self, named_params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8,
                 weight_decay=0.0, decoupled=False):
        self.named = list(named_params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.decoupled = decoupled
        self.t = 0
        self.m = [np.zeros_like(p.data) for _, p in self.named]
        self.v = [np.zeros_like(p.data) for _, p in self.named]

    @property
    def params(self):
        return [p for _, p in self.named]

    def zero_grad(self):
        for _, p in self.named:
            p.grad = None

    def step(self, lr=None):
        lr = self.lr if lr is None else lr
        for name, p in self.named:
            if p.grad is not None and not np.all(np.isfinite(p.grad)):
                raise FloatingPointError(f"non-finite gradient in {name}")
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k, (_, p) in enumerate(self.named):
            if not p.requires_grad:
                continue
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if self.weight_decay and not self.decoupled:
                g = g + self.weight_decay * p.data
            if self.weight_decay and self.decoupled:
                p.data = p.data - lr * self.weight_decay * p.data
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            mhat = self.m[k] / c1
            vhat = self.v[k] / c2
            p.data = p.data - lr * mhat / (np.sqrt(vhat) + self.eps)


def AdamW(named_params, lr=1e-3, weight_decay=0.01, **kw):
    return Adam(named_params, lr=lr, weight_decay=weight_decay, decoupled=True, **kw)


def make_optimizer(kind, named_params, lr, weight_decay=0.0):
    if kind == "adam":
        return Adam(named_params, lr=lr, weight_decay=weight_decay)
    if kind == "adamw":
        return AdamW(named_params, lr=lr, weight_decay=weight_decay)
    raise ValueError(f"unknown optimizer {kind!r}")
