import numpy as np


def grad_check(f, params, eps=1e-5, max_entries=None, rng=None, floor=1e-6):
    """Largest relative error between reverse-mode and central-difference gradients.

    ``f`` maps nothing to a scalar Tensor built from ``params``. With
    ``max_entries`` only that many randomly chosen coordinates per parameter
    are probed. The relative error divides by max(|analytic|, |numeric|, floor),
    so vanishing gradients are judged by absolute error.
    """
    for p in params:
        p.grad = None
    loss = f()
    loss.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    rng = rng or np.random.default_rng(0)
    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = rng.choice(flat.size, max_entries, replace=False)
        for k in idx:
            old = flat[k]
            flat[k] = old + eps
            up = f().item()
            flat[k] = old - eps
            down = f().item()
            flat[k] = old
            num = (up - down) / (2 * eps)
            a = ga.reshape(-1)[k]
            err = abs(a - num) / max(abs(a), abs(num), floor)
            worst = max(worst, err)
    for p in params:
        p.grad = None
    return worst
