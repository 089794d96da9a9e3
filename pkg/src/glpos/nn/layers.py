"""Layers built on the autodiff engine: linear, embedding, GATConv,
pre-norm transformer encoder and LSTM."""
from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Parameter, Tensor


class Module:
    """Parameter container; parameters are discovered from attributes in
    definition order, which fixes checkpoint and optimizer ordering."""

    def named_parameters(self, prefix=""):
        for key, val in vars(self).items():
            if isinstance(val, Tensor) and val.name is not None:
                yield prefix + key, val
            elif isinstance(val, Module):
                yield from val.named_parameters(f"{prefix}{key}.")
            elif isinstance(val, (list, tuple)) and val and isinstance(val[0], Module):
                for i, m in enumerate(val):
                    yield from m.named_parameters(f"{prefix}{key}.{i}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def set_trainable(self, flag: bool):
        for p in self.parameters():
            p.requires_grad = flag

    def state_dict(self):
        return {k: p.data.copy() for k, p in self.named_parameters()}

    def load_state_dict(self, state):
        own = dict(self.named_parameters())
        if set(own) != set(state):
            raise KeyError(f"parameter names differ: {sorted(set(own) ^ set(state))[:5]}")
        for k, p in own.items():
            if p.data.shape != np.shape(state[k]):
                raise ValueError(f"{k}: expected shape {p.data.shape}, got {np.shape(state[k])}")
            p.data = np.array(state[k], dtype=np.float64)


def glorot(rng, fan_in, fan_out, shape):
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=shape)


class Linear(Module):
    def __init__(self, d_in, d_out, rng, bias=True):
        self.weight = Parameter(glorot(rng, d_in, d_out, (d_in, d_out)), "weight")
        self.bias = Parameter(np.zeros(d_out), "bias") if bias else None

    def __call__(self, x):
        y = T.matmul(x, self.weight)
        return y + self.bias if self.bias is not None else y


class Embedding(Module):
    def __init__(self, num, dim, rng):
        self.weight = Parameter(rng.normal(0.0, 0.1, size=(num, dim)), "weight")

    def __call__(self, idx):
        return T.take_rows(self.weight, idx)


class MLP(Module):
    """``layers`` hidden ReLU layers of width ``hidden`` followed by a linear output."""

    def __init__(self, d_in, hidden, layers, d_out, rng):
        dims = [d_in] + [hidden] * layers
        self.hidden = [Linear(a, b, rng) for a, b in zip(dims[:-1], dims[1:])]
        self.out = Linear(dims[-1], d_out, rng)

    def __call__(self, x):
        for lin in self.hidden:
            x = T.relu(lin(x))
        return self.out(x)


def gat_edges(n, edges):
    """Directed (src, dst) arrays for an undirected edge list, plus self-loops."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    loops = np.arange(n, dtype=np.int64)
    src = np.concatenate([edges[:, 0], edges[:, 1], loops])
    dst = np.concatenate([edges[:, 1], edges[:, 0], loops])
    return src, dst


class GATConv(Module):
    """Graph attention convolution.

    x'_i = sum_{j in N(i) + i} alpha_ij W x_j with
    alpha_ij = softmax_j(LeakyReLU(a_dst . W x_i + a_src . W x_j)), per head;
    heads are concatenated or averaged.
    """

    def __init__(self, d_in, d_out, rng, heads=1, concat=True, negative_slope=0.2):
        self.heads = heads
        self.d_out = d_out
        self.concat = concat
        self.negative_slope = negative_slope
        self.weight = Parameter(glorot(rng, d_in, heads * d_out, (d_in, heads * d_out)), "weight")
        self.att_dst = Parameter(glorot(rng, d_out, 1, (heads, d_out)), "att_dst")
        self.att_src = Parameter(glorot(rng, d_out, 1, (heads, d_out)), "att_src")

    @property
    def out_dim(self):
        return self.heads * self.d_out if self.concat else self.d_out

    def __call__(self, x, src, dst):
        n = x.shape[0]
        if x.shape[1] != self.weight.shape[0]:
            raise ValueError(f"GATConv expects {self.weight.shape[0]} input features, got {x.shape[1]}")
        h = T.reshape(T.matmul(x, self.weight), (n, self.heads, self.d_out))
        s_dst = T.tsum(h * self.att_dst, axis=-1)            # (n, H)
        s_src = T.tsum(h * self.att_src, axis=-1)
        e = T.leaky_relu(T.take_rows(s_dst, dst) + T.take_rows(s_src, src), self.negative_slope)
        alpha = T.segment_softmax(e, dst, n)                  # (E, H)
        msg = T.take_rows(h, src) * T.reshape(alpha, (len(src), self.heads, 1))
        out = T.segment_sum(msg, dst, n)                      # (n, H, F)
        if self.concat:
            out = T.reshape(out, (n, self.heads * self.d_out))
        else:
            out = T.mean(out, axis=1)
        return out, alpha.data


class LayerNorm(Module):
    def __init__(self, dim):
        self.gamma = Parameter(np.ones(dim), "gamma")
        self.beta = Parameter(np.zeros(dim), "beta")

    def __call__(self, x):
        return T.layer_norm(x, self.gamma, self.beta)


class SelfAttention(Module):
    def __init__(self, dim, heads, rng):
        if dim % heads:
            raise ValueError(f"model dim {dim} not divisible by {heads} heads")
        self.heads = heads
        self.q = Linear(dim, dim, rng)
        self.k = Linear(dim, dim, rng)
        self.v = Linear(dim, dim, rng)
        self.o = Linear(dim, dim, rng)

    def __call__(self, x, mask):
        B, L, d = x.shape
        H, dk = self.heads, d // self.heads

        def split(t):
            return T.transpose(T.reshape(t, (B, L, H, dk)), (0, 2, 1, 3))
        q, k, v = split(self.q(x)), split(self.k(x)), split(self.v(x))
        scores = T.matmul(q, T.transpose(k, (0, 1, 3, 2))) * (1.0 / np.sqrt(dk))
        attn = T.softmax(scores, axis=-1, mask=mask[:, None, None, :])
        ctx = T.reshape(T.transpose(T.matmul(attn, v), (0, 2, 1, 3)), (B, L, d))
        return self.o(ctx), attn.data


class TransformerLayer(Module):
    """Pre-norm encoder block."""

    def __init__(self, dim, heads, ff, rng):
        self.ln1 = LayerNorm(dim)
        self.attn = SelfAttention(dim, heads, rng)
        self.ln2 = LayerNorm(dim)
        self.ff1 = Linear(dim, ff, rng)
        self.ff2 = Linear(ff, dim, rng)

    def __call__(self, x, mask):
        a, w = self.attn(self.ln1(x), mask)
        x = x + a
        x = x + self.ff2(T.relu(self.ff1(self.ln2(x))))
        return x, w


class TransformerEncoder(Module):
    def __init__(self, dim, heads, ff, layers, rng):
        if dim % heads:
            raise ValueError(f"model dim {dim} not divisible by {heads} heads")
        self.layers = [TransformerLayer(dim, heads, ff, rng) for _ in range(layers)]
        self.ln = LayerNorm(dim)

    def __call__(self, x, mask, return_attention=False):
        """x: (B, L, dim); mask: (B, L) bool, True on real positions."""
        mask = np.asarray(mask, dtype=bool)
        weights = []
        for layer in self.layers:
            x, w = layer(x, mask)
            weights.append(w)
        x = self.ln(x)
        return (x, weights) if return_attention else x


class LSTM(Module):
    def __init__(self, d_in, hidden, rng):
        self.hidden = hidden
        self.w_in = Parameter(glorot(rng, d_in, 4 * hidden, (d_in, 4 * hidden)), "w_in")
        self.w_rec = Parameter(glorot(rng, hidden, 4 * hidden, (hidden, 4 * hidden)), "w_rec")
        b = np.zeros(4 * hidden)
        b[hidden:2 * hidden] = 1.0   # forget gate
        self.bias = Parameter(b, "bias")

    def __call__(self, x):
        """x: (B, L, d_in) -> (B, L, hidden), running left to right."""
        B, L, _ = x.shape
        H = self.hidden
        pre = T.matmul(x, self.w_in) + self.bias
        h = Tensor(np.zeros((B, H)))
        c = Tensor(np.zeros((B, H)))
        outs = []
        for t in range(L):
            z = pre[:, t, :] + T.matmul(h, self.w_rec)
            i = T.sigmoid(z[:, :H])
            f = T.sigmoid(z[:, H:2 * H])
            g = T.tanh(z[:, 2 * H:3 * H])
            o = T.sigmoid(z[:, 3 * H:])
            c = f * c + i * g
            h = o * T.tanh(c)
            outs.append(h)
        return T.stack(outs, axis=1)


class BiLSTM(Module):
    def __init__(self, d_in, hidden, rng):
        self.fwd = LSTM(d_in, hidden, rng)
        self.bwd = LSTM(d_in, hidden, rng)

    def __call__(self, x, lengths):
        """Right-padded batch; the backward pass reverses only the real prefix."""
        B, L, _ = x.shape
        rev = np.tile(np.arange(L), (B, 1))
        for b, n in enumerate(lengths):
            rev[b, :n] = np.arange(n)[::-1]
        rows = np.repeat(np.arange(B), L)
        flat = rows * L + rev.ravel()

        def reorder(t):
            d = t.shape[-1]
            return T.reshape(T.take_rows(T.reshape(t, (B * L, d)), flat), (B, L, d))
        back = reorder(self.bwd(reorder(x)))
        return T.concat([self.fwd(x), back], axis=-1)
