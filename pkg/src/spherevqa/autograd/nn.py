"""Parameterised building blocks: linear maps, layer norm, attention, encoder layers."""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from . import functional as F
from .tensor import Tensor

INIT_STD = 0.02


def truncated_normal(rng: np.random.Generator, shape, std: float = INIT_STD, dtype=np.float32):
    """Normal(0, std) truncated to two standard deviations by resampling."""
    out = rng.standard_normal(shape)
    bad = np.abs(out) > 2.0
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > 2.0
    return (out * std).astype(dtype)


class Module:
    """Container whose Tensor attributes (requires_grad) are parameters.

    Parameter names follow attribute insertion order, so ``named_parameters``
    is stable for a given constructor.
    """

    training: bool = True

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for key, val in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(val, Tensor) and val.requires_grad:
                yield name, val
            elif isinstance(val, Module):
                yield from val.named_parameters(name + ".")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def modules(self) -> Iterator["Module"]:
        yield self
        for val in vars(self).values():
            if isinstance(val, Module):
                yield from val.modules()
            elif isinstance(val, (list, tuple)):
                for item in val:
                    if isinstance(item, Module):
                        yield from item.modules()

    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None


def param(data) -> Tensor:
    return Tensor(data, requires_grad=True)


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, dtype=np.float32,
                 bias: bool = True, std: float = INIT_STD):
        self.weight = param(truncated_normal(rng, (n_in, n_out), std, dtype))
        self.bias = param(np.zeros(n_out, dtype=dtype)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, d: int, dtype=np.float32, eps: float = 1e-12):
        self.gain = param(np.ones(d, dtype=dtype))
        self.bias = param(np.zeros(d, dtype=dtype))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return F.layer_norm(x, self.gain, self.bias, self.eps)


class MLP(Module):
    """Stack of linear layers with GELU between them."""

    def __init__(self, sizes: list[int], rng, dtype=np.float32, std: float = INIT_STD):
        self.layers = [Linear(a, b, rng, dtype, std=std) for a, b in zip(sizes[:-1], sizes[1:])]

    def __call__(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = F.gelu(x)
        return x


NEG_INF = -1e9


class MultiHeadAttention(Module):
    def __init__(self, d: int, heads: int, rng, dtype=np.float32, std: float = INIT_STD):
        if d % heads:
            raise ValueError(f"width {d} not divisible by {heads} heads")
        self.heads = heads
        self.query = Linear(d, d, rng, dtype, std=std)
        self.key = Linear(d, d, rng, dtype, std=std)
        self.value = Linear(d, d, rng, dtype, std=std)
        self.out = Linear(d, d, rng, dtype, std=std)

    def _split(self, x: Tensor) -> Tensor:
        *lead, t, d = x.shape
        x = x.reshape(tuple(lead) + (t, self.heads, d // self.heads))
        return F.swapaxes(x, -2, -3)

    def __call__(self, q_src: Tensor, kv_src: Tensor, kv_mask: np.ndarray | None = None,
                 dropout: float = 0.0, rng=None) -> Tensor:
        """Scaled dot-product attention of ``q_src`` rows over ``kv_src`` rows.

        ``kv_mask`` (shape ``kv_src.shape[:-1]``) marks valid key positions.
        """
        if q_src.shape[-1] != kv_src.shape[-1]:
            raise ValueError("query and key/value widths differ")
        d = q_src.shape[-1]
        q = self._split(self.query(q_src))
        k = self._split(self.key(kv_src))
        v = self._split(self.value(kv_src))
        scores = F.matmul(q, F.swapaxes(k, -1, -2)) * (1.0 / math.sqrt(d // self.heads))
        if kv_mask is not None:
            bias = np.where(kv_mask, 0.0, NEG_INF).astype(scores.dtype)
            scores = scores + bias[..., None, None, :]
        att = F.softmax(scores, axis=-1)
        att = F.dropout(att, dropout, rng, self.training)
        ctx = F.swapaxes(F.matmul(att, v), -2, -3)
        *lead, t, h, dh = ctx.shape
        return self.out(ctx.reshape(tuple(lead) + (t, h * dh)))


class EncoderLayer(Module):
    """Post-norm encoder layer T(primary, context).

    Attention queries come from ``primary`` and keys/values from ``context``
    (pass the same tensor for self-attention), followed by a GELU feed-forward
    of width 4d; each sublayer has a residual add then layer norm.
    """

    def __init__(self, d: int, heads: int, rng, dtype=np.float32, dropout: float = 0.1,
                 std: float = INIT_STD):
        self.attn = MultiHeadAttention(d, heads, rng, dtype, std)
        self.norm1 = LayerNorm(d, dtype)
        self.ff_in = Linear(d, 4 * d, rng, dtype, std=std)
        self.ff_out = Linear(4 * d, d, rng, dtype, std=std)
        self.norm2 = LayerNorm(d, dtype)
        self.dropout = dropout

    def __call__(self, primary: Tensor, context: Tensor, context_mask=None, rng=None) -> Tensor:
        p = self.dropout if self.training else 0.0
        a = self.attn(primary, context, context_mask, p, rng)
        x = self.norm1(primary + F.dropout(a, p, rng, self.training))
        h = self.ff_out(F.gelu(self.ff_in(x)))
        return self.norm2(x + F.dropout(h, p, rng, self.training))


def multi_head_attention(query_src: Tensor, kv_src: Tensor, layer: EncoderLayer,
                         kv_mask=None) -> Tensor:
    """Functional form of one full encoder layer (attention + feed-forward)."""
    return layer(query_src, kv_src, kv_mask)
