"""Forward/backward primitives for the transformer, plain numpy.

Every *_fwd returns (output, cache); the matching *_bwd consumes the
cache and the upstream gradient. Parameter gradients are accumulated
in-place into the grad views passed alongside the parameter views, so
repeated sub-batches sum naturally.

Masking overwrites attention scores with a large negative constant
before the softmax; masked probabilities underflow to exact zero, which
is what makes the causal-mask invariance hold bitwise.
"""

from __future__ import annotations

import math

import numpy as np

NEG_FILL = -1e30
LN_EPS = 1e-6


def xavier_limit(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))


def sinusoidal_encoding(max_len: int, d_model: int, dtype) -> np.ndarray:
    positions = np.arange(max_len, dtype=np.float64)[:, None]
    div = np.exp(np.arange(0, d_model, 2, dtype=np.float64) * (-math.log(10000.0) / d_model))
    pe = np.zeros((max_len, d_model), dtype=np.float64)
    pe[:, 0::2] = np.sin(positions * div)
    pe[:, 1::2] = np.cos(positions * div)
    return pe.astype(dtype)


def causal_mask(size: int) -> np.ndarray:
    """(1, 1, T, T) boolean; True where position q may attend position k."""
    return np.tril(np.ones((size, size), dtype=bool))[None, None, :, :]


# ---------------------------------------------------------------------------
# Linear

def linear_fwd(x, w, b):
    return x @ w + b, (x, w)


def linear_bwd(dy, cache, dw, db):
    x, w = cache
    dw += np.tensordot(x, dy, axes=([0, 1], [0, 1]))
    db += dy.sum(axis=(0, 1))
    return dy @ w.T


# ---------------------------------------------------------------------------
# LayerNorm (last axis)

def layer_norm_fwd(x, gamma, beta):
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered ** 2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LN_EPS)
    xhat = centered * inv_std
    return gamma * xhat + beta, (xhat, inv_std, gamma)


def layer_norm_bwd(dy, cache, dgamma, dbeta):
    xhat, inv_std, gamma = cache
    dgamma += (dy * xhat).sum(axis=(0, 1))
    dbeta += dy.sum(axis=(0, 1))
    dxhat = dy * gamma
    mean_dxhat = dxhat.mean(axis=-1, keepdims=True)
    mean_dxhat_xhat = (dxhat * xhat).mean(axis=-1, keepdims=True)
    return inv_std * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat)


# ---------------------------------------------------------------------------
# Softmax (last axis)

def softmax(scores):
    shifted = scores - scores.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def softmax_bwd(dp, p):
    return (dp - (dp * p).sum(axis=-1, keepdims=True)) * p


# ---------------------------------------------------------------------------
# Multi-head attention

def _split_heads(x, n_heads):
    b, t, d = x.shape
    return x.reshape(b, t, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, t, dk = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dk)


def mha_fwd(xq, xkv, p, n_heads, mask):
    """p holds views wq,bq,wk,bk,wv,bv,wo,bo; mask broadcasts to
    (B, heads, Tq, Tk), True = may attend."""
    q2, cache_q = linear_fwd(xq, p["wq"], p["bq"])
    k2, cache_k = linear_fwd(xkv, p["wk"], p["bk"])
    v2, cache_v = linear_fwd(xkv, p["wv"], p["bv"])
    q = _split_heads(q2, n_heads)
    k = _split_heads(k2, n_heads)
    v = _split_heads(v2, n_heads)
    scale = 1.0 / math.sqrt(q.shape[-1])
    scores = np.where(mask, (q @ k.swapaxes(-1, -2)) * scale, NEG_FILL)
    probs = softmax(scores)
    ctx = _merge_heads(probs @ v)
    out, cache_o = linear_fwd(ctx, p["wo"], p["bo"])
    cache = (cache_q, cache_k, cache_v, cache_o, q, k, v, probs, scale, n_heads)
    return out, cache


def mha_bwd(dout, cache, g):
    """Returns (dxq, dxkv); parameter grads accumulate into the views of g."""
    cache_q, cache_k, cache_v, cache_o, q, k, v, probs, scale, n_heads = cache
    dctx = linear_bwd(dout, cache_o, g["wo"], g["bo"])
    dctx = _split_heads(dctx, n_heads)
    dprobs = dctx @ v.swapaxes(-1, -2)
    dv = probs.swapaxes(-1, -2) @ dctx
    dscores = softmax_bwd(dprobs, probs) * scale  # exact 0 where masked
    dq = dscores @ k
    dk = dscores.swapaxes(-1, -2) @ q
    dxq = linear_bwd(_merge_heads(dq), cache_q, g["wq"], g["bq"])
    dxkv = linear_bwd(_merge_heads(dk), cache_k, g["wk"], g["bk"])
    dxkv += linear_bwd(_merge_heads(dv), cache_v, g["wv"], g["bv"])
    return dxq, dxkv


# ---------------------------------------------------------------------------
# Position-wise feed-forward (two linears, ReLU between)

def ffn_fwd(x, p):
    h, cache1 = linear_fwd(x, p["w1"], p["b1"])
    r = np.maximum(h, 0.0)
    y, cache2 = linear_fwd(r, p["w2"], p["b2"])
    return y, (cache1, cache2, h)


def ffn_bwd(dy, cache, g):
    cache1, cache2, h = cache
    dr = linear_bwd(dy, cache2, g["w2"], g["b2"])
    dh = dr * (h > 0.0)
    return linear_bwd(dh, cache1, g["w1"], g["b1"])


# ---------------------------------------------------------------------------
# Dropout (inverted scaling; None cache means identity)

def dropout_fwd(x, rate, rng):
    if rate <= 0.0 or rng is None:
        return x, None
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return x * keep, keep


def dropout_bwd(dy, keep):
    return dy if keep is None else dy * keep


# ---------------------------------------------------------------------------
# Token cross-entropy, PAD-ignoring

def cross_entropy_fwd_bwd(logits, targets, pad_id, reduction="mean"):
    """Loss over non-PAD positions and its gradient w.r.t. logits.

    All-PAD targets give loss 0 with a zero gradient (empty-mean
    convention). reduction is "mean" (per-token) or "sum".
    """
    if reduction not in ("mean", "sum"):
        raise ValueError(f"unknown reduction {reduction!r}")
    mask = targets != pad_id
    n = int(mask.sum())
    if n == 0:
        return 0.0, np.zeros_like(logits)
    m = logits.max(axis=-1, keepdims=True)
    shifted = logits - m
    log_z = np.log(np.exp(shifted).sum(axis=-1, keepdims=True)) + m
    log_probs = logits - log_z
    gathered = np.take_along_axis(log_probs, targets[..., None], axis=-1)[..., 0]
    denom = n if reduction == "mean" else 1
    loss = float(-(gathered * mask).sum() / denom)

    dlogits = np.exp(log_probs)
    rows = np.zeros_like(dlogits)
    np.put_along_axis(rows, targets[..., None], 1.0, axis=-1)
    dlogits = (dlogits - rows) * mask[..., None] / denom
    return loss, dlogits
