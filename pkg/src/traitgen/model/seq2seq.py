"""Desk-scale encoder-decoder transformer over a flat parameter vector.

Pre-norm residual blocks, sinusoidal positions, causal self-attention in
the decoder, cross-attention over the encoder output. All parameters live
in one flat array with named views, so the optimizer and the gradient
check treat the model as a single vector function.

Parameter count is closed-form, checked at construction:

    2*V*d                                   embeddings
  + n_enc * (4*(d*d+d) + 4*d + 2*d*f+f+d)   encoder layers
  + n_dec * (8*(d*d+d) + 6*d + 2*d*f+f+d)   decoder layers
  + 4*d                                     final norms
  + d*V + V                                 output projection
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import InputError
from .config import ModelConfig
from .layers import (causal_mask, cross_entropy_fwd_bwd, dropout_bwd, dropout_fwd,
                     ffn_bwd, ffn_fwd, layer_norm_bwd, layer_norm_fwd, linear_bwd,
                     linear_fwd, mha_fwd, mha_bwd, sinusoidal_encoding, xavier_limit)
from .vocab import BOS, EOS, PAD, Vocab

_ATTN_NAMES = ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo")


def parameter_specs(config: ModelConfig, vocab_size: int):
    """Ordered (name, shape, init) triples defining the flat layout."""
    d, f, v = config.d_model, config.ffn_dim, vocab_size
    specs: list[tuple[str, tuple[int, ...], str]] = [
        ("src_embed", (v, d), "xavier"),
        ("tgt_embed", (v, d), "xavier"),
    ]

    def norm(prefix):
        specs.append((prefix + ".g", (d,), "ones"))
        specs.append((prefix + ".b", (d,), "zeros"))

    def attention(prefix):
        for name in _ATTN_NAMES:
            shape = (d, d) if name.startswith("w") else (d,)
            specs.append((prefix + "." + name, shape, "xavier" if name.startswith("w") else "zeros"))

    def ffn(prefix):
        specs.append((prefix + ".w1", (d, f), "xavier"))
        specs.append((prefix + ".b1", (f,), "zeros"))
        specs.append((prefix + ".w2", (f, d), "xavier"))
        specs.append((prefix + ".b2", (d,), "zeros"))

    for i in range(config.n_enc_layers):
        norm(f"enc{i}.ln1")
        attention(f"enc{i}.attn")
        norm(f"enc{i}.ln2")
        ffn(f"enc{i}.ffn")
    norm("enc_ln")
    for i in range(config.n_dec_layers):
        norm(f"dec{i}.ln1")
        attention(f"dec{i}.self")
        norm(f"dec{i}.ln2")
        attention(f"dec{i}.cross")
        norm(f"dec{i}.ln3")
        ffn(f"dec{i}.ffn")
    norm("dec_ln")
    specs.append(("out.w", (d, v), "zeros"))  # zero start: uniform softmax
    specs.append(("out.b", (v,), "zeros"))
    return specs


def expected_param_count(config: ModelConfig, vocab_size: int) -> int:
    d, f, v = config.d_model, config.ffn_dim, vocab_size
    per_enc = 4 * (d * d + d) + 4 * d + 2 * d * f + f + d
    per_dec = 8 * (d * d + d) + 6 * d + 2 * d * f + f + d
    return (2 * v * d + config.n_enc_layers * per_enc + config.n_dec_layers * per_dec
            + 4 * d + d * v + v)


def _views_into(flat: np.ndarray, specs) -> dict[str, np.ndarray]:
    views = {}
    offset = 0
    for name, shape, _ in specs:
        size = int(np.prod(shape))
        views[name] = flat[offset:offset + size].reshape(shape)
        offset += size
    return views


class Seq2SeqModel:
    def __init__(self, config: ModelConfig, vocab: Vocab, init: bool = True):
        self.config = config
        self.vocab = vocab
        self.specs = parameter_specs(config, len(vocab))
        total = sum(int(np.prod(shape)) for _, shape, _ in self.specs)
        assert total == expected_param_count(config, len(vocab)), \
            "parameter layout disagrees with the closed-form count"
        self.theta = np.zeros(total, dtype=config.dtype)
        self.views = _views_into(self.theta, self.specs)
        self._scale = math.sqrt(config.d_model)
        self.pe_src = sinusoidal_encoding(config.max_src_len, config.d_model, config.dtype)
        self.pe_tgt = sinusoidal_encoding(config.max_tgt_len + 1, config.d_model, config.dtype)
        if init:
            self.init_parameters()

    def init_parameters(self, seed: int | None = None) -> None:
        """Scaled-uniform weights, zero biases, unit norms, zero output head."""
        rng = np.random.Generator(np.random.PCG64(self.config.seed if seed is None else seed))
        for name, shape, kind in self.specs:
            view = self.views[name]
            if kind == "xavier":
                limit = xavier_limit(shape[0], shape[-1])
                view[...] = rng.uniform(-limit, limit, shape).astype(self.config.dtype)
            elif kind == "ones":
                view[...] = 1.0
            else:
                view[...] = 0.0

    def param_count(self) -> int:
        return self.theta.size

    def _block(self, views: dict, prefix: str, names) -> dict[str, np.ndarray]:
        return {n: views[prefix + "." + n] for n in names}

    # ------------------------------------------------------------------
    # Forward

    def _check_lengths(self, src_len: int | None, tgt_len: int | None):
        if src_len is not None and src_len > self.config.max_src_len:
            raise InputError(f"source length {src_len} exceeds max_src_len {self.config.max_src_len}")
        if tgt_len is not None and tgt_len > self.config.max_tgt_len + 1:
            raise InputError(f"target length {tgt_len} exceeds max_tgt_len {self.config.max_tgt_len}")

    def _encode(self, src_ids, train=False, rng=None):
        self._check_lengths(src_ids.shape[1], None)
        rate = self.config.dropout_rate if train else 0.0
        src_mask = (src_ids != PAD)[:, None, None, :]
        x = self.views["src_embed"][src_ids] * self._scale + self.pe_src[:src_ids.shape[1]]
        x, keep0 = dropout_fwd(x, rate, rng)
        layer_caches = []
        for i in range(self.config.n_enc_layers):
            h, c_ln1 = layer_norm_fwd(x, self.views[f"enc{i}.ln1.g"], self.views[f"enc{i}.ln1.b"])
            a, c_att = mha_fwd(h, h, self._block(self.views, f"enc{i}.attn", _ATTN_NAMES),
                               self.config.n_heads, src_mask)
            a, keep1 = dropout_fwd(a, rate, rng)
            x = x + a
            h, c_ln2 = layer_norm_fwd(x, self.views[f"enc{i}.ln2.g"], self.views[f"enc{i}.ln2.b"])
            f, c_ffn = ffn_fwd(h, self._block(self.views, f"enc{i}.ffn", ("w1", "b1", "w2", "b2")))
            f, keep2 = dropout_fwd(f, rate, rng)
            x = x + f
            layer_caches.append((c_ln1, c_att, keep1, c_ln2, c_ffn, keep2))
        memory, c_final = layer_norm_fwd(x, self.views["enc_ln.g"], self.views["enc_ln.b"])
        return memory, src_mask, (src_ids, keep0, layer_caches, c_final)

    def _decode(self, tgt_in, memory, src_mask, train=False, rng=None):
        self._check_lengths(None, tgt_in.shape[1])
        rate = self.config.dropout_rate if train else 0.0
        t = tgt_in.shape[1]
        self_mask = causal_mask(t) & (tgt_in != PAD)[:, None, None, :]
        x = self.views["tgt_embed"][tgt_in] * self._scale + self.pe_tgt[:t]
        x, keep0 = dropout_fwd(x, rate, rng)
        layer_caches = []
        for i in range(self.config.n_dec_layers):
            h, c_ln1 = layer_norm_fwd(x, self.views[f"dec{i}.ln1.g"], self.views[f"dec{i}.ln1.b"])
            a, c_self = mha_fwd(h, h, self._block(self.views, f"dec{i}.self", _ATTN_NAMES),
                                self.config.n_heads, self_mask)
            a, keep1 = dropout_fwd(a, rate, rng)
            x = x + a
            h, c_ln2 = layer_norm_fwd(x, self.views[f"dec{i}.ln2.g"], self.views[f"dec{i}.ln2.b"])
            a, c_cross = mha_fwd(h, memory, self._block(self.views, f"dec{i}.cross", _ATTN_NAMES),
                                 self.config.n_heads, src_mask)
            a, keep2 = dropout_fwd(a, rate, rng)
            x = x + a
            h, c_ln3 = layer_norm_fwd(x, self.views[f"dec{i}.ln3.g"], self.views[f"dec{i}.ln3.b"])
            f, c_ffn = ffn_fwd(h, self._block(self.views, f"dec{i}.ffn", ("w1", "b1", "w2", "b2")))
            f, keep3 = dropout_fwd(f, rate, rng)
            x = x + f
            layer_caches.append((c_ln1, c_self, keep1, c_ln2, c_cross, keep2, c_ln3, c_ffn, keep3))
        y, c_final = layer_norm_fwd(x, self.views["dec_ln.g"], self.views["dec_ln.b"])
        logits, c_out = linear_fwd(y, self.views["out.w"], self.views["out.b"])
        return logits, (tgt_in, keep0, layer_caches, c_final, c_out)

    def forward(self, src_ids, tgt_in, train=False, rng=None):
        """Logits over the vocabulary at every target position."""
        src_ids = np.asarray(src_ids, dtype=np.int64)
        tgt_in = np.asarray(tgt_in, dtype=np.int64)
        memory, src_mask, enc_cache = self._encode(src_ids, train, rng)
        logits, dec_cache = self._decode(tgt_in, memory, src_mask, train, rng)
        return logits, (enc_cache, dec_cache, memory)

    # ------------------------------------------------------------------
    # Backward

    def _backward(self, dlogits, caches, grads):
        enc_cache, dec_cache, _memory = caches
        tgt_in, dec_keep0, dec_layers, dec_final, c_out = dec_cache
        src_ids, enc_keep0, enc_layers, enc_final = enc_cache
        d = self.config.d_model

        dy = linear_bwd(dlogits, c_out, grads["out.w"], grads["out.b"])
        dx = layer_norm_bwd(dy, dec_final, grads["dec_ln.g"], grads["dec_ln.b"])
        dmemory = None
        for i in reversed(range(self.config.n_dec_layers)):
            c_ln1, c_self, keep1, c_ln2, c_cross, keep2, c_ln3, c_ffn, keep3 = dec_layers[i]
            dh = ffn_bwd(dropout_bwd(dx, keep3), c_ffn,
                         self._block(grads, f"dec{i}.ffn", ("w1", "b1", "w2", "b2")))
            dx = dx + layer_norm_bwd(dh, c_ln3, grads[f"dec{i}.ln3.g"], grads[f"dec{i}.ln3.b"])
            dhq, dmem = mha_bwd(dropout_bwd(dx, keep2), c_cross,
                                self._block(grads, f"dec{i}.cross", _ATTN_NAMES))
            dmemory = dmem if dmemory is None else dmemory + dmem
            dx = dx + layer_norm_bwd(dhq, c_ln2, grads[f"dec{i}.ln2.g"], grads[f"dec{i}.ln2.b"])
            dhq, dhkv = mha_bwd(dropout_bwd(dx, keep1), c_self,
                                self._block(grads, f"dec{i}.self", _ATTN_NAMES))
            dx = dx + layer_norm_bwd(dhq + dhkv, c_ln1,
                                     grads[f"dec{i}.ln1.g"], grads[f"dec{i}.ln1.b"])
        dx = dropout_bwd(dx, dec_keep0)
        np.add.at(grads["tgt_embed"], tgt_in.reshape(-1),
                  (dx * self._scale).reshape(-1, d))

        dx = layer_norm_bwd(dmemory, enc_final, grads["enc_ln.g"], grads["enc_ln.b"])
        for i in reversed(range(self.config.n_enc_layers)):
            c_ln1, c_att, keep1, c_ln2, c_ffn, keep2 = enc_layers[i]
            dh = ffn_bwd(dropout_bwd(dx, keep2), c_ffn,
                         self._block(grads, f"enc{i}.ffn", ("w1", "b1", "w2", "b2")))
            dx = dx + layer_norm_bwd(dh, c_ln2, grads[f"enc{i}.ln2.g"], grads[f"enc{i}.ln2.b"])
            dhq, dhkv = mha_bwd(dropout_bwd(dx, keep1), c_att,
                                self._block(grads, f"enc{i}.attn", _ATTN_NAMES))
            dx = dx + layer_norm_bwd(dhq + dhkv, c_ln1,
                                     grads[f"enc{i}.ln1.g"], grads[f"enc{i}.ln1.b"])
        dx = dropout_bwd(dx, enc_keep0)
        np.add.at(grads["src_embed"], src_ids.reshape(-1),
                  (dx * self._scale).reshape(-1, d))

    def loss_and_grad(self, src_ids, tgt_in, tgt_out, reduction="mean",
                      train=False, rng=None):
        """Token cross-entropy and its analytic gradient as a flat vector."""
        tgt_out = np.asarray(tgt_out, dtype=np.int64)
        logits, caches = self.forward(src_ids, tgt_in, train, rng)
        loss, dlogits = cross_entropy_fwd_bwd(logits, tgt_out, PAD, reduction)
        grad = np.zeros_like(self.theta)
        self._backward(dlogits, caches, _views_into(grad, self.specs))
        return loss, grad

    def loss_only(self, src_ids, tgt_in, tgt_out, reduction="mean") -> float:
        tgt_out = np.asarray(tgt_out, dtype=np.int64)
        logits, _ = self.forward(src_ids, tgt_in)
        loss, _ = cross_entropy_fwd_bwd(logits, tgt_out, PAD, reduction)
        return loss

    # ------------------------------------------------------------------
    # Generation

    def generate(self, src_ids_batch: list[list[int]],
                 max_tgt_len: int | None = None) -> list[list[int]]:
        """Greedy decoding: argmax per step from BOS until EOS or the
        length bound; deterministic."""
        limit = self.config.max_tgt_len if max_tgt_len is None else max_tgt_len
        b = len(src_ids_batch)
        width = max(len(s) for s in src_ids_batch)
        src = np.full((b, width), PAD, dtype=np.int64)
        for row, ids in enumerate(src_ids_batch):
            src[row, :len(ids)] = ids
        memory, src_mask, _ = self._encode(src)

        ys = np.full((b, 1), BOS, dtype=np.int64)
        outs: list[list[int]] = [[] for _ in range(b)]
        alive = np.ones(b, dtype=bool)
        for _ in range(limit):
            logits, _ = self._decode(ys, memory, src_mask)
            step_ids = logits[:, -1, :].argmax(axis=-1)
            next_col = np.full((b, 1), PAD, dtype=np.int64)
            for row in range(b):
                if not alive[row]:
                    continue
                token = int(step_ids[row])
                if token == EOS:
                    alive[row] = False
                else:
                    outs[row].append(token)
                    next_col[row, 0] = token
            if not alive.any():
                break
            ys = np.concatenate([ys, next_col], axis=1)
        return outs
