"""LSTM, causal-transformer, and masked-transformer language models.

All three families share one interface: ``forward(ids)`` maps an int id
matrix [batch x time] to logits [batch x time x vocab]. Input and output
embeddings are tied (one storage). Reference widths are 512/2048 with a
512-position learned positional table; tests shrink these freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, LengthError
from .vocab import MASK_ID, N_SPECIALS, PAD_ID

LSTM = "lstm"
CAUSAL = "causal"
MASKED = "masked"
FAMILIES = (LSTM, CAUSAL, MASKED)

# the six (family, n_layers) architecture rows
ARCHITECTURES = ((LSTM, 1), (LSTM, 2), (CAUSAL, 2), (CAUSAL, 8), (MASKED, 2), (MASKED, 8))

_NEG_INF = -1e9
_INIT_STD = 0.02


@dataclass
class ModelConfig:
    family: str
    n_layers: int
    vocab_size: int
    d_model: int = 512
    d_ffn: int = 2048
    n_heads: int = 8
    dropout: float = 0.1
    max_len: int = 512
    tied_embeddings: bool = True

    def validate(self) -> None:
        if (self.family, self.n_layers) not in ARCHITECTURES:
            raise ConfigError(
                f"unknown architecture ({self.family}, {self.n_layers}); "
                f"expected one of {ARCHITECTURES}")
        if self.family != LSTM and self.d_model % self.n_heads != 0:
            raise ConfigError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if not self.tied_embeddings:
            raise ConfigError("untied embeddings are not supported")
        if self.vocab_size < N_SPECIALS + 1:
            raise ConfigError(f"vocab_size {self.vocab_size} too small")


def base_architectures(vocab_size: int, dropout: float = 0.1) -> dict[str, ModelConfig]:
    """The six reference configurations at full width, keyed by a short name."""
    return {
        f"{family}{n}": ModelConfig(family, n, vocab_size, dropout=dropout)
        for family, n in ARCHITECTURES
    }


class LanguageModel:
    """Named-parameter container plus the family-specific forward pass."""

    def __init__(self, config: ModelConfig, params: dict[str, Tensor]):
        self.config = config
        self.params = params

    @property
    def is_masked(self) -> bool:
        return self.config.family == MASKED

    def named_parameters(self) -> dict[str, Tensor]:
        return self.params

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def forward(self, ids: np.ndarray, train: bool = False, rng=None) -> Tensor:
        raise NotImplementedError

    def _check_input(self, ids: np.ndarray) -> np.ndarray:
        ids = np.asarray(ids)
        if ids.ndim != 2:
            raise ConfigError(f"expected a [batch x time] id matrix, got shape {ids.shape}")
        if ids.shape[1] > self.config.max_len:
            raise LengthError(
                f"sequence length {ids.shape[1]} exceeds max_len {self.config.max_len}")
        return ids

    def _dropout(self, x, train, rng):
        p = self.config.dropout
        if train and p > 0.0 and rng is None:
            raise ConfigError("training forward with dropout > 0 requires an rng")
        return ad.dropout(x, p, rng, train)


class LstmModel(LanguageModel):
    def forward(self, ids, train=False, rng=None):
        ids = self._check_input(ids)
        cfg = self.config
        p = self.params
        batch, time = ids.shape
        d = cfg.d_model
        x = ad.embedding_lookup(p["embedding"], ids)
        x = self._dropout(x, train, rng)
        zeros = np.zeros((batch, d), dtype=x.dtype)
        for layer in range(cfg.n_layers):
            wx, wh = p[f"layer{layer}.wx"], p[f"layer{layer}.wh"]
            bias = ad.add(p[f"layer{layer}.b_ih"], p[f"layer{layer}.b_hh"])
            x_proj = ad.add(ad.matmul(x, wx), bias)  # [B, T, 4d]
            h, c = Tensor(zeros), Tensor(zeros)
            steps = []
            for t in range(time):
                pre = ad.reshape(ad.slice_axis(x_proj, 1, t, t + 1), (batch, 4 * d))
                gates = ad.add(pre, ad.matmul(h, wh))
                i_g = ad.sigmoid(ad.slice_axis(gates, 1, 0, d))
                f_g = ad.sigmoid(ad.slice_axis(gates, 1, d, 2 * d))
                g_g = ad.tanh(ad.slice_axis(gates, 1, 2 * d, 3 * d))
                o_g = ad.sigmoid(ad.slice_axis(gates, 1, 3 * d, 4 * d))
                c = ad.add(ad.mul(f_g, c), ad.mul(i_g, g_g))
                h = ad.mul(o_g, ad.tanh(c))
                steps.append(ad.reshape(h, (batch, 1, d)))
            x = ad.concat(steps, axis=1)
            if layer + 1 < cfg.n_layers:
                x = self._dropout(x, train, rng)
        x = self._dropout(x, train, rng)
        logits = ad.add(ad.matmul(x, ad.transpose(p["embedding"])), p["head_bias"])
        return logits


class TransformerModel(LanguageModel):
    def _attention_mask(self, ids: np.ndarray, dtype) -> np.ndarray:
        time = ids.shape[1]
        if self.config.family == CAUSAL:
            mask = np.triu(np.full((time, time), _NEG_INF, dtype=dtype), k=1)
            return mask[None, None, :, :]
        # masked family attends everywhere except to pad keys
        key_pad = (ids == PAD_ID).astype(dtype) * _NEG_INF
        return key_pad[:, None, None, :]

    def forward(self, ids, train=False, rng=None):
        ids = self._check_input(ids)
        cfg = self.config
        p = self.params
        batch, time = ids.shape
        d, heads = cfg.d_model, cfg.n_heads
        d_head = d // heads

        x = ad.add(ad.embedding_lookup(p["embedding"], ids),
                   ad.slice_axis(p["pos_embedding"], 0, 0, time))
        x = self._dropout(x, train, rng)
        mask = self._attention_mask(ids, x.dtype)

        def split_heads(t):
            return ad.transpose(ad.reshape(t, (batch, time, heads, d_head)), (0, 2, 1, 3))

        for layer in range(cfg.n_layers):
            pre = f"layer{layer}."
            a = ad.layer_norm(x, p[pre + "ln1.gain"], p[pre + "ln1.bias"])
            q = split_heads(ad.add(ad.matmul(a, p[pre + "attn.wq"]), p[pre + "attn.bq"]))
            # no key bias: softmax is invariant to per-query constant score
            # shifts, so a key bias could never learn anything
            k = split_heads(ad.matmul(a, p[pre + "attn.wk"]))
            v = split_heads(ad.add(ad.matmul(a, p[pre + "attn.wv"]), p[pre + "attn.bv"]))
            scores = ad.add(ad.mul(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))),
                                   1.0 / math.sqrt(d_head)), mask)
            att = self._dropout(ad.softmax(scores, axis=-1), train, rng)
            ctx = ad.reshape(ad.transpose(ad.matmul(att, v), (0, 2, 1, 3)), (batch, time, d))
            ctx = ad.add(ad.matmul(ctx, p[pre + "attn.wo"]), p[pre + "attn.bo"])
            x = ad.add(x, self._dropout(ctx, train, rng))

            a = ad.layer_norm(x, p[pre + "ln2.gain"], p[pre + "ln2.bias"])
            hidden = ad.gelu(ad.add(ad.matmul(a, p[pre + "ffn.w1"]), p[pre + "ffn.b1"]))
            hidden = ad.add(ad.matmul(hidden, p[pre + "ffn.w2"]), p[pre + "ffn.b2"])
            x = ad.add(x, self._dropout(hidden, train, rng))

        x = ad.layer_norm(x, p["lnf.gain"], p["lnf.bias"])
        return ad.matmul(x, ad.transpose(p["embedding"]))


def build_model(config: ModelConfig, seed: int = 0) -> LanguageModel:
    """Construct a model; weights ~ N(0, 0.02), zero biases, unit gains."""
    config.validate()
    rng = np.random.default_rng(seed)
    dtype = ad.default_dtype()
    v, d, f = config.vocab_size, config.d_model, config.d_ffn

    def weight(*shape):
        return Tensor(rng.normal(0.0, _INIT_STD, shape).astype(dtype), requires_grad=True)

    def zeros(*shape):
        return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)

    def ones(*shape):
        return Tensor(np.ones(shape, dtype=dtype), requires_grad=True)

    params: dict[str, Tensor] = {"embedding": weight(v, d)}
    if config.family == LSTM:
        for layer in range(config.n_layers):
            params[f"layer{layer}.wx"] = weight(d, 4 * d)
            params[f"layer{layer}.wh"] = weight(d, 4 * d)
            params[f"layer{layer}.b_ih"] = zeros(4 * d)
            params[f"layer{layer}.b_hh"] = zeros(4 * d)
        params["head_bias"] = zeros(v)
        return LstmModel(config, params)

    params["pos_embedding"] = weight(config.max_len, d)
    for layer in range(config.n_layers):
        pre = f"layer{layer}."
        params[pre + "ln1.gain"], params[pre + "ln1.bias"] = ones(d), zeros(d)
        for name in ("wq", "wk", "wv", "wo"):
            params[pre + f"attn.{name}"] = weight(d, d)
        for name in ("bq", "bv", "bo"):
            params[pre + f"attn.{name}"] = zeros(d)
        params[pre + "ln2.gain"], params[pre + "ln2.bias"] = ones(d), zeros(d)
        params[pre + "ffn.w1"], params[pre + "ffn.b1"] = weight(d, f), zeros(f)
        params[pre + "ffn.w2"], params[pre + "ffn.b2"] = weight(f, d), zeros(d)
    params["lnf.gain"], params["lnf.bias"] = ones(d), zeros(d)
    return TransformerModel(config, params)


def forward_causal(model: LanguageModel, ids, train: bool = False, rng=None) -> Tensor:
    """Next-token logits; position t sees only positions <= t."""
    if model.is_masked:
        raise ConfigError("forward_causal called on a masked-family model")
    return model.forward(ids, train=train, rng=rng)


def forward_masked(model: LanguageModel, ids, train: bool = False, rng=None) -> Tensor:
    """Full-context logits for mask-filling models."""
    if not model.is_masked:
        raise ConfigError("forward_masked called on a causal-family model")
    return model.forward(ids, train=train, rng=rng)


def count_params(model: LanguageModel) -> int:
    """Exact count of trainable scalars (tied tensors counted once)."""
    seen = set()
    total = 0
    for p in model.params.values():
        if id(p) not in seen:
            seen.add(id(p))
            total += p.size
    return total


def count_params_formula(config: ModelConfig) -> int:
    """Closed-form parameter count for a configuration."""
    v, d, f = config.vocab_size, config.d_model, config.d_ffn
    if config.family == LSTM:
        per_layer = 4 * (d * d + d * d + 2 * d)
        return v * d + config.n_layers * per_layer + v
    attention = 4 * d * d + 3 * d  # q/k/v/out weights; q, v, out biases
    ffn = (d * f + f) + (f * d + d)
    per_block = 2 * d + attention + 2 * d + ffn
    return v * d + config.max_len * d + config.n_layers * per_block + 2 * d


# ---------------------------------------------------------------------------
# sentence scoring


def _target_logprobs(logits: np.ndarray, ids: np.ndarray) -> np.ndarray:
    """log P(ids[t] | prefix) for t = 1..T-1, one row per batch element."""
    logp = ad.np_log_softmax(logits, axis=-1)
    batch, time = ids.shape
    rows = np.arange(batch)[:, None]
    cols = np.arange(time - 1)[None, :]
    return logp[rows, cols, ids[:, 1:]]


def batch_sequence_logprobs(model: LanguageModel, id_matrix: np.ndarray) -> np.ndarray:
    """Summed next-token log-probabilities per row, skipping pad targets."""
    id_matrix = np.asarray(id_matrix)
    logits = forward_causal(model, id_matrix).data
    per_target = _target_logprobs(logits, id_matrix)
    keep = id_matrix[:, 1:] != PAD_ID
    return (per_target * keep).sum(axis=1)


def sequence_logprob(model: LanguageModel, ids) -> float:
    """Total log-probability (nats) of one encoded sequence under a causal model.

    Sums log P(id_t | id_<t) over every non-pad target, including the
    end-of-sequence token.
    """
    ids = np.asarray(ids, dtype=np.int64)
    return float(batch_sequence_logprobs(model, ids[None, :])[0])


def masked_positions(ids: np.ndarray) -> list[int]:
    """Indices of scorable tokens: everything except the five reserved ids."""
    return [int(j) for j in np.flatnonzero(np.asarray(ids) >= N_SPECIALS)]


def pseudo_logprob(model: LanguageModel, ids) -> float:
    """Mask each scorable position in turn and sum log P(true token).

    Returns 0.0 when the sequence has no scorable positions (empty product).
    """
    ids = np.asarray(ids, dtype=np.int64)
    positions = masked_positions(ids)
    if not positions:
        return 0.0
    batch = np.tile(ids, (len(positions), 1))
    rows = np.arange(len(positions))
    batch[rows, positions] = MASK_ID
    logits = forward_masked(model, batch).data
    logp = ad.np_log_softmax(logits, axis=-1)
    return float(logp[rows, positions, ids[positions]].sum())


def clone_config(config: ModelConfig, **overrides) -> ModelConfig:
    return replace(config, **overrides)
