"""Shared test fixtures: table-driven oracle models and brute-force scorers.

The oracle models bypass learned weights entirely — their forward pass reads
log-probabilities straight out of a hand-specified bigram table — so every
scoring function in the package can be checked against independent
enumeration with no tolerance for modeling error.
"""

import numpy as np

from tinylm import autodiff as ad
from tinylm.autodiff import Tensor
from tinylm.models import CAUSAL, MASKED, LanguageModel, ModelConfig
from tinylm.vocab import EOS_ID, N_SPECIALS, PAD_ID, SOS_ID


def random_log_table(vocab_size: int, seed: int = 0) -> np.ndarray:
    """Row-stochastic log table: row i is log P(next token | current = i)."""
    rng = np.random.default_rng(seed)
    logits = rng.normal(0.0, 1.5, (vocab_size, vocab_size))
    return ad.np_log_softmax(logits, axis=-1)


class BigramOracle(LanguageModel):
    """Causal model whose next-token distribution is a fixed bigram table."""

    def __init__(self, log_table: np.ndarray, max_len: int = 512):
        v = log_table.shape[0]
        cfg = ModelConfig(CAUSAL, 2, vocab_size=v, d_model=8, d_ffn=16,
                          n_heads=2, dropout=0.0, max_len=max_len)
        super().__init__(cfg, {})
        self.log_table = np.asarray(log_table, dtype=np.float64)

    def forward(self, ids, train=False, rng=None):
        ids = self._check_input(ids)
        return Tensor(self.log_table[ids])


class MaskedBigramOracle(LanguageModel):
    """Masked-family model that predicts each position from its left neighbor.

    The prediction for position t reads the (unmasked) token at t-1, so
    masking position t never changes position t's own distribution — which
    makes pseudo-log-likelihood enumerable by hand.
    """

    def __init__(self, log_table: np.ndarray, max_len: int = 512):
        v = log_table.shape[0]
        cfg = ModelConfig(MASKED, 2, vocab_size=v, d_model=8, d_ffn=16,
                          n_heads=2, dropout=0.0, max_len=max_len)
        super().__init__(cfg, {})
        self.log_table = np.asarray(log_table, dtype=np.float64)

    def forward(self, ids, train=False, rng=None):
        ids = self._check_input(ids)
        left = np.empty_like(ids)
        left[:, 0] = SOS_ID
        left[:, 1:] = ids[:, :-1]
        return Tensor(self.log_table[left])


def brute_force_sequence_logprob(log_table: np.ndarray, ids) -> float:
    """Sum of bigram log-probabilities over non-pad targets."""
    ids = list(ids)
    total = 0.0
    for prev, cur in zip(ids[:-1], ids[1:]):
        if cur != PAD_ID:
            total += float(log_table[prev, cur])
    return total


def brute_force_pseudo_logprob(log_table: np.ndarray, ids) -> float:
    """Left-neighbor masked scoring: sum log P(ids[t] | ids[t-1]) over
    non-special positions (matches MaskedBigramOracle exactly)."""
    ids = list(ids)
    total = 0.0
    for t, cur in enumerate(ids):
        if cur < N_SPECIALS:
            continue
        prev = ids[t - 1] if t > 0 else SOS_ID
        total += float(log_table[prev, cur])
    return total


def encode_words(vocab, words):
    return np.asarray(vocab.encode(list(words)), dtype=np.int64)
