"""Normalization, rare-word thresholding, splitting, and corpus statistics.

Pipeline order used by the CLI: normalize -> split (seeded shuffle) ->
filter_short on train/val -> apply_unk with frequencies from the filtered
training split -> stats.
"""

from __future__ import annotations

import csv
import math
import random
import re
from collections import Counter
from dataclasses import dataclass, field

from .errors import ConfigError, InsufficientData

UNK = "<unk>"

_TERMINAL_PUNCT_RE = re.compile(r"[.?!]+$")


def normalize(text: str) -> list[str]:
    """Lowercase and whitespace-tokenize; drop commas and terminal . ? !"""
    tokens = []
    for raw in text.lower().split():
        tok = raw.replace(",", "")
        tok = _TERMINAL_PUNCT_RE.sub("", tok)
        if tok:
            tokens.append(tok)
    return tokens


@dataclass
class SplitCorpus:
    train: list[list[str]] = field(default_factory=list)
    val: list[list[str]] = field(default_factory=list)
    test: list[list[str]] = field(default_factory=list)
    seed: int = 0

    def splits(self):
        return {"train": self.train, "val": self.val, "test": self.test}


def split_corpus(corpus, fractions=(0.90, 0.05, 0.05), seed: int = 0) -> SplitCorpus:
    """Assign utterances to train/val/test by a seeded index shuffle.

    Val and test get floor(fraction * N) utterances each; the remainder goes
    to training. Deterministic for a fixed seed.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must sum to 1, got {fractions}")
    n = len(corpus)
    if n < 3:
        raise InsufficientData(f"need at least 3 utterances to split, got {n}")
    n_val = math.floor(fractions[1] * n)
    n_test = math.floor(fractions[2] * n)
    n_train = n - n_val - n_test
    indices = list(range(n))
    random.Random(seed).shuffle(indices)
    pick = lambda idx: [corpus[i] for i in idx]
    return SplitCorpus(
        train=pick(sorted(indices[:n_train])),
        val=pick(sorted(indices[n_train:n_train + n_val])),
        test=pick(sorted(indices[n_train + n_val:])),
        seed=seed,
    )


def filter_short(corpus, min_words: int = 2):
    """Drop utterances with fewer than ``min_words`` tokens. Idempotent."""
    return [u for u in corpus if len(u) >= min_words]


def token_frequencies(corpus) -> Counter:
    counts = Counter()
    for utt in corpus:
        counts.update(utt)
    return counts


def apply_unk(corpus, min_count: int = 3):
    """Replace tokens rarer than ``min_count`` with the unknown marker.

    Frequencies are counted over ``corpus`` itself; returns the replaced
    corpus and the pre-replacement frequency table.
    """
    if min_count < 1:
        raise ConfigError(f"min_count must be >= 1, got {min_count}")
    counts = token_frequencies(corpus)
    replaced = [[t if counts[t] >= min_count else UNK for t in utt] for utt in corpus]
    return replaced, counts


def apply_unk_split(sc: SplitCorpus, min_count: int = 3):
    """Threshold all three splits using training-split frequencies only.

    A token absent from training has frequency 0 and is therefore replaced
    everywhere. Returns the new SplitCorpus and the training frequency table.
    """
    if min_count < 1:
        raise ConfigError(f"min_count must be >= 1, got {min_count}")
    counts = token_frequencies(sc.train)
    keep = lambda t: t if counts[t] >= min_count else UNK
    out = SplitCorpus(
        train=[[keep(t) for t in u] for u in sc.train],
        val=[[keep(t) for t in u] for u in sc.val],
        test=[[keep(t) for t in u] for u in sc.test],
        seed=sc.seed,
    )
    return out, counts


@dataclass
class CorpusStats:
    n_utterances: int
    mean_len: float
    sd_len: float
    n_tokens: int
    oov_rate: float
    vocab_size: int


def compute_stats(split, train_vocab) -> CorpusStats:
    """Per-split statistics against the post-threshold training vocabulary.

    A token counts as out-of-vocabulary when it is the unknown marker or is
    absent from ``train_vocab``; the denominator is the split's token count
    as stored (post-threshold). sd_len is the population standard deviation.
    """
    vocab = set(train_vocab)
    lengths = [len(u) for u in split]
    n_utt = len(split)
    n_tokens = sum(lengths)
    if n_utt == 0:
        return CorpusStats(0, 0.0, 0.0, 0, 0.0, len(vocab))
    mean_len = n_tokens / n_utt
    sd_len = math.sqrt(sum((l - mean_len) ** 2 for l in lengths) / n_utt)
    oov = sum(1 for u in split for t in u if t == UNK or t not in vocab)
    oov_rate = oov / n_tokens if n_tokens else 0.0
    return CorpusStats(n_utt, mean_len, sd_len, n_tokens, oov_rate, len(vocab))


STAT_ROWS = (
    ("n_utterances", lambda s: str(s.n_utterances)),
    ("mean_sd_utterance_length", lambda s: f"{s.mean_len:.2f} ({s.sd_len:.2f})"),
    ("n_tokens", lambda s: str(s.n_tokens)),
    ("oov_rate_percent", lambda s: f"{100.0 * s.oov_rate:.2f}"),
    ("vocab_size", lambda s: str(s.vocab_size)),
)


def stats_csv_rows(stats_by_split: dict[str, CorpusStats]) -> list[list[str]]:
    header = ["statistic"] + list(stats_by_split)
    rows = [header]
    for name, fmt in STAT_ROWS:
        rows.append([name] + [fmt(s) for s in stats_by_split.values()])
    return rows


def write_stats_csv(path, stats_by_split: dict[str, CorpusStats]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        csv.writer(fh).writerows(stats_csv_rows(stats_by_split))


def format_stats_table(stats_by_split: dict[str, CorpusStats]) -> str:
    """Aligned-column text table, one column per split."""
    rows = stats_csv_rows(stats_by_split)
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for r in rows:
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"
