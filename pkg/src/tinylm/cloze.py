"""Noun/verb cloze evaluation: does the model put more probability mass on
the correct syntactic class at a blanked position?

Items come from validation utterances at positions whose word is tagged
unambiguously NOUN or VERB by a two-column lexicon file. Class mass is the
log-sum-exp of candidate-word scores: masked models score the blank position
directly in one forward pass; causal models enumerate the full sentence once
per candidate. The held-out target word stays in its class's candidate set
unless `include_target=False`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmptyClass
from .models import LanguageModel, batch_sequence_logprobs, forward_masked
from . import autodiff as ad
from .vocab import MASK_ID, Vocabulary

log = logging.getLogger(__name__)

TAGS = ("NOUN", "VERB", "ADJ", "ADV", "OTHER")
NOUN, VERB = "NOUN", "VERB"
CANDIDATE_CAP = 500
_CHUNK = 128


class PosLexicon:
    """word -> tag set over {NOUN, VERB, ADJ, ADV, OTHER}."""

    def __init__(self, entries: dict[str, frozenset[str]]):
        for word, tags in entries.items():
            bad = tags - set(TAGS)
            if bad:
                raise ConfigError(f"word {word!r} has unknown tags {sorted(bad)}")
        self.entries = entries

    def tags_of(self, word: str) -> frozenset[str]:
        return self.entries.get(word, frozenset())

    def unambiguous(self, word: str, cls: str) -> bool:
        return self.tags_of(word) == frozenset((cls,))

    def unambiguous_words(self, cls: str) -> list[str]:
        return [w for w, tags in self.entries.items() if tags == frozenset((cls,))]

    @classmethod
    def parse(cls, text: str) -> "PosLexicon":
        entries: dict[str, set[str]] = {}
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ConfigError(f"lexicon line {line_no}: expected 'word tag'")
            word, tag = parts
            entries.setdefault(word, set()).add(tag)
        return cls({w: frozenset(t) for w, t in entries.items()})

    @classmethod
    def load(cls, path) -> "PosLexicon":
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh.read())


@dataclass(frozen=True)
class ClozeItem:
    tokens: tuple[str, ...]
    blank_index: int
    target_class: str


@dataclass
class ClozeReport:
    n_clozes: int
    noun_ratio: float
    accuracy: float


def extract_clozes(utterances: list, lexicon: PosLexicon) -> list[ClozeItem]:
    """One item per position holding an unambiguous noun or verb."""
    items = []
    for utterance in utterances:
        tokens = tuple(utterance)
        for index, word in enumerate(tokens):
            for cls in (NOUN, VERB):
                if lexicon.unambiguous(word, cls):
                    items.append(ClozeItem(tokens, index, cls))
    return items


def build_candidates(vocab: Vocabulary, lexicon: PosLexicon,
                     frequencies, cap: int = CANDIDATE_CAP) -> dict[str, list[str]]:
    """In-vocabulary unambiguous members per class, most frequent first,
    capped to bound causal-model enumeration cost."""
    out = {}
    known = set(vocab.words())
    for cls in (NOUN, VERB):
        words = [w for w in lexicon.unambiguous_words(cls) if w in known]
        words.sort(key=lambda w: (-frequencies.get(w, 0), w))
        out[cls] = words[:cap]
    return out


def _logsumexp(values: np.ndarray) -> float:
    m = float(np.max(values))
    return m + float(np.log(np.sum(np.exp(values - m))))


def _item_candidates(item: ClozeItem, candidates: dict[str, list[str]],
                     include_target: bool) -> dict[str, list[str]]:
    if include_target:
        return candidates
    target = item.tokens[item.blank_index]
    return {cls: [w for w in words if w != target]
            for cls, words in candidates.items()}


def class_mass(model: LanguageModel, vocab: Vocabulary, item: ClozeItem,
               candidates: dict[str, list[str]],
               include_target: bool = True) -> tuple[float, float]:
    """(log mass NOUN, log mass VERB) at the blank."""
    cands = _item_candidates(item, candidates, include_target)
    for cls in (NOUN, VERB):
        if not cands.get(cls):
            raise EmptyClass(f"no {cls} candidates for item {item.tokens}")
    if model.is_masked:
        ids = np.asarray(vocab.encode(item.tokens), dtype=np.int64)
        pos = item.blank_index + 1  # start-of-sequence offset
        ids[pos] = MASK_ID
        logits = forward_masked(model, ids[None, :]).data
        logp = ad.np_log_softmax(logits[0, pos])
        masses = tuple(
            _logsumexp(np.array([logp[vocab.id_of(w)] for w in cands[cls]]))
            for cls in (NOUN, VERB))
        return masses
    scores = {}
    for cls in (NOUN, VERB):
        rows = []
        for word in cands[cls]:
            tokens = list(item.tokens)
            tokens[item.blank_index] = word
            rows.append(vocab.encode(tokens))
        matrix = np.asarray(rows, dtype=np.int64)
        parts = [batch_sequence_logprobs(model, matrix[s:s + _CHUNK])
                 for s in range(0, len(matrix), _CHUNK)]
        scores[cls] = _logsumexp(np.concatenate(parts))
    return scores[NOUN], scores[VERB]


@dataclass
class ClozeOutcome:
    item: ClozeItem
    mass_noun: float
    mass_verb: float
    correct: bool


def evaluate_clozes(model: LanguageModel, vocab: Vocabulary, items: list[ClozeItem],
                    candidates: dict[str, list[str]],
                    include_target: bool = True) -> tuple[ClozeReport, list[ClozeOutcome]]:
    """Item correct iff its class strictly outweighs the other; ties incorrect."""
    if not items:
        raise ConfigError("no cloze items to evaluate")
    outcomes = []
    correct_count = 0
    noun_count = 0
    for item in items:
        mass_noun, mass_verb = class_mass(model, vocab, item, candidates, include_target)
        if item.target_class == NOUN:
            noun_count += 1
            correct = mass_noun > mass_verb
        else:
            correct = mass_verb > mass_noun
        correct_count += int(correct)
        outcomes.append(ClozeOutcome(item, mass_noun, mass_verb, correct))
    n = len(items)
    report = ClozeReport(n, noun_count / n, correct_count / n)
    return report, outcomes


def outcome_csv_rows(outcomes: list[ClozeOutcome]) -> list[list[str]]:
    rows = [["utterance", "blank_index", "target_class", "mass_noun", "mass_verb",
             "correct"]]
    for o in outcomes:
        rows.append([" ".join(o.item.tokens), str(o.item.blank_index),
                     o.item.target_class, f"{o.mass_noun:.6f}", f"{o.mass_verb:.6f}",
                     str(int(o.correct))])
    return rows
