"""Minimal-pair acceptability suites: template parsing, generation, scoring.

Template files are line-oriented UTF-8:

    test: subject_verb_agreement
    phenomenon: agreement
    good: the <NN> <VBZ> here
    bad: the <NN> <VBP> here
    lexicon NN: dog cat boy
    lexicon VBZ: runs jumps
    lexicon VBP: run jump

Every occurrence of a slot type shares one sampled filler across both frames,
so the two sentences differ only where the frames differ. Templates needing
two independent fillers of the same part of speech use two slot types backed
by the same word list. A model is correct on a pair when it scores the good
sentence strictly higher; ties count as incorrect.
"""

from __future__ import annotations

import itertools
import logging
import random
import re
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, EmptySlot
from .models import LanguageModel, batch_sequence_logprobs, masked_positions, pseudo_logprob
from .vocab import PAD_ID, Vocabulary, pad_batch

log = logging.getLogger(__name__)

_SLOT_RE = re.compile(r"^<([A-Z0-9_]+)>$")
_SCORE_CHUNK = 128


@dataclass
class Template:
    test_name: str
    phenomenon: str
    frame_good: tuple[str, ...]
    frame_bad: tuple[str, ...]
    slot_lexicons: dict[str, tuple[str, ...]]

    def slot_types(self) -> list[str]:
        """Distinct slot types in first-appearance order (good frame first)."""
        seen: list[str] = []
        for token in self.frame_good + self.frame_bad:
            m = _SLOT_RE.match(token)
            if m and m.group(1) not in seen:
                seen.append(m.group(1))
        return seen

    def validate(self) -> None:
        if not self.frame_good or not self.frame_bad:
            raise ConfigError(f"test {self.test_name!r} is missing a frame")
        if self.frame_good == self.frame_bad:
            raise ConfigError(f"test {self.test_name!r} has identical frames")
        for slot in self.slot_types():
            if slot not in self.slot_lexicons:
                raise ConfigError(f"test {self.test_name!r} uses <{slot}> "
                                  "without a lexicon")
            if not self.slot_lexicons[slot]:
                raise EmptySlot(self.test_name, slot)


@dataclass(frozen=True)
class MinimalPair:
    good: tuple[str, ...]
    bad: tuple[str, ...]
    test_name: str
    phenomenon: str


def parse_templates(text: str) -> list[Template]:
    templates: list[Template] = []
    current: dict | None = None

    def finish():
        if current is None:
            return
        t = Template(current["test"], current.get("phenomenon", ""),
                     tuple(current.get("good", ())), tuple(current.get("bad", ())),
                     {k: tuple(v) for k, v in current["lexicons"].items()})
        t.validate()
        templates.append(t)

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise ConfigError(f"template line {line_no}: expected 'key: value'")
        key, _, value = line.partition(":")
        key, value = key.strip(), value.strip()
        if key == "test":
            finish()
            current = {"test": value, "lexicons": {}}
            continue
        if current is None:
            raise ConfigError(f"template line {line_no}: {key!r} before any 'test:'")
        if key == "phenomenon":
            current["phenomenon"] = value
        elif key in ("good", "bad"):
            current[key] = value.split()
        elif key.startswith("lexicon "):
            current["lexicons"][key.split(None, 1)[1]] = value.split()
        else:
            raise ConfigError(f"template line {line_no}: unknown key {key!r}")
    finish()
    if not templates:
        raise ConfigError("no templates found")
    return templates


def load_templates(path) -> list[Template]:
    with open(path, encoding="utf-8") as fh:
        return parse_templates(fh.read())


def intersect_vocab(vocabularies: list[Vocabulary]) -> set[str]:
    """Words common to every vocabulary, specials excluded."""
    if not vocabularies:
        raise ConfigError("no vocabularies to intersect")
    sets = [set(v.words()) for v in vocabularies]
    out = sets[0]
    for s in sets[1:]:
        out = out & s
    return out


def filter_template(template: Template, shared_vocab: set[str]) -> Template:
    """Restrict lexicons to the shared vocabulary. Literal frame words act as
    singleton lexicons: an out-of-vocabulary literal empties its slot."""
    for token in template.frame_good + template.frame_bad:
        if not _SLOT_RE.match(token) and token not in shared_vocab:
            raise EmptySlot(template.test_name, token)
    lexicons = {}
    for slot, words in template.slot_lexicons.items():
        kept = tuple(w for w in words if w in shared_vocab)
        if slot in template.slot_types() and not kept:
            raise EmptySlot(template.test_name, slot)
        lexicons[slot] = kept
    return replace(template, slot_lexicons=lexicons)


def _realize(frame: tuple[str, ...], assignment: dict[str, str]) -> tuple[str, ...]:
    out = []
    for token in frame:
        m = _SLOT_RE.match(token)
        out.append(assignment[m.group(1)] if m else token)
    return tuple(out)


def _pairs_from_assignment(template: Template, assignment) -> MinimalPair | None:
    good = _realize(template.frame_good, assignment)
    bad = _realize(template.frame_bad, assignment)
    if good == bad:
        return None
    return MinimalPair(good, bad, template.test_name, template.phenomenon)


def instantiate_template(template: Template, shared_vocab: set[str],
                         pairs_per_test: int, rng: random.Random) -> list[MinimalPair]:
    template = filter_template(template, shared_vocab)
    slots = template.slot_types()
    lexicons = [template.slot_lexicons[s] for s in slots]
    space = 1
    for lex in lexicons:
        space *= len(lex)
    if space <= pairs_per_test:
        pairs = []
        for combo in itertools.product(*lexicons):
            pair = _pairs_from_assignment(template, dict(zip(slots, combo)))
            if pair is not None:
                pairs.append(pair)
        if len(pairs) < pairs_per_test:
            log.warning("test %s: slot space exhausted at %d pairs (requested %d)",
                        template.test_name, len(pairs), pairs_per_test)
        return pairs
    pairs = []
    seen: set[tuple[str, ...]] = set()
    attempts = 0
    limit = 1000 * pairs_per_test
    while len(pairs) < pairs_per_test:
        attempts += 1
        if attempts > limit:
            raise ConfigError(f"test {template.test_name!r}: sampling stalled "
                              f"after {attempts} draws")
        combo = tuple(rng.choice(lex) for lex in lexicons)
        if combo in seen:
            continue
        seen.add(combo)
        pair = _pairs_from_assignment(template, dict(zip(slots, combo)))
        if pair is not None:
            pairs.append(pair)
    return pairs


def instantiate_suite(templates: list[Template], shared_vocab: set[str],
                      pairs_per_test: int = 2000, seed: int = 0) -> list[MinimalPair]:
    rng = random.Random(seed)
    suite: list[MinimalPair] = []
    for template in templates:
        suite.extend(instantiate_template(template, shared_vocab, pairs_per_test, rng))
    return suite


# ---------------------------------------------------------------------------
# scoring


def score_sentences(model: LanguageModel, vocab: Vocabulary,
                    sentences: list[tuple[str, ...]], normalize: bool = False) -> np.ndarray:
    """Log-probability score per sentence: summed next-token log-probabilities
    for causal families, pseudo-log-likelihood for the masked family.
    `normalize` divides by the number of scored tokens (off by default)."""
    scores = np.zeros(len(sentences), dtype=np.float64)
    encoded = [np.asarray(vocab.encode(s), dtype=np.int64) for s in sentences]
    if model.is_masked:
        for i, ids in enumerate(encoded):
            scores[i] = pseudo_logprob(model, ids)
            if normalize:
                scores[i] /= max(1, len(masked_positions(ids)))
        return scores
    order = sorted(range(len(encoded)), key=lambda i: len(encoded[i]))
    for start in range(0, len(order), _SCORE_CHUNK):
        idx = order[start:start + _SCORE_CHUNK]
        ids, _ = pad_batch([encoded[i] for i in idx])
        chunk_scores = batch_sequence_logprobs(model, ids)
        if normalize:
            chunk_scores = chunk_scores / (ids[:, 1:] != PAD_ID).sum(axis=1)
        scores[idx] = chunk_scores
    return scores


def pair_scores(model: LanguageModel, vocab: Vocabulary, pair: MinimalPair,
                normalize: bool = False) -> tuple[float, float]:
    good, bad = score_sentences(model, vocab, [pair.good, pair.bad], normalize)
    return float(good), float(bad)


def score_pair(model: LanguageModel, vocab: Vocabulary, pair: MinimalPair,
               normalize: bool = False) -> bool:
    """Correct iff the good sentence outscores the bad one (ties incorrect)."""
    good, bad = pair_scores(model, vocab, pair, normalize)
    return good > bad


@dataclass
class TestResult:
    test_name: str
    phenomenon: str
    n_pairs: int
    accuracy: float


@dataclass
class SuiteReport:
    tests: list[TestResult]
    phenomenon_means: dict[str, float]
    overall: float = 0.0


def evaluate_suite(model: LanguageModel, vocab: Vocabulary,
                   pairs: list[MinimalPair], normalize: bool = False) -> SuiteReport:
    """Per-test accuracies plus unweighted per-phenomenon and overall means."""
    if not pairs:
        raise ConfigError("empty suite")
    good_scores = score_sentences(model, vocab, [p.good for p in pairs], normalize)
    bad_scores = score_sentences(model, vocab, [p.bad for p in pairs], normalize)
    correct = good_scores > bad_scores
    order: list[tuple[str, str]] = []
    totals: dict[tuple[str, str], list[int]] = {}
    for i, pair in enumerate(pairs):
        key = (pair.test_name, pair.phenomenon)
        if key not in totals:
            totals[key] = [0, 0]
            order.append(key)
        totals[key][0] += 1
        totals[key][1] += int(correct[i])
    tests = [TestResult(name, phen, n, hits / n)
             for (name, phen), (n, hits) in ((k, totals[k]) for k in order)]
    by_phenomenon: dict[str, list[float]] = {}
    for t in tests:
        by_phenomenon.setdefault(t.phenomenon, []).append(t.accuracy)
    phenomenon_means = {p: sum(a) / len(a) for p, a in by_phenomenon.items()}
    overall = sum(t.accuracy for t in tests) / len(tests)
    return SuiteReport(tests, phenomenon_means, overall)


# ---------------------------------------------------------------------------
# file formats


def write_suite(pairs: list[MinimalPair], path) -> None:
    """One pair per line: bad TAB good TAB test TAB phenomenon."""
    lines = [f"{' '.join(p.bad)}\t{' '.join(p.good)}\t{p.test_name}\t{p.phenomenon}"
             for p in pairs]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_suite(path) -> list[MinimalPair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ConfigError(f"suite line {line_no}: expected 4 tab-separated "
                                  f"fields, got {len(parts)}")
            bad, good, test_name, phenomenon = parts
            pairs.append(MinimalPair(tuple(good.split()), tuple(bad.split()),
                                     test_name, phenomenon))
    if not pairs:
        raise ConfigError(f"no pairs in suite file {path}")
    return pairs


def report_csv_rows(report: SuiteReport) -> list[list[str]]:
    rows = [["test", "phenomenon", "n", "accuracy"]]
    for t in report.tests:
        rows.append([t.test_name, t.phenomenon, str(t.n_pairs), f"{t.accuracy:.6f}"])
    rows.append(["OVERALL", "", str(sum(t.n_pairs for t in report.tests)),
                 f"{report.overall:.6f}"])
    return rows


def format_report(report: SuiteReport) -> str:
    width = max(len("OVERALL"), *(len(t.test_name) for t in report.tests))
    lines = [f"{'test':<{width}}  {'n':>6}  accuracy"]
    for t in report.tests:
        lines.append(f"{t.test_name:<{width}}  {t.n_pairs:>6}  {t.accuracy:8.4f}")
    lines.append(f"{'OVERALL':<{width}}  {sum(t.n_pairs for t in report.tests):>6}  "
                 f"{report.overall:8.4f}")
    return "\n".join(lines)
