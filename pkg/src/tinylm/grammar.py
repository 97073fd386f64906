"""Probabilistic toy grammar with a subject-verb number-agreement rule.

63 word forms: 16 noun stems (8 semantic categories, singular + plural),
9 verb stems (transitive and intransitive, base + third-person singular),
6 adjectives, 3 adverbs, 4 determiners. Verbs agree with the subject's
number, so the corpus carries a learnable syntactic regularity, and every
content word is unambiguous for exactly one part of speech, so cloze items
and category files derive mechanically.
"""

from __future__ import annotations

import random

NOUN_STEMS_BY_CATEGORY: dict[str, tuple[str, ...]] = {
    "animals": ("dog", "cat"),
    "food": ("apple", "cookie"),
    "toys": ("ball", "doll"),
    "places": ("park", "house"),
    "body_parts": ("hand", "arm"),
    "clothing": ("hat", "shoe"),
    "vehicles": ("car", "truck"),
    "household": ("cup", "spoon"),
}
NOUN_STEMS: tuple[str, ...] = tuple(
    stem for stems in NOUN_STEMS_BY_CATEGORY.values() for stem in stems)
TRANSITIVE_STEMS = ("see", "like", "want", "find", "hold", "push")
INTRANSITIVE_STEMS = ("run", "jump", "sleep")
VERB_STEMS = TRANSITIVE_STEMS + INTRANSITIVE_STEMS
ADJECTIVES = ("big", "little", "red", "happy", "old", "new")
ADVERBS = ("now", "here", "again")
DETERMINERS_SINGULAR = ("the", "a")
DETERMINERS_PLURAL = ("the", "some", "two")
DETERMINERS = ("the", "a", "some", "two")

ADJECTIVE_P = 0.3
ADVERB_P = 0.25
TRANSITIVE_P = 0.6


def plural_noun(stem: str) -> str:
    return stem + "s"


def third_person(stem: str) -> str:
    if stem.endswith(("s", "sh", "ch", "x", "z")):
        return stem + "es"
    return stem + "s"


def noun_forms() -> list[str]:
    return [f for stem in NOUN_STEMS for f in (stem, plural_noun(stem))]


def verb_forms() -> list[str]:
    return [f for stem in VERB_STEMS for f in (stem, third_person(stem))]


def all_words() -> list[str]:
    return noun_forms() + verb_forms() + list(ADJECTIVES) + list(ADVERBS) + \
        list(DETERMINERS)


def _sample_np(rng: random.Random) -> tuple[list[str], bool]:
    plural = rng.random() < 0.5
    tokens = [rng.choice(DETERMINERS_PLURAL if plural else DETERMINERS_SINGULAR)]
    if rng.random() < ADJECTIVE_P:
        tokens.append(rng.choice(ADJECTIVES))
    stem = rng.choice(NOUN_STEMS)
    tokens.append(plural_noun(stem) if plural else stem)
    return tokens, plural


def sample_utterance(rng: random.Random) -> list[str]:
    subject, plural = _sample_np(rng)
    if rng.random() < TRANSITIVE_P:
        stem = rng.choice(TRANSITIVE_STEMS)
        verb = stem if plural else third_person(stem)
        obj, _ = _sample_np(rng)
        tokens = subject + [verb] + obj
    else:
        stem = rng.choice(INTRANSITIVE_STEMS)
        verb = stem if plural else third_person(stem)
        tokens = subject + [verb]
    if rng.random() < ADVERB_P:
        tokens.append(rng.choice(ADVERBS))
    return tokens


def generate_corpus(n_utterances: int, seed: int = 0) -> list[list[str]]:
    rng = random.Random(seed)
    return [sample_utterance(rng) for _ in range(n_utterances)]


def overfit_fixture(n_utterances: int = 50, seed: int = 7) -> list[list[str]]:
    """Distinct long utterances (three conjoined clauses) for memorization
    tests: length keeps the per-token entropy floor well under the target."""
    rng = random.Random(seed)
    seen = set()
    out: list[list[str]] = []
    while len(out) < n_utterances:
        clauses = [sample_utterance(rng) for _ in range(3)]
        tokens = clauses[0] + ["and"] + clauses[1] + ["and"] + clauses[2]
        key = tuple(tokens)
        if key in seen:
            continue
        seen.add(key)
        out.append(tokens)
    return out


def pos_lexicon_text() -> str:
    """Two-column word/tag lines covering every word the grammar emits."""
    lines = []
    for word in noun_forms():
        lines.append(f"{word}\tNOUN")
    for word in verb_forms():
        lines.append(f"{word}\tVERB")
    for word in ADJECTIVES:
        lines.append(f"{word}\tADJ")
    for word in ADVERBS:
        lines.append(f"{word}\tADV")
    for word in DETERMINERS + ("and",):
        lines.append(f"{word}\tOTHER")
    return "\n".join(lines) + "\n"


def semantic_categories_text() -> str:
    lines = []
    for label, stems in NOUN_STEMS_BY_CATEGORY.items():
        forms = [f for stem in stems for f in (stem, plural_noun(stem))]
        lines.append(f"{label}: {' '.join(forms)}")
    return "\n".join(lines) + "\n"


def syntactic_categories_text() -> str:
    lines = [
        f"NOUN: {' '.join(noun_forms())}",
        f"VERB: {' '.join(verb_forms())}",
        f"ADJ: {' '.join(ADJECTIVES)}",
        f"ADV: {' '.join(ADVERBS)}",
    ]
    return "\n".join(lines) + "\n"


def agreement_templates_text() -> str:
    """Four minimal-pair templates that flip the verb's number marking."""
    nsg = " ".join(NOUN_STEMS)
    npl = " ".join(plural_noun(s) for s in NOUN_STEMS)
    vis = " ".join(third_person(s) for s in INTRANSITIVE_STEMS)
    vip = " ".join(INTRANSITIVE_STEMS)
    vts = " ".join(third_person(s) for s in TRANSITIVE_STEMS)
    vtp = " ".join(TRANSITIVE_STEMS)
    blocks = [
        ("agreement_intransitive_singular",
         "good: the <NSG> <VIS>", "bad: the <NSG> <VIP>",
         [f"lexicon NSG: {nsg}", f"lexicon VIS: {vis}", f"lexicon VIP: {vip}"]),
        ("agreement_intransitive_plural",
         "good: the <NPL> <VIP>", "bad: the <NPL> <VIS>",
         [f"lexicon NPL: {npl}", f"lexicon VIS: {vis}", f"lexicon VIP: {vip}"]),
        ("agreement_transitive_singular",
         "good: the <NSG> <VTS> the <OBJ>", "bad: the <NSG> <VTP> the <OBJ>",
         [f"lexicon NSG: {nsg}", f"lexicon OBJ: {npl}",
          f"lexicon VTS: {vts}", f"lexicon VTP: {vtp}"]),
        ("agreement_transitive_plural",
         "good: the <NPL> <VTP> the <OBJ>", "bad: the <NPL> <VTS> the <OBJ>",
         [f"lexicon NPL: {npl}", f"lexicon OBJ: {nsg}",
          f"lexicon VTS: {vts}", f"lexicon VTP: {vtp}"]),
    ]
    lines = []
    for name, good, bad, lexicons in blocks:
        lines.append(f"test: {name}")
        lines.append("phenomenon: subject_verb_agreement")
        lines.append(good)
        lines.append(bad)
        lines.extend(lexicons)
        lines.append("")
    return "\n".join(lines)
