"""Word-level vocabulary with five reserved tokens and id-sequence encoding."""

from __future__ import annotations

from collections import Counter

import numpy as np

from .errors import InsufficientData

SPECIALS = ("<sos>", "<eos>", "<unk>", "<mask>", "<pad>")
SOS_ID, EOS_ID, UNK_ID, MASK_ID, PAD_ID = range(5)
N_SPECIALS = len(SPECIALS)


class Vocabulary:
    """Dense word<->id map; ids 0-4 are the reserved tokens, in order."""

    sos_id = SOS_ID
    eos_id = EOS_ID
    unk_id = UNK_ID
    mask_id = MASK_ID
    pad_id = PAD_ID

    def __init__(self, words):
        """``words`` are the non-special entries, already ordered."""
        self.id_to_word = list(SPECIALS) + list(words)
        self.word_to_id = {w: i for i, w in enumerate(self.id_to_word)}
        if len(self.word_to_id) != len(self.id_to_word):
            seen = Counter(self.id_to_word)
            dupes = [w for w, c in seen.items() if c > 1]
            raise ValueError(f"duplicate vocabulary words: {dupes}")

    def __len__(self):
        return len(self.id_to_word)

    def __contains__(self, word):
        return word in self.word_to_id

    def words(self) -> list[str]:
        """Non-special words in id order."""
        return self.id_to_word[N_SPECIALS:]

    def id_of(self, word: str) -> int:
        return self.word_to_id.get(word, UNK_ID)

    def word_of(self, idx: int) -> str:
        return self.id_to_word[idx]

    def encode(self, tokens) -> list[int]:
        return encode(self, tokens)

    def decode(self, ids) -> list[str]:
        return decode(self, ids)

    def save(self, path) -> None:
        """One word per line; the line number is the id."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.id_to_word) + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if tuple(lines[:N_SPECIALS]) != SPECIALS:
            raise ValueError(f"{path}: missing reserved tokens on lines 0-4")
        return cls(lines[N_SPECIALS:])


def build_vocab(train_corpus) -> Vocabulary:
    """Specials plus distinct training tokens, by (frequency desc, word asc).

    The unknown marker already present in a thresholded corpus keeps its
    reserved id rather than becoming a separate entry.
    """
    counts = Counter()
    for utt in train_corpus:
        counts.update(utt)
    for special in SPECIALS:
        counts.pop(special, None)
    if not counts:
        raise InsufficientData("cannot build a vocabulary from an empty corpus")
    ordered = sorted(counts, key=lambda w: (-counts[w], w))
    return Vocabulary(ordered)


def encode(vocab: Vocabulary, tokens) -> list[int]:
    """[sos] + word ids + [eos]; unknown words map to the unk id."""
    return [SOS_ID] + [vocab.id_of(t) for t in tokens] + [EOS_ID]


def decode(vocab: Vocabulary, ids) -> list[str]:
    """Inverse of encode; strips sos/eos/pad/mask but keeps unk visible."""
    dropped = {SOS_ID, EOS_ID, MASK_ID, PAD_ID}
    return [vocab.word_of(i) for i in ids if i not in dropped]


def pad_batch(sequences, pad_id: int = PAD_ID):
    """Right-pad id sequences to the batch maximum.

    Returns an int64 matrix [batch x max_len] and the true lengths.
    """
    if not sequences:
        raise ValueError("pad_batch of an empty sequence list")
    lengths = np.array([len(s) for s in sequences], dtype=np.int64)
    width = int(lengths.max())
    out = np.full((len(sequences), width), pad_id, dtype=np.int64)
    for i, seq in enumerate(sequences):
        out[i, : len(seq)] = seq
    return out, lengths
