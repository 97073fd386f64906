"""Transcript ingestion: CHAT-style tier files and plain one-per-line text.

Only the utterance subset of the CHAT format is handled: ``*XXX:`` tiers
(with tab-indented continuation lines), ``%``/``@`` dependent and metadata
tiers, and a small fixed set of in-line annotations. The target child's own
speech is removed downstream with ``exclude_speakers``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import DecodeError, MalformedTier

PLAINTEXT_SPEAKER = "ADU"

_TIER_RE = re.compile(r"^\*([A-Z]{3}):(.*)$")
_BRACKETED_RE = re.compile(r"\[[^\]]*\]")
_AMP_FRAGMENT_RE = re.compile(r"(?<!\S)&\S+")
_UNINTELLIGIBLE_RE = re.compile(r"(?<!\S)(?:xxx|yyy)(?!\S)")
_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class RawUtterance:
    speaker: str  # 3-letter code, or ADU for plain-text input
    text: str
    line_no: int


@dataclass
class Transcript:
    utterances: list[RawUtterance] = field(default_factory=list)
    source_path: str = ""


def _clean_tier_text(text: str) -> str:
    """Strip bracketed annotations, &-fragments and xxx/yyy markers."""
    text = _BRACKETED_RE.sub(" ", text)
    text = _AMP_FRAGMENT_RE.sub(" ", text)
    text = _UNINTELLIGIBLE_RE.sub(" ", text)
    return _WS_RE.sub(" ", text).strip()


def parse_chat(text, source_path: str = "") -> Transcript:
    """Parse a CHAT-style document into speaker-tagged utterances.

    ``*XXX:`` lines start utterance tiers; following lines that begin with a
    tab continue the current tier and are joined with single spaces. ``%``
    and ``@`` lines are dropped. A ``*`` line without a colon raises
    MalformedTier with its line number.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError(f"{source_path or 'input'}: not valid UTF-8: {exc}") from exc

    transcript = Transcript(source_path=source_path)
    speaker = None
    parts: list[str] = []
    start_line = 0

    def flush():
        nonlocal speaker, parts
        if speaker is not None:
            cleaned = _clean_tier_text(" ".join(parts))
            transcript.utterances.append(RawUtterance(speaker, cleaned, start_line))
        speaker, parts = None, []

    for line_no, line in enumerate(text.splitlines(), start=1):
        if line.startswith("\t"):
            if speaker is not None:
                parts.append(line.strip())
            continue
        if line.startswith("*"):
            flush()
            m = _TIER_RE.match(line.rstrip())
            if m is None:
                raise MalformedTier(line_no, line)
            speaker = m.group(1)
            parts = [m.group(2).strip()]
            start_line = line_no
            continue
        # %dependent tiers, @metadata, and anything else end the current tier
        flush()
    flush()
    return transcript


def load_plaintext(text, source_path: str = "") -> Transcript:
    """One utterance per non-empty line, all attributed to speaker ADU."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError(f"{source_path or 'input'}: not valid UTF-8: {exc}") from exc
    transcript = Transcript(source_path=source_path)
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped:
            transcript.utterances.append(RawUtterance(PLAINTEXT_SPEAKER, stripped, line_no))
    return transcript


def read_transcript(path, fmt: str | None = None) -> Transcript:
    """Load a transcript file, inferring the format from the suffix."""
    path = str(path)
    if fmt is None:
        fmt = "cha" if path.endswith(".cha") else "txt"
    with open(path, "rb") as fh:
        raw = fh.read()
    if fmt == "cha":
        return parse_chat(raw, source_path=path)
    return load_plaintext(raw, source_path=path)


def exclude_speakers(transcript: Transcript, excluded=frozenset({"CHI"})) -> list[RawUtterance]:
    """Drop utterances whose speaker is in ``excluded`` (default: the child)."""
    excluded = set(excluded)
    return [u for u in transcript.utterances if u.speaker not in excluded]
