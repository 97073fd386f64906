"""Exception types shared across the toolkit."""


class TinylmError(Exception):
    """Base class for all toolkit errors."""


class MalformedTier(TinylmError):
    """A transcript utterance tier could not be parsed."""

    def __init__(self, line_no, line):
        self.line_no = line_no
        self.line = line
        super().__init__(f"line {line_no}: malformed utterance tier: {line!r}")


class DecodeError(TinylmError):
    """Input bytes are not valid UTF-8."""


class ConfigError(TinylmError):
    """An invalid configuration value or combination."""


class InsufficientData(TinylmError):
    """Too little data to perform the requested operation."""


class ShapeError(TinylmError):
    """Incompatible array shapes."""

    def __init__(self, msg, *shapes):
        if shapes:
            msg = f"{msg}: {' vs '.join(str(tuple(s)) for s in shapes)}"
        super().__init__(msg)


class LengthError(TinylmError):
    """A sequence exceeds the model's maximum length."""


class DivergenceError(TinylmError):
    """Training produced a non-finite loss."""

    def __init__(self, batch_index, loss):
        self.batch_index = batch_index
        self.loss = loss
        super().__init__(f"non-finite loss {loss!r} at batch {batch_index}")


class EmptySlot(TinylmError):
    """A template slot has no in-vocabulary fillers."""

    def __init__(self, test_name, slot):
        self.test_name = test_name
        self.slot = slot
        super().__init__(f"test {test_name!r}: slot {slot!r} has no in-vocabulary words")


class EmptyClass(TinylmError):
    """A cloze candidate class has no members."""


class ZeroVectorError(TinylmError):
    """Cosine distance is undefined for zero vectors."""


class OOVWordError(TinylmError):
    """A requested word is not in the vocabulary."""


class UserError(TinylmError):
    """A user-facing CLI error (bad path, bad flag); exits with status 1."""
