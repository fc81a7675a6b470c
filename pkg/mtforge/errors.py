# mtforge/errors.py
"""
Exception hierarchy for mtforge.

Two branches map onto the CLI exit-code contract: ConfigError -> 2, DataError -> 1.
Record-level problems inside streams are never raised; see RecordError in
mtforge.corpus_model.
"""


class MtForgeError(Exception):
    """Base class for all mtforge errors."""

    exit_code = 1


class ConfigError(MtForgeError):
    """Invalid configuration, missing asset, or bad usage."""

    exit_code = 2


class DataError(MtForgeError):
    """Input data violates a precondition of an operation."""

    exit_code = 1


# -- configuration branch --------------------------------------------------

class RegistryError(ConfigError):
    """The bundled language registry is missing or corrupted."""


class VocabError(ConfigError):
    """A vocab asset cannot be loaded."""


class CleanConfigError(ConfigError):
    pass


class MissingDisplayNameError(ConfigError):
    pass


class PolicyError(ConfigError):
    """Selection policy cannot be resolved."""


class GroupError(ConfigError):
    """Direction group is empty or repeats a member."""


# -- data branch -----------------------------------------------------------

class UnknownLanguageError(DataError):
    def __init__(self, code: str):
        super().__init__(f"unknown language code: {code!r}")
        self.code = code


class UnreadableStreamError(DataError):
    pass


class TokenizationError(DataError):
    def __init__(self, tokenizer: str, byte_offset: int):
        super().__init__(
            f"tokenizer {tokenizer!r} has no piece for input at byte offset {byte_offset} "
            "and byte fallback is off"
        )
        self.tokenizer = tokenizer
        self.byte_offset = byte_offset


class ZeroLengthError(DataError):
    """English reference sentence tokenized to zero tokens."""


class AlignmentError(DataError):
    pass


class LanguageSetMismatchError(DataError):
    pass


class LangIdError(DataError):
    pass


class EmbeddingError(DataError):
    pass


class MissingLanguageError(DataError):
    def __init__(self, codes):
        codes = sorted(codes)
        super().__init__(f"availability missing for: {', '.join(codes)}")
        self.codes = codes


class SelectionError(DataError):
    pass


class SampleSizeError(DataError):
    pass


class PromptError(DataError):
    pass


class BleuError(DataError):
    pass


class ScoreConflictError(DataError):
    pass


class QualityFlagError(DataError):
    pass


class TableFormatError(DataError):
    pass
