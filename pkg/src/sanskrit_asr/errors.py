"""Exception hierarchy.

Exit-code contract for the CLI: usage errors exit 1, data errors exit 2,
numeric failures exit 3. Each exception class carries its category via
``exit_code``.
"""


class SanskritAsrError(Exception):
    exit_code = 2


# --- audio / dsp ---

class EmptyAudio(SanskritAsrError):
    pass


class InvalidRate(SanskritAsrError):
    pass


class TooShort(SanskritAsrError):
    pass


class DegenerateFilter(SanskritAsrError):
    pass


class UnreadableFile(SanskritAsrError):
    pass


class InvalidPosition(SanskritAsrError):
    pass


class ZeroSignal(SanskritAsrError):
    pass


# --- text / tokenization ---

class UnmappableChar(SanskritAsrError):
    def __init__(self, char: str, offset: int):
        super().__init__(f"unmappable character {char!r} at offset {offset}")
        self.char = char
        self.offset = offset


class EmptyCorpus(SanskritAsrError):
    pass


# --- dataset ---

class ParseError(SanskritAsrError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SplitViolation(SanskritAsrError):
    pass


class EmptySplit(SanskritAsrError):
    pass


# --- model / training ---

class InvalidDim(SanskritAsrError):
    pass


class ShapeError(SanskritAsrError):
    pass


class EmptyLoss(SanskritAsrError):
    pass


class NonFiniteGrad(SanskritAsrError):
    exit_code = 3


class InvalidSchedule(SanskritAsrError):
    pass


class NoViableTrial(SanskritAsrError):
    exit_code = 3


# --- evaluation ---

class UndefinedWER(SanskritAsrError):
    pass


class UndefinedCER(SanskritAsrError):
    pass
