"""
YNote Core
Parse, validate, serialize and segment YNote strings into 4-character note tokens.

Each note is pitch (letter + octave digit, or "00" for a rest) followed by a
two-character duration code. Duration codes are kept verbatim: classification
only needs token identity, never musical meaning.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from core.errors import DataError

TOKEN_LENGTH = 4
REST_PREFIX = "00"
REST_LETTER = "REST"

PITCH_LETTERS = frozenset("ABCDEFGabcdefg")
OCTAVE_DIGITS = frozenset("0123456789")
DURATION_CHARS = frozenset("0123456789.")


class MalformedToken(DataError):
    """Raised when a 4-character slice is not a valid YNote note."""
    pass


class LengthNotMultipleOf4(DataError):
    """Raised by Strict tokenization when the input length is not a multiple of 4."""
    pass


class EmptyInput(DataError):
    """Raised when tokenization yields no tokens."""
    pass


class TokenizePolicy(str, Enum):
    STRICT = "strict"
    TRUNCATE_TAIL = "truncate_tail"


@dataclass(frozen=True)
class Note:
    raw: str
    pitch_letter: str
    octave: Optional[int]
    duration_code: str
    is_rest: bool

    @classmethod
    def pitched(cls, letter: str, octave: int, duration_code: str) -> "Note":
        return parse_note(f"{letter}{octave}{duration_code}")

    @classmethod
    def rest(cls, duration_code: str) -> "Note":
        return parse_note(f"{REST_PREFIX}{duration_code}")


@dataclass(frozen=True)
class TokenSequence:
    """
    Ordered 4-character tokens cut from one YNote string.

    Attributes:
        tokens: Consecutive 4-char slices in order
        source_len: Length of the string that was tokenized
        remainder: Trailing 1-3 characters dropped under TruncateTail ("" otherwise)
    """
    tokens: tuple[str, ...]
    source_len: int
    remainder: str = field(default="")

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def text(self) -> str:
        return "".join(self.tokens)


def is_rest_token(token: str) -> bool:
    """True when the token is a rest ("00" pitch)."""
    return len(token) == TOKEN_LENGTH and token.startswith(REST_PREFIX)


def parse_note(token: str) -> Note:
    """
    Parse one 4-character YNote token.

    Args:
        token: e.g. "C404", "0002", "c516", "D68."

    Returns:
        Note with pitch letter, octave, duration code and rest flag

    Raises:
        MalformedToken: If length != 4, pitch characters are invalid,
            or the duration contains characters outside {0-9, '.'}
    """
    if not isinstance(token, str) or len(token) != TOKEN_LENGTH:
        raise MalformedToken(f"Token must be exactly {TOKEN_LENGTH} characters: {token!r}")

    duration = token[2:]
    bad = [ch for ch in duration if ch not in DURATION_CHARS]
    if bad:
        raise MalformedToken(f"Invalid duration code {duration!r} in token {token!r}")

    if token[:2] == REST_PREFIX:
        return Note(raw=token, pitch_letter=REST_LETTER, octave=None,
                    duration_code=duration, is_rest=True)

    letter, octave = token[0], token[1]
    if letter not in PITCH_LETTERS:
        raise MalformedToken(f"Invalid pitch letter {letter!r} in token {token!r}")
    if octave not in OCTAVE_DIGITS:
        raise MalformedToken(f"Invalid octave {octave!r} in token {token!r}")

    return Note(raw=token, pitch_letter=letter, octave=int(octave),
                duration_code=duration, is_rest=False)


def serialize(note: Note) -> str:
    """
    Inverse of parse_note.

    Args:
        note: A valid Note

    Returns:
        The 4-character token

    Raises:
        MalformedToken: If the Note's fields disagree with its raw text
    """
    if note.is_rest:
        text = f"{REST_PREFIX}{note.duration_code}"
    else:
        text = f"{note.pitch_letter}{note.octave}{note.duration_code}"
    if text != note.raw:
        raise MalformedToken(f"Note fields {text!r} do not match raw token {note.raw!r}")
    return text


def tokenize(ynote_string: str, policy: TokenizePolicy = TokenizePolicy.STRICT) -> TokenSequence:
    """
    Cut a YNote string every 4 characters and validate each slice.

    Args:
        ynote_string: Continuous YNote text (e.g. "G402E508C516")
        policy: STRICT rejects a trailing remainder; TRUNCATE_TAIL drops it
            and records it on the result

    Returns:
        TokenSequence of validated tokens

    Raises:
        LengthNotMultipleOf4: Strict policy and len % 4 != 0
        EmptyInput: No complete token in the input
        MalformedToken: A slice fails parse_note (message carries the token index)
    """
    policy = TokenizePolicy(policy)
    text = ynote_string if isinstance(ynote_string, str) else ""
    tail = len(text) % TOKEN_LENGTH

    if tail and policy is TokenizePolicy.STRICT:
        raise LengthNotMultipleOf4(
            f"YNote length {len(text)} is not a multiple of {TOKEN_LENGTH}"
        )

    usable = len(text) - tail
    tokens = tuple(text[i:i + TOKEN_LENGTH] for i in range(0, usable, TOKEN_LENGTH))
    if not tokens:
        raise EmptyInput("YNote input contains no complete token")

    for index, token in enumerate(tokens):
        try:
            parse_note(token)
        except MalformedToken as e:
            raise MalformedToken(f"token {index}: {e}")

    return TokenSequence(tokens=tokens, source_len=len(text), remainder=text[usable:])
