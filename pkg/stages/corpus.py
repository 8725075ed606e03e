"""
Corpus I/O
Line-delimited labeled songs: id<TAB>label<TAB>ynote, UTF-8.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from core.config import CLASS_NAMES, class_name
from core.errors import ArtifactIOError, DataError
from core.ynote import TokenSequence, TokenizePolicy, is_rest_token, tokenize
from stages.features import document_frequency_report

logger = logging.getLogger(__name__)

FIELD_SEPARATOR = "\t"
REST_TOKENS = ("0002", "0004", "0008")


class MalformedRecord(DataError):
    """Raised for one bad corpus line; carries its 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class CorpusParseError(DataError):
    """Aggregates every MalformedRecord found in one file."""

    def __init__(self, path: str, errors: list[MalformedRecord]):
        preview = "; ".join(str(e) for e in errors[:5])
        more = f" (+{len(errors) - 5} more)" if len(errors) > 5 else ""
        super().__init__(f"{path}: {len(errors)} malformed record(s): {preview}{more}")
        self.path = path
        self.errors = errors


@dataclass(frozen=True)
class LabeledSong:
    id: str
    label: int
    ynote: str

    @property
    def tokens(self) -> TokenSequence:
        return tokenize(self.ynote, TokenizePolicy.STRICT)

    def to_line(self) -> str:
        return FIELD_SEPARATOR.join((self.id, str(self.label), self.ynote))


@dataclass
class Corpus:
    songs: list[LabeledSong]
    errors: list[MalformedRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.songs)

    def labels(self) -> list[int]:
        return [song.label for song in self.songs]

    def sequences(self) -> list[TokenSequence]:
        return [song.tokens for song in self.songs]

    def subset(self, indices: Iterable[int]) -> "Corpus":
        return Corpus(songs=[self.songs[int(i)] for i in indices])


def parse_record(line: str, line_number: int) -> LabeledSong:
    """
    Parse one corpus line.

    Args:
        line: Text without its line terminator
        line_number: 1-based, for error messages

    Returns:
        LabeledSong

    Raises:
        MalformedRecord: Wrong field count, empty id, label outside {0, 1, 2},
            or a YNote string that fails Strict tokenization
    """
    fields = line.split(FIELD_SEPARATOR)
    if len(fields) != 3:
        raise MalformedRecord(line_number, f"expected 3 tab-separated fields, got {len(fields)}")
    song_id, raw_label, ynote = fields
    if not song_id:
        raise MalformedRecord(line_number, "empty id")
    try:
        label = int(raw_label)
    except ValueError:
        raise MalformedRecord(line_number, f"label {raw_label!r} is not an integer")
    if label not in CLASS_NAMES:
        raise MalformedRecord(line_number, f"label {label} is outside {sorted(CLASS_NAMES)}")
    try:
        tokenize(ynote, TokenizePolicy.STRICT)
    except DataError as e:
        raise MalformedRecord(line_number, f"invalid YNote: {e}")
    return LabeledSong(id=song_id, label=label, ynote=ynote)


def load_corpus(path: str, on_error: str = "raise") -> Corpus:
    """
    Load a corpus file, validating every line.

    Args:
        path: Corpus file
        on_error: "raise" → CorpusParseError if any line is bad;
            "collect" → keep good lines and return the errors on the Corpus

    Returns:
        Corpus

    Raises:
        ArtifactIOError: File cannot be read
        CorpusParseError: Malformed lines (on_error="raise")
    """
    if on_error not in {"raise", "collect"}:
        raise ValueError(f"on_error must be 'raise' or 'collect', got {on_error!r}")

    songs, errors, seen = [], [], set()
    try:
        with open(path, "rb") as f:
            for line_number, raw in enumerate(f, start=1):
                try:
                    line = raw.decode("utf-8").rstrip("\r\n")
                except UnicodeDecodeError as e:
                    errors.append(MalformedRecord(line_number, f"invalid UTF-8 at byte {e.start}: {e.reason}"))
                    continue
                if not line:
                    continue
                try:
                    song = parse_record(line, line_number)
                    if song.id in seen:
                        raise MalformedRecord(line_number, f"duplicate id {song.id!r}")
                except MalformedRecord as e:
                    errors.append(e)
                    continue
                seen.add(song.id)
                songs.append(song)
    except OSError as e:
        raise ArtifactIOError(f"Cannot read corpus {path}: {e}")

    if errors:
        if on_error == "raise":
            raise CorpusParseError(path, errors)
        logger.warning("%s: skipped %d malformed record(s)", path, len(errors))
    logger.info("Loaded %d songs from %s", len(songs), path)
    return Corpus(songs=songs, errors=errors)


def save_corpus(songs: Sequence[LabeledSong], path: str) -> None:
    """
    Write songs one per line (exact inverse of load_corpus).

    Raises:
        ArtifactIOError: File cannot be written
    """
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for song in songs:
                f.write(song.to_line())
                f.write("\n")
    except OSError as e:
        raise ArtifactIOError(f"Cannot write corpus {path}: {e}")
    logger.info("Wrote %d songs to %s", len(songs), path)


def corpus_statistics(songs: Sequence[LabeledSong]) -> dict:
    """
    Per-class song counts, mean length in notes and rest-token document frequency.

    Returns:
        {class name: {"songs", "mean_notes", "rest_doc_freq": {token: fraction}, "any_rest_doc_freq"}}
    """
    sequences = [song.tokens for song in songs]
    labels = [song.label for song in songs]
    rest_freq = document_frequency_report(sequences, labels, REST_TOKENS)

    counts: Counter = Counter(labels)
    notes: Counter = Counter()
    any_rest: Counter = Counter()
    for seq, label in zip(sequences, labels):
        notes[label] += len(seq)
        if any(is_rest_token(t) for t in seq):
            any_rest[label] += 1

    return {
        class_name(label): {
            "songs": counts[label],
            "mean_notes": notes[label] / counts[label],
            "rest_doc_freq": rest_freq[label],
            "any_rest_doc_freq": any_rest[label] / counts[label],
        }
        for label in sorted(counts)
    }
