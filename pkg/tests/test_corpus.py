"""
Tests for Corpus I/O
"""

import pytest
from core.errors import ArtifactIOError
from stages.corpus import (
    CorpusParseError,
    LabeledSong,
    MalformedRecord,
    corpus_statistics,
    load_corpus,
    parse_record,
    save_corpus,
)


def test_parse_record_valid():
    """Test parsing a well-formed line."""
    song = parse_record("s1\t0\tG402E508C516", 1)
    assert song == LabeledSong(id="s1", label=0, ynote="G402E508C516")
    assert len(song.tokens) == 3


@pytest.mark.parametrize("line,fragment", [
    ("s2\t5\tG402", "outside"),
    ("s2\tx\tG402", "not an integer"),
    ("s2\t0", "3 tab-separated"),
    ("\t0\tG402", "empty id"),
    ("s2\t0\tG40", "invalid YNote"),
])
def test_parse_record_invalid(line, fragment):
    """Test malformed lines carry the line number."""
    with pytest.raises(MalformedRecord, match=fragment) as info:
        parse_record(line, 7)
    assert info.value.line_number == 7


def test_save_load_round_trip(tmp_path):
    """Test save then load returns the same songs."""
    songs = [LabeledSong("a", 0, "G4020002"), LabeledSong("b", 2, "D68.A502")]
    path = tmp_path / "corpus.tsv"
    save_corpus(songs, str(path))
    assert load_corpus(str(path)).songs == songs


def test_load_corpus_aggregates_errors(tmp_path):
    """Test every bad line is reported at once."""
    path = tmp_path / "bad.tsv"
    path.write_text("a\t0\tG402\nb\t9\tG402\n\nc\t1\tZZZZ\na\t1\tE508\n", encoding="utf-8")
    with pytest.raises(CorpusParseError) as info:
        load_corpus(str(path))
    assert [e.line_number for e in info.value.errors] == [2, 4, 5]


def test_load_corpus_collect(tmp_path):
    """Test collect mode keeps the good lines."""
    path = tmp_path / "mixed.tsv"
    path.write_text("a\t0\tG402\nb\t9\tG402\nc\t1\tE508\n", encoding="utf-8")
    corpus = load_corpus(str(path), on_error="collect")
    assert [s.id for s in corpus.songs] == ["a", "c"]
    assert len(corpus.errors) == 1
    assert corpus.labels() == [0, 1]


def test_load_corpus_missing(tmp_path):
    """Test a missing file is an I/O error."""
    with pytest.raises(ArtifactIOError):
        load_corpus(str(tmp_path / "missing.tsv"))


def test_corpus_subset():
    """Test subsetting by index."""
    from stages.corpus import Corpus
    corpus = Corpus(songs=[LabeledSong(str(i), 0, "G402") for i in range(5)])
    assert [s.id for s in corpus.subset([4, 1]).songs] == ["4", "1"]


def test_corpus_statistics():
    """Test per-class counts, mean length and rest frequencies."""
    songs = [
        LabeledSong("a", 0, "G4020002"),
        LabeledSong("b", 0, "G402E508E508E508"),
        LabeledSong("c", 1, "C516"),
    ]
    stats = corpus_statistics(songs)
    assert stats["Native"]["songs"] == 2
    assert stats["Native"]["mean_notes"] == 3.0
    assert stats["Native"]["rest_doc_freq"]["0002"] == 0.5
    assert stats["Native"]["any_rest_doc_freq"] == 0.5
    assert stats["Algorithm"]["rest_doc_freq"] == {"0002": 0.0, "0004": 0.0, "0008": 0.0}


def test_load_corpus_invalid_utf8(tmp_path):
    """Test undecodable bytes are reported as a malformed line, not a crash."""
    path = tmp_path / "latin.tsv"
    path.write_bytes(b"a\t0\tG402\nb\t1\t\xff\xfeG402\nc\t2\tE508\n")
    with pytest.raises(CorpusParseError) as info:
        load_corpus(str(path))
    assert [e.line_number for e in info.value.errors] == [2]
    assert "UTF-8" in str(info.value)

    corpus = load_corpus(str(path), on_error="collect")
    assert [s.id for s in corpus.songs] == ["a", "c"]
