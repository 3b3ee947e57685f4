"""Parsing of the canonical paths format."""

from __future__ import annotations

import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asrecon import ParseError, load_corpus, parse_paths_file, write_paths_file
from asrecon.ingest import build_corpus, format_record, parse_lines


def test_single_path_line():
    corpus = parse_paths_file("rc0\t0\t7018 3356 1299\n")
    assert len(corpus.records) == 1
    record = corpus.records[0]
    assert len(record.nodes) == 3
    as_path = [corpus.registry.as_of(n) for n in record.nodes]
    assert as_path == [7018, 3356, 1299]
    assert corpus.collector_labels == ["rc0"]
    assert corpus.period_labels == ["0"]


def test_padding_compressed():
    corpus = parse_paths_file("rc0\t0\t7018 7018 3356\n")
    as_path = [corpus.registry.as_of(n) for n in corpus.records[0].nodes]
    assert as_path == [7018, 3356]


def test_loop_path_dropped_and_counted():
    corpus = parse_paths_file("rc0\t0\t1 2 1\nrc0\t0\t1 2\n")
    assert corpus.dropped_loops == 1
    assert len(corpus.records) == 1
    assert corpus.n_path_lines == 2


def test_records_plus_drops_account_for_every_line():
    text = "# header\nrc0\t0\t1 2\nrc1\t0\t3 4 3\n\nrc0\t1\t5 6\n"
    corpus = parse_paths_file(text)
    assert len(corpus.records) + corpus.dropped_loops == corpus.n_path_lines == 3


def test_registry_is_dense_and_bijective(micro_corpus):
    registry = micro_corpus.registry
    n = registry.n_nodes
    assert n == 8
    assert sorted(registry.id_to_as_number) == [1, 2, 3, 4, 5, 6, 101, 102]
    for node in range(n):
        assert registry.id_of(registry.as_of(node)) == node


def test_first_seen_indexing():
    text = "late\tp1\t1 2\nearly\tp0\t2 3\nlate\tp0\t1 3\n"
    corpus = parse_paths_file(text)
    assert corpus.collector_labels == ["late", "early"]
    assert corpus.period_labels == ["p1", "p0"]
    assert corpus.records[0].collector_id == 0
    assert corpus.records[1].collector_id == 1
    assert corpus.records[2].time_period == 1


@pytest.mark.parametrize(
    "line,fragment",
    [
        ("rc0\t0\n", "3 tab-separated fields"),
        ("rc0\t0\t1 2\textra\n", "3 tab-separated fields"),
        ("rc0\t0\tfoo 2\n", "non-numeric"),
        ("rc0\t0\t-3 2\n", "32-bit"),
        ("rc0\t0\t99999999999 2\n", "32-bit"),
        ("rc0\t0\t\n", "empty AS path"),
        ("\t0\t1 2\n", "empty collector"),
        ("rc0\t\t1 2\n", "empty period"),
    ],
)
def test_malformed_lines_raise_with_line_number(line, fragment):
    text = "# fine\nrc0\t0\t1 2\n" + line
    with pytest.raises(ParseError) as err:
        parse_paths_file(text, source="bad.txt")
    assert fragment in str(err.value)
    assert "bad.txt:3" in str(err.value)


def test_empty_input_rejected():
    with pytest.raises(ParseError, match="no path records"):
        parse_paths_file("# only comments\n\n")


def test_parse_is_deterministic(micro_corpus):
    from tests.conftest import MICRO_PATHS

    again = parse_paths_file(MICRO_PATHS)
    assert again.collector_labels == micro_corpus.collector_labels
    assert again.period_labels == micro_corpus.period_labels
    assert again.records == micro_corpus.records
    assert again.registry.id_to_as_number == micro_corpus.registry.id_to_as_number


def test_round_trip(tmp_path, micro_corpus):
    out = tmp_path / "roundtrip.txt"
    write_paths_file(micro_corpus, out, header_lines=["round trip"])
    reparsed = load_corpus([out])
    assert reparsed.records == micro_corpus.records
    assert reparsed.registry.id_to_as_number == micro_corpus.registry.id_to_as_number
    assert reparsed.collector_labels == micro_corpus.collector_labels


def test_multi_file_merge_matches_single_stream(tmp_path):
    text_a = "c0\tp0\t1 2 3\nc1\tp0\t4 5\n"
    text_b = "c0\tp1\t1 2\nc2\tp0\t6 1\n"
    (tmp_path / "a.txt").write_text(text_a)
    (tmp_path / "b.txt").write_text(text_b)
    merged = load_corpus([tmp_path / "a.txt", tmp_path / "b.txt"], workers=2)
    single = parse_paths_file(text_a + text_b)
    assert merged.records == single.records
    assert merged.collector_labels == single.collector_labels
    assert merged.registry.id_to_as_number == single.registry.id_to_as_number


def test_concurrent_parse_merge_is_single_owner():
    raw_a = parse_lines(io.StringIO("c0\tp0\t1 2\n"), "a")
    raw_b = parse_lines(io.StringIO("c1\tp0\t2 3\n"), "b")
    corpus = build_corpus([raw_a, raw_b])
    assert corpus.collector_labels == ["c0", "c1"]
    assert corpus.registry.n_nodes == 3


as_numbers = st.integers(min_value=0, max_value=2**32 - 1)
paths = st.lists(as_numbers, min_size=1, max_size=8)
labels = st.text(
    alphabet=st.characters(whitelist_categories=("Lu", "Ll", "Nd"), max_codepoint=127),
    min_size=1,
    max_size=6,
)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(labels, labels, paths), min_size=1, max_size=12))
def test_round_trip_property(tmp_path_factory, entries):
    lines = []
    for collector, period, as_path in entries:
        lines.append(f"{collector}\t{period}\t" + " ".join(str(a) for a in as_path))
    corpus = parse_paths_file("\n".join(lines) + "\n")
    rendered = "\n".join(format_record(corpus, r) for r in corpus.records)
    if not corpus.records:
        return
    reparsed = parse_paths_file(rendered + "\n")
    assert reparsed.records == corpus.records
    assert reparsed.registry.id_to_as_number == corpus.registry.id_to_as_number
    assert len(corpus.records) + corpus.dropped_loops == corpus.n_path_lines
