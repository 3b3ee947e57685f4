"""Parsing of canonical path-snapshot files.

The canonical format is line oriented UTF-8 text: `#` starts a comment line,
every other line is `collector_label<TAB>period_label<TAB>as1 as2 as3 ...`
with AS numbers as decimal integers. One file may contain any number of
collectors and time periods.

Parsing interns AS numbers to dense node ids and assigns collectors and
periods dense indices in first-seen order. Consecutive duplicate ASes on a
path (path padding) are collapsed; paths that still contain a repeated AS
afterwards are rejected and tallied as loops.
"""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

MAX_AS_NUMBER = 2**32 - 1


class ParseError(ValueError):
    """Malformed input in a paths file."""

    def __init__(self, message: str, source: str = "<stream>", line: int | None = None):
        self.source = source
        self.line = line
        where = source if line is None else f"{source}:{line}"
        super().__init__(f"{where}: {message}")


@dataclass
class AsRegistry:
    """Bijection between 32-bit AS numbers and dense node ids 0..N-1."""

    as_number_to_id: dict[int, int] = field(default_factory=dict)
    id_to_as_number: list[int] = field(default_factory=list)

    @property
    def n_nodes(self) -> int:
        return len(self.id_to_as_number)

    def intern(self, as_number: int) -> int:
        node = self.as_number_to_id.get(as_number)
        if node is None:
            node = len(self.id_to_as_number)
            self.as_number_to_id[as_number] = node
            self.id_to_as_number.append(as_number)
        return node

    def id_of(self, as_number: int) -> int:
        return self.as_number_to_id[as_number]

    def as_of(self, node_id: int) -> int:
        return self.id_to_as_number[node_id]

    def __contains__(self, as_number: int) -> bool:
        return as_number in self.as_number_to_id

    def __len__(self) -> int:
        return len(self.id_to_as_number)


@dataclass(frozen=True)
class PathRecord:
    """One advertised path: dense node ids, already padding-compressed."""

    collector_id: int
    time_period: int
    nodes: tuple[int, ...]


@dataclass
class PathCorpus:
    """All parsed records plus the registries they are indexed against."""

    registry: AsRegistry
    records: list[PathRecord]
    collector_labels: list[str]
    period_labels: list[str]
    dropped_loops: int = 0
    n_path_lines: int = 0

    @property
    def n_collectors(self) -> int:
        return len(self.collector_labels)

    @property
    def n_periods(self) -> int:
        return len(self.period_labels)


# A pre-registry path: labels and raw AS numbers, validated and compressed.
_RawPath = tuple[str, str, tuple[int, ...]]


@dataclass
class RawFile:
    """Per-file parse result, before registry ids are assigned."""

    source: str
    paths: list[_RawPath]
    dropped_loops: int
    n_path_lines: int


def _parse_as_field(field_text: str, source: str, lineno: int) -> tuple[int, ...]:
    tokens = field_text.split()
    if not tokens:
        raise ParseError("empty AS path", source, lineno)
    numbers = []
    for tok in tokens:
        try:
            asn = int(tok)
        except ValueError:
            raise ParseError(f"non-numeric AS number {tok!r}", source, lineno) from None
        if asn < 0 or asn > MAX_AS_NUMBER:
            raise ParseError(f"AS number {asn} outside 32-bit range", source, lineno)
        numbers.append(asn)
    return tuple(numbers)


def _compress_padding(nodes: Sequence[int]) -> tuple[int, ...]:
    out = [nodes[0]]
    for n in nodes[1:]:
        if n != out[-1]:
            out.append(n)
    return tuple(out)


def parse_lines(lines: Iterable[str], source: str = "<stream>") -> RawFile:
    """Parse one stream into raw paths; no registry ids are assigned yet.

    Safe to run concurrently for several files; merge the results with
    :func:`build_corpus` afterwards.
    """
    paths: list[_RawPath] = []
    dropped = 0
    n_path_lines = 0
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        n_path_lines += 1
        fields = line.rstrip("\n").split("\t")
        if len(fields) != 3:
            raise ParseError(
                f"expected 3 tab-separated fields, got {len(fields)}", source, lineno
            )
        collector = fields[0].strip()
        period = fields[1].strip()
        if not collector:
            raise ParseError("empty collector label", source, lineno)
        if not period:
            raise ParseError("empty period label", source, lineno)
        nodes = _compress_padding(_parse_as_field(fields[2], source, lineno))
        if len(set(nodes)) != len(nodes):
            dropped += 1  # loop survived padding compression
            continue
        paths.append((collector, period, nodes))
    return RawFile(source=source, paths=paths, dropped_loops=dropped, n_path_lines=n_path_lines)


def build_corpus(raw_files: Sequence[RawFile]) -> PathCorpus:
    """Merge per-file parses into one corpus; the single-owner step.

    Collector, period, and AS ids are assigned in first-seen order across the
    files in the order given, so the result is deterministic for a fixed file
    order regardless of how the files were parsed.
    """
    if sum(f.n_path_lines for f in raw_files) == 0:
        sources = ", ".join(f.source for f in raw_files) or "<none>"
        raise ParseError(f"no path records in input ({sources})")
    registry = AsRegistry()
    collector_ids: dict[str, int] = {}
    period_ids: dict[str, int] = {}
    collector_labels: list[str] = []
    period_labels: list[str] = []
    records: list[PathRecord] = []
    for raw in raw_files:
        for collector, period, nodes in raw.paths:
            k = collector_ids.get(collector)
            if k is None:
                k = len(collector_labels)
                collector_ids[collector] = k
                collector_labels.append(collector)
            t = period_ids.get(period)
            if t is None:
                t = len(period_labels)
                period_ids[period] = t
                period_labels.append(period)
            records.append(
                PathRecord(collector_id=k, time_period=t, nodes=tuple(registry.intern(n) for n in nodes))
            )
    return PathCorpus(
        registry=registry,
        records=records,
        collector_labels=collector_labels,
        period_labels=period_labels,
        dropped_loops=sum(f.dropped_loops for f in raw_files),
        n_path_lines=sum(f.n_path_lines for f in raw_files),
    )


def parse_paths_file(stream: Iterable[str] | str, source: str = "<stream>") -> PathCorpus:
    """Parse a single canonical paths stream into a corpus."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    return build_corpus([parse_lines(stream, source)])


def load_corpus(paths: Sequence[str | Path], workers: int = 1) -> PathCorpus:
    """Parse several paths files (concurrently if workers > 1) and merge them."""
    paths = [Path(p) for p in paths]

    def _parse_one(p: Path) -> RawFile:
        with open(p, encoding="utf-8") as fh:
            return parse_lines(fh, source=str(p))

    if workers > 1 and len(paths) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            raw_files = list(pool.map(_parse_one, paths))
    else:
        raw_files = [_parse_one(p) for p in paths]
    return build_corpus(raw_files)


def format_record(corpus: PathCorpus, record: PathRecord) -> str:
    """Render one record back into the canonical line format."""
    path = " ".join(str(corpus.registry.as_of(n)) for n in record.nodes)
    return (
        f"{corpus.collector_labels[record.collector_id]}\t"
        f"{corpus.period_labels[record.time_period]}\t{path}"
    )


def write_paths_file(corpus: PathCorpus, path: str | Path, header_lines: Sequence[str] = ()) -> None:
    """Serialize a corpus back to the canonical paths format."""
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(line if line.startswith("#") else f"# {line}")
            fh.write("\n")
        for record in corpus.records:
            fh.write(format_record(corpus, record) + "\n")
