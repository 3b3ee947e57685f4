"""Readers and writers for the files that connect pipeline stages.

Stages communicate through files, never in-memory handoff, so each stage can
be rerun and tested in isolation. Every artifact starts with comment lines
recording the tool version, a hash of the effective configuration, and
hashes of the input files; there are deliberately no timestamps, so a rerun
with identical inputs produces byte-identical files.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from . import __version__
from .analytics import GroupEntropy, Histogram
from .counting import ClassTable, CountingError, PairStore
from .evaluation import ReconstructionScore
from .inference import FittedModel, ModelParams
from .ingest import AsRegistry


class ArtifactError(ValueError):
    pass


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def config_hash(items: Mapping[str, object]) -> str:
    canon = "\n".join(f"{k}={items[k]!r}" for k in sorted(items))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def header_lines(
    artifact: str,
    config: Mapping[str, object] | None = None,
    inputs: Mapping[str, str] | None = None,
) -> list[str]:
    lines = [f"# asrecon {__version__} artifact={artifact}"]
    if config is not None:
        lines.append(f"# config sha256:{config_hash(config)}")
    for name, digest in (inputs or {}).items():
        lines.append(f"# input {name} sha256:{digest}")
    return lines


def _write_header(fh: TextIO, header: Sequence[str]) -> None:
    for line in header:
        fh.write(line.rstrip("\n") + "\n")


def _data_lines(path: str | Path) -> Iterable[tuple[int, str]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            yield lineno, stripped


# -- counting stage -----------------------------------------------------------


def write_registry(registry: AsRegistry, path: str | Path, header: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        _write_header(fh, header)
        for asn in registry.id_to_as_number:
            fh.write(f"{asn}\n")


def read_registry(path: str | Path) -> AsRegistry:
    registry = AsRegistry()
    for _, line in _data_lines(path):
        registry.intern(int(line))
    return registry


def write_labels(labels: Sequence[str], path: str | Path, header: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        _write_header(fh, header)
        for label in labels:
            fh.write(f"{label}\n")


def read_labels(path: str | Path) -> list[str]:
    return [line for _, line in _data_lines(path)]


def write_classes(table: ClassTable, path: str | Path, header: Sequence[str] = ()) -> None:
    """Header row `M T N total_pairs`, then one `E1 F1 ... EM FM multiplicity` per class."""
    with open(path, "w", encoding="utf-8") as fh:
        _write_header(fh, header)
        fh.write(f"{table.n_collectors} {table.n_periods} {table.n_nodes} {table.total_pairs}\n")
        for row, mult in zip(table.vectors, table.multiplicity):
            fh.write(" ".join(str(int(x)) for x in row) + f" {int(mult)}\n")


def read_classes(path: str | Path) -> ClassTable:
    rows = []
    mults = []
    meta = None
    for lineno, line in _data_lines(path):
        fields = line.split()
        if meta is None:
            if len(fields) != 4:
                raise ArtifactError(f"{path}:{lineno}: expected `M T N total_pairs` header row")
            meta = tuple(int(x) for x in fields)
            continue
        values = [int(x) for x in fields]
        if len(values) != 2 * meta[0] + 1:
            raise ArtifactError(f"{path}:{lineno}: expected {2 * meta[0] + 1} integers")
        rows.append(values[:-1])
        mults.append(values[-1])
    if meta is None:
        raise ArtifactError(f"{path}: empty class table")
    m, t, n, total_pairs = meta
    vectors = np.array(rows, dtype=np.int64).reshape(len(rows), 2 * m)
    zero_rows = np.flatnonzero(~vectors.any(axis=1))
    if zero_rows.size != 1:
        raise CountingError(f"{path}: class table must contain exactly one all-zero class")
    table = ClassTable(
        vectors=vectors,
        multiplicity=np.array(mults, dtype=np.int64),
        n_collectors=m,
        n_periods=t,
        n_nodes=n,
        total_pairs=total_pairs,
        zero_class_index=int(zero_rows[0]),
    )
    table.validate()
    return table


def write_pairs(
    store: PairStore, registry: AsRegistry, path: str | Path, header: Sequence[str] = ()
) -> None:
    """One `as_i as_j class_index` line per observed pair."""
    if store.class_index is None:
        raise ArtifactError("pair store has no class assignment; compact it first")
    i, j = store.pairs_ij()
    with open(path, "w", encoding="utf-8") as fh:
        _write_header(fh, header)
        for a, b, cls in zip(i, j, store.class_index):
            as_a, as_b = registry.as_of(int(a)), registry.as_of(int(b))
            if as_a > as_b:
                as_a, as_b = as_b, as_a
            fh.write(f"{as_a} {as_b} {int(cls)}\n")


def read_pairs(path: str | Path, registry: AsRegistry, table: ClassTable) -> PairStore:
    n = registry.n_nodes
    ids = []
    classes = []
    for lineno, line in _data_lines(path):
        fields = line.split()
        if len(fields) != 3:
            raise ArtifactError(f"{path}:{lineno}: expected `as_i as_j class_index`")
        a, b, cls = int(fields[0]), int(fields[1]), int(fields[2])
        i, j = registry.id_of(a), registry.id_of(b)
        if i > j:
            i, j = j, i
        ids.append(i * n + j)
        classes.append(cls)
    order = np.argsort(np.array(ids, dtype=np.int64))
    pair_ids = np.array(ids, dtype=np.int64)[order]
    class_index = np.array(classes, dtype=np.int64)[order]
    return PairStore(
        n_nodes=n,
        n_collectors=table.n_collectors,
        n_periods=table.n_periods,
        pair_ids=pair_ids,
        vectors=table.vectors[class_index],
        class_index=class_index,
    )


# -- fitting stage ------------------------------------------------------------


def write_model(
    model: FittedModel, table: ClassTable, path: str | Path, header: Sequence[str] = ()
) -> None:
    """Header row `M T total_pairs iterations log_density`, then rates, then rho."""
    with open(path, "w", encoding="utf-8") as fh:
        _write_header(fh, header)
        fh.write(f"# converged {str(model.converged).lower()}\n")
        fh.write(
            f"{table.n_collectors} {table.n_periods} {table.total_pairs} "
            f"{model.iterations} {model.log_density:.17g}\n"
        )
        for k in range(table.n_collectors):
            fh.write(f"{model.params.alpha[k]:.17g} {model.params.beta[k]:.17g}\n")
        fh.write(f"{model.params.rho:.17g}\n")


def read_model(path: str | Path, class_posteriors: np.ndarray | None = None) -> FittedModel:
    converged = True
    with open(path, encoding="utf-8") as fh:
        body = []
        for line in fh:
            stripped = line.strip()
            if stripped.startswith("# converged"):
                converged = stripped.split()[-1] == "true"
            if not stripped or stripped.startswith("#"):
                continue
            body.append(stripped)
    if not body:
        raise ArtifactError(f"{path}: empty model file")
    meta = body[0].split()
    if len(meta) != 5:
        raise ArtifactError(f"{path}: expected `M T total_pairs iterations log_density`")
    m = int(meta[0])
    if len(body) != 2 + m:
        raise ArtifactError(f"{path}: expected {m} rate rows plus rho")
    rates = np.array([[float(x) for x in row.split()] for row in body[1 : 1 + m]])
    params = ModelParams(alpha=rates[:, 0], beta=rates[:, 1], rho=float(body[1 + m]))
    return FittedModel(
        params=params,
        class_posteriors=class_posteriors if class_posteriors is not None else np.empty(0),
        log_density=float(meta[4]),
        iterations=int(meta[3]),
        converged=converged,
        history=(),
    )


def write_class_posteriors(q: np.ndarray, path: str | Path, header: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        _write_header(fh, header)
        for idx, value in enumerate(q):
            fh.write(f"{idx} {value:.17g}\n")


def read_class_posteriors(path: str | Path) -> np.ndarray:
    pairs = [(int(f[0]), float(f[1])) for _, line in _data_lines(path) if (f := line.split())]
    out = np.empty(len(pairs))
    for idx, value in pairs:
        if idx < 0 or idx >= len(pairs):
            raise ArtifactError(f"{path}: class index {idx} out of range")
        out[idx] = value
    return out


def load_model(model_path: str | Path, posteriors_path: str | Path) -> FittedModel:
    return read_model(model_path, class_posteriors=read_class_posteriors(posteriors_path))


# -- reports ------------------------------------------------------------------


def write_histogram(hist: Histogram, path: str | Path, header: Sequence[str] = ()) -> None:
    """One `bin_lower bin_upper count` line per bin."""
    with open(path, "w", encoding="utf-8") as fh:
        _write_header(fh, header)
        for lo, hi, count in zip(hist.edges[:-1], hist.edges[1:], hist.counts):
            fh.write(f"{lo:g} {hi:g} {int(count)}\n")


def read_histogram(path: str | Path) -> Histogram:
    lowers, uppers, counts = [], [], []
    for _, line in _data_lines(path):
        lo, hi, count = line.split()
        lowers.append(float(lo))
        uppers.append(float(hi))
        counts.append(int(count))
    edges = np.array(lowers + [uppers[-1]]) if lowers else np.array([])
    return Histogram(edges=edges, counts=np.array(counts, dtype=np.int64))


def write_node_entropy(
    per_node: np.ndarray, registry: AsRegistry, path: str | Path, header: Sequence[str] = ()
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        _write_header(fh, header)
        for node, value in enumerate(per_node):
            fh.write(f"{registry.as_of(node)} {value:.17g}\n")


def write_group_entropy(
    ranking: Sequence[GroupEntropy], path: str | Path, header: Sequence[str] = ()
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        _write_header(fh, header)
        for entry in ranking:
            fh.write(f"{entry.label}\t{entry.mean_entropy:.17g}\t{entry.n_nodes}\n")


def write_eval_summary(
    scores: Sequence[ReconstructionScore], path: str | Path, header: Sequence[str] = ()
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        _write_header(fh, header)
        for score in scores:
            fh.write(f"# clamps {score.label} {score.n_clamped}\n")
        fh.write("label\tlog_q\tprecision\trecall\tedges_scored\tedges_unmatched\n")
        for s in scores:
            fh.write(
                f"{s.label}\t{s.log_q:.17g}\t{s.precision:.17g}\t{s.recall:.17g}\t"
                f"{s.edges_scored}\t{s.edges_unmatched}\n"
            )


def write_ablation(
    orderings: np.ndarray,
    h_norm: np.ndarray,
    mean: np.ndarray,
    std: np.ndarray,
    curves_path: str | Path,
    summary_path: str | Path,
    header: Sequence[str] = (),
) -> None:
    with open(curves_path, "w", encoding="utf-8") as fh:
        _write_header(fh, header)
        fh.write("ordering\tprefix\th_norm\tcollectors\n")
        for r in range(h_norm.shape[0]):
            for k in range(h_norm.shape[1]):
                prefix = ",".join(str(int(c)) for c in orderings[r, : k + 1])
                fh.write(f"{r}\t{k + 1}\t{h_norm[r, k]:.17g}\t{prefix}\n")
    with open(summary_path, "w", encoding="utf-8") as fh:
        _write_header(fh, header)
        fh.write("prefix\tmean_h_norm\tstd_h_norm\n")
        for k in range(mean.size):
            fh.write(f"{k + 1}\t{mean[k]:.17g}\t{std[k]:.17g}\n")
