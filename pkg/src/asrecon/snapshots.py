"""Per-(collector, period) union graphs and hop distances from the collector.

Each collector's paths for one time period are folded into an undirected
graph; nodes the collector cannot reach from its own vantage AS are pruned.
Hop distances from that root drive the negative-observation rule in
:mod:`asrecon.counting`.
"""

from __future__ import annotations

from collections import Counter, deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .ingest import PathCorpus, PathRecord

ABSENT = -1  # level sentinel for nodes outside a snapshot


class SnapshotError(ValueError):
    pass


@dataclass
class SnapshotGraph:
    """Union of one collector's paths in one period, pruned to the root's component.

    `adjacency` maps node id to a sorted array of neighbor ids; `edges` holds
    each undirected edge once as a row (i, j) with i < j.
    """

    collector_id: int
    time_period: int
    root: int
    adjacency: dict[int, np.ndarray]
    edges: np.ndarray
    n_total: int
    n_pruned: int = 0

    @property
    def nodes(self) -> Iterable[int]:
        return self.adjacency.keys()

    def has_edge(self, i: int, j: int) -> bool:
        nbrs = self.adjacency.get(i)
        return nbrs is not None and j in nbrs


@dataclass
class LevelArray:
    """Hop counts from the snapshot root, indexed by node id; ABSENT if pruned."""

    dist: np.ndarray

    def __getitem__(self, node: int) -> int:
        return int(self.dist[node])


def _pick_root(records: Sequence[PathRecord]) -> int:
    # Most frequent first AS wins; ties go to the earliest-seen candidate.
    # Public collectors multiplex vantage points, but the level-based negative
    # observation rule needs a single BFS source per snapshot.
    firsts = [r.nodes[0] for r in records]
    counts = Counter(firsts)
    best = max(counts.values())
    for node in firsts:
        if counts[node] == best:
            return node
    raise AssertionError("unreachable")


def build_snapshot(records: Sequence[PathRecord], n_total: int) -> SnapshotGraph:
    """Union the edges of one (collector, period) record group.

    All records must share collector and period. Consecutive path hops become
    undirected edges; nodes unreachable from the root are pruned and counted.
    """
    if not records:
        raise SnapshotError("cannot build a snapshot from an empty record set")
    collector_id = records[0].collector_id
    time_period = records[0].time_period
    for r in records:
        if r.collector_id != collector_id or r.time_period != time_period:
            raise SnapshotError(
                "records span multiple (collector, period) groups: "
                f"({collector_id},{time_period}) vs ({r.collector_id},{r.time_period})"
            )

    neighbors: dict[int, set[int]] = {}
    for r in records:
        nodes = r.nodes
        neighbors.setdefault(nodes[0], set())
        for a, b in zip(nodes, nodes[1:]):
            if a == b:
                continue
            neighbors.setdefault(a, set()).add(b)
            neighbors.setdefault(b, set()).add(a)

    root = _pick_root(records)

    # Prune to the root's connected component.
    reachable = {root}
    frontier = deque([root])
    while frontier:
        u = frontier.popleft()
        for v in neighbors[u]:
            if v not in reachable:
                reachable.add(v)
                frontier.append(v)
    n_pruned = len(neighbors) - len(reachable)

    adjacency = {
        u: np.fromiter(sorted(v for v in nbrs if v in reachable), dtype=np.int64)
        for u, nbrs in neighbors.items()
        if u in reachable
    }
    edge_rows = [(u, v) for u, nbrs in adjacency.items() for v in nbrs if u < v]
    edge_rows.sort()
    edges = (
        np.array(edge_rows, dtype=np.int64) if edge_rows else np.empty((0, 2), dtype=np.int64)
    )
    return SnapshotGraph(
        collector_id=collector_id,
        time_period=time_period,
        root=root,
        adjacency=adjacency,
        edges=edges,
        n_total=n_total,
        n_pruned=n_pruned,
    )


def bfs_levels(graph: SnapshotGraph) -> LevelArray:
    """Exact unweighted hop counts from the snapshot root."""
    dist = np.full(graph.n_total, ABSENT, dtype=np.int64)
    dist[graph.root] = 0
    frontier = deque([graph.root])
    while frontier:
        u = frontier.popleft()
        du = dist[u]
        for v in graph.adjacency[u]:
            if dist[v] == ABSENT:
                dist[v] = du + 1
                frontier.append(v)
    return LevelArray(dist=dist)


def group_records(corpus: PathCorpus) -> dict[tuple[int, int], list[PathRecord]]:
    """Bucket corpus records by (collector, period)."""
    groups: dict[tuple[int, int], list[PathRecord]] = {}
    for record in corpus.records:
        groups.setdefault((record.collector_id, record.time_period), []).append(record)
    return groups


def build_all_snapshots(
    corpus: PathCorpus, workers: int = 1
) -> list[tuple[SnapshotGraph, LevelArray]]:
    """Build and level every (collector, period) snapshot in the corpus.

    Snapshots are independent, so they are built concurrently when
    workers > 1; result order is fixed by (collector, period).
    """
    groups = sorted(group_records(corpus).items())
    n_total = corpus.registry.n_nodes

    def _one(item: tuple[tuple[int, int], list[PathRecord]]):
        _, records = item
        graph = build_snapshot(records, n_total)
        return graph, bfs_levels(graph)

    if workers > 1 and len(groups) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_one, groups))
    return [_one(g) for g in groups]


def dump_snapshot_edges(graph: SnapshotGraph, path: str | Path) -> None:
    """Debug dump: one sorted `i j` line per edge."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, j in graph.edges:
            fh.write(f"{i} {j}\n")
