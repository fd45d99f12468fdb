"""Random-walk trail generation on epoch graphs and trail filtering into a training corpus.

Walks start from every node a fixed number of times and follow outgoing
citation links uniformly at random until a dead end (or a length cap that
guards against the rare within-epoch citation cycle). Paper trails are mapped
to venue trails, then filtered: length-1 trails and all-identical trails are
dropped, and venues rarer than the frequency threshold are pruned out.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import EmptyCorpusError, IntegrityError
from .ingest import EpochGraph


@dataclass(frozen=True)
class TrailCorpus:
    """Filtered venue trails for one epoch plus a full recount of their tokens."""

    trails: tuple[tuple[int, ...], ...]
    token_counts: dict[int, int]
    epoch: str
    min_count: int

    @property
    def n_trails(self) -> int:
        return len(self.trails)

    @property
    def n_tokens(self) -> int:
        return sum(self.token_counts.values())

    @property
    def vocabulary_size(self) -> int:
        return len(self.token_counts)


def walk_epoch(
    graph: EpochGraph,
    starts_per_node: int = 5,
    max_len: int = 100,
    seed: int = 0,
    shards: int = 16,
) -> Iterator[list[int]]:
    """Yield paper trails: `starts_per_node` walks from every node.

    `max_len` caps the number of papers in a trail; within-decade citation
    graphs are near-acyclic so the cap is rarely binding. Node index space is
    sharded into contiguous blocks, each with its own seeded RNG stream, so
    output is identical for identical (seed, shards) regardless of scheduling.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    if starts_per_node < 0:
        raise ValueError("starts_per_node must be >= 0")
    n = graph.n_nodes
    if n == 0:
        return
    shards = max(1, min(shards, n))
    bounds = np.linspace(0, n, shards + 1, dtype=np.int64)
    indptr, targets, node_ids = graph.indptr, graph.targets, graph.node_ids
    for shard in range(shards):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(shard,)))
        for node in range(bounds[shard], bounds[shard + 1]):
            for _ in range(starts_per_node):
                cur = node
                trail = [int(node_ids[cur])]
                while len(trail) < max_len:
                    lo, hi = indptr[cur], indptr[cur + 1]
                    if hi == lo:
                        break
                    cur = int(targets[lo + rng.integers(hi - lo)])
                    trail.append(int(node_ids[cur]))
                yield trail


def to_venue_trails(
    paper_trails: Iterable[Sequence[int]], venue_of: Mapping[int, int]
) -> Iterator[list[int]]:
    """Map each paper in a trail to its venue; lengths and order preserved."""
    for trail in paper_trails:
        try:
            yield [venue_of[p] for p in trail]
        except KeyError as exc:
            raise IntegrityError(f"paper {exc.args[0]} has no venue") from None


def _structural_filter(trails: list[tuple[int, ...]]) -> list[tuple[int, ...]]:
    """Drop trails of length 1 and trails composed solely of one venue."""
    return [t for t in trails if len(t) >= 2 and any(tok != t[0] for tok in t)]


def filter_and_prune(
    raw_trails: Iterable[Sequence[int]], min_count: int = 50, epoch: str = ""
) -> TrailCorpus:
    """Filter venue trails into a TrailCorpus.

    Structural filters run first, then venues with fewer than `min_count`
    corpus-wide occurrences are removed from every trail with the gap closed.
    Pruning can create new invalid trails and removing those can push another
    venue below threshold, so both steps repeat until a fixed point: the final
    corpus has no invalid trail and no under-threshold venue.
    """
    trails = _structural_filter([tuple(t) for t in raw_trails])
    while True:
        counts = Counter(tok for t in trails for tok in t)
        rare = {v for v, c in counts.items() if c < min_count}
        if not rare:
            break
        trails = _structural_filter(
            [kept for t in trails if (kept := tuple(tok for tok in t if tok not in rare))]
        )
        if not trails:
            raise EmptyCorpusError(
                f"epoch {epoch or '?'}: corpus pruned to empty at min_count={min_count}"
            )
    if not trails:
        raise EmptyCorpusError(f"epoch {epoch or '?'}: no valid trails after filtering")
    counts = Counter(tok for t in trails for tok in t)
    return TrailCorpus(
        trails=tuple(trails),
        token_counts=dict(counts),
        epoch=epoch,
        min_count=min_count,
    )


def build_corpus(
    graph: EpochGraph,
    starts_per_node: int = 5,
    max_len: int = 100,
    min_count: int = 50,
    seed: int = 0,
    shards: int = 16,
) -> TrailCorpus:
    """Walk an epoch graph and produce its filtered venue-trail corpus."""
    venue_of = graph.venue_of()
    raw = to_venue_trails(
        walk_epoch(graph, starts_per_node=starts_per_node, max_len=max_len, seed=seed, shards=shards),
        venue_of,
    )
    return filter_and_prune(raw, min_count=min_count, epoch=graph.epoch.label)


def save_corpus(corpus: TrailCorpus, path: Path | str) -> None:
    """One trail per line, venue ids space-separated."""
    with open(path, "w", encoding="utf-8") as fh:
        for trail in corpus.trails:
            fh.write(" ".join(str(tok) for tok in trail) + "\n")


def load_corpus(path: Path | str, epoch: str = "", min_count: int = 0) -> TrailCorpus:
    trails: list[tuple[int, ...]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                trails.append(tuple(int(tok) for tok in line.split()))
    counts = Counter(tok for t in trails for tok in t)
    if not trails:
        raise EmptyCorpusError(f"{path}: empty corpus file")
    return TrailCorpus(trails=tuple(trails), token_counts=dict(counts), epoch=epoch, min_count=min_count)
