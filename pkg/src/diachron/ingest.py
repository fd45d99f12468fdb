"""Load paper/citation/venue tables and assemble one immutable citation graph per epoch.

Input formats (all UTF-8 TSV with a required header row):
  papers.tsv: paper_id, venue_id, year
  edges.tsv:  citing_id, cited_id
  venues.tsv: venue_id, name, areas   (areas: semicolon-joined subset of P;L;H;S)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IntegrityError, ParseError

AREA_CODES = ("P", "L", "H", "S")
AREA_NAMES = {"P": "physical", "L": "life", "H": "health", "S": "social"}

PAPERS_HEADER = ["paper_id", "venue_id", "year"]
EDGES_HEADER = ["citing_id", "cited_id"]
VENUES_HEADER = ["venue_id", "name", "areas"]


@dataclass(frozen=True)
class EpochSpec:
    """A named, inclusive year range (the unit of diachronic slicing)."""

    label: str
    start_year: int
    end_year: int

    def __post_init__(self):
        if self.start_year > self.end_year:
            raise ValueError(f"epoch {self.label}: start {self.start_year} > end {self.end_year}")

    def contains(self, year: int) -> bool:
        return self.start_year <= year <= self.end_year


def parse_epochs(text: str) -> tuple[EpochSpec, ...]:
    """Parse "label:start-end[,label:start-end...]" into an ordered epoch series."""
    epochs = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            label, years = part.split(":")
            start, end = years.split("-")
            epochs.append(EpochSpec(label.strip(), int(start), int(end)))
        except ValueError as exc:
            raise ValueError(f"bad epoch spec {part!r}: expected label:start-end") from exc
    validate_epoch_series(epochs)
    return tuple(epochs)


def validate_epoch_series(epochs) -> None:
    """Epochs in a series must be disjoint and in increasing year order."""
    if len({e.label for e in epochs}) != len(epochs):
        raise ValueError("duplicate epoch labels")
    for prev, cur in zip(epochs, epochs[1:]):
        if cur.start_year <= prev.end_year:
            raise ValueError(f"epochs {prev.label} and {cur.label} overlap or are out of order")


@dataclass(frozen=True)
class PaperTable:
    paper_ids: np.ndarray  # int64, unique
    venue_ids: np.ndarray  # int64, aligned with paper_ids
    years: np.ndarray      # int64, aligned

    def __len__(self) -> int:
        return len(self.paper_ids)

    def index(self) -> dict[int, int]:
        return {int(p): i for i, p in enumerate(self.paper_ids)}


@dataclass(frozen=True)
class VenueRecord:
    venue_id: int
    name: str
    areas: frozenset[str]          # subset of AREA_CODES; may be empty or multi-valued
    title_tokens: tuple[str, ...]  # lowercased name words


@dataclass(frozen=True)
class EdgeTable:
    citing: np.ndarray  # int64
    cited: np.ndarray   # int64
    dup_count: int = 0
    selfloop_count: int = 0

    def __len__(self) -> int:
        return len(self.citing)


@dataclass(frozen=True)
class EpochGraph:
    """Within-epoch citation graph in CSR form over a sorted node-id universe.

    Edges point from citing to cited paper; both endpoints lie inside the epoch.
    Immutable once built; safe for concurrent readers.
    """

    epoch: EpochSpec
    node_ids: np.ndarray    # sorted paper ids of in-epoch papers
    indptr: np.ndarray      # CSR offsets, len = n_nodes + 1
    targets: np.ndarray     # node indices (not paper ids)
    node_venues: np.ndarray # venue id per node, aligned with node_ids
    node_years: np.ndarray  # year per node, aligned with node_ids

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return len(self.targets)

    def out_degree(self, node_index: int) -> int:
        return int(self.indptr[node_index + 1] - self.indptr[node_index])

    def venue_of(self) -> dict[int, int]:
        return {int(p): int(v) for p, v in zip(self.node_ids, self.node_venues)}


@dataclass
class GraphBuildStats:
    cross_epoch_edges: int = 0
    unknown_endpoint_edges: int = 0


def _read_rows(path: Path | str, expected_header: list[str]):
    """Yield (line_no, fields) for each data row, enforcing the header."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line:
            raise ParseError(path, 1, "empty file, expected header row")
        header = header_line.rstrip("\n").split("\t")
        if header != expected_header:
            raise ParseError(path, 1, f"bad header {header!r}, expected {expected_header!r}")
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != len(expected_header):
                raise ParseError(path, line_no, f"expected {len(expected_header)} fields, got {len(fields)}")
            yield line_no, fields


def _parse_int(path, line_no, name, text) -> int:
    text = text.strip()
    if not text:
        raise ParseError(path, line_no, f"empty {name}")
    try:
        return int(text)
    except ValueError:
        raise ParseError(path, line_no, f"bad {name} {text!r}") from None


def load_paper_table(path: Path | str) -> PaperTable:
    """Load papers.tsv. Duplicate paper ids and out-of-range years abort the load."""
    paper_ids: list[int] = []
    venue_ids: list[int] = []
    years: list[int] = []
    seen: set[int] = set()
    for line_no, fields in _read_rows(path, PAPERS_HEADER):
        pid = _parse_int(path, line_no, "paper_id", fields[0])
        vid = _parse_int(path, line_no, "venue_id", fields[1])
        year = _parse_int(path, line_no, "year", fields[2])
        if not 1000 <= year <= 2100:
            raise ParseError(path, line_no, f"year {year} outside 1000..2100")
        if pid in seen:
            raise IntegrityError(f"{path}: duplicate paper_id {pid}")
        seen.add(pid)
        paper_ids.append(pid)
        venue_ids.append(vid)
        years.append(year)
    return PaperTable(
        paper_ids=np.asarray(paper_ids, dtype=np.int64),
        venue_ids=np.asarray(venue_ids, dtype=np.int64),
        years=np.asarray(years, dtype=np.int64),
    )


def load_edge_table(path: Path | str) -> EdgeTable:
    """Load edges.tsv, dropping duplicate edges and self-citations (counted).

    References to paper ids absent from the paper table are not an error here:
    cross-epoch citations are expected and reported as a statistic downstream.
    """
    citing: list[int] = []
    cited: list[int] = []
    seen: set[tuple[int, int]] = set()
    dup = 0
    selfloop = 0
    for line_no, fields in _read_rows(path, EDGES_HEADER):
        a = _parse_int(path, line_no, "citing_id", fields[0])
        b = _parse_int(path, line_no, "cited_id", fields[1])
        if a == b:
            selfloop += 1
            continue
        if (a, b) in seen:
            dup += 1
            continue
        seen.add((a, b))
        citing.append(a)
        cited.append(b)
    return EdgeTable(
        citing=np.asarray(citing, dtype=np.int64),
        cited=np.asarray(cited, dtype=np.int64),
        dup_count=dup,
        selfloop_count=selfloop,
    )


def load_venue_table(path: Path | str) -> dict[int, VenueRecord]:
    venues: dict[int, VenueRecord] = {}
    for line_no, fields in _read_rows(path, VENUES_HEADER):
        vid = _parse_int(path, line_no, "venue_id", fields[0])
        name = fields[1]
        area_field = fields[2].strip()
        areas = frozenset(a for a in area_field.split(";") if a)
        bad = areas - set(AREA_CODES)
        if bad:
            raise ParseError(path, line_no, f"unknown area codes {sorted(bad)}")
        if vid in venues:
            raise IntegrityError(f"{path}: duplicate venue_id {vid}")
        tokens = tuple(w for w in name.lower().split() if w)
        venues[vid] = VenueRecord(venue_id=vid, name=name, areas=areas, title_tokens=tokens)
    return venues


def validate_paper_venues(papers: PaperTable, venues: dict[int, VenueRecord]) -> None:
    """Abort if any paper references a venue with no venue row (silent row loss
    would corrupt downstream frequency thresholds)."""
    known = np.fromiter(venues.keys(), dtype=np.int64, count=len(venues))
    missing = ~np.isin(papers.venue_ids, known)
    if missing.any():
        bad = sorted(set(papers.venue_ids[missing].tolist()))[:10]
        raise IntegrityError(f"papers reference unknown venue ids {bad}")


def build_epoch_graph(
    papers: PaperTable,
    edges: EdgeTable,
    epoch: EpochSpec,
    venues: dict[int, VenueRecord] | None = None,
    stats: GraphBuildStats | None = None,
) -> EpochGraph:
    """Assemble the citation graph over papers published inside the epoch.

    Keeps exactly the edges with both endpoints in-epoch; cross-epoch and
    unknown-endpoint edges are counted into `stats`, never errors.
    """
    in_epoch = (papers.years >= epoch.start_year) & (papers.years <= epoch.end_year)
    node_ids = np.sort(papers.paper_ids[in_epoch])
    order = np.argsort(papers.paper_ids[in_epoch])
    node_venues = papers.venue_ids[in_epoch][order]
    node_years = papers.years[in_epoch][order]

    if venues is not None:
        missing = [int(v) for v in node_venues if int(v) not in venues]
        if missing:
            raise IntegrityError(f"papers in epoch {epoch.label} reference unknown venue ids {sorted(set(missing))[:10]}")

    all_ids = papers.paper_ids
    known_citing = np.isin(edges.citing, all_ids)
    known_cited = np.isin(edges.cited, all_ids)
    unknown = ~(known_citing & known_cited)

    src_idx = np.searchsorted(node_ids, edges.citing)
    dst_idx = np.searchsorted(node_ids, edges.cited)
    n = len(node_ids)
    src_in = (src_idx < n) & (node_ids[np.minimum(src_idx, max(n - 1, 0))] == edges.citing) if n else np.zeros(len(edges.citing), bool)
    dst_in = (dst_idx < n) & (node_ids[np.minimum(dst_idx, max(n - 1, 0))] == edges.cited) if n else np.zeros(len(edges.cited), bool)
    keep = src_in & dst_in

    if stats is not None:
        stats.unknown_endpoint_edges += int(unknown.sum())
        # known papers, but the pair does not fall inside this epoch together
        stats.cross_epoch_edges += int((~keep & ~unknown).sum())

    src = src_idx[keep].astype(np.int64)
    dst = dst_idx[keep].astype(np.int64)
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)

    for arr in (node_ids, indptr, dst, node_venues, node_years):
        arr.setflags(write=False)
    return EpochGraph(
        epoch=epoch,
        node_ids=node_ids,
        indptr=indptr,
        targets=dst,
        node_venues=node_venues,
        node_years=node_years,
    )
