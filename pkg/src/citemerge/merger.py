"""Resolve reference lists onto unified uids and build citation graphs.

A reference resolves by normalized DOI, then by (normalized title, ISSN),
against every record of both datasets, so a reference listed in dataset A can
land on an article that only dataset B indexes. Unresolved references keep a
text key: they count towards an article's reference total but create no edge.
"""

from __future__ import annotations

import enum
import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .ingest import PaperRecord, normalize_title
from .matcher import MatchKind, MatchResult
from .tables import read_table, write_int_columns

logger = logging.getLogger(__name__)


class Provenance(str, enum.Enum):
    A_ONLY = "AOnly"
    B_ONLY = "BOnly"
    BOTH = "Both"


PROVENANCE_CODES = (Provenance.A_ONLY, Provenance.B_ONLY, Provenance.BOTH)
_CODE = {p.value: i for i, p in enumerate(PROVENANCE_CODES)}


class RefResolution(NamedTuple):
    dataset_tag: str
    citing_uid: int
    target_uid: int | None
    unresolved_key: str | None


class UidTable:
    """Lookup from (dataset tag, source_id) to unified uid."""

    def __init__(self, results: Sequence[MatchResult]):
        self.size = len(results)
        self._by_tag: dict[str, dict[str, int]] = {"A": {}, "B": {}}
        prov = np.empty(self.size, dtype=np.int8)
        for pos, r in enumerate(results):
            if r.uid != pos:
                raise ValueError("match results must carry dense uids in order")
            if r.a_id is not None:
                self._by_tag["A"][r.a_id] = r.uid
            if r.b_id is not None:
                self._by_tag["B"][r.b_id] = r.uid
            prov[r.uid] = (_CODE["Both"] if r.match_kind.is_pair
                           else _CODE["AOnly"] if r.match_kind is MatchKind.UNMATCHED_A
                           else _CODE["BOnly"])
        self.provenance = prov

    def uid_of(self, rec: PaperRecord) -> int:
        return self._by_tag[rec.dataset_tag][rec.source_id]

    def get(self, tag: str, source_id: str) -> int | None:
        return self._by_tag[tag].get(source_id)


@dataclass
class CitationGraph:
    """Citation network over a set of uids.

    Nodes are stored in ascending uid order; ``indptr``/``indices`` form a CSR
    adjacency from citing node to cited node using local (positional) indices.
    """

    name: str
    uids: np.ndarray
    years: np.ndarray
    provenance: np.ndarray
    ref_counts: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    self_loops_dropped: int = 0
    duplicate_edges_dropped: int = 0

    @classmethod
    def from_edges(cls, years, edges, name: str = "g", uids=None) -> CitationGraph:
        """Build from per-node years and (citing, cited) local index pairs."""
        years = np.asarray(years, dtype=np.int64)
        n = len(years)
        arr = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        indptr, indices, loops, dups = _csr_from_pairs(n, arr[:, 0], arr[:, 1])
        uids = np.arange(n, dtype=np.int64) if uids is None else np.asarray(uids, dtype=np.int64)
        return cls(name, uids, years, np.zeros(n, dtype=np.int8), np.diff(indptr).astype(np.int64),
                   indptr, indices, loops, dups)

    @property
    def node_count(self) -> int:
        return len(self.uids)

    @property
    def edge_count(self) -> int:
        return len(self.indices)

    def local_index(self, uid: int) -> int:
        i = int(np.searchsorted(self.uids, uid))
        if i >= len(self.uids) or self.uids[i] != uid:
            raise KeyError(uid)
        return i

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """(citing, cited) in local indices, sorted by citing then cited."""
        src = np.repeat(np.arange(self.node_count, dtype=np.int64), np.diff(self.indptr))
        return src, self.indices.astype(np.int64, copy=False)

    def uid_edges(self) -> tuple[np.ndarray, np.ndarray]:
        src, dst = self.edges()
        return self.uids[src], self.uids[dst]

    def in_degree(self) -> np.ndarray:
        return np.bincount(self.indices, minlength=self.node_count).astype(np.int64)

    def out_degree(self) -> np.ndarray:
        return np.diff(self.indptr).astype(np.int64)

    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(self.edge_count, dtype=np.float64)
        return sp.csr_matrix((data, self.indices, self.indptr),
                             shape=(self.node_count, self.node_count))

    def provenance_labels(self) -> list[str]:
        return [PROVENANCE_CODES[c].value for c in self.provenance]


def _csr_from_pairs(n: int, src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray, int, int]:
    """Sort, drop self loops and duplicates. Returns indptr, indices, loops, dups."""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    loops = src == dst
    n_loops = int(loops.sum())
    src, dst = src[~loops], dst[~loops]
    packed = np.unique(src * n + dst)
    n_dups = len(src) - len(packed)
    if n:
        src, dst = packed // n, packed % n
    else:
        src = dst = packed
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return indptr, dst.astype(np.int32 if n < 2**31 else np.int64), n_loops, n_dups


class _KeyIndex:
    """key -> uid, with keys claimed by several uids marked ambiguous."""

    AMBIGUOUS = -1

    def __init__(self):
        self.map: dict = {}

    def add(self, key, uid: int) -> None:
        prev = self.map.get(key)
        if prev is None:
            self.map[key] = uid
        elif prev != uid:
            self.map[key] = self.AMBIGUOUS

    def lookup(self, key) -> int | None:
        uid = self.map.get(key)
        if uid is None or uid == self.AMBIGUOUS:
            return None
        return uid


class Resolutions(Sequence[RefResolution]):
    """Column store of resolved reference entries.

    Row ``i`` is one entry of one record's reference list: the dataset tag,
    the citing uid, and either the target uid or an unresolved text key.
    Indexing and iteration yield :class:`RefResolution` rows.
    """

    TAGS = ("A", "B")

    def __init__(self, tags: np.ndarray, citing: np.ndarray, codes: np.ndarray,
                 keys: list[str]):
        # codes >= 0 are target uids; code -1 - k points at keys[k]
        self.tags = tags
        self.citing = citing
        self.codes = codes
        self.keys = keys

    def __len__(self) -> int:
        return len(self.codes)

    def _row(self, i: int) -> RefResolution:
        code = int(self.codes[i])
        tag = self.TAGS[self.tags[i]]
        if code >= 0:
            return RefResolution(tag, int(self.citing[i]), code, None)
        return RefResolution(tag, int(self.citing[i]), None, self.keys[-1 - code])

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self._row(k) for k in range(*i.indices(len(self)))]
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        return self._row(i)

    def __iter__(self):
        for i in range(len(self)):
            yield self._row(i)

    def mask(self, tag: str | None) -> np.ndarray:
        if tag is None:
            return np.ones(len(self), dtype=bool)
        return self.tags == self.TAGS.index(tag)

    @property
    def resolved(self) -> np.ndarray:
        return self.codes >= 0

    def links(self, tag: str | None = None) -> tuple[np.ndarray, np.ndarray]:
        """(citing uid, target uid) of resolved entries."""
        m = self.mask(tag) & self.resolved
        return self.citing[m], self.codes[m]

    def reference_counts(self, size: int, tag: str | None = None) -> np.ndarray:
        """Distinct reference keys per citing uid. Resolved entries are keyed
        by target uid, so two entries naming the same article count once."""
        m = self.mask(tag)
        citing, codes = self.citing[m], self.codes[m]
        if not len(codes):
            return np.zeros(size, dtype=np.int64)
        # shift codes to be non-negative, then count distinct (citing, code) pairs
        shifted = codes + len(self.keys)
        width = int(shifted.max()) + 1
        pairs = np.unique(citing * width + shifted)
        return np.bincount(pairs // width, minlength=size).astype(np.int64)


def resolve_references(records: Iterable[PaperRecord], table: UidTable) -> Resolutions:
    """Resolve every reference entry of every record against the uid table.

    Rows follow record order, then reference order within a record.
    """
    records = list(records)
    by_doi = _KeyIndex()
    by_title = _KeyIndex()
    for rec in records:
        uid = table.uid_of(rec)
        if rec.doi:
            by_doi.add(rec.doi, uid)
        if rec.issn:
            nt = normalize_title(rec.title)
            if nt:
                by_title.add((nt, rec.issn), uid)

    doi_lookup, title_lookup = by_doi.lookup, by_title.lookup
    key_ids: dict[str, int] = {}
    # entries are often shared between records (see ingest), so memoise by identity
    memo: dict[int, int] = {}
    codes: list[int] = []
    lengths = np.empty(len(records), dtype=np.int64)
    citing = np.empty(len(records), dtype=np.int64)
    tags = np.empty(len(records), dtype=np.int8)
    for pos, rec in enumerate(records):
        citing[pos] = table.uid_of(rec)
        tags[pos] = Resolutions.TAGS.index(rec.dataset_tag)
        lengths[pos] = len(rec.references)
        for ref in rec.references:
            code = memo.get(id(ref))
            if code is None:
                target = doi_lookup(ref.doi) if ref.doi else None
                if target is None and ref.title and ref.issn:
                    target = title_lookup((normalize_title(ref.title), ref.issn))
                if target is None:
                    code = -1 - key_ids.setdefault(ref.key, len(key_ids))
                else:
                    code = target
                memo[id(ref)] = code
            codes.append(code)
    return Resolutions(np.repeat(tags, lengths), np.repeat(citing, lengths),
                       np.array(codes, dtype=np.int64), list(key_ids))


def build_graph(records: Sequence[PaperRecord], resolutions: Resolutions,
                table: UidTable, name: str | None = None) -> CitationGraph:
    """Citation graph of one dataset: its records as nodes, its resolved
    references to its own records as edges."""
    tags = {r.dataset_tag for r in records}
    if len(tags) > 1:
        raise ValueError(f"records span several datasets: {sorted(tags)}")
    tag = tags.pop() if tags else "A"
    uids = np.array(sorted(table.uid_of(r) for r in records), dtype=np.int64)
    n = len(uids)
    local = np.full(table.size, -1, dtype=np.int64)
    local[uids] = np.arange(n)

    years = np.empty(n, dtype=np.int64)
    for rec in records:
        years[local[table.uid_of(rec)]] = rec.year

    ref_counts = resolutions.reference_counts(table.size, tag)[uids]
    src, dst = resolutions.links(tag)
    src, dst = local[src], local[dst]
    keep = (src >= 0) & (dst >= 0)
    indptr, indices, loops, dups = _csr_from_pairs(n, src[keep], dst[keep])
    return CitationGraph(
        name=name or tag,
        uids=uids,
        years=years,
        provenance=table.provenance[uids].copy(),
        ref_counts=ref_counts,
        indptr=indptr,
        indices=indices,
        self_loops_dropped=loops,
        duplicate_edges_dropped=dups,
    )


def build_merged_graph(records: Sequence[PaperRecord], resolutions: Resolutions,
                       table: UidTable) -> CitationGraph:
    """Graph over every uid with the union of both datasets' resolved links.

    Reference counts of matched articles are the size of the union of the two
    reference-key sets (resolved targets by uid, the rest by text key).
    Publication year comes from the A record when both exist.
    """
    n = table.size
    years = np.zeros(n, dtype=np.int64)
    have_year = np.zeros(n, dtype=bool)
    for rec in sorted(records, key=lambda r: r.dataset_tag != "A"):
        uid = table.uid_of(rec)
        if not have_year[uid]:
            years[uid] = rec.year
            have_year[uid] = True

    indptr, indices, loops, dups = _csr_from_pairs(n, *resolutions.links())
    return CitationGraph(
        name="merged",
        uids=np.arange(n, dtype=np.int64),
        years=years,
        provenance=table.provenance.copy(),
        ref_counts=resolutions.reference_counts(n),
        indptr=indptr,
        indices=indices,
        self_loops_dropped=loops,
        duplicate_edges_dropped=dups,
    )


def write_graph(graph: CitationGraph, out_dir: str | Path) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    nodes = out_dir / f"nodes_{graph.name}.csv"
    edges = out_dir / f"edges_{graph.name}.csv"
    write_int_columns(nodes, ["uid", "year", "provenance", "refs"],
                      graph.uids, graph.years, graph.provenance_labels(), graph.ref_counts)
    write_int_columns(edges, ["citing_uid", "cited_uid"], *graph.uid_edges())
    return nodes, edges


def read_graph(out_dir: str | Path, name: str) -> CitationGraph:
    out_dir = Path(out_dir)
    _, rows = read_table(out_dir / f"nodes_{name}.csv")
    uids = np.array([int(r[0]) for r in rows], dtype=np.int64)
    years = np.array([int(r[1]) for r in rows], dtype=np.int64)
    prov = np.array([_CODE[r[2]] for r in rows], dtype=np.int8)
    refs = np.array([int(r[3]) for r in rows], dtype=np.int64)
    if len(uids) and np.any(np.diff(uids) <= 0):
        raise ValueError(f"nodes_{name}.csv is not sorted by uid")
    edge_path = out_dir / f"edges_{name}.csv"
    raw = np.loadtxt(edge_path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    raw = raw.reshape(-1, 2)
    src = np.searchsorted(uids, raw[:, 0])
    dst = np.searchsorted(uids, raw[:, 1])
    indptr, indices, loops, dups = _csr_from_pairs(len(uids), src, dst)
    if loops or dups:
        raise ValueError(f"{edge_path} contains self loops or duplicate edges")
    return CitationGraph(name, uids, years, prov, refs, indptr, indices)
