"""Aggregate tables over graphs, coverage rates, prestige and GOLD cases.

Every function here is read-only. :func:`write_report` reloads the stage
artifacts from an output directory, so reports can be regenerated without
recomputing anything upstream.
"""

from __future__ import annotations

import math
from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .clusters import ALL_LABELS, UNCLASSIFIED, unclassified_profile
from .gold import CASE_ORDER
from .merger import PROVENANCE_CODES, CitationGraph, Provenance, read_graph
from .tables import read_dicts, write_json, write_table

GRAPH_NAMES = ("A", "B", "merged")


@dataclass(frozen=True)
class SummaryStats:
    count: int
    min: float | None = None
    max: float | None = None
    mean: float | None = None
    median: float | None = None

    @property
    def range(self) -> tuple[float, float] | None:
        return None if self.count == 0 else (self.min, self.max)

    @classmethod
    def of(cls, values: Iterable[float] | np.ndarray) -> SummaryStats:
        arr = np.asarray(values if isinstance(values, np.ndarray) else list(values), dtype=float)
        if arr.size == 0:
            return cls(0)
        return cls(int(arr.size), float(arr.min()), float(arr.max()),
                   float(arr.mean()), float(np.median(arr)))

    def cells(self) -> list:
        return [self.count, self.min, self.max, self.mean, self.median]


STATS_HEADER = ["count", "min", "max", "mean", "median"]


def _prefixed(prefix: str) -> list[str]:
    return [f"{prefix}_{h}" for h in STATS_HEADER]


@dataclass(frozen=True)
class DatasetSummary:
    name: str
    papers: int
    non_ref_papers: int
    year_min: int | None
    year_max: int | None
    edges: int
    cites: SummaryStats
    references: SummaryStats


def dataset_summary(graph: CitationGraph) -> DatasetSummary:
    """Paper counts and citation/reference statistics of one graph."""
    n = graph.node_count
    return DatasetSummary(
        name=graph.name,
        papers=n,
        non_ref_papers=int(np.sum(graph.ref_counts == 0)),
        year_min=int(graph.years.min()) if n else None,
        year_max=int(graph.years.max()) if n else None,
        edges=graph.edge_count,
        cites=SummaryStats.of(graph.in_degree()),
        references=SummaryStats.of(graph.ref_counts),
    )


@dataclass(frozen=True)
class RcrSummary:
    per_dataset: dict[str, SummaryStats]
    by_cluster: list[tuple[str, float | None, float | None, int]]


def rcr_summary(rows: Sequence[tuple[int, float, float]],
                labels: Sequence[str] | None = None) -> RcrSummary:
    """Summaries of (uid, rcr_A, rcr_B) rows, overall and per cluster."""
    per = {"A": SummaryStats.of([r[1] for r in rows]),
           "B": SummaryStats.of([r[2] for r in rows])}
    by_cluster = []
    if labels is not None:
        groups: dict[str, list[tuple[float, float]]] = defaultdict(list)
        for uid, a, b in rows:
            groups[labels[uid]].append((a, b))
        for cluster in ALL_LABELS:
            vals = groups.get(cluster, [])
            if not vals:
                continue
            by_cluster.append((cluster,
                               float(np.mean([v[0] for v in vals])),
                               float(np.mean([v[1] for v in vals])),
                               len(vals)))
    return RcrSummary(per, by_cluster)


@dataclass(frozen=True)
class AnnualSeries:
    metric: str
    year_lo: int
    year_hi: int
    counts: list[int]
    means: list[float | None]

    @property
    def years(self) -> range:
        return range(self.year_lo, self.year_hi + 1)

    def rows(self):
        return zip(self.years, self.counts, self.means)


def annual_series(years: np.ndarray, values: np.ndarray, year_lo: int, year_hi: int,
                  metric: str = "value") -> AnnualSeries:
    """Mean of ``values`` per publication year; years without papers get count 0."""
    if year_lo > year_hi:
        raise ValueError(f"year_lo {year_lo} > year_hi {year_hi}")
    years = np.asarray(years, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    span = year_hi - year_lo + 1
    inside = (years >= year_lo) & (years <= year_hi)
    idx = years[inside] - year_lo
    counts = np.bincount(idx, minlength=span)
    sums = np.bincount(idx, weights=values[inside], minlength=span)
    means = [float(s / c) if c else None for s, c in zip(sums, counts)]
    return AnnualSeries(metric, year_lo, year_hi, counts.tolist(), means)


def rank_distribution_export(ranks: np.ndarray, provenance: np.ndarray,
                             bin_width: int) -> list[tuple[int, int, int, int]]:
    """Histogram of ranks of A-only and B-only nodes.

    Bins are ``[lo, hi]`` inclusive, width ``bin_width``, covering ranks
    1..len(ranks). Returns (lo, hi, a_only, b_only) rows.
    """
    if bin_width < 1:
        raise ValueError("bin_width must be >= 1")
    ranks = np.asarray(ranks, dtype=np.int64)
    provenance = np.asarray(provenance)
    n_bins = max(1, math.ceil(len(ranks) / bin_width))
    bins = (ranks - 1) // bin_width
    a_code = PROVENANCE_CODES.index(Provenance.A_ONLY)
    b_code = PROVENANCE_CODES.index(Provenance.B_ONLY)
    a = np.bincount(bins[provenance == a_code], minlength=n_bins)
    b = np.bincount(bins[provenance == b_code], minlength=n_bins)
    return [(i * bin_width + 1, (i + 1) * bin_width, int(a[i]), int(b[i])) for i in range(n_bins)]


@dataclass(frozen=True)
class ClusterStats:
    cluster: str
    cites: SummaryStats
    asp: SummaryStats


def cluster_summary(graph: CitationGraph, labels: Sequence[str],
                    asp_values: np.ndarray) -> list[ClusterStats]:
    """Citation and prestige statistics per cluster over the nodes of ``graph``."""
    cites = graph.in_degree()
    node_labels = np.array([labels[u] for u in graph.uids.tolist()], dtype=object)
    out = []
    for cluster in ALL_LABELS:
        mask = node_labels == cluster
        out.append(ClusterStats(cluster, SummaryStats.of(cites[mask]),
                                SummaryStats.of(np.asarray(asp_values)[mask])))
    return out


def gold_by_cluster(cases: Mapping[int, str], labels: Sequence[str]) -> list[list]:
    """Case counts per cluster, one row per cluster with any classified article."""
    tally: dict[str, dict[str, int]] = {c: dict.fromkeys((g.value for g in CASE_ORDER), 0)
                                        for c in ALL_LABELS}
    for uid, case in cases.items():
        tally[labels[uid]][case] += 1
    rows = []
    for cluster in ALL_LABELS:
        counts = tally[cluster]
        total = sum(counts.values())
        if total:
            rows.append([cluster, *(counts[g.value] for g in CASE_ORDER), total])
    return rows


# artifact loading ----------------------------------------------------------

def _load_asp(out_dir: Path, name: str) -> dict[str, np.ndarray]:
    rows = read_dicts(out_dir / f"asp_{name}.csv")
    return {
        "uid": np.array([int(r["uid"]) for r in rows], dtype=np.int64),
        "asp": np.array([float(r["asp"]) for r in rows]),
        "cites": np.array([int(r["cites"]) for r in rows], dtype=np.int64),
        "n": np.array([int(r["n"]) for r in rows], dtype=np.int64),
        "k": np.array([int(r["k"]) for r in rows], dtype=np.int64),
    }


def load_labels(out_dir: Path) -> list[str]:
    rows = read_dicts(out_dir / "clusters.csv")
    labels = [UNCLASSIFIED] * len(rows)
    for r in rows:
        labels[int(r["uid"])] = r["cluster"]
    return labels


def write_report(out_dir: str | Path, year_lo: int | None = None, year_hi: int | None = None,
                 bin_width: int = 1000) -> list[Path]:
    """Recompute every report table from the artifacts in ``out_dir``."""
    out_dir = Path(out_dir)
    graphs = {name: read_graph(out_dir, name) for name in GRAPH_NAMES}
    asp = {name: _load_asp(out_dir, name) for name in GRAPH_NAMES}
    for name in GRAPH_NAMES:
        if not np.array_equal(asp[name]["uid"], graphs[name].uids):
            raise ValueError(f"asp_{name}.csv does not cover nodes_{name}.csv")
    labels = load_labels(out_dir)
    rcr_rows = [(int(r["uid"]), float(r["rcr_A"]), float(r["rcr_B"]))
                for r in read_dicts(out_dir / "rcr.csv")]
    written: list[Path] = []

    def emit(fname: str, header, rows) -> None:
        path = out_dir / fname
        write_table(path, header, rows)
        written.append(path)

    summaries = [dataset_summary(graphs[n]) for n in GRAPH_NAMES]
    emit("summary_datasets.csv",
         ["graph", "papers", "non_ref_papers", "year_min", "year_max", "edges",
          *_prefixed("cites"), *_prefixed("refs")],
         ([s.name, s.papers, s.non_ref_papers, s.year_min, s.year_max, s.edges,
           *s.cites.cells(), *s.references.cells()] for s in summaries))

    rs = rcr_summary(rcr_rows, labels)
    emit("summary_rcr.csv", ["dataset", *STATS_HEADER],
         ([tag, *stats.cells()] for tag, stats in rs.per_dataset.items()))
    emit("rcr_by_cluster.csv", ["cluster", "mean_rcr_A", "mean_rcr_B", "papers"], rs.by_cluster)

    emit("summary_asp.csv", ["graph", *STATS_HEADER],
         ([n, *SummaryStats.of(asp[n]["asp"]).cells()] for n in GRAPH_NAMES))

    cluster_rows = []
    for n in GRAPH_NAMES:
        for cs in cluster_summary(graphs[n], labels, asp[n]["asp"]):
            cluster_rows.append([n, cs.cluster, *cs.cites.cells(), *cs.asp.cells()[1:]])
    emit("cluster_summary.csv",
         ["graph", "cluster", *_prefixed("cites"), *_prefixed("asp")[1:]], cluster_rows)

    all_years = np.concatenate([g.years for g in graphs.values()])
    lo = int(all_years.min()) if year_lo is None and all_years.size else year_lo
    hi = int(all_years.max()) if year_hi is None and all_years.size else year_hi
    if lo is not None and hi is not None:
        for metric in ("cites", "asp"):
            rows = []
            for n in GRAPH_NAMES:
                series = annual_series(graphs[n].years, asp[n][metric], lo, hi, metric)
                rows.extend([n, *row] for row in series.rows())
            emit(f"annual_{metric}.csv", ["graph", "year", "count", "mean"], rows)

            merged = graphs["merged"]
            node_labels = np.array([labels[u] for u in merged.uids.tolist()], dtype=object)
            rows = []
            for cluster in ALL_LABELS:
                mask = node_labels == cluster
                if not mask.any():
                    continue
                series = annual_series(merged.years[mask], asp["merged"][metric][mask],
                                       lo, hi, metric)
                rows.extend([cluster, *row] for row in series.rows())
            emit(f"annual_{metric}_by_cluster.csv", ["cluster", "year", "count", "mean"], rows)

    merged = graphs["merged"]
    for metric, col in (("cites", "k"), ("asp", "n")):
        emit(f"rank_distribution_{metric}.csv", ["rank_lo", "rank_hi", "a_only", "b_only"],
             rank_distribution_export(asp["merged"][col], merged.provenance, bin_width))

    for tag in ("A", "B"):
        cases = {int(r["uid"]): r["case"] for r in read_dicts(out_dir / f"gold_{tag}.csv")}
        emit(f"gold_by_cluster_{tag}.csv", ["cluster", *(c.value for c in CASE_ORDER), "total"],
             gold_by_cluster(cases, labels))

    prof = unclassified_profile(labels, merged)
    path = out_dir / "unclassified_profile.json"
    write_json(path, {"count": prof.count, "mean_cites": prof.mean_cites,
                      "overall_mean_cites": prof.overall_mean_cites})
    written.append(path)
    return written
