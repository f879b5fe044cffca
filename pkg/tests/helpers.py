from __future__ import annotations

import csv
import json
from dataclasses import replace
from pathlib import Path

import numpy as np

from citemerge.gold import classify_arrays
from citemerge.ingest import (PaperRecord, RefEntry, load_dataset, normalize_doi,
                              normalize_issn)
from citemerge.matcher import match_datasets
from citemerge.merger import (CitationGraph, UidTable, build_graph, build_merged_graph,
                              resolve_references)
from citemerge.metrics import asp
from citemerge.synthgen import oracle_asp


def rec(source_id: str, tag: str = "A", *, doi=None, title="Untitled", issn=None,
        journal=None, year=2010, refs=(), cluster=None) -> PaperRecord:
    """Build a record in memory; ``refs`` items are RefEntry or kwargs dicts."""
    entries = tuple(r if isinstance(r, RefEntry) else RefEntry.create(**r) for r in refs)
    return PaperRecord(source_id, tag, normalize_doi(doi) if doi else None, title,
                       normalize_issn(issn), journal, year, entries, cluster)


def write_jsonl(path: Path, objs) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        for o in objs:
            fh.write((o if isinstance(o, str) else json.dumps(o, ensure_ascii=False)) + "\n")
    return path


def _planted(gen_dir):
    with open(gen_dir / "manifest.csv", encoding="utf-8") as fh:
        return {(m["a_source_id"], m["b_source_id"]): m["expected_kind"]
                for m in csv.DictReader(fh) if m["expected_kind"]}


def check_planted_matching(gen_dir) -> dict:
    """Recall per stage and overall precision against the generator manifest."""
    a = load_dataset(gen_dir / "A.jsonl", "A").records
    b = load_dataset(gen_dir / "B.jsonl", "B").records
    results, _ = match_datasets(a, b)
    planted = _planted(gen_dir)
    found = {(r.a_id, r.b_id): r.match_kind.value for r in results if r.match_kind.is_pair}
    out = {"partition": len(results) == len(a) + len(b) - len(found)}
    for kind in ("DoiExact", "TitleIssn"):
        want = {p for p, k in planted.items() if k == kind}
        got = {p for p in want if found.get(p) == kind}
        out[f"recall_{kind}"] = len(got) / len(want) if want else 1.0
    out["precision"] = sum(p in planted for p in found) / len(found) if found else 1.0
    return out


def true_id(source_id: str) -> int:
    return int(source_id[1:])


def raw_citations(gen_dir) -> dict[str, dict[int, set[int]]]:
    """Per dataset: citing true id -> cited true ids, read straight from the
    JSON lines. Generated titles end in the work's serial number; outside
    works are titled "Outside record ..."."""
    out: dict[str, dict[int, set[int]]] = {}
    for tag in ("A", "B"):
        cites: dict[int, set[int]] = {}
        with open(gen_dir / f"{tag}.jsonl", encoding="utf-8") as fh:
            for line in fh:
                obj = json.loads(line)
                cites[true_id(obj["source_id"])] = {
                    int(r["title"].split()[-1]) for r in obj["references"]
                    if not r["title"].startswith("Outside")}
        out[tag] = cites
    return out


def expected_edges(gen_dir) -> dict[str, set[tuple[int, int]]]:
    """Edge sets of the A, B and merged graphs in true-id space."""
    cites = raw_citations(gen_dir)
    edges = {}
    for tag in ("A", "B"):
        members = cites[tag].keys()
        edges[tag] = {(s, t) for s, ts in cites[tag].items() for t in ts if t in members}
    edges["merged"] = {(s, t) for tag in ("A", "B") for s, ts in cites[tag].items() for t in ts}
    return edges


def manifest_rows(gen_dir) -> list[dict]:
    with open(gen_dir / "manifest.csv", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def build_graphs(a, b):
    """Match, resolve and build the three graphs from in-memory records."""
    results, _ = match_datasets(a, b)
    table = UidTable(results)
    res = resolve_references(a + b, table)
    graphs = {"A": build_graph(a, res, table, "A"), "B": build_graph(b, res, table, "B"),
              "merged": build_merged_graph(a + b, res, table)}
    return graphs, table, res


def same_graph(g, h) -> bool:
    return (np.array_equal(g.uids, h.uids) and np.array_equal(g.years, h.years)
            and np.array_equal(g.ref_counts, h.ref_counts)
            and np.array_equal(g.indptr, h.indptr) and np.array_equal(g.indices, h.indices))


def merge_properties(gen_dir) -> dict[str, bool]:
    """Edge-union superset, R_m monotonicity and merge idempotence on one pair."""
    a = load_dataset(gen_dir / "A.jsonl", "A").records
    b = load_dataset(gen_dir / "B.jsonl", "B").records
    graphs, table, res = build_graphs(a, b)
    merged = graphs["merged"]
    m_edges = set(zip(*(x.tolist() for x in merged.uid_edges())))
    links = {tag: {(r.citing_uid, r.target_uid) for r in res
                   if r.dataset_tag == tag and r.target_uid is not None
                   and r.citing_uid != r.target_uid} for tag in ("A", "B")}
    superset = all(set(zip(*(x.tolist() for x in graphs[t].uid_edges()))) <= m_edges
                   for t in ("A", "B"))
    bound = len(m_edges) <= len(links["A"]) + len(links["B"])

    monotone = True
    r_ds = {t: dict(zip(graphs[t].uids.tolist(), graphs[t].ref_counts.tolist())) for t in ("A", "B")}
    for uid in set(r_ds["A"]) & set(r_ds["B"]):
        monotone &= int(merged.ref_counts[uid]) >= max(r_ds["A"][uid], r_ds["B"][uid])

    copy = [replace(r, dataset_tag="B") for r in a]
    twin, _, _ = build_graphs(a, copy)
    alone, _, _ = build_graphs(a, [])
    idempotent = (same_graph(twin["merged"], alone["merged"])
                  and same_graph(twin["A"], alone["A"]))
    return {"superset": superset, "union_bound": bound, "monotone": bool(monotone),
            "idempotent": idempotent}


def random_dag(rng: np.random.Generator, n: int, p: float):
    """Edges only from later-indexed to earlier-indexed nodes; years ascend
    with index and spread far enough that the window bites."""
    years = np.sort(rng.integers(1990, 2021, size=n))
    edges = [(j, i) for j in range(n) for i in range(j) if rng.random() < p]
    return CitationGraph.from_edges(years, edges)


def random_cyclic(rng: np.random.Generator, n: int, p: float, span: int = 3):
    """Arbitrary directed graph (cycles allowed) over a narrow year span."""
    years = rng.integers(2000, 2000 + span, size=n)
    mask = rng.random((n, n)) < p
    np.fill_diagonal(mask, False)
    # guarantee at least one cycle
    mask[0, 1 % n] = mask[1 % n, 0] = n > 1
    return CitationGraph.from_edges(years, np.argwhere(mask))


def in_window_indegree(graph, window: int) -> np.ndarray:
    """Plain-loop count of in-window citations received."""
    counts = np.zeros(graph.node_count, dtype=np.int64)
    for j in range(graph.node_count):
        for i in graph.indices[graph.indptr[j]:graph.indptr[j + 1]].tolist():
            lag = int(graph.years[j] - graph.years[i])
            if window < 0 or 0 <= lag <= window:
                counts[i] += 1
    return counts


def check_asp_graph(g, damping=0.5, window=5) -> tuple[float, bool]:
    """Max-norm gap to the dense solve, and whether the floor holds exactly."""
    s = asp(g, damping, window)
    gap = float(np.max(np.abs(s.values - oracle_asp(g, damping, window)), initial=0.0))
    floor = 1.0 - damping
    uncited = in_window_indegree(g, window) == 0
    floor_ok = bool(np.all(s.values[uncited] == floor) and np.all(s.values[~uncited] > floor))
    return gap, floor_ok


def exhaustive_gold(limit: int = 30) -> dict:
    """Classify every tuple in [1..limit]^4 and check it against the raw condition sets."""
    grid = np.arange(1, limit + 1)
    n_ds, k_ds, n_m, k_m = (a.ravel() for a in np.meshgrid(grid, grid, grid, grid, indexing="ij"))
    letters = classify_arrays(n_ds, k_ds, n_m, k_m)
    delta = (k_m - n_m) - (k_ds - n_ds)
    g = ((n_ds < k_ds) & (delta >= 0)) | (n_m <= n_ds)
    o = (n_ds < k_ds) & (delta < 0)
    l_ = (n_ds >= k_ds) & (delta < 0)
    d = (n_ds >= k_ds) & (delta >= 0)
    # precedence: G first, then the other three restricted to n_m > n_ds
    rest = ~g
    hits = g.astype(int) + (o & rest) + (l_ & rest) + (d & rest)
    expected = np.where(g, "G", np.where(o, "O", np.where(l_, "L", "D")))
    return {"tuples": len(letters), "single": bool(np.all(hits == 1)),
            "agree": bool(np.array_equal(letters, expected)),
            "counts": {str(k): int(v) for k, v in zip(*np.unique(letters, return_counts=True))}}
