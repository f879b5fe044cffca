"""Stage runners. Each stage reads and writes flat artifacts in an output
directory, so any stage can be re-run from the checkpoints of earlier ones."""

from __future__ import annotations

import gc
import logging
import platform
import shutil
import tempfile
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .clusters import assign_clusters, load_rules, unclassified_profile
from .gold import CASE_ORDER, classify_dataset
from .ingest import LoadResult, PaperRecord, load_dataset
from .matcher import MatchKind, MatchResult, match_datasets
from .merger import (CitationGraph, UidTable, build_graph, build_merged_graph, read_graph,
                     resolve_references, write_graph)
from .metrics import (DEFAULT_DAMPING, DEFAULT_MAX_ITER, DEFAULT_TOL, DEFAULT_WINDOW,
                      GraphMetrics, graph_metrics, rcr_rows, write_metrics)
from .report import GRAPH_NAMES, write_report
from .tables import read_dicts, read_json, write_json, write_table

logger = logging.getLogger(__name__)

MATCH_FILE = "match_results.csv"


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage


@dataclass
class PipelineConfig:
    a: Path
    b: Path
    out_dir: Path
    damping: float = DEFAULT_DAMPING
    window: int = DEFAULT_WINDOW
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    rules: Path | None = None
    threads: int = 1
    year_lo: int | None = None
    year_hi: int | None = None
    bin_width: int = 1000

    def validate(self) -> None:
        if not 0.0 < self.damping < 1.0:
            raise ValueError("damping must lie in (0, 1)")
        if self.window < -1:
            raise ValueError("window must be >= -1")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.bin_width < 1:
            raise ValueError("bin_width must be >= 1")
        if self.year_lo is not None and self.year_hi is not None and self.year_lo > self.year_hi:
            raise ValueError("year_lo > year_hi")
        for p in (self.a, self.b) + ((self.rules,) if self.rules else ()):
            if not Path(p).is_file():
                raise FileNotFoundError(f"input not found: {p}")


@dataclass
class RunLog:
    counts: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        except StageError:
            raise
        except (OSError, ValueError, KeyError, RuntimeError) as exc:
            raise StageError(name, str(exc)) from exc
        finally:
            self.timings[name] = round(time.perf_counter() - t0, 4)


@contextmanager
def gc_paused():
    """Suspend the cyclic collector. The stages allocate millions of small
    acyclic objects, which otherwise trigger repeated full-heap scans."""
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if was_enabled:
            gc.enable()


# ingest / match -------------------------------------------------------------

def load_inputs(a: Path, b: Path) -> tuple[LoadResult, LoadResult]:
    return load_dataset(a, "A"), load_dataset(b, "B")


def _load_counts(res: LoadResult) -> dict:
    return {"records": len(res.records), "rejected": res.rejected,
            "duplicate_ids": res.duplicate_ids, "duplicate_refs": res.duplicate_refs}


def write_match_results(results: list[MatchResult], path: Path) -> None:
    write_table(path, ["uid", "a_id", "b_id", "match_kind"],
                ((r.uid, r.a_id, r.b_id, r.match_kind.value) for r in results))


def read_match_results(path: Path) -> list[MatchResult]:
    return [MatchResult(int(r["uid"]), r["a_id"] or None, r["b_id"] or None,
                        MatchKind(r["match_kind"])) for r in read_dicts(path)]


def stage_match(a: LoadResult, b: LoadResult, out_dir: Path) -> tuple[list[MatchResult], dict]:
    results, stats = match_datasets(a.records, b.records)
    write_match_results(results, out_dir / MATCH_FILE)
    payload = {"load_A": _load_counts(a), "load_B": _load_counts(b), **stats.to_dict()}
    write_json(out_dir / "match_stats.json", payload)
    return results, payload


# merge -------------------------------------------------------------------------

def stage_merge(a: list[PaperRecord], b: list[PaperRecord], results: list[MatchResult],
                out_dir: Path) -> tuple[dict[str, CitationGraph], UidTable, dict]:
    table = UidTable(results)
    records = a + b
    try:
        resolutions = resolve_references(records, table)
    except KeyError as exc:
        raise ValueError(f"record {exc} missing from {MATCH_FILE}; re-run 'match'") from None
    graphs = {
        "A": build_graph(a, resolutions, table, "A"),
        "B": build_graph(b, resolutions, table, "B"),
        "merged": build_merged_graph(records, resolutions, table),
    }
    for g in graphs.values():
        write_graph(g, out_dir)
    stats = {
        "references": {tag: {"resolved": int(np.sum(resolutions.mask(tag) & resolutions.resolved)),
                             "unresolved": int(np.sum(resolutions.mask(tag) & ~resolutions.resolved))}
                       for tag in ("A", "B")},
        "graphs": {name: {"nodes": g.node_count, "edges": g.edge_count,
                          "self_loops_dropped": g.self_loops_dropped,
                          "duplicate_edges_dropped": g.duplicate_edges_dropped}
                   for name, g in graphs.items()},
    }
    write_json(out_dir / "merge_stats.json", stats)
    return graphs, table, stats


def load_graphs(out_dir: Path) -> dict[str, CitationGraph]:
    return {name: read_graph(out_dir, name) for name in GRAPH_NAMES}


# metrics ---------------------------------------------------------------------

def stage_asp(graphs: dict[str, CitationGraph], out_dir: Path, damping: float, window: int,
              tol: float, max_iter: int, threads: int = 1) -> dict[str, GraphMetrics]:
    out = {}
    for name in GRAPH_NAMES:
        gm = graph_metrics(graphs[name], damping, window, tol, max_iter, threads)
        write_metrics(gm, out_dir)
        out[name] = gm
    return out


def stage_rcr(graphs: dict[str, CitationGraph], out_dir: Path) -> int:
    return write_table(out_dir / "rcr.csv", ["uid", "rcr_A", "rcr_B"],
                       rcr_rows(graphs, graphs["merged"]))


def _rank_map(uids, n, k) -> dict[int, tuple[int, int]]:
    return dict(zip(np.asarray(uids).tolist(), zip(np.asarray(n).tolist(), np.asarray(k).tolist())))


def load_rank_maps(out_dir: Path) -> dict[str, dict[int, tuple[int, int]]]:
    maps = {}
    for name in GRAPH_NAMES:
        rows = read_dicts(out_dir / f"asp_{name}.csv")
        maps[name] = {int(r["uid"]): (int(r["n"]), int(r["k"])) for r in rows}
    return maps


def stage_gold(rank_maps: dict[str, dict[int, tuple[int, int]]], out_dir: Path) -> dict:
    counts = {}
    merged = rank_maps["merged"]
    for tag in ("A", "B"):
        tally = classify_dataset(rank_maps[tag], merged)
        rows = []
        for uid in sorted(tally.cases):
            inp = tally.inputs[uid]
            rows.append((uid, tally.cases[uid].value, inp.n_ds, inp.k_ds, inp.n_m, inp.k_m,
                         inp.delta))
        write_table(out_dir / f"gold_{tag}.csv",
                    ["uid", "case", "n_ds", "k_ds", "n_m", "k_m", "delta"], rows)
        write_table(out_dir / f"gold_summary_{tag}.csv",
                    ["case", "name", "count", "prop_dataset", "prop_merged"], tally.summary_rows())
        counts[tag] = {c.value: tally.counts[c] for c in CASE_ORDER}
        counts[tag]["excluded"] = tally.excluded
    return counts


# clusters ------------------------------------------------------------------------

def stage_clusters(records: list[PaperRecord], table: UidTable, rules_path: Path | None,
                   merged: CitationGraph, out_dir: Path) -> dict:
    assignment = assign_clusters(records, table, load_rules(rules_path))
    write_table(out_dir / "clusters.csv", ["uid", "cluster", "step"],
                ((uid, label, step) for uid, (label, step)
                 in enumerate(zip(assignment.labels, assignment.steps))))
    prof = unclassified_profile(assignment, merged)
    return {"steps": assignment.step_counts(), "unclassified": prof.count,
            "unclassified_mean_cites": prof.mean_cites}


# whole pipeline ----------------------------------------------------------------

def versions() -> dict:
    return {"citemerge": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def run_pipeline(cfg: PipelineConfig) -> RunLog:
    """Run every stage into a staging directory, then publish into ``out_dir``.

    On failure nothing is written to ``out_dir``.
    """
    with gc_paused():
        return _run_pipeline(cfg)


def _run_pipeline(cfg: PipelineConfig) -> RunLog:
    log = RunLog()
    with log.stage("config"):
        cfg.validate()
    out_dir = Path(cfg.out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".citemerge-", dir=out_dir.parent))
    try:
        with log.stage("ingest"):
            a, b = load_inputs(cfg.a, cfg.b)
            log.counts["ingest"] = {"A": _load_counts(a), "B": _load_counts(b)}
        with log.stage("match"):
            results, mstats = stage_match(a, b, staging)
            log.counts["match"] = mstats["counts"]
        with log.stage("merge"):
            graphs, table, gstats = stage_merge(a.records, b.records, results, staging)
            log.counts["merge"] = gstats
        with log.stage("metrics"):
            metrics = stage_asp(graphs, staging, cfg.damping, cfg.window, cfg.tol,
                                cfg.max_iter, cfg.threads)
            log.counts["asp"] = {n: {"iterations": m.scores.iterations_used,
                                     "converged": m.scores.converged}
                                 for n, m in metrics.items()}
            log.counts["rcr_rows"] = stage_rcr(graphs, staging)
        with log.stage("gold"):
            maps = {n: _rank_map(m.uids, m.asp_rank, m.cite_rank) for n, m in metrics.items()}
            log.counts["gold"] = stage_gold(maps, staging)
        with log.stage("clusters"):
            log.counts["clusters"] = stage_clusters(a.records + b.records, table, cfg.rules,
                                                    graphs["merged"], staging)
        with log.stage("report"):
            write_report(staging, cfg.year_lo, cfg.year_hi, cfg.bin_width)
        params = {k: (str(v) if isinstance(v, Path) else v) for k, v in asdict(cfg).items()}
        # neither affects results; dropping them keeps the manifest reproducible
        params.pop("threads")
        params.pop("out_dir")
        write_json(staging / "run_manifest.json",
                   {"versions": versions(), "parameters": params, "counts": log.counts,
                    "stages": list(log.timings)})
        write_json(staging / "run_timings.json", {"threads": cfg.threads, **log.timings})
        out_dir.mkdir(parents=True, exist_ok=True)
        for f in sorted(staging.iterdir()):
            shutil.move(str(f), out_dir / f.name)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    return log


def read_run_manifest(out_dir: Path) -> dict:
    return read_json(Path(out_dir) / "run_manifest.json")
