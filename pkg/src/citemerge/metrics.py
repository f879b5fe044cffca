"""Reference coverage, windowed article prestige, citation counts and ranks."""

from __future__ import annotations

import logging
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.stats import rankdata

from .merger import CitationGraph
from .tables import write_json, write_table

logger = logging.getLogger(__name__)

DEFAULT_DAMPING = 0.5
DEFAULT_WINDOW = 5
DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 200


class CoverageError(ValueError):
    """A dataset claims more references than the merged record holds."""


def rcr(r_ds: int, r_m: int) -> float | None:
    """Share of the merged reference list that one dataset recorded.

    ``None`` when the merged article has no references at all.
    """
    if r_ds < 0 or r_m < 0:
        raise ValueError("reference counts must be non-negative")
    if r_ds > r_m:
        raise CoverageError(f"dataset count {r_ds} exceeds merged count {r_m}")
    if r_m == 0:
        return None
    return r_ds / r_m


def windowed_edges(graph: CitationGraph, window: int) -> sp.csr_matrix:
    """Citing x cited 0/1 adjacency restricted to citations made within
    ``window`` years of the cited paper's publication (inclusive).

    A negative window disables filtering.
    """
    adj = graph.adjacency()
    if window < 0:
        return adj
    src, dst = graph.edges()
    lag = graph.years[src] - graph.years[dst]
    keep = (lag >= 0) & (lag <= window)
    return sp.csr_matrix((np.ones(int(keep.sum())), (src[keep], dst[keep])),
                         shape=adj.shape)


@dataclass
class AspScores:
    graph_id: str
    damping: float
    window: int
    uids: np.ndarray
    values: np.ndarray
    iterations_used: int
    residual: float
    converged: bool

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.uids.tolist(), self.values.tolist()))


def _transfer_matrix(adj: sp.csr_matrix) -> sp.csr_matrix:
    """Cited x citing matrix with column j scaled by 1/m_j."""
    m = np.asarray(adj.sum(axis=1)).ravel()
    inv = np.divide(1.0, m, out=np.zeros_like(m), where=m > 0)
    return sp.csr_matrix(sp.diags(inv) @ adj).T.tocsr()


def asp(graph: CitationGraph, damping: float = DEFAULT_DAMPING, window: int = DEFAULT_WINDOW,
        tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER, threads: int = 1) -> AspScores:
    """Iterate ``x = (1 - d) + d * P x`` from the all-ones vector.

    ``P[i, j] = 1/m_j`` when j cites i inside the window. Articles with no
    in-window references pass nothing on. Sweeps are double-buffered; with
    ``threads > 1`` each sweep is split into contiguous row blocks, so the
    result does not depend on the thread count.
    """
    if not 0.0 < damping < 1.0:
        raise ValueError("damping must lie in (0, 1)")
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = graph.node_count
    P = _transfer_matrix(windowed_edges(graph, window))
    base = 1.0 - damping
    x = np.ones(n)
    residual = 0.0 if n == 0 else np.inf
    iterations = 0

    blocks = np.linspace(0, n, max(1, min(threads, n)) + 1, dtype=np.int64)
    row_blocks = [(int(lo), int(hi), P[lo:hi]) for lo, hi in zip(blocks[:-1], blocks[1:]) if hi > lo]
    pool = ThreadPoolExecutor(max_workers=len(row_blocks)) if len(row_blocks) > 1 else None

    def sweep(x_prev: np.ndarray, x_next: np.ndarray) -> None:
        def block(item):
            lo, hi, rows = item
            x_next[lo:hi] = base + damping * (rows @ x_prev)
        if pool is None:
            for item in row_blocks:
                block(item)
        else:
            list(pool.map(block, row_blocks))

    try:
        x_next = np.empty(n)
        while n and iterations < max_iter:
            sweep(x, x_next)
            iterations += 1
            residual = float(np.max(np.abs(x_next - x)))
            x, x_next = x_next, x
            if residual <= tol:
                break
    finally:
        if pool is not None:
            pool.shutdown()

    converged = residual <= tol
    if not converged:
        logger.warning("ASP on %s did not converge in %d sweeps (residual %.3g)",
                       graph.name, iterations, residual)
    return AspScores(graph.name, damping, window, graph.uids.copy(), x,
                     iterations, residual, converged)


def citation_counts(graph: CitationGraph) -> np.ndarray:
    """Citations received = in-degree over the full (unwindowed) graph."""
    return graph.in_degree()


def rank_by(values, descending: bool = True):
    """Competition ranks: ``1 + #{j : v_j > v_i}`` (ties share the best rank).

    Accepts a mapping (returns a dict) or an array (returns an int array).
    """
    if isinstance(values, Mapping):
        keys = list(values)
        ranks = rank_by(np.fromiter((values[k] for k in keys), dtype=float, count=len(keys)),
                        descending)
        return dict(zip(keys, ranks.tolist()))
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return np.empty(0, dtype=np.int64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("rank_by needs finite values")
    return rankdata(-arr if descending else arr, method="min").astype(np.int64)


@dataclass
class GraphMetrics:
    """Per-node prestige, citations and both rankings for one graph."""

    scores: AspScores
    cites: np.ndarray
    asp_rank: np.ndarray
    cite_rank: np.ndarray

    @property
    def uids(self) -> np.ndarray:
        return self.scores.uids

    def rows(self):
        return zip(self.uids.tolist(), self.scores.values.tolist(), self.cites.tolist(),
                   self.asp_rank.tolist(), self.cite_rank.tolist())


def graph_metrics(graph: CitationGraph, damping: float = DEFAULT_DAMPING,
                  window: int = DEFAULT_WINDOW, tol: float = DEFAULT_TOL,
                  max_iter: int = DEFAULT_MAX_ITER, threads: int = 1) -> GraphMetrics:
    scores = asp(graph, damping, window, tol, max_iter, threads)
    cites = citation_counts(graph)
    return GraphMetrics(scores, cites, rank_by(scores.values), rank_by(cites))


def write_metrics(gm: GraphMetrics, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    name = gm.scores.graph_id
    write_table(out_dir / f"asp_{name}.csv", ["uid", "asp", "cites", "n", "k"], gm.rows())
    s = gm.scores
    write_json(out_dir / f"asp_{name}.json", {
        "graph": name,
        "damping": s.damping,
        "window": s.window,
        "iterations_used": s.iterations_used,
        "residual": s.residual,
        "converged": s.converged,
        "nodes": int(len(s.uids)),
    })


def rcr_rows(graphs: Mapping[str, CitationGraph], merged: CitationGraph):
    """(uid, rcr_A, rcr_B) for articles present in both datasets with at
    least one merged reference."""
    ga, gb = graphs["A"], graphs["B"]
    common = np.intersect1d(ga.uids, gb.uids, assume_unique=True)
    ra = ga.ref_counts[np.searchsorted(ga.uids, common)]
    rb = gb.ref_counts[np.searchsorted(gb.uids, common)]
    rm = merged.ref_counts[np.searchsorted(merged.uids, common)]
    for uid, a, b, m in zip(common.tolist(), ra.tolist(), rb.tolist(), rm.tolist()):
        va, vb = rcr(a, m), rcr(b, m)
        if va is None:
            continue
        yield uid, va, vb
