"""Paired synthetic datasets with known ground truth.

A universe of articles is laid out chronologically and wired with
preferential attachment (cited with weight ``(cites + 1) ** exponent``).
Some true references point to works outside both datasets. Each dataset then
indexes a subset of the articles and records each true reference with its own
coverage probability. The manifest keeps the identity of every record and the
reference counts each stage of the pipeline should reproduce.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .clusters import RuleIndex, load_rules
from .ingest import CLUSTER_NAMES
from .merger import CitationGraph
from .tables import write_json, write_table

_WORDS = (
    "adaptive", "coupled", "dynamics", "naïve", "étude", "models", "networks", "stochastic",
    "spectral", "inference", "growth", "patterns", "café", "signals", "structure", "evidence",
    "transport", "limits", "response", "kinetics", "über", "mapping", "coherent", "sparse",
    "latent", "robust", "thermal", "cohort", "regional", "temporal", "résumé", "fields",
)
_TEMPLATES = ("Journal of {}", "Annals of {}", "{} Letters", "International Review of {}",
              "Advances in {}", "Quarterly Journal of {}")
_NOISE = ("Proceedings of the Hollow Society", "Bulletin of the Quiet Circle",
          "Transactions of the Amber Guild", "Notes of the Northern Salon")


class GenSpecError(ValueError):
    pass


@dataclass
class GenSpec:
    seed: int = 0
    n_articles_a: int = 1000
    n_articles_b: int = 1000
    overlap_fraction: float = 0.5
    doi_present_prob: float = 0.85
    coverage_a: float = 0.8
    coverage_b: float = 0.6
    year_lo: int = 1990
    year_hi: int = 2020
    pa_exponent: float = 1.0
    mean_out_degree: float = 20.0
    outside_ref_prob: float = 0.2
    ref_doi_prob: float = 0.7
    noise_journal_prob: float = 0.1
    labels_in_a: bool = True

    def validate(self) -> None:
        for name in ("overlap_fraction", "doi_present_prob", "coverage_a", "coverage_b",
                     "outside_ref_prob", "ref_doi_prob", "noise_journal_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise GenSpecError(f"{name}={v} is not a probability")
        if self.n_articles_a < 0 or self.n_articles_b < 0:
            raise GenSpecError("dataset sizes must be non-negative")
        if self.n_shared > min(self.n_articles_a, self.n_articles_b):
            raise GenSpecError("overlap exceeds the smaller dataset")
        if self.year_lo > self.year_hi:
            raise GenSpecError("year_lo > year_hi")
        if self.mean_out_degree < 0:
            raise GenSpecError("mean_out_degree must be non-negative")

    @property
    def n_shared(self) -> int:
        return int(round(self.overlap_fraction * min(self.n_articles_a, self.n_articles_b)))


def _issn(serial: int) -> str:
    digits = f"{serial:07d}"
    total = sum(int(c) * w for c, w in zip(digits, range(8, 1, -1)))
    check = (11 - total % 11) % 11
    return f"{digits[:4]}-{digits[4:]}{'X' if check == 10 else check}"


def _journals(rng: np.random.Generator, count: int, noise_prob: float):
    """(name, issn, cluster) triples; keyword journals resolve through the starter rules."""
    rules = load_rules()
    index = RuleIndex(rules)
    vocab = sorted({r.keyword for r in rules if r.priority <= 3})
    out = []
    for i in range(count):
        if rng.random() < noise_prob:
            name = f"{_NOISE[i % len(_NOISE)]} {i}"
            cluster = CLUSTER_NAMES[int(rng.integers(len(CLUSTER_NAMES)))]
        else:
            kw = vocab[int(rng.integers(len(vocab)))]
            name = _TEMPLATES[i % len(_TEMPLATES)].format(kw.title())
            cluster = index.match(name).cluster
        out.append((name, _issn(1000 + i), cluster))
    return out


def _draw_distinct(rng, pool: np.ndarray, weights: np.ndarray | None, sizes: list[int]) -> list[list[int]]:
    """For each size, draw that many distinct pool members (weighted, batched)."""
    chosen: list[dict[int, None]] = [dict() for _ in sizes]
    need = list(sizes)
    p = None if weights is None else weights / weights.sum()
    for _ in range(50):
        total = sum(need)
        if total == 0:
            break
        draws = rng.choice(pool, size=total, p=p).tolist()
        pos = 0
        for i, k in enumerate(need):
            if k:
                for t in draws[pos:pos + k]:
                    chosen[i][t] = None
                pos += k
        need = [max(0, s - len(c)) for s, c in zip(sizes, chosen)]
    return [list(c)[:s] for c, s in zip(chosen, sizes)]


def _fmt_title(rng, serial: int) -> str:
    w = [_WORDS[int(j)] for j in rng.integers(len(_WORDS), size=4)]
    return f"{w[0].capitalize()} {w[1]} of {w[2]} and {w[3]} {serial}"


def generate(spec: GenSpec, out_dir: str | Path) -> dict:
    """Write ``A.jsonl``, ``B.jsonl``, ``manifest.csv`` and ``manifest.json``.

    Returns the manifest summary. Output bytes depend only on ``spec``.
    When both coverage rates are equal, a shared article records the same
    reference subset in A and B, so its two coverage rates coincide.
    """
    spec.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)

    n_shared = spec.n_shared
    n_a_only = spec.n_articles_a - n_shared
    n_b_only = spec.n_articles_b - n_shared
    n = n_shared + n_a_only + n_b_only

    # chronological universe; true_id order == publication order
    span = spec.year_hi - spec.year_lo + 1
    growth = 1.04 ** np.arange(span)
    years = np.sort(spec.year_lo + rng.choice(span, size=n, p=growth / growth.sum()))
    role = rng.permutation(np.repeat([2, 0, 1], [n_shared, n_a_only, n_b_only]))  # 0 A, 1 B, 2 both
    in_a = (role == 0) | (role == 2)
    in_b = (role == 1) | (role == 2)

    journals = _journals(rng, max(12, n // 150), spec.noise_journal_prob)
    journal_of = rng.integers(len(journals), size=n)
    titles = [_fmt_title(rng, i) for i in range(n)]
    dois = [f"10.{5000 + int(journal_of[i])}/art.{i}" for i in range(n)]

    n_out = max(64, n // 2)
    out_years = spec.year_lo - 5 + rng.integers(span + 5, size=n_out)
    out_has_doi = rng.random(n_out) < 0.5
    out_issn = [_issn(900000 + int(j)) for j in rng.integers(500, size=n_out)]
    out_titles = [f"Outside record {i} on {_WORDS[i % len(_WORDS)]}" for i in range(n_out)]

    # true reference lists: ints >= 0 are universe ids, negatives are outside works (-1 - idx)
    degree = rng.poisson(spec.mean_out_degree, size=n)
    true_refs: list[list[int]] = [[] for _ in range(n)]
    cites = np.zeros(n)
    for year in range(spec.year_lo, spec.year_hi + 1):
        cohort = np.flatnonzero(years == year)
        if not len(cohort):
            continue
        pool = np.flatnonzero(years < year)
        k_in = rng.binomial(degree[cohort], 1.0 - spec.outside_ref_prob)
        k_in = np.minimum(k_in, len(pool))
        k_out = np.minimum(degree[cohort] - k_in, n_out)
        inside = _draw_distinct(rng, pool, (cites[pool] + 1.0) ** spec.pa_exponent,
                                k_in.tolist()) if len(pool) else [[] for _ in cohort]
        outside = _draw_distinct(rng, np.arange(n_out), None, k_out.tolist())
        for art, ins, outs in zip(cohort.tolist(), inside, outside):
            true_refs[art] = ins + [-1 - o for o in outs]
        for ins in inside:
            cites[ins] += 1

    def ref_entry(work: int) -> dict:
        if work >= 0:
            j = journals[journal_of[work]]
            entry = {"raw": f"{titles[work]}. {j[0]}, {years[work]}.",
                     "title": titles[work], "issn": j[1]}
            if rng.random() < spec.ref_doi_prob:
                entry["doi"] = dois[work]
            return entry
        o = -1 - work
        entry = {"raw": f"{out_titles[o]}. Outside Serial, {out_years[o]}.",
                 "title": out_titles[o], "issn": out_issn[o]}
        if out_has_doi[o]:
            entry["doi"] = f"10.9999/out.{o}"
        return entry

    records: dict[str, list[str]] = {"A": [], "B": []}
    manifest_rows = []
    recorded: dict[str, list[set[int] | None]] = {"A": [None] * n, "B": [None] * n}
    has_doi: dict[str, np.ndarray] = {}
    coupled = spec.coverage_a == spec.coverage_b
    for tag, member, cov in (("A", in_a, spec.coverage_a), ("B", in_b, spec.coverage_b)):
        has_doi[tag] = rng.random(n) < spec.doi_present_prob
        for i in np.flatnonzero(member).tolist():
            if tag == "B" and coupled and recorded["A"][i] is not None:
                # equal coverage: both datasets record the same subset
                keep = [w for w in true_refs[i] if w in recorded["A"][i]]
            else:
                keep = [w for w in true_refs[i] if rng.random() < cov]
            recorded[tag][i] = set(keep)
            jname, jissn, jcluster = journals[journal_of[i]]
            title = titles[i]
            issn = jissn
            doi = dois[i] if has_doi[tag][i] else None
            if tag == "B":
                if rng.random() < 0.3:
                    title = title.upper() + "."
                if rng.random() < 0.3:
                    issn = issn.replace("-", "")
                if doi and rng.random() < 0.3:
                    doi = "https://doi.org/" + doi.upper()
            obj = {"source_id": f"{tag}{i:08d}", "title": title, "year": int(years[i]),
                   "issn": issn, "journal_title": jname}
            if doi:
                obj["doi"] = doi
            if tag == "A" and spec.labels_in_a:
                obj["cluster"] = jcluster
            obj["references"] = [ref_entry(w) for w in keep]
            records[tag].append(json.dumps(obj, ensure_ascii=False, separators=(",", ":")))

    planted = {"DoiExact": 0, "TitleIssn": 0}
    rcr_a: list[float] = []
    rcr_b: list[float] = []
    for i in range(n):
        ra, rb = recorded["A"][i], recorded["B"][i]
        kind = ""
        if ra is not None and rb is not None:
            kind = "DoiExact" if has_doi["A"][i] and has_doi["B"][i] else "TitleIssn"
            planted[kind] += 1
            merged = len(ra | rb)
            if merged:
                rcr_a.append(len(ra) / merged)
                rcr_b.append(len(rb) / merged)
        else:
            merged = len(ra if ra is not None else rb)
        manifest_rows.append((
            i,
            f"A{i:08d}" if ra is not None else "",
            f"B{i:08d}" if rb is not None else "",
            int(years[i]),
            len(true_refs[i]),
            "" if ra is None else len(ra),
            "" if rb is None else len(rb),
            merged,
            kind,
            journals[journal_of[i]][2],
        ))

    for tag in ("A", "B"):
        order = rng.permutation(len(records[tag]))
        with open(out_dir / f"{tag}.jsonl", "w", encoding="utf-8", newline="\n") as fh:
            for k in order.tolist():
                fh.write(records[tag][k] + "\n")
    write_table(out_dir / "manifest.csv",
                ["true_id", "a_source_id", "b_source_id", "year", "true_ref_count",
                 "a_ref_count", "b_ref_count", "merged_ref_count", "expected_kind", "cluster"],
                manifest_rows)
    summary = {
        "spec": asdict(spec),
        "universe": n,
        "records_a": int(in_a.sum()),
        "records_b": int(in_b.sum()),
        "shared": n_shared,
        "planted_pairs": planted,
        "outside_works": n_out,
        "true_references": int(sum(len(r) for r in true_refs)),
        "recorded_references_a": int(sum(len(r) for r in recorded["A"] if r is not None)),
        "recorded_references_b": int(sum(len(r) for r in recorded["B"] if r is not None)),
        "expected_mean_rcr_a": float(np.mean(rcr_a)) if rcr_a else None,
        "expected_mean_rcr_b": float(np.mean(rcr_b)) if rcr_b else None,
        "rcr_articles": len(rcr_a),
    }
    write_json(out_dir / "manifest.json", summary)
    return summary


def oracle_asp(graph: CitationGraph, damping: float, window: int) -> np.ndarray:
    """Dense direct solve of ``(I - d M^T) x = (1 - d) 1`` for small graphs.

    ``M`` is the citing x cited adjacency with each row divided by its sum,
    after dropping citations that fall outside the window. Test use only.
    """
    n = graph.node_count
    if n > 2000:
        raise ValueError("oracle_asp is limited to 2000 nodes")
    M = np.zeros((n, n))
    years = graph.years.tolist()
    for j in range(n):
        for i in graph.indices[graph.indptr[j]:graph.indptr[j + 1]].tolist():
            lag = years[j] - years[i]
            if window < 0 or 0 <= lag <= window:
                M[j, i] = 1.0
    out = M.sum(axis=1)
    for j in range(n):
        if out[j] > 0:
            M[j] /= out[j]
    A = np.eye(n) - damping * M.T
    return np.linalg.solve(A, np.full(n, 1.0 - damping))
