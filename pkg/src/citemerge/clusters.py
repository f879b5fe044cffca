"""Assign merged articles to disciplinary clusters.

Labels shipped with the source records win; otherwise the journal title is
scanned for keywords from a rule file; anything left is ``Unclassified``.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .ingest import CLUSTER_NAMES, PaperRecord, normalize_title
from .merger import CitationGraph, UidTable

logger = logging.getLogger(__name__)

UNCLASSIFIED = "Unclassified"
ALL_LABELS = CLUSTER_NAMES + (UNCLASSIFIED,)

STEP_INHERITED = 1
STEP_KEYWORD = 2
STEP_UNCLASSIFIED = 3


class RuleFileError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class KeywordRule:
    keyword: str
    cluster: str
    priority: int

    def sort_key(self) -> tuple:
        return (self.priority, -len(self.keyword), self.keyword)


def parse_rules(lines: Iterable[str], source: str = "<rules>") -> list[KeywordRule]:
    rules: list[KeywordRule] = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(lines, 1):
        line = line.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise RuleFileError(f"{source}:{lineno}: expected keyword<TAB>cluster<TAB>priority")
        kw, cluster, prio = (p.strip() for p in parts)
        keyword = normalize_title(kw)
        if not keyword:
            raise RuleFileError(f"{source}:{lineno}: empty keyword")
        if cluster not in CLUSTER_NAMES:
            raise RuleFileError(f"{source}:{lineno}: unknown cluster {cluster!r}")
        try:
            priority = int(prio)
        except ValueError:
            raise RuleFileError(f"{source}:{lineno}: priority {prio!r} is not an integer") from None
        if keyword in seen:
            raise RuleFileError(f"{source}:{lineno}: keyword {keyword!r} already defined "
                                f"on line {seen[keyword]}")
        seen[keyword] = lineno
        rules.append(KeywordRule(keyword, cluster, priority))
    return rules


def load_rules(path: str | Path | None = None) -> list[KeywordRule]:
    """Load a rule file; ``None`` loads the starter rules bundled with the package."""
    if path is None:
        text = resources.files("citemerge").joinpath("data/rules.tsv").read_text(encoding="utf-8")
        return parse_rules(text.splitlines(), "rules.tsv")
    with open(path, encoding="utf-8") as fh:
        return parse_rules(fh, str(path))


class RuleIndex:
    """Word-boundary keyword lookup over normalized journal titles."""

    def __init__(self, rules: Sequence[KeywordRule]):
        self._by_phrase = {r.keyword: r for r in rules}
        self._max_words = max((len(r.keyword.split()) for r in rules), default=0)
        self.match = lru_cache(maxsize=1 << 16)(self._match)

    def _match(self, journal_title: str) -> KeywordRule | None:
        words = normalize_title(journal_title).split()
        best: KeywordRule | None = None
        for size in range(1, self._max_words + 1):
            for start in range(len(words) - size + 1):
                rule = self._by_phrase.get(" ".join(words[start:start + size]))
                if rule is not None and (best is None or rule.sort_key() < best.sort_key()):
                    best = rule
        return best


@dataclass
class ClusterAssignment:
    """Cluster label and deciding step for every uid (list position = uid)."""

    labels: list[str]
    steps: list[int]

    def __getitem__(self, uid: int) -> str:
        return self.labels[uid]

    def __len__(self) -> int:
        return len(self.labels)

    def items(self):
        return enumerate(self.labels)

    def step_counts(self) -> dict[str, int]:
        names = {STEP_INHERITED: "inherited", STEP_KEYWORD: "keyword",
                 STEP_UNCLASSIFIED: "unclassified"}
        out = {v: 0 for v in names.values()}
        for s in self.steps:
            out[names[s]] += 1
        return out


def assign_clusters(records: Iterable[PaperRecord], table: UidTable,
                    rules: Sequence[KeywordRule]) -> ClusterAssignment:
    inherited: dict[int, str] = {}
    journals: dict[int, list[str]] = {}
    # dataset A first: its label and journal title take precedence
    for rec in sorted(records, key=lambda r: r.dataset_tag != "A"):
        uid = table.uid_of(rec)
        if rec.cluster_label and uid not in inherited:
            inherited[uid] = rec.cluster_label
        if rec.journal_title:
            journals.setdefault(uid, []).append(rec.journal_title)

    index = RuleIndex(rules)
    labels = [UNCLASSIFIED] * table.size
    steps = [STEP_UNCLASSIFIED] * table.size
    for uid in range(table.size):
        label = inherited.get(uid)
        if label is not None:
            labels[uid], steps[uid] = label, STEP_INHERITED
            continue
        for jt in journals.get(uid, ()):
            rule = index.match(jt)
            if rule is not None:
                labels[uid], steps[uid] = rule.cluster, STEP_KEYWORD
                break
    return ClusterAssignment(labels, steps)


@dataclass(frozen=True)
class UnclassifiedProfile:
    count: int
    mean_cites: float | None
    overall_mean_cites: float | None


def unclassified_profile(assignment: ClusterAssignment | Sequence[str],
                         graph: CitationGraph) -> UnclassifiedProfile:
    """Size and mean citation count of the Unclassified group in ``graph``."""
    labels = assignment.labels if isinstance(assignment, ClusterAssignment) else assignment
    cites = graph.in_degree()
    mask = np.array([labels[u] == UNCLASSIFIED for u in graph.uids.tolist()], dtype=bool)
    count = int(mask.sum())
    return UnclassifiedProfile(
        count=count,
        mean_cites=float(cites[mask].mean()) if count else None,
        overall_mean_cites=float(cites.mean()) if len(cites) else None,
    )
