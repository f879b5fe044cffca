"""Decide which records of dataset A and dataset B are the same article.

Two exact-key hash joins run in sequence: normalized DOI, then the composite
(normalized title, ISSN). A key that occurs more than once on either side is
ambiguous and excluded from its stage; those records fall through.
"""

from __future__ import annotations

import enum
from collections import Counter, defaultdict
from collections.abc import Callable, Hashable, Sequence
from dataclasses import asdict, dataclass, field

from .ingest import PaperRecord, normalize_title


class MatchError(RuntimeError):
    """Matching produced an inconsistent partition."""


class MatchKind(str, enum.Enum):
    DOI_EXACT = "DoiExact"
    TITLE_ISSN = "TitleIssn"
    UNMATCHED_A = "UnmatchedA"
    UNMATCHED_B = "UnmatchedB"

    @property
    def is_pair(self) -> bool:
        return self in (MatchKind.DOI_EXACT, MatchKind.TITLE_ISSN)


@dataclass(frozen=True, slots=True)
class MatchResult:
    uid: int
    a_id: str | None
    b_id: str | None
    match_kind: MatchKind


@dataclass
class StageMatch:
    """Pairs found by one join stage, as (index into A, index into B)."""

    pairs: list[tuple[int, int]]
    ambiguous_a: int = 0
    ambiguous_b: int = 0


@dataclass
class MatchStats:
    n_a: int = 0
    n_b: int = 0
    counts: dict[str, int] = field(default_factory=dict)
    ambiguous_doi_a: int = 0
    ambiguous_doi_b: int = 0
    ambiguous_title_a: int = 0
    ambiguous_title_b: int = 0
    year_disagreements: int = 0
    overlap_pct_a: float = 0.0
    overlap_pct_b: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _doi_key(rec: PaperRecord) -> str | None:
    return rec.doi or None


def _title_issn_key(rec: PaperRecord) -> tuple[str, str] | None:
    if not rec.issn:
        return None
    nt = normalize_title(rec.title)
    if not nt:
        return None
    return nt, rec.issn


def _join(a: Sequence[PaperRecord], a_idx: Sequence[int],
          b: Sequence[PaperRecord], b_idx: Sequence[int],
          key: Callable[[PaperRecord], Hashable | None]) -> StageMatch:
    a_keys: dict[Hashable, list[int]] = defaultdict(list)
    for i in a_idx:
        k = key(a[i])
        if k is not None:
            a_keys[k].append(i)
    b_keys: dict[Hashable, list[int]] = defaultdict(list)
    for j in b_idx:
        k = key(b[j])
        if k is not None:
            b_keys[k].append(j)

    out = StageMatch(pairs=[])
    for k, ai in a_keys.items():
        bj = b_keys.get(k)
        if len(ai) > 1:
            out.ambiguous_a += len(ai)
        if bj is None:
            continue
        if len(bj) > 1:
            out.ambiguous_b += len(bj)
        if len(ai) == 1 and len(bj) == 1:
            out.pairs.append((ai[0], bj[0]))
    out.ambiguous_b += sum(len(bj) for k, bj in b_keys.items() if len(bj) > 1 and k not in a_keys)
    out.pairs.sort()
    return out


def match_by_doi(a: Sequence[PaperRecord], b: Sequence[PaperRecord]) -> StageMatch:
    return _join(a, range(len(a)), b, range(len(b)), _doi_key)


def match_by_title_issn(a: Sequence[PaperRecord], a_rest: Sequence[int],
                        b: Sequence[PaperRecord], b_rest: Sequence[int]) -> StageMatch:
    """Join the still-unmatched records (given by index) on (title, ISSN)."""
    return _join(a, a_rest, b, b_rest, _title_issn_key)


def assign_uids(a: Sequence[PaperRecord], b: Sequence[PaperRecord],
                matches: Sequence[tuple[int, int, MatchKind]],
                unmatched_a: Sequence[int], unmatched_b: Sequence[int]) -> list[MatchResult]:
    """Number matched pairs first (in A order), then unmatched A, then unmatched B."""
    results: list[MatchResult] = []
    seen_a: set[int] = set()
    seen_b: set[int] = set()

    def claim(seen: set[int], i: int, side: str) -> None:
        if i in seen:
            raise MatchError(f"record {side}[{i}] assigned to more than one uid")
        seen.add(i)

    for i, j, kind in sorted(matches, key=lambda t: (t[0], t[1])):
        claim(seen_a, i, "A")
        claim(seen_b, j, "B")
        results.append(MatchResult(len(results), a[i].source_id, b[j].source_id, kind))
    for i in unmatched_a:
        claim(seen_a, i, "A")
        results.append(MatchResult(len(results), a[i].source_id, None, MatchKind.UNMATCHED_A))
    for j in unmatched_b:
        claim(seen_b, j, "B")
        results.append(MatchResult(len(results), None, b[j].source_id, MatchKind.UNMATCHED_B))
    if len(seen_a) != len(a) or len(seen_b) != len(b):
        raise MatchError("matching does not cover every record exactly once")
    return results


def match_datasets(a: Sequence[PaperRecord],
                   b: Sequence[PaperRecord]) -> tuple[list[MatchResult], MatchStats]:
    """Run both stages and return the uid table with statistics."""
    doi_stage = match_by_doi(a, b)
    used_a = {i for i, _ in doi_stage.pairs}
    used_b = {j for _, j in doi_stage.pairs}
    rest_a = [i for i in range(len(a)) if i not in used_a]
    rest_b = [j for j in range(len(b)) if j not in used_b]

    title_stage = match_by_title_issn(a, rest_a, b, rest_b)
    used_a.update(i for i, _ in title_stage.pairs)
    used_b.update(j for _, j in title_stage.pairs)

    matches = [(i, j, MatchKind.DOI_EXACT) for i, j in doi_stage.pairs]
    matches += [(i, j, MatchKind.TITLE_ISSN) for i, j in title_stage.pairs]
    results = assign_uids(
        a, b, matches,
        [i for i in range(len(a)) if i not in used_a],
        [j for j in range(len(b)) if j not in used_b],
    )

    counts = Counter(r.match_kind.value for r in results)
    n_pairs = len(matches)
    stats = MatchStats(
        n_a=len(a),
        n_b=len(b),
        counts={k.value: counts.get(k.value, 0) for k in MatchKind},
        ambiguous_doi_a=doi_stage.ambiguous_a,
        ambiguous_doi_b=doi_stage.ambiguous_b,
        ambiguous_title_a=title_stage.ambiguous_a,
        ambiguous_title_b=title_stage.ambiguous_b,
        year_disagreements=sum(1 for i, j in title_stage.pairs if a[i].year != b[j].year),
        overlap_pct_a=100.0 * n_pairs / len(a) if a else 0.0,
        overlap_pct_b=100.0 * n_pairs / len(b) if b else 0.0,
    )
    return results, stats
