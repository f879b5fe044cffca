"""Parse line-delimited bibliographic records into normalized in-memory form.

Each input line is one JSON object::

    {"source_id": "W1", "doi": "10.1/x", "title": "...", "issn": "1234-5678",
     "journal_title": "...", "year": 2010, "cluster": "Medicine",
     "references": [{"doi": "...", "title": "...", "issn": "...", "raw": "..."}]}

Lines that fail validation are skipped and counted, never silently dropped.
"""

from __future__ import annotations

import json
import logging
import re
import sys
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

logger = logging.getLogger(__name__)

DATASET_TAGS = ("A", "B")

CLUSTER_NAMES = (
    "Medicine",
    "Science",
    "Biology",
    "Engineering",
    "Social Science",
    "Geography",
    "Arts",
    "Computer Science",
    "Psychology",
    "Management",
    "Law and Policy",
    "Building",
    "Education",
    "City Development",
)

YEAR_MIN = 1000
YEAR_MAX = 3000

_DOI_PREFIXES = (
    "https://doi.org/",
    "http://doi.org/",
    "https://dx.doi.org/",
    "http://dx.doi.org/",
    "doi.org/",
    "doi:",
)
_NON_ALNUM = re.compile(r"[\W_]+")
_ISSN = re.compile(r"^(\d{4})-?(\d{3}[\dX])$")


class RecordError(ValueError):
    """A single input line violates the record schema."""


def normalize_doi(raw: str) -> str:
    """Lowercase a DOI and strip resolver prefixes; '' if nothing remains."""
    s = (raw or "").strip().lower()
    stripped = True
    while stripped:
        stripped = False
        for prefix in _DOI_PREFIXES:
            if s.startswith(prefix):
                s = s[len(prefix):].strip()
                stripped = True
    return s


def _fold(s: str) -> str:
    s = unicodedata.normalize("NFKD", s)
    return "".join(ch for ch in s if not unicodedata.combining(ch))


@lru_cache(maxsize=1 << 20)
def normalize_title(raw: str) -> str:
    """Lowercase, fold diacritics and collapse punctuation/whitespace runs.

    >>> normalize_title("Café  Études!")
    'cafe etudes'
    """
    if not raw:
        return ""
    if raw.isascii():
        s = raw.lower()
    else:
        # lower() can introduce combining marks (e.g. dotted capital I), so fold twice
        s = _fold(_fold(raw).lower())
    return _NON_ALNUM.sub(" ", s).strip()


def normalize_issn(raw: str | None) -> str | None:
    if raw is None:
        return None
    s = str(raw).strip().upper().replace(" ", "")
    if not s:
        return None
    m = _ISSN.match(s)
    if m:
        return f"{m.group(1)}-{m.group(2)}"
    return s


def reference_key(doi: str | None, title: str | None, issn: str | None, raw: str) -> str:
    """Canonical identity of a reference entry: DOI, else title+ISSN, else raw text."""
    if doi:
        return "doi:" + doi
    if title and issn:
        nt = normalize_title(title)
        if nt:
            return f"ti:{nt}|{issn}"
    nr = normalize_title(raw)
    return "raw:" + (nr or raw.strip())


@dataclass(frozen=True, slots=True)
class RefEntry:
    """One entry of a reference list. ``doi`` and ``issn`` are stored normalized."""

    doi: str | None
    title: str | None
    issn: str | None
    raw: str
    key: str

    @classmethod
    def create(cls, raw: str, doi: str | None = None, title: str | None = None,
               issn: str | None = None) -> RefEntry:
        nd = normalize_doi(doi) if doi else ""
        ni = normalize_issn(issn)
        t = title if title else None
        doi_ = sys.intern(nd) if nd else None
        return cls(
            doi=doi_,
            title=sys.intern(t) if t else None,
            issn=sys.intern(ni) if ni else None,
            raw=sys.intern(raw),
            key=sys.intern(reference_key(doi_, t, ni, raw)),
        )


@dataclass(frozen=True, slots=True)
class PaperRecord:
    source_id: str
    dataset_tag: str
    doi: str | None
    title: str
    issn: str | None
    journal_title: str | None
    year: int
    references: tuple[RefEntry, ...]
    cluster_label: str | None = None


@dataclass
class LoadResult:
    """Records accepted from one file plus bookkeeping about what was not."""

    records: list[PaperRecord]
    rejected: int = 0
    duplicate_ids: int = 0
    duplicate_refs: int = 0
    reasons: Counter = field(default_factory=Counter)

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)


def _opt_str(obj: dict, name: str) -> str | None:
    v = obj.get(name)
    if v is None:
        return None
    if not isinstance(v, str):
        raise RecordError(f"{name} must be a string")
    v = v.strip()
    return v or None


def _ref_entry(r: object) -> RefEntry:
    if not isinstance(r, dict):
        raise RecordError("reference is not an object")
    raw = r.get("raw")
    if not isinstance(raw, str) or not raw.strip():
        raise RecordError("reference missing raw")
    return RefEntry.create(raw, _opt_str(r, "doi"), _opt_str(r, "title"), _opt_str(r, "issn"))


def parse_record(obj: object, tag: str,
                 ref_cache: dict | None = None) -> tuple[PaperRecord, int]:
    """Validate one decoded line. Returns the record and the number of
    duplicate reference entries that were collapsed.

    ``ref_cache`` lets identical reference entries across records share one
    :class:`RefEntry`.
    """
    if not isinstance(obj, dict):
        raise RecordError("not an object")
    sid = obj.get("source_id")
    if not isinstance(sid, str) or not sid.strip():
        raise RecordError("missing source_id")
    title = obj.get("title")
    if not isinstance(title, str):
        raise RecordError("missing title")
    year = obj.get("year")
    if isinstance(year, bool) or not isinstance(year, int):
        raise RecordError("year must be an integer")
    if not YEAR_MIN <= year <= YEAR_MAX:
        raise RecordError("year out of range")
    cluster = _opt_str(obj, "cluster")
    if cluster is not None and cluster not in CLUSTER_NAMES:
        raise RecordError(f"unknown cluster {cluster!r}")
    doi = normalize_doi(_opt_str(obj, "doi") or "") or None

    refs_in = obj.get("references", [])
    if refs_in is None:
        refs_in = []
    if not isinstance(refs_in, list):
        raise RecordError("references must be a list")
    refs: list[RefEntry] = []
    seen: set[str] = set()
    dups = 0
    for r in refs_in:
        if ref_cache is None:
            ref = _ref_entry(r)
        else:
            try:
                ck = tuple(r.items())
                ref = ref_cache.get(ck)
            except (AttributeError, TypeError):  # not a dict, or unhashable field values
                ck, ref = None, None
            if ref is None:
                ref = _ref_entry(r)
                if ck is not None:
                    ref_cache[ck] = ref
        if ref.key in seen:
            dups += 1
            continue
        seen.add(ref.key)
        refs.append(ref)

    rec = PaperRecord(
        source_id=sid.strip(),
        dataset_tag=tag,
        doi=doi,
        title=title,
        issn=normalize_issn(_opt_str(obj, "issn")),
        journal_title=_opt_str(obj, "journal_title"),
        year=year,
        references=tuple(refs),
        cluster_label=cluster,
    )
    return rec, dups


def load_dataset(path: str | Path, tag: str) -> LoadResult:
    """Read every parseable record from ``path``, preserving file order.

    The first occurrence of a duplicated ``source_id`` wins. Raises ``OSError``
    if the file cannot be read.
    """
    if tag not in DATASET_TAGS:
        raise ValueError(f"dataset tag must be one of {DATASET_TAGS}, got {tag!r}")
    result = LoadResult(records=[])
    seen_ids: set[str] = set()
    ref_cache: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec, dups = parse_record(json.loads(line), tag, ref_cache)
            except (json.JSONDecodeError, RecordError) as exc:
                reason = "invalid json" if isinstance(exc, json.JSONDecodeError) else str(exc)
                result.rejected += 1
                result.reasons[reason] += 1
                logger.debug("%s:%d rejected: %s", path, lineno, reason)
                continue
            if rec.source_id in seen_ids:
                result.duplicate_ids += 1
                continue
            seen_ids.add(rec.source_id)
            result.duplicate_refs += dups
            result.records.append(rec)
    if result.rejected:
        logger.warning("%s: %d lines rejected (%s)", path, result.rejected,
                       ", ".join(f"{k}: {v}" for k, v in sorted(result.reasons.items())))
    return result


def record_to_json(rec: PaperRecord) -> dict:
    """Inverse of :func:`parse_record`, for writing fixtures."""
    out: dict = {"source_id": rec.source_id, "title": rec.title, "year": rec.year}
    if rec.doi:
        out["doi"] = rec.doi
    if rec.issn:
        out["issn"] = rec.issn
    if rec.journal_title:
        out["journal_title"] = rec.journal_title
    if rec.cluster_label:
        out["cluster"] = rec.cluster_label
    refs = []
    for r in rec.references:
        d = {"raw": r.raw}
        if r.doi:
            d["doi"] = r.doi
        if r.title:
            d["title"] = r.title
        if r.issn:
            d["issn"] = r.issn
        refs.append(d)
    out["references"] = refs
    return out
