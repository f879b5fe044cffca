"""Four-way classification of how merging moved an article's rankings.

Inputs are competition ranks (1 = top): ``n`` by prestige, ``k`` by citation
count, each in the original dataset (``_ds``) and the merged one (``_m``).
With ``delta = (k_m - n_m) - (k_ds - n_ds)``:

* GloriousUpgrade: ``(n_ds < k_ds and delta >= 0) or n_m <= n_ds``
* OrdinaryGain:    ``n_ds <  k_ds and delta < 0  and n_m > n_ds``
* LowImpact:       ``n_ds >= k_ds and delta < 0  and n_m > n_ds``
* DiverseBoost:    ``n_ds >= k_ds and delta >= 0 and n_m > n_ds``

The first rule is tested first, so an improved prestige rank always lands in
GloriousUpgrade.
"""

from __future__ import annotations

import enum
from collections import Counter
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np


class GoldCase(str, enum.Enum):
    GLORIOUS_UPGRADE = "G"
    ORDINARY_GAIN = "O"
    LOW_IMPACT = "L"
    DIVERSE_BOOST = "D"

    @property
    def label(self) -> str:
        return _LABELS[self]


_LABELS = {
    GoldCase.GLORIOUS_UPGRADE: "GloriousUpgrade",
    GoldCase.ORDINARY_GAIN: "OrdinaryGain",
    GoldCase.LOW_IMPACT: "LowImpact",
    GoldCase.DIVERSE_BOOST: "DiverseBoost",
}
CASE_ORDER = tuple(GoldCase)


@dataclass(frozen=True, slots=True)
class GoldInput:
    n_ds: int
    k_ds: int
    n_m: int
    k_m: int

    def __post_init__(self):
        if min(self.n_ds, self.k_ds, self.n_m, self.k_m) < 1:
            raise ValueError(f"ranks must be >= 1: {self}")

    @property
    def delta(self) -> int:
        return (self.k_m - self.n_m) - (self.k_ds - self.n_ds)


def classify(inp: GoldInput) -> GoldCase:
    delta = inp.delta
    if (inp.n_ds < inp.k_ds and delta >= 0) or inp.n_m <= inp.n_ds:
        return GoldCase.GLORIOUS_UPGRADE
    if inp.n_ds < inp.k_ds:
        # delta < 0 and n_m > n_ds hold here
        return GoldCase.ORDINARY_GAIN
    if delta < 0:
        return GoldCase.LOW_IMPACT
    return GoldCase.DIVERSE_BOOST


def classify_arrays(n_ds, k_ds, n_m, k_m) -> np.ndarray:
    """Vectorised :func:`classify`; returns an array of one-letter codes."""
    n_ds, k_ds, n_m, k_m = (np.asarray(a, dtype=np.int64) for a in (n_ds, k_ds, n_m, k_m))
    delta = (k_m - n_m) - (k_ds - n_ds)
    asp_first = n_ds < k_ds
    out = np.where(delta < 0,
                   np.where(asp_first, "O", "L"),
                   np.where(asp_first, "G", "D"))
    out[n_m <= n_ds] = "G"
    return out


@dataclass
class GoldTally:
    cases: dict[int, GoldCase]
    counts: dict[GoldCase, int]
    dataset_size: int
    merged_size: int
    excluded: int = 0
    inputs: dict[int, GoldInput] = field(default_factory=dict)

    def proportion_in_dataset(self, case: GoldCase) -> float:
        total = sum(self.counts.values())
        return self.counts[case] / total if total else 0.0

    def proportion_in_merged(self, case: GoldCase) -> float:
        return self.counts[case] / self.merged_size if self.merged_size else 0.0

    def summary_rows(self):
        for case in CASE_ORDER:
            yield (case.value, case.label, self.counts[case],
                   self.proportion_in_dataset(case), self.proportion_in_merged(case))


def classify_dataset(ranks_ds: Mapping[int, tuple[int, int]],
                     ranks_m: Mapping[int, tuple[int, int]]) -> GoldTally:
    """Classify every article of the original dataset.

    Both maps are uid -> (asp_rank n, cite_rank k). Articles of the original
    dataset missing from the merged map are excluded and counted.
    """
    cases: dict[int, GoldCase] = {}
    inputs: dict[int, GoldInput] = {}
    excluded = 0
    for uid, (n_ds, k_ds) in ranks_ds.items():
        m = ranks_m.get(uid)
        if m is None:
            excluded += 1
            continue
        inp = GoldInput(n_ds, k_ds, m[0], m[1])
        inputs[uid] = inp
        cases[uid] = classify(inp)
    counts = Counter(cases.values())
    return GoldTally(
        cases=cases,
        counts={c: counts.get(c, 0) for c in CASE_ORDER},
        dataset_size=len(ranks_ds),
        merged_size=len(ranks_m),
        excluded=excluded,
        inputs=inputs,
    )
