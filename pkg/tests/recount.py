"""Brute-force recount of every report table from the flat artifacts.

Uses only the csv module and plain Python arithmetic so it shares no code
with the package's aggregation paths.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from collections import defaultdict
from pathlib import Path

GRAPHS = ("A", "B", "merged")
LABELS = ("Medicine", "Science", "Biology", "Engineering", "Social Science", "Geography", "Arts",
          "Computer Science", "Psychology", "Management", "Law and Policy", "Building",
          "Education", "City Development", "Unclassified")
CASES = ("G", "O", "L", "D")


def _rows(path: Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _stats(values) -> list:
    values = list(values)
    if not values:
        return [0, None, None, None, None]
    return [len(values), min(values), max(values), math.fsum(values) / len(values),
            statistics.median(values)]


def _cell(text: str):
    return None if text == "" else float(text)


class Recount:
    def __init__(self, out_dir: Path):
        self.out = Path(out_dir)
        self.mismatches: list[str] = []
        self.checked = 0
        self.nodes = {g: _rows(self.out / f"nodes_{g}.csv") for g in GRAPHS}
        self.asp = {g: {int(r["uid"]): r for r in _rows(self.out / f"asp_{g}.csv")} for g in GRAPHS}
        self.indeg = {}
        for g in GRAPHS:
            deg = {int(r["uid"]): 0 for r in self.nodes[g]}
            for e in _rows(self.out / f"edges_{g}.csv"):
                deg[int(e["cited_uid"])] += 1
            self.indeg[g] = deg
        self.label = {int(r["uid"]): r["cluster"] for r in _rows(self.out / "clusters.csv")}

    # comparison --------------------------------------------------------------

    def same(self, where: str, got, want, mean: bool = False) -> None:
        self.checked += 1
        if want is None or got is None:
            ok = got is None and want is None
        elif mean:
            ok = abs(got - want) <= 1e-9 * max(1.0, abs(want))
        else:
            ok = got == want
        if not ok:
            self.mismatches.append(f"{where}: got {got!r}, recount {want!r}")

    def same_stats(self, where: str, cells: list[str], want: list) -> None:
        names = ("count", "min", "max", "mean", "median")
        for name, c, w in zip(names, cells, want):
            self.same(f"{where}.{name}", _cell(c), w, mean=name == "mean")

    def same_table(self, fname: str, want_rows: list[list], mean_cols: set[int] = frozenset(),
                   key_cols: int = 1) -> None:
        got = _rows(self.out / fname)
        if len(got) != len(want_rows):
            self.mismatches.append(f"{fname}: {len(got)} rows, recount {len(want_rows)}")
            return
        for g, w in zip(got, want_rows):
            vals = list(g.values())
            where = f"{fname}[{','.join(vals[:key_cols])}]"
            for i, (c, x) in enumerate(zip(vals, w)):
                if i < key_cols:
                    self.same(f"{where}.key{i}", c, str(x))
                else:
                    self.same(f"{where}.{i}", _cell(c), x, mean=i in mean_cols)

    # tables ------------------------------------------------------------------

    def run(self, year_lo: int | None = None, year_hi: int | None = None,
            bin_width: int = 1000) -> list[str]:
        self.ranks()
        self.datasets()
        self.rcr()
        self.asp_summary()
        self.clusters()
        self.annual(year_lo, year_hi)
        self.rank_distribution(bin_width)
        self.gold()
        self.unclassified()
        return self.mismatches

    def ranks(self) -> None:
        for g in GRAPHS:
            rows = self.asp[g]
            self.same(f"asp_{g}.nodes", sorted(rows), [int(r["uid"]) for r in self.nodes[g]])
            for col, key in (("n", "asp"), ("k", "cites")):
                vals = sorted((float(r[key]) for r in rows.values()), reverse=True)
                first = {}
                for pos, v in enumerate(vals, 1):
                    first.setdefault(v, pos)
                bad = sum(int(r[col]) != first[float(r[key])] for r in rows.values())
                self.same(f"asp_{g}.{col}-ranks-wrong", bad, 0)
            bad = sum(int(r["cites"]) != self.indeg[g][u] for u, r in rows.items())
            self.same(f"asp_{g}.cites-wrong", bad, 0)

    def datasets(self) -> None:
        got = {r["graph"]: r for r in _rows(self.out / "summary_datasets.csv")}
        for g in GRAPHS:
            nodes = self.nodes[g]
            refs = [int(r["refs"]) for r in nodes]
            years = [int(r["year"]) for r in nodes]
            row = got[g]
            self.same(f"summary_datasets[{g}].papers", int(row["papers"]), len(nodes))
            self.same(f"summary_datasets[{g}].non_ref", int(row["non_ref_papers"]),
                      sum(1 for x in refs if x == 0))
            self.same(f"summary_datasets[{g}].year_min", int(row["year_min"]), min(years))
            self.same(f"summary_datasets[{g}].year_max", int(row["year_max"]), max(years))
            self.same(f"summary_datasets[{g}].edges", int(row["edges"]), sum(self.indeg[g].values()))
            cells = list(row.values())
            self.same_stats(f"summary_datasets[{g}].cites", cells[6:11],
                            _stats(list(self.indeg[g].values())))
            self.same_stats(f"summary_datasets[{g}].refs", cells[11:16], _stats(refs))

    def rcr(self) -> None:
        refs = {g: {int(r["uid"]): int(r["refs"]) for r in self.nodes[g]} for g in GRAPHS}
        values = []
        for uid in sorted(set(refs["A"]) & set(refs["B"])):
            m = refs["merged"][uid]
            if m > 0:
                values.append((uid, refs["A"][uid] / m, refs["B"][uid] / m))
        got = [(int(r["uid"]), float(r["rcr_A"]), float(r["rcr_B"])) for r in _rows(self.out / "rcr.csv")]
        self.same("rcr.csv", got, values)
        summary = {r["dataset"]: list(r.values())[1:] for r in _rows(self.out / "summary_rcr.csv")}
        self.same_stats("summary_rcr[A]", summary["A"], _stats(v[1] for v in values))
        self.same_stats("summary_rcr[B]", summary["B"], _stats(v[2] for v in values))
        groups = defaultdict(list)
        for uid, a, b in values:
            groups[self.label[uid]].append((a, b))
        want = [[c, math.fsum(a for a, _ in groups[c]) / len(groups[c]),
                 math.fsum(b for _, b in groups[c]) / len(groups[c]), len(groups[c])]
                for c in LABELS if groups[c]]
        self.same_table("rcr_by_cluster.csv", want, mean_cols={1, 2})

    def asp_summary(self) -> None:
        got = {r["graph"]: list(r.values())[1:] for r in _rows(self.out / "summary_asp.csv")}
        for g in GRAPHS:
            self.same_stats(f"summary_asp[{g}]", got[g],
                            _stats(float(r["asp"]) for r in self.asp[g].values()))

    def clusters(self) -> None:
        want = []
        for g in GRAPHS:
            for c in LABELS:
                uids = [u for u in self.indeg[g] if self.label[u] == c]
                cites = _stats(self.indeg[g][u] for u in uids)
                asp = _stats(float(self.asp[g][u]["asp"]) for u in uids)
                want.append([g, c, *cites, *asp[1:]])
        self.same_table("cluster_summary.csv", want, mean_cols={5, 9}, key_cols=2)

    def annual(self, year_lo, year_hi) -> None:
        years = {g: {int(r["uid"]): int(r["year"]) for r in self.nodes[g]} for g in GRAPHS}
        every = [y for g in GRAPHS for y in years[g].values()]
        lo = min(every) if year_lo is None else year_lo
        hi = max(every) if year_hi is None else year_hi
        for metric in ("cites", "asp"):
            want = []
            for g in GRAPHS:
                for y in range(lo, hi + 1):
                    vals = [float(self.asp[g][u][metric]) for u, yy in years[g].items() if yy == y]
                    want.append([g, y, len(vals), math.fsum(vals) / len(vals) if vals else None])
            self.same_table(f"annual_{metric}.csv", want, mean_cols={3}, key_cols=2)
            want = []
            for c in LABELS:
                uids = [u for u in years["merged"] if self.label[u] == c]
                if not uids:
                    continue
                for y in range(lo, hi + 1):
                    vals = [float(self.asp["merged"][u][metric]) for u in uids
                            if years["merged"][u] == y]
                    want.append([c, y, len(vals), math.fsum(vals) / len(vals) if vals else None])
            self.same_table(f"annual_{metric}_by_cluster.csv", want, mean_cols={3}, key_cols=2)

    def rank_distribution(self, bin_width: int) -> None:
        prov = {int(r["uid"]): r["provenance"] for r in self.nodes["merged"]}
        n = len(prov)
        for metric, col in (("cites", "k"), ("asp", "n")):
            bins = max(1, -(-n // bin_width))
            a = [0] * bins
            b = [0] * bins
            for uid, row in self.asp["merged"].items():
                i = (int(row[col]) - 1) // bin_width
                if prov[uid] == "AOnly":
                    a[i] += 1
                elif prov[uid] == "BOnly":
                    b[i] += 1
            want = [[i * bin_width + 1, (i + 1) * bin_width, a[i], b[i]] for i in range(bins)]
            self.same_table(f"rank_distribution_{metric}.csv", want, key_cols=0)

    def gold(self) -> None:
        for tag in ("A", "B"):
            cases = {}
            for uid, row in self.asp[tag].items():
                m = self.asp["merged"].get(uid)
                if m is None:
                    continue
                n_ds, k_ds, n_m, k_m = int(row["n"]), int(row["k"]), int(m["n"]), int(m["k"])
                delta = (k_m - n_m) - (k_ds - n_ds)
                if (n_ds < k_ds and delta >= 0) or n_m <= n_ds:
                    cases[uid] = "G"
                elif n_ds < k_ds:
                    cases[uid] = "O"
                elif delta < 0:
                    cases[uid] = "L"
                else:
                    cases[uid] = "D"
            got = {int(r["uid"]): r["case"] for r in _rows(self.out / f"gold_{tag}.csv")}
            self.same(f"gold_{tag}.cases", got, cases)
            total = len(cases)
            merged_n = len(self.asp["merged"])
            want = []
            for c in CASES:
                k = sum(1 for v in cases.values() if v == c)
                want.append([c, k, k / total if total else 0.0, k / merged_n])
            got_rows = _rows(self.out / f"gold_summary_{tag}.csv")
            for g, w in zip(got_rows, want, strict=True):
                self.same(f"gold_summary_{tag}[{w[0]}].case", g["case"], w[0])
                self.same(f"gold_summary_{tag}[{w[0]}].count", int(g["count"]), w[1])
                self.same(f"gold_summary_{tag}[{w[0]}].prop_dataset", float(g["prop_dataset"]), w[2], True)
                self.same(f"gold_summary_{tag}[{w[0]}].prop_merged", float(g["prop_merged"]), w[3], True)
            per = {c: dict.fromkeys(CASES, 0) for c in LABELS}
            for uid, case in cases.items():
                per[self.label[uid]][case] += 1
            want = [[c, *(per[c][x] for x in CASES), sum(per[c].values())]
                    for c in LABELS if sum(per[c].values())]
            self.same_table(f"gold_by_cluster_{tag}.csv", want)

    def unclassified(self) -> None:
        with open(self.out / "unclassified_profile.json", encoding="utf-8") as fh:
            got = json.load(fh)
        deg = self.indeg["merged"]
        unc = [deg[u] for u in deg if self.label[u] == "Unclassified"]
        self.same("unclassified.count", got["count"], len(unc))
        self.same("unclassified.mean", got["mean_cites"], sum(unc) / len(unc) if unc else None, True)
        self.same("unclassified.overall", got["overall_mean_cites"],
                  sum(deg.values()) / len(deg), True)


def recount_report(out_dir: Path, year_lo=None, year_hi=None, bin_width: int = 1000) -> tuple[int, list[str]]:
    r = Recount(out_dir)
    mismatches = r.run(year_lo, year_hi, bin_width)
    return r.checked, mismatches
