"""Command line entry point: ``citemerge <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline as pl
from .metrics import DEFAULT_DAMPING, DEFAULT_MAX_ITER, DEFAULT_TOL, DEFAULT_WINDOW
from .report import write_report
from .synthgen import GenSpec, generate

logger = logging.getLogger("citemerge")


def _add_inputs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--a", type=Path, required=True, help="dataset A (JSON lines)")
    p.add_argument("--b", type=Path, required=True, help="dataset B (JSON lines)")


def _add_out(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out-dir", type=Path, required=True)


def _add_asp(p: argparse.ArgumentParser) -> None:
    p.add_argument("--damping", type=float, default=DEFAULT_DAMPING)
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW,
                   help="citation window in years; -1 disables it")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    p.add_argument("--threads", type=int, default=1)


def _add_report(p: argparse.ArgumentParser) -> None:
    p.add_argument("--year-lo", type=int, default=None)
    p.add_argument("--year-hi", type=int, default=None)
    p.add_argument("--bin-width", type=int, default=1000)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="citemerge", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic dataset pair with manifest")
    _add_out(p)
    d = GenSpec()
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--n-a", type=int, default=d.n_articles_a)
    p.add_argument("--n-b", type=int, default=d.n_articles_b)
    p.add_argument("--overlap", type=float, default=d.overlap_fraction)
    p.add_argument("--doi-prob", type=float, default=d.doi_present_prob)
    p.add_argument("--coverage-a", type=float, default=d.coverage_a)
    p.add_argument("--coverage-b", type=float, default=d.coverage_b)
    p.add_argument("--year-lo", type=int, default=d.year_lo)
    p.add_argument("--year-hi", type=int, default=d.year_hi)
    p.add_argument("--mean-refs", type=float, default=d.mean_out_degree)
    p.add_argument("--pa-exponent", type=float, default=d.pa_exponent)
    p.add_argument("--outside-prob", type=float, default=d.outside_ref_prob)

    p = sub.add_parser("match", help="match records of A and B; assign uids")
    _add_inputs(p)
    _add_out(p)

    p = sub.add_parser("merge", help="resolve references and build citation graphs")
    _add_inputs(p)
    _add_out(p)

    p = sub.add_parser("asp", help="prestige, citation counts and ranks for each graph")
    _add_out(p)
    _add_asp(p)

    p = sub.add_parser("rcr", help="reference coverage rates of matched articles")
    _add_out(p)

    p = sub.add_parser("gold", help="classify rank shifts after merging")
    _add_out(p)

    p = sub.add_parser("clusters", help="assign disciplinary clusters")
    _add_inputs(p)
    _add_out(p)
    p.add_argument("--rules", type=Path, default=None,
                   help="keyword rule file (default: bundled starter rules)")

    p = sub.add_parser("report", help="aggregate tables from stage artifacts")
    _add_out(p)
    _add_report(p)

    p = sub.add_parser("pipeline", help="run every stage end to end")
    _add_inputs(p)
    _add_out(p)
    _add_asp(p)
    _add_report(p)
    p.add_argument("--rules", type=Path, default=None)
    return parser


def _run(args: argparse.Namespace) -> None:
    cmd = args.command
    if cmd == "generate":
        spec = GenSpec(seed=args.seed, n_articles_a=args.n_a, n_articles_b=args.n_b,
                       overlap_fraction=args.overlap, doi_present_prob=args.doi_prob,
                       coverage_a=args.coverage_a, coverage_b=args.coverage_b,
                       year_lo=args.year_lo, year_hi=args.year_hi,
                       mean_out_degree=args.mean_refs, pa_exponent=args.pa_exponent,
                       outside_ref_prob=args.outside_prob)
        try:
            summary = generate(spec, args.out_dir)
        except ValueError as exc:
            raise pl.StageError("generate", str(exc)) from exc
        logger.info("generated %d + %d records (%d shared)", summary["records_a"],
                    summary["records_b"], summary["shared"])
        return
    if cmd == "pipeline":
        cfg = pl.PipelineConfig(a=args.a, b=args.b, out_dir=args.out_dir, damping=args.damping,
                                window=args.window, tol=args.tol, max_iter=args.max_iter,
                                rules=args.rules, threads=args.threads, year_lo=args.year_lo,
                                year_hi=args.year_hi, bin_width=args.bin_width)
        log = pl.run_pipeline(cfg)
        logger.info("pipeline finished: %s", ", ".join(f"{k} {v:.2f}s" for k, v in log.timings.items()))
        return

    log = pl.RunLog()
    out = args.out_dir
    if cmd in ("match", "merge", "clusters"):
        with log.stage("ingest"):
            a, b = pl.load_inputs(args.a, args.b)
        out.mkdir(parents=True, exist_ok=True)
    if cmd == "match":
        with log.stage("match"):
            pl.stage_match(a, b, out)
    elif cmd == "merge":
        with log.stage("merge"):
            results = pl.read_match_results(out / pl.MATCH_FILE)
            pl.stage_merge(a.records, b.records, results, out)
    elif cmd == "clusters":
        with log.stage("clusters"):
            results = pl.read_match_results(out / pl.MATCH_FILE)
            table = pl.UidTable(results)
            merged = pl.read_graph(out, "merged")
            pl.stage_clusters(a.records + b.records, table, args.rules, merged, out)
    elif cmd == "asp":
        with log.stage("asp"):
            if not 0.0 < args.damping < 1.0:
                raise ValueError("damping must lie in (0, 1)")
            pl.stage_asp(pl.load_graphs(out), out, args.damping, args.window, args.tol,
                         args.max_iter, args.threads)
    elif cmd == "rcr":
        with log.stage("rcr"):
            pl.stage_rcr(pl.load_graphs(out), out)
    elif cmd == "gold":
        with log.stage("gold"):
            pl.stage_gold(pl.load_rank_maps(out), out)
    elif cmd == "report":
        with log.stage("report"):
            write_report(out, args.year_lo, args.year_hi, args.bin_width)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with pl.gc_paused():
            _run(args)
    except pl.StageError as exc:
        print(f"citemerge: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
