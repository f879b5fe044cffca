from __future__ import annotations

from contextlib import contextmanager
from pathlib import Path

import pytest

from citemerge.pipeline import PipelineConfig, run_pipeline
from citemerge.synthgen import GenSpec, generate

FIXTURE_SPEC = GenSpec(seed=20240611, n_articles_a=10_000, n_articles_b=10_000,
                       overlap_fraction=0.5, coverage_a=0.8, coverage_b=0.6)


@pytest.fixture(scope="session")
def fixture_10k(tmp_path_factory) -> tuple[Path, dict]:
    """The 10k-article planted-coverage pair (coverage 0.8/0.6, overlap 0.5)."""
    d = tmp_path_factory.mktemp("gen10k")
    summary = generate(FIXTURE_SPEC, d)
    return d, summary


@pytest.fixture(scope="session")
def pipeline_10k(fixture_10k, tmp_path_factory) -> Path:
    gen_dir, _ = fixture_10k
    out = tmp_path_factory.mktemp("run10k") / "out"
    run_pipeline(PipelineConfig(a=gen_dir / "A.jsonl", b=gen_dir / "B.jsonl", out_dir=out,
                                bin_width=500))
    return out


@pytest.fixture(scope="session")
def small_pair(tmp_path_factory) -> tuple[Path, dict]:
    d = tmp_path_factory.mktemp("gensmall")
    summary = generate(GenSpec(seed=7, n_articles_a=800, n_articles_b=700,
                               overlap_fraction=0.6), d)
    return d, summary


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def criterion(request):
    """Context manager factory: ``with criterion(3, "title") as info:`` logs a
    PASS/FAIL line for the acceptance summary and re-raises failures."""
    log = request.config.stash[_ACCEPTANCE]

    @contextmanager
    def run(number: int, title: str):
        info: dict = {"detail": ""}
        try:
            yield info
        except BaseException as exc:
            log.append((number, title, False, info["detail"] or f"{type(exc).__name__}: {exc}"))
            raise
        log.append((number, title, True, info["detail"]))
    return run


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = sorted(config.stash.get(_ACCEPTANCE, []), key=lambda t: t[0])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in lines:
        detail = " ".join(str(detail).split())
        if len(detail) > 240:
            detail = detail[:237] + "..."
        terminalreporter.write_line(f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {title}"
                                    + (f" ({detail})" if detail else ""))
