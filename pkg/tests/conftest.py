"""Shared fixtures: the acceptance runs are solved once per session."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import pytest

from coagfrag.config import RunConfig, load_config
from coagfrag.evolve import SteadyReport, continuation_run
from coagfrag.operators import DistributionState

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

# (criterion label, verdict, detail) collected by test_acceptance
ACCEPTANCE_RESULTS: list[tuple[str, str, str]] = []


@dataclass
class SolvedCase:
    cfg: RunConfig
    state: DistributionState
    reports: list[SteadyReport]


def _solve(name: str) -> SolvedCase:
    cfg = load_config(CONFIG_DIR / name)
    state, reports = continuation_run(
        cfg.grid.build(), cfg.coagulation, cfg.fragmentation, cfg.schedule, cfg.rho,
        cfg.evolve, moments=cfg.verify.moments, lp_pairs=cfg.verify.lp,
    )
    return SolvedCase(cfg, state, reports)


@pytest.fixture(scope="session")
def config_dir() -> Path:
    return CONFIG_DIR


@pytest.fixture(scope="session")
def constant_case() -> SolvedCase:
    return _solve("constant_kernel.toml")


@pytest.fixture(scope="session")
def generic_case() -> SolvedCase:
    return _solve("generic.toml")


@pytest.fixture(scope="session")
def product_case() -> SolvedCase:
    return _solve("product_kernel.toml")


@pytest.fixture(scope="session")
def frag_case() -> SolvedCase:
    return _solve("frag_dominated.toml")


@pytest.fixture(scope="session")
def coag_case() -> SolvedCase:
    return _solve("coag_dominated.toml")


@pytest.fixture
def record():
    """Record one acceptance verdict line for the terminal summary."""

    def _record(label: str, ok: bool, detail: str, soft: bool = False):
        verdict = "PASS" if ok else ("FAIL (finding)" if soft else "FAIL")
        ACCEPTANCE_RESULTS.append((label, verdict, detail))
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, verdict, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{verdict}  {label}: {detail}")
