from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from surveybench.dataset import DEFAULT_FRAMES, RespondentRecord, SurveyDataset  # noqa: E402
from surveybench.synthetic import (  # noqa: E402
    SyntheticPopulationConfig,
    cms_shaped_dataset,
    generate_population,
)


def make_record(rid, frame="prob_panel", **kw):
    base = dict(
        respondent_id=rid, frame=DEFAULT_FRAMES[frame], mode="web", state="OH",
        age_years=40, gender="man", race_eth="white_nh", education="hs",
        region="midwest",
    )
    base.update(kw)
    return RespondentRecord(**base)


def make_dataset(records):
    return SurveyDataset.from_records(records)


@pytest.fixture(scope="session")
def cms():
    """(population, dataset) with the CMS frame-by-state layout."""
    return cms_shaped_dataset(seed=2022)


@pytest.fixture(scope="session")
def small_population():
    return generate_population(SyntheticPopulationConfig(population_size=20_000, seed=5))


# -- acceptance reporting ------------------------------------------------------

_ACCEPTANCE: dict[str, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    key, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
        prev = _ACCEPTANCE.get(key)
        if prev is None or prev[0] == "PASS" or status == "FAIL":
            _ACCEPTANCE[key] = (status, title)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: int(k)):
        status, title = _ACCEPTANCE[key]
        terminalreporter.write_line(f"[{status}] criterion {key}: {title}")
