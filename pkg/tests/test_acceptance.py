"""The twelve acceptance criteria, each at its stated tolerance and runtime budget.

The suite runs once (stages 1-11 twice, for the determinism check) and every
criterion prints one ``PASS``/``FAIL`` line; the lines are repeated in the
terminal summary.
"""

import pytest

from fracshe.verify import STAGES, run_suite

LINES = []


@pytest.fixture(scope="module")
def suite():
    res = {r.number: r for r in run_suite(seed=0, repeat=True)}
    assert sorted(res) == list(range(1, 13))
    return res


@pytest.mark.parametrize("number", range(1, 13))
def test_criterion(suite, number):
    r = suite[number]
    within = r.seconds < r.budget
    ok = r.passed and within
    timing = "" if within else f" over budget {r.budget:.0f}s"
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {r.name}: {r.detail} ({r.seconds:.1f}s){timing}"
    LINES.append(line)
    print(line)
    assert r.passed, r.detail
    assert within, f"{r.seconds:.1f}s exceeds the {r.budget:.0f}s budget"


def test_stage_table_is_complete():
    assert [s[0] for s in STAGES] == list(range(1, 12))
