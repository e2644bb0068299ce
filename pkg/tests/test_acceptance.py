"""Acceptance matrix: one test and one printed pass/fail line per criterion.

The lines are also repeated in the terminal summary (see conftest.py).
"""

import pytest

from adjeuler import cases

RESULTS = []


@pytest.mark.parametrize("crit", cases.CRITERIA, ids=[f"C{c.number}-{c.key}" for c in cases.CRITERIA])
def test_criterion(crit):
    r = crit.run()
    line = r.line()
    RESULTS.append(line)
    print(line)
    passed = r.passed
    assert passed, line
