"""The twelve acceptance criteria at their stated tolerances.

Each criterion prints one PASS/FAIL line; the lines are repeated in the
terminal summary so they show up without ``-s``.
"""
import pytest

from merlab import acceptance

LINES = []


@pytest.mark.parametrize("criterion", acceptance.CRITERIA, ids=lambda c: c.__name__)
def test_criterion(criterion):
    res = criterion(0)
    line = res.line()
    LINES.append(line)
    print(line)
    assert res.passed, line
