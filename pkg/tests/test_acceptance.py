"""Acceptance battery: one test per shipped criterion suite.

Each test executes the corresponding suite callable, prints a single
pass/fail line, and asserts the verdict.  Suites share trajectories
through a module-level cache, so ordering matters only for speed.
"""

import pytest

from torusflow import suites

_CRITERIA = [
    (1, suites.criterion_1),
    (2, suites.criterion_2),
    (3, suites.criterion_3),
    (4, suites.criterion_4),
    (5, suites.criterion_5),
    (6, suites.criterion_6),
    (7, suites.criterion_7),
    (8, suites.criterion_8),
    (9, suites.criterion_9),
    (10, suites.criterion_10),
]


@pytest.mark.parametrize("number,fn", _CRITERIA, ids=[f"criterion-{n}" for n, _ in _CRITERIA])
def test_acceptance_criterion(number, fn, capfd):
    result = fn()
    status = "PASS" if result["passed"] else "FAIL"
    # suspend pytest's fd-level capture so the verdict always reaches the log
    with capfd.disabled():
        print(
            f"\ncriterion {number} [{result['name']}]: {status} -- {result['detail']}",
            flush=True,
        )
    assert result["passed"], f"criterion {number}: {result['detail']}"
