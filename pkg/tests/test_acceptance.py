"""Acceptance criteria 1-8 at full size; each prints one [PASS]/[FAIL] line.

The same checks back ``ctrlcurv selftest``.  The whole module takes one to two minutes.
"""

import pytest

from ctrlcurv.report.battery import CRITERIA


@pytest.mark.slow
@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{k + 1}" for k in range(len(CRITERIA))])
def test_criterion(criterion, capsys):
    result = criterion()
    with capsys.disabled():
        print(f"\n{result.line()}")
    assert result.passed, result.detail
