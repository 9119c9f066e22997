"""Acceptance suite: each criterion at its stated tolerance, one line per criterion."""

import pytest

from mmoscope.acceptance import CRITERIA


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    result = CRITERIA[number]()
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.detail
