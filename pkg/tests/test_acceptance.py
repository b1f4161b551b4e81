"""The twelve acceptance criteria, one test each, printing a pass/fail line."""

import pytest

from stratified import acceptance


@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(number):
    result = acceptance.run_criterion(number)
    print(acceptance.format_line(result))
    assert result.passed, result.details
