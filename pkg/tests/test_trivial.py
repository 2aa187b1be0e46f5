import pytest

from trivial_cases import CASES


@pytest.mark.parametrize("case", CASES, ids=[c.__name__ for c in CASES])
def test_worked_example(case):
    case()
