"""One test per acceptance criterion; each prints a PASS/FAIL line (run with ``-s`` to see them).

Criteria that cannot be met stay failing; the printed detail says why.
"""
import pytest

from sgmopt.acceptance import CRITERIA, Context, evaluate


@pytest.fixture(scope="module")
def ctx(tmp_path_factory):
    return Context(tmp_path_factory.mktemp("acceptance"), ex2_n=512)


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, ctx):
    res = evaluate(number, ctx)
    print("\n" + res.line())
    assert res.passed, res.line()
