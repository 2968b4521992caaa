"""Acceptance criteria as pytest cases, one per criterion.

The heavy stability pipelines are shared through a module-scoped context, so
the whole suite performs three long evolutions (t = 30 and two t = 20) plus
the cheap closed-form checks.  Each test prints its pass/fail line.
"""

import pytest

from kpsim import acceptance


@pytest.fixture(scope="module")
def ctx(tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance")
    return acceptance.AcceptanceContext(out_dir=str(out), fast=False)


@pytest.mark.parametrize("criterion", acceptance.CRITERIA, ids=lambda f: f.__name__)
def test_criterion(criterion, ctx):
    res = criterion(ctx)
    print(res.line())
    assert res.passed, f"criterion {res.number} ({res.name}) failed: {res.details}"
