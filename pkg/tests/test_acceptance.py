"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Every test runs the criterion through ``sl_krein.verify`` and then
re-asserts the headline tolerances on the reported metrics, so a silent
loosening inside the library would still be caught here.
"""

from __future__ import annotations

import pytest

from sl_krein.verify import CRITERIA, run_criterion

from .conftest import ACCEPTANCE_LINES

# headline limits restated independently of the library
LIMITS = {
    1: {"dirichlet_err": 1e-8, "neumann_err": 1e-6},
    2: {"lambda_err": 1e-8, "det_rel_err": 1e-7},
    3: {"identity": 1e-8, "composition": 1e-8, "inverse": 1e-8, "fractional": 1e-8},
    4: {"reflection": 1e-8},
    5: {"l2_gap": 1e-6},
    6: {"permuted_gap": 1e-8},
    7: {"free_FK_err": 1e-8, "step_p_F12_err": 1e-8, "two_lowest_abs": 1e-6, "relation_residual": 1e-6},
    8: {"lhs_err": 1e-6, "rhs_err": 1e-6, "pre_rounding_dev": 0.05},
    9: {"unitary_roundtrip": 1e-10, "dirichlet_is_minus_I": 1e-10, "neumann_is_plus_I": 1e-10},
    10: {"U00_plus_I": 1e-8, "route_gap": 1e-7, "isometry": 1e-7, "gram_quadrature_vs_closed": 1e-7},
    11: {"angle_dev": 1e-1, "dirichlet_dev": 1e-2},
}

FLAGS = {
    1: ("dirichlet_count", "neumann_count"),
    7: ("free_phi_zero",),
    8: ("counting_is_minus_one", "rounded_match"),
}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    res = run_criterion(number)
    line = res.line()
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert res.error is None, line
    assert res.seconds < res.budget, line
    for name, limit in LIMITS.get(number, {}).items():
        assert res.metrics[name] < limit, f"{name}={res.metrics[name]!r} >= {limit}"
    for name in FLAGS.get(number, ()):
        assert res.metrics[name] is True, name
    if number == 4:
        assert res.metrics["min_eig_Im"] > 0
    assert res.passed, line


def test_every_criterion_is_registered():
    assert sorted(CRITERIA) == list(range(1, 12))
