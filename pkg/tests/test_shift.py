import math

import numpy as np
import pytest

from sl_krein.boundary import DIRICHLET, NEUMANN, PERIODIC
from sl_krein.errors import DegenerateN, InsufficientEigs, PathThroughSpectrum
from sl_krein.shift import (
    det_lambda,
    det_ratio,
    logdet_track,
    ssf_boundary,
    ssf_counting,
    trace_formula_check,
)

PI2 = math.pi**2


def test_logdet_closed_form(free_unit):
    path = logdet_track(free_unit, DIRICHLET, NEUMANN, [-4, -2, -1])
    assert path.eta == pytest.approx(1)
    logs = [v for _, v in path.points]
    assert np.allclose(logs, [math.log(4), math.log(2), 0.0], atol=1e-9)


def test_logdet_single_point(free_unit):
    path = logdet_track(free_unit, DIRICHLET, NEUMANN, [-3])
    assert len(path.points) == 1 and path.points[0][1].imag == 0


def test_logdet_through_spectrum(free_pi):
    with pytest.raises(PathThroughSpectrum):
        logdet_track(free_pi, DIRICHLET, NEUMANN, [-1, 1, 2])


def test_logdet_phase_winds_around_zero(free_unit):
    # det = -z, so circling the origin adds 2 pi i
    ring = [-1 * complex(math.cos(t), math.sin(t)) for t in np.linspace(0, 2 * math.pi, 9)]
    path = logdet_track(free_unit, DIRICHLET, NEUMANN, ring)
    assert path.points[-1][1].imag == pytest.approx(2 * math.pi, abs=1e-8)


@pytest.mark.parametrize("z", [-1, -3, 2 + 2j])
def test_trace_formula_free(free_unit, z):
    chk = trace_formula_check(free_unit, DIRICHLET, NEUMANN, z, 20)
    assert chk.lhs == pytest.approx(-1 / z, abs=1e-6)
    assert chk.rhs == pytest.approx(-1 / z, abs=1e-6)


def test_trace_formula_same_bc(free_unit):
    chk = trace_formula_check(free_unit, NEUMANN, NEUMANN, -1, 10)
    assert abs(chk.lhs) < 1e-12 and abs(chk.rhs) < 1e-8


def test_trace_formula_periodic(free_unit):
    assert trace_formula_check(free_unit, DIRICHLET, PERIODIC, -2, 40).residual < 1e-5


def test_trace_formula_needs_enough_eigenvalues(free_unit):
    with pytest.raises(InsufficientEigs):
        trace_formula_check(free_unit, DIRICHLET, PERIODIC, -2, 10, tol=1e-9)


def test_det_ratio(free_unit):
    assert det_ratio(free_unit, NEUMANN, NEUMANN, -1).value == pytest.approx(1)
    r = det_ratio(free_unit, DIRICHLET, NEUMANN, -1)
    assert r.degenerate_from and r.value == 0
    with pytest.raises(DegenerateN):
        det_ratio(free_unit, NEUMANN, DIRICHLET, -1)


def test_det_ratio_is_constant_multiple(free_unit):
    # Robin-type target with invertible N on both sides
    from sl_krein.boundary import SeparatedBC

    f, t = SeparatedBC(1.0, 2.0).to_ab(), NEUMANN
    ratios = [det_ratio(free_unit, f, t, z).value / det_lambda(free_unit, f, t, z) for z in (-1, -5, 3j)]
    assert np.allclose(ratios, ratios[0], rtol=1e-10)


def test_ssf_counting_free(free_unit):
    xi = ssf_counting(free_unit, DIRICHLET, NEUMANN, 50)
    assert all(xi(x) == -1 for x in np.linspace(1e-6, 50, 40))
    assert xi(-1) == 0


def test_ssf_counting_same_bc(free_unit):
    assert ssf_counting(free_unit, PERIODIC, PERIODIC, 50).jumps == ()


def test_ssf_counting_periodic(free_unit):
    # Dirichlet {1,4,9}pi^2 against periodic {0, 4, 4}pi^2 below 50
    xi = ssf_counting(free_unit, DIRICHLET, PERIODIC, 50)
    assert [xi(x) for x in (-1, 1, 12, 45)] == [0, -1, 0, -1]


def test_ssf_boundary_free(free_unit):
    vals = ssf_boundary(free_unit, DIRICHLET, NEUMANN, [5.0, -5.0])
    assert vals[0] == pytest.approx(-1, abs=1e-3)
    assert vals[1] == pytest.approx(0, abs=1e-3)


def test_ssf_routes_agree(free_unit):
    lam = 0.5 * (PI2 + 4 * PI2)
    xi = ssf_counting(free_unit, DIRICHLET, PERIODIC, 50)
    assert ssf_boundary(free_unit, DIRICHLET, PERIODIC, [lam])[0] == pytest.approx(xi(lam), abs=0.05)
