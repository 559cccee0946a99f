import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sl_krein import build_problem, preset
from sl_krein.boundary import (
    ANTIPERIODIC,
    DIRICHLET,
    NEUMANN,
    PERIODIC,
    CoupledBC,
    SeparatedBC,
)
from sl_krein.errors import (
    BadInterval,
    CountMismatch,
    NotStrictlyPositive,
    OutOfInterval,
    SpectralPoint,
    SpectrumOutOfReach,
    WindowEdgeEigenvalue,
)
from sl_krein.problem import Coefficient
from sl_krein.propagate import common_grid
from sl_krein.spectra import (
    char_normalized,
    count_eigenvalues,
    eigenvalues,
    green_direct,
    green_dirichlet,
    green_general,
    krein_correction,
    krein_resolvent_check,
    kvn_extension,
    kvn_spectrum_check,
    l2_norm,
    lowest_eigenvalues,
    resolvent_apply,
    spectral_floor,
)

PI2 = math.pi**2


def test_char_function_zeros(free_pi, free_unit):
    assert abs(char_normalized(free_pi, DIRICHLET, 4)) < 1e-8
    assert abs(char_normalized(free_pi, DIRICHLET, 2)) > 1e-3
    assert abs(char_normalized(free_unit, NEUMANN, 0)) < 1e-8


def test_dirichlet_free_pi(free_pi):
    spec = eigenvalues(free_pi, DIRICHLET, (0.5, 10))
    assert [m for _, m in spec.eigenvalues] == [1, 1, 1]
    assert np.abs(spec.values - [1, 4, 9]).max() < 1e-8


def test_neumann_free_unit(free_unit):
    spec = eigenvalues(free_unit, NEUMANN, (-0.5, 50))
    assert np.abs(spec.values - np.array([0, 1, 4]) * PI2).max() < 1e-8


def test_periodic_double_eigenvalue(free_unit):
    spec = eigenvalues(free_unit, PERIODIC, (-0.5, 50))
    assert [m for _, m in spec.eigenvalues] == [1, 2]
    assert np.abs(spec.values - np.array([0, 4, 4]) * PI2).max() < 1e-8


def test_antiperiodic(free_unit):
    spec = eigenvalues(free_unit, ANTIPERIODIC, (0, 100))
    assert np.abs(spec.values - np.array([1, 1, 9, 9]) * PI2).max() < 1e-8


def test_window_edge(free_pi):
    with pytest.raises(WindowEdgeEigenvalue):
        eigenvalues(free_pi, DIRICHLET, (0.5, 4))


def test_bad_window(free_pi):
    with pytest.raises(BadInterval):
        eigenvalues(free_pi, DIRICHLET, (10, 0.5))


def test_count(free_pi, step_q):
    assert count_eigenvalues(free_pi, DIRICHLET, 0.5, 30) == 5
    spec = eigenvalues(step_q, PERIODIC, (-5, 200))
    assert count_eigenvalues(step_q, PERIODIC, -5, 200) == spec.values.size


def test_spectral_floor_is_below_ground_state(step_q):
    for bc in (DIRICHLET, NEUMANN, PERIODIC, SeparatedBC(2.5, 2.9).to_ab()):
        floor = spectral_floor(step_q, bc)
        assert floor < lowest_eigenvalues(step_q, bc, 1).values[0]


# angles in (0, 0.05) are strongly attractive Robin ends; see the next tests
ANGLE = st.one_of(st.just(0.0), st.floats(0.05, math.pi - 1e-3))


@settings(max_examples=12, deadline=None)
@given(ANGLE, ANGLE)
def test_separated_eigenvalues_are_zeros(ta, tb):
    pr = preset("step-q")
    bc = SeparatedBC(ta, tb).to_ab()
    spec = lowest_eigenvalues(pr, bc, 4)
    for lam in spec.values[:4]:
        assert abs(char_normalized(pr, bc, lam)) < 1e-6


@pytest.mark.parametrize("ta, tb", [(0.01, 0.0), (0.0, 0.02), (0.05, 0.05)])
def test_strong_robin_states(step_q, ta, tb):
    # pu = cot(theta) u at an end binds a state at q_end - cot^2 theta, up to exp(-cot theta)
    spec = lowest_eigenvalues(step_q, SeparatedBC(ta, tb).to_ab(), 3)
    bound = sorted([-1 / math.tan(t) ** 2 for t in [ta] if t] + [10 - 1 / math.tan(t) ** 2 for t in [tb] if t])
    assert spec.values[: len(bound)] == pytest.approx(bound, rel=1e-8)
    assert spec.values[len(bound)] > 0


@pytest.mark.parametrize("ta, tb", [(0.0, 1e-8), (1e-3, 0.0)])
def test_out_of_reach_fails_fast(step_q, ta, tb):
    with pytest.raises(SpectrumOutOfReach):
        lowest_eigenvalues(step_q, SeparatedBC(ta, tb).to_ab(), 4)


def test_count_refuses_unsampleable_window(free_unit):
    with pytest.raises(CountMismatch):
        count_eigenvalues(free_unit, DIRICHLET, -1e9, 0.0)


@settings(max_examples=10, deadline=None)
@given(st.floats(-10, 10), st.floats(0.5, 3))
def test_neumann_below_dirichlet(q0, p0):
    # min-max: each Neumann eigenvalue lies at or below the matching Dirichlet one
    pr = build_problem(0, 1, p0, Coefficient.piecewise([0.3], [q0, -q0]), 1)
    d = lowest_eigenvalues(pr, DIRICHLET, 4).values[:4]
    n = lowest_eigenvalues(pr, NEUMANN, 4).values[:4]
    assert np.all(n <= d + 1e-9)


def test_green_closed_form(free_unit):
    want = math.sinh(0.5) ** 2 / math.sinh(1)
    assert green_dirichlet(free_unit, -1, 0.5, 0.5) == pytest.approx(want, abs=1e-9)
    assert green_general(free_unit, DIRICHLET, -1, 0.5, 0.5) == pytest.approx(want, abs=1e-9)


def test_green_symmetry(step_q):
    for bc in (DIRICHLET, PERIODIC, SeparatedBC(1.0, 2.0).to_ab()):
        g1 = green_direct(step_q, bc, -3, 0.2, 0.7)
        g2 = green_direct(step_q, bc, -3, 0.7, 0.2)
        assert g1 == pytest.approx(g2, abs=1e-10)


def test_green_errors(free_unit, free_pi):
    with pytest.raises(OutOfInterval):
        green_direct(free_unit, DIRICHLET, -1, 1.5, 0.5)
    with pytest.raises(SpectralPoint):
        green_direct(free_pi, DIRICHLET, 1, 0.5, 0.5)


@pytest.mark.parametrize("bc", [DIRICHLET, NEUMANN, PERIODIC], ids=["D", "N", "P"])
def test_resolvent_inverts_operator(free_unit, bc):
    # f is a C^3 bump supported in (0.2, 0.8); (H - z) f is explicit
    k, z = math.pi / 0.6, -1.0

    def parts(t):
        s = np.where((t > 0.2) & (t < 0.8), np.sin(k * (t - 0.2)), 0.0)
        c = np.cos(k * (t - 0.2))
        f = s**4
        f2 = k * k * (12 * s**2 * c**2 - 4 * s**4)
        return f, -f2 - z * f

    grid = common_grid(free_unit)
    f, g = parts(grid)
    u = resolvent_apply(free_unit, bc, z, g)
    assert l2_norm(free_unit, u - f) < 1e-6


def test_krein_examples(free_unit):
    c = krein_correction(free_unit, NEUMANN, DIRICHLET, -1)
    assert c.kind == "matrix2"
    assert krein_correction(free_unit, DIRICHLET, DIRICHLET, -1).kind == "zero"
    sep = SeparatedBC(math.pi / 2, 0.0)
    c = krein_correction(free_unit, sep.to_ab(), DIRICHLET, -1, canonical=sep)
    assert c.kind == "rank1"
    assert c.specialized.value == pytest.approx(-1 / math.tanh(1), abs=1e-9)
    assert c.specialized.residual < 1e-8


def test_krein_resolvent_identity(free_unit, step_q):
    one = lambda t: np.ones_like(t)
    assert krein_resolvent_check(free_unit, NEUMANN, DIRICHLET, -1, [one]) < 1e-6
    assert krein_resolvent_check(free_unit, NEUMANN, NEUMANN, -1, [one]) < 1e-10
    assert krein_resolvent_check(step_q, PERIODIC, DIRICHLET, -2, [lambda t: t]) < 1e-6


def test_kvn_free_and_step_p(free_unit, step_p):
    assert np.abs(kvn_extension(free_unit).Fm - [[1, 1], [0, 1]]).max() < 1e-8
    k = kvn_extension(step_p)
    assert k.phi == 0 and k.Fm[0, 1] == pytest.approx(0.75, abs=1e-8)


def test_kvn_needs_positive_operator():
    with pytest.raises(NotStrictlyPositive):
        kvn_extension(build_problem(0, 1, 1, -20, 1))


@pytest.mark.parametrize("name", ["free-unit", "step-q", "step-p"])
def test_kvn_kernel(name):
    chk = kvn_spectrum_check(preset(name))
    assert max(abs(v) for v in chk.eigenvalues) < 1e-6
    assert chk.kernel_residual < 1e-6
    if chk.relation_residual is not None:
        assert chk.relation_residual < 1e-6


def test_kvn_eigenvalues_via_coupled(free_unit):
    spec = eigenvalues(free_unit, CoupledBC(0.0, ((1, 1), (0, 1))).to_ab(), (-1, 50))
    assert spec.eigenvalues[0][1] == 2 and abs(spec.eigenvalues[0][0]) < 1e-8
