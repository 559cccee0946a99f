import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sl_krein import preset
from sl_krein.errors import DirichletEigenvalue, GridMismatch
from sl_krein.propagate import (
    common_grid,
    deficiency_basis,
    fundamental_pair,
    gram_wronskian,
    l2_inner,
    propagate,
    solution_frames,
    solve_iv,
    transfer,
    transfer_back,
    wronskian,
)


def test_constant_solution(free_unit):
    s = solve_iv(free_unit, 0, 1, 0)
    assert np.allclose(s.u, 1, atol=1e-12)
    assert np.allclose(s.pu, 0, atol=1e-12)


def test_linear_solution(free_unit):
    s = solve_iv(free_unit, 0, 0, 1)
    assert np.allclose(s.u, s.grid, atol=1e-12)
    assert np.allclose(s.pu, 1, atol=1e-12)


def test_sine_on_free_pi(free_pi):
    f = solve_iv(free_pi, 1, 0, 1).frame
    assert abs(f.ub) < 1e-9
    assert f.pub == pytest.approx(-1, abs=1e-9)


def test_non_positive_tol_rejected(free_unit):
    with pytest.raises(ValueError):
        solve_iv(free_unit, 0, 1, 0, tol=0)


def test_fundamental_pair_closed_form(free_unit):
    fp = fundamental_pair(free_unit, -1)
    s1 = math.sinh(1)
    assert np.allclose(fp.u1.u, np.sinh(fp.u1.grid) / s1, atol=1e-10)
    assert np.allclose(fp.u2.u, np.sinh(1 - fp.u2.grid) / s1, atol=1e-10)
    want = [1, -1 / math.tanh(1), 0, -1 / s1]
    assert np.allclose(fp.u2.frame.as_array(), want, atol=1e-10)


def test_fundamental_pair_at_dirichlet_eigenvalue(free_pi):
    with pytest.raises(DirichletEigenvalue):
        fundamental_pair(free_pi, 1)


def test_conjugate_real_z_gives_same_pair(free_unit):
    f1 = fundamental_pair(free_unit, -1).frames()
    f2 = fundamental_pair(free_unit, np.conj(-1 + 0j)).frames()
    assert np.array_equal(f1, f2)
    assert np.all(f1.imag == 0)


def test_wronskian_values(free_unit):
    fp = fundamental_pair(free_unit, -1)
    w = wronskian(fp.u2, fp.u1)
    assert w == pytest.approx(1 / math.sinh(1), abs=1e-10)
    assert w == pytest.approx(-fp.u2.frame.pub, abs=1e-10)
    assert abs(wronskian(fp.u1, fp.u1)) < 1e-15


def test_wronskian_requires_same_z(free_unit):
    with pytest.raises(GridMismatch):
        wronskian(solve_iv(free_unit, 1, 1, 0), solve_iv(free_unit, 2, 1, 0))


def test_inner_products_match_boundary_terms(free_unit):
    plus = fundamental_pair(free_unit, 1j)
    minus = fundamental_pair(free_unit, -1j)
    k = -1 / 2j
    g11 = k * (plus.u1.frame.pub - minus.u1.frame.pub)
    g12 = k * (plus.u2.frame.pub + minus.u1.frame.pua)
    assert l2_inner(plus.u1, plus.u1, free_unit) == pytest.approx(g11, abs=1e-9)
    assert l2_inner(plus.u1, plus.u2, free_unit) == pytest.approx(g12, abs=1e-9)


def test_norm_is_real_and_positive(step_q):
    s = solve_iv(step_q, 2 + 1j, 0.3, -1)
    n = l2_inner(s, s, step_q)
    assert abs(n.imag) < 1e-14 * abs(n) and n.real > 0


def test_deficiency_basis(free_unit):
    d = deficiency_basis(free_unit)
    assert np.allclose(d.G_plus, d.G_plus.conj().T, atol=1e-12)
    assert np.all(np.linalg.eigvalsh(d.G_plus) > 0)
    assert np.allclose(d.G_minus, d.G_plus.conj(), atol=1e-10)
    assert d.gram_residual < 1e-8


def test_gram_wronskian_matches_quadrature(step_q):
    fp = fundamental_pair(step_q, 0.5 + 2j)
    G = gram_wronskian(fp.frames(), fp.z)
    assert l2_inner(fp.u1, fp.u2, step_q) == pytest.approx(G[0, 1], abs=1e-9)


def test_transfer_back_inverts_transfer(step_p):
    T = transfer(step_p, 3 - 2j)
    assert np.allclose(transfer_back(step_p, 3 - 2j) @ T, np.eye(2), atol=1e-9)


@pytest.mark.parametrize("m", [0.3, 0.5, 0.7])
def test_stop_splits_the_transfer(step_p, m):
    z = 3 - 2j
    fwd = propagate(step_p, z, np.eye(2), stop=m)
    back = propagate(step_p, z, np.eye(2), forward=False, stop=m)
    assert np.allclose(back @ transfer(step_p, z), fwd, atol=1e-9)


def test_stop_excludes_grid(step_p):
    with pytest.raises(ValueError):
        propagate(step_p, 1.0, np.eye(2), grid=common_grid(step_p), stop=0.5)


def test_grid_contains_breakpoints(step_q):
    g = common_grid(step_q)
    assert 0.5 in g and g[0] == 0 and g[-1] == 1


@settings(max_examples=25, deadline=None)
@given(st.floats(-50, 400), st.floats(-20, 20))
def test_transfer_is_unimodular(x, y):
    # det T = W(phi, psi) = 1 for every z
    T = transfer(preset("step-q"), complex(x, y))
    assert abs(np.linalg.det(T) - 1) < 1e-7 * max(1.0, np.abs(T).max() ** 2)


@settings(max_examples=25, deadline=None)
@given(st.floats(-30, 30), st.floats(-30, 30))
def test_solution_frames_are_independent(x, y):
    Y = solution_frames(preset("free-unit"), complex(x, y))
    wa = Y[0, 0] * Y[1, 1] - Y[1, 0] * Y[0, 1]
    wb = Y[2, 0] * Y[3, 1] - Y[3, 0] * Y[2, 1]
    assert abs(wa) > 0
    assert abs(wa - wb) <= 1e-7 * max(1.0, abs(wa))


@pytest.mark.parametrize("z", [-100, -7.5, 0.3, 2 + 5j, 60 - 40j, 99])
def test_free_frames_match_closed_form(free_unit, z):
    # u1 = sin(kx)/sin(k), u2 = sin(k(1-x))/sin(k) with k = sqrt(z)
    k = np.sqrt(complex(z))
    s = np.sin(k)
    want = np.array(
        [[0, 1], [k / s, -k * np.cos(k) / s], [1, 0], [k * np.cos(k) / s, -k / s]],
        dtype=complex,
    )
    got = fundamental_pair(free_unit, z).frames()
    assert np.abs(got - want).max() < 1e-8 * max(1.0, np.abs(want).max())


@settings(max_examples=20, deadline=None)
@given(st.floats(-50, 50), st.floats(0.1, 50))
def test_conjugation_symmetry(x, y):
    pr = preset("step-q")
    z = complex(x, y)
    assert np.allclose(transfer(pr, z.conjugate()), np.conj(transfer(pr, z)), rtol=1e-8, atol=1e-10)


def test_transport_identity(step_q):
    from sl_krein.spectra import l2_norm, resolvent_dirichlet

    z, zp = 2 + 1j, -3.0
    for j in (0, 1):
        pick = lambda fp: (fp.u1, fp.u2)[j]
        uz, uzp = pick(fundamental_pair(step_q, z)), pick(fundamental_pair(step_q, zp))
        moved = uzp.u + (z - zp) * resolvent_dirichlet(step_q, z, uzp.u)
        assert l2_norm(step_q, moved - uz.u) < 1e-8
