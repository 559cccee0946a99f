import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sl_krein import preset
from sl_krein.bdm import (
    bdm_compose_check,
    bdm_eval,
    bdm_grid_csv,
    bdm_matrix,
    bdm_via_fractional,
    dirichlet_to_neumann,
    herglotz_probe,
    m_asymptotics,
    reflection_residual,
)
from sl_krein.boundary import DIRICHLET, NEUMANN, PERIODIC, SeparatedBC, random_ab
from sl_krein.errors import SingularS, SpectralPoint, WrongCoefficients

COTH1, CSCH1 = 1 / math.tanh(1), 1 / math.sinh(1)
DN_FREE = np.array([[-COTH1, CSCH1], [CSCH1, -COTH1]])
seeds = st.integers(0, 2**32 - 1)


def test_dirichlet_to_neumann_closed_form(free_unit):
    assert np.abs(bdm_eval(free_unit, DIRICHLET, NEUMANN, -1).M - DN_FREE).max() < 1e-9
    assert np.abs(dirichlet_to_neumann(free_unit, -1) - DN_FREE).max() < 1e-9


@pytest.mark.parametrize("z", [-1, 2 + 3j, 50, -400, 0.3 - 7j])
def test_det_dirichlet_to_neumann_is_minus_z(free_unit, z):
    d = np.linalg.det(bdm_matrix(free_unit, DIRICHLET, NEUMANN, z))
    assert d == pytest.approx(-z, rel=1e-8)


def test_identity(step_q):
    for bc in (DIRICHLET, NEUMANN, PERIODIC):
        assert np.allclose(bdm_matrix(step_q, bc, bc, -1), np.eye(2), atol=1e-12)


def test_spectral_point(free_pi):
    with pytest.raises(SpectralPoint):
        bdm_eval(free_pi, DIRICHLET, NEUMANN, 1)


def test_compose_dirichlet_neumann_dirichlet(free_unit):
    assert bdm_compose_check(free_unit, DIRICHLET, NEUMANN, DIRICHLET, -1) < 1e-8
    assert bdm_compose_check(free_unit, NEUMANN, NEUMANN, NEUMANN, -1) < 1e-14


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_compose_random(seed):
    rng = np.random.default_rng(seed)
    x, y, w = (random_ab(rng, "mixed") for _ in range(3))
    assert bdm_compose_check(preset("step-q"), x, y, w, 2 + 3j) < 1e-8


@settings(max_examples=20, deadline=None)
@given(seeds, st.floats(-3, 3), st.floats(0.2, 5))
def test_fractional_route_agrees(seed, x, y):
    rng = np.random.default_rng(seed)
    f, t = random_ab(rng, "mixed"), random_ab(rng, "mixed")
    pr = preset("step-q")
    z = complex(x, y)
    direct = bdm_matrix(pr, f, t, z)
    frac = bdm_via_fractional(pr, f, t, z).M
    assert np.abs(direct - frac).max() < 1e-8 * max(1.0, np.abs(direct).max())


def test_fractional_from_dirichlet_reduces_to_dn(free_unit):
    assert np.abs(bdm_via_fractional(free_unit, DIRICHLET, NEUMANN, -1).M - DN_FREE).max() < 1e-9


def test_herglotz_dirichlet_neumann(free_unit):
    assert np.all(herglotz_probe(free_unit, DIRICHLET, NEUMANN, 1j) > 0)


def test_herglotz_rejects_lower_half_plane(free_unit):
    with pytest.raises(ValueError):
        herglotz_probe(free_unit, DIRICHLET, NEUMANN, -1j)


def test_herglotz_rank_one_s(free_unit):
    with pytest.raises(SingularS):
        herglotz_probe(free_unit, DIRICHLET, SeparatedBC(1.0, 0.0).to_ab(), 1j)


def test_reflection(free_unit):
    assert reflection_residual(free_unit, DIRICHLET, NEUMANN, 1 + 1j) < 1e-8


@settings(max_examples=15, deadline=None)
@given(seeds, st.floats(-5, 5), st.floats(0.1, 5))
def test_herglotz_random_pairs(seed, x, y):
    rng = np.random.default_rng(seed)
    f, t = random_ab(rng), random_ab(rng)
    ev = herglotz_probe(preset("step-q"), f, t, complex(x, y))
    assert ev[0] > 0


def test_m_asymptotics(free_unit, step_q):
    row = m_asymptotics(free_unit, SeparatedBC(math.pi / 2, math.pi / 2), [1e4])[0]
    assert abs(row.lambda11) < 1e-1
    row = m_asymptotics(free_unit, SeparatedBC(0.0, 0.0), [1e4])[0]
    assert row.dev11 < 1e-2 and row.dev22 < 1e-2
    row = m_asymptotics(step_q, SeparatedBC(math.pi / 4, math.pi / 4), [1e4])[0]
    assert row.dev11 < 1e-1


def test_m_asymptotics_needs_unit_weights(step_p):
    with pytest.raises(WrongCoefficients):
        m_asymptotics(step_p, SeparatedBC(0.0, 0.0), [10])


def test_grid_csv(free_unit):
    text = bdm_grid_csv([bdm_eval(free_unit, DIRICHLET, NEUMANN, z) for z in (-1, 1j)])
    lines = text.strip().split("\n")
    assert lines[0].startswith("z_re,z_im,re_m11") and len(lines) == 3
