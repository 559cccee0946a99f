import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sl_krein.boundary import (
    ANTIPERIODIC,
    DIRICHLET,
    NEUMANN,
    PERIODIC,
    CoupledBC,
    DNPair,
    SeparatedBC,
    UnitaryBC,
    ab_to_dn,
    apply_trace,
    bc_from_json,
    bc_to_json,
    canonical_to_ab,
    canonicalize,
    complement,
    connection_matrices,
    dn_to_ab,
    dn_to_unitary,
    equivalent,
    random_ab,
    random_nonsingular,
    random_unitary,
    to_unitary,
    trace_matrices,
    unitary_to_dn,
    validate_ab,
)
from sl_krein.errors import BadDocument, NotLagrangian, RankDeficient

I2 = np.eye(2)
seeds = st.integers(0, 2**32 - 1)


def test_named_pairs_are_valid():
    validate_ab([[1, 0], [0, 0]], [[0, 0], [-1, 0]])
    validate_ab([[0, 1], [0, 0]], [[0, 0], [0, 1]])


def test_zero_pair_rank_deficient():
    with pytest.raises(RankDeficient):
        validate_ab(np.zeros((2, 2)), np.zeros((2, 2)))


def test_non_lagrangian_rejected():
    # u(a) = 0 and u(b) = 0 replaced by u(a) = 0, pu(a) = 0: not self-adjoint
    with pytest.raises(NotLagrangian):
        validate_ab(I2, np.zeros((2, 2)))


def test_trace_matrices_dirichlet_neumann():
    d = trace_matrices(DIRICHLET)
    assert np.allclose(d.D, I2) and np.allclose(d.N, 0)
    assert np.allclose(d.Dperp, 0) and np.allclose(d.Nperp, I2)
    n = trace_matrices(NEUMANN)
    assert np.allclose(n.D, 0) and np.allclose(n.N, I2)
    assert np.allclose(n.Dperp, -I2) and np.allclose(n.Nperp, 0)


def test_complement_of_dirichlet_is_neumann():
    assert equivalent(complement(DIRICHLET), NEUMANN)


def test_connection_matrices():
    T, S = connection_matrices(NEUMANN, DIRICHLET)
    assert np.allclose(S, I2)
    T, S = connection_matrices(PERIODIC, PERIODIC)
    assert np.allclose(T, I2) and np.allclose(S, 0)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_connection_antisymmetry(seed):
    rng = np.random.default_rng(seed)
    x, y = random_ab(rng), random_ab(rng)
    _, Sxy = connection_matrices(x, y)
    _, Syx = connection_matrices(y, x)
    assert np.allclose(Sxy, -Syx.conj().T, atol=1e-10)


def test_dn_of_dirichlet():
    dn = ab_to_dn(DIRICHLET)
    assert np.allclose(dn.XD, I2) and np.allclose(dn.XN, 0)
    assert equivalent(dn_to_ab(DNPair(I2, np.zeros((2, 2)))), DIRICHLET)


def test_unitary_of_named():
    assert np.allclose(to_unitary(DIRICHLET), -I2)
    assert np.allclose(to_unitary(NEUMANN), I2)


def test_non_unitary_rejected():
    with pytest.raises(NotLagrangian):
        unitary_to_dn(UnitaryBC(2 * I2))


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_unitary_round_trip(seed):
    U = random_unitary(np.random.default_rng(seed))
    back = dn_to_unitary(unitary_to_dn(UnitaryBC(U))).U
    assert np.abs(back - U).max() < 1e-12


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_ab_dn_round_trip(seed):
    x = random_ab(np.random.default_rng(seed), "mixed")
    assert equivalent(dn_to_ab(ab_to_dn(x)), x)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_left_multiplication_invariance(seed):
    rng = np.random.default_rng(seed)
    x = random_ab(rng, "mixed")
    C = random_nonsingular(rng)
    assert equivalent(x, validate_ab(C @ x.A, C @ x.B))


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_canonical_round_trip(seed):
    x = random_ab(np.random.default_rng(seed), "mixed")
    c = canonicalize(x)
    assert equivalent(canonical_to_ab(c), x)
    if isinstance(c, CoupledBC):
        assert np.trace(c.Fm) >= -1e-12
        assert np.linalg.det(c.Fm) == pytest.approx(1.0)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_trace_decomposition(seed):
    rng = np.random.default_rng(seed)
    x = random_ab(rng)
    tm = trace_matrices(x)
    frames = rng.normal(size=(4, 5)) + 1j * rng.normal(size=(4, 5))
    gd = np.vstack([frames[0], frames[2]])
    gn = np.vstack([frames[1], -frames[3]])
    assert np.abs(apply_trace(x, frames) - (tm.D @ gd + tm.N @ gn)).max() < 1e-12 * max(1, np.abs(frames).max())


def test_trace_examples():
    assert np.allclose(apply_trace(DIRICHLET, [0, 1, 0, -1]), 0)
    assert np.allclose(apply_trace(NEUMANN, [1, 0, 1, 0]), 0)


def test_canonical_examples():
    assert canonicalize(DIRICHLET) == SeparatedBC(0.0, 0.0)
    assert canonicalize(validate_ab(2 * DIRICHLET.A, 2 * DIRICHLET.B)) == SeparatedBC(0.0, 0.0)
    c = canonicalize(validate_ab(I2, I2))
    assert c.phi == 0.0 and np.allclose(c.Fm, I2)
    c = canonicalize(ANTIPERIODIC)
    assert c.phi == pytest.approx(math.pi) and np.allclose(c.Fm, I2)


def test_coupled_to_ab():
    ab = CoupledBC(0.0, ((1, 0), (0, 1))).to_ab()
    assert np.allclose(ab.A, I2) and np.allclose(ab.B, I2)
    ab = CoupledBC(0.0, ((1, 1), (0, 1))).to_ab()
    assert np.allclose(ab.A, [[1, 1], [0, 1]])
    assert equivalent(CoupledBC(math.pi, ((1, 0), (0, 1))).to_ab(), validate_ab(-I2, I2))


def test_coupled_needs_sl2():
    with pytest.raises(BadDocument):
        CoupledBC(0.0, ((2, 0), (0, 1)))


def test_separated_angle_range():
    with pytest.raises(BadDocument):
        SeparatedBC(math.pi, 0)


def test_equivalence_examples():
    C = np.array([[2, 1], [0, 3]])
    assert equivalent(DIRICHLET, validate_ab(C @ DIRICHLET.A, C @ DIRICHLET.B))
    assert not equivalent(DIRICHLET, NEUMANN)
    assert equivalent(PERIODIC, PERIODIC)


@pytest.mark.parametrize("kind", ["ab", "dn", "unitary", "canonical"])
def test_json_round_trip(kind):
    x = random_ab(np.random.default_rng(7), "mixed")
    doc = bc_to_json(x, kind)
    if kind == "dn":
        doc = {"kind": "ab", **{k: v for k, v in bc_to_json(dn_to_ab(ab_to_dn(x))).items() if k != "kind"}}
    assert equivalent(bc_from_json(doc), x)


def test_json_named_and_errors():
    assert bc_from_json("periodic") is PERIODIC
    with pytest.raises(BadDocument):
        bc_from_json("robin")
    with pytest.raises(BadDocument):
        bc_from_json({"kind": "named", "name": "kvn"})
    with pytest.raises(BadDocument):
        bc_from_json({"kind": "separated"})
