"""Boundary data maps Lambda_{from}^{to}(z).

``Lambda`` sends the ``from``-trace of a solution of (tau - z) u = 0 to its
``to``-trace.  It is evaluated from any solution basis ``Y`` as
``L_to Y (L_from Y)^{-1}``, which does not depend on the basis.
"""

from __future__ import annotations

import cmath
import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .boundary import ABPair, SeparatedBC, connection_matrices, trace_matrices
from .errors import SingularS, SpectralPoint, WrongCoefficients
from .problem import Problem
from .propagate import DEFAULT_TOL, solution_frames, transfer

SPECTRAL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class BdmValue:
    z: complex
    M: np.ndarray
    from_bc: ABPair
    to_bc: ABPair


def _check_regular(G: np.ndarray, z, what: str) -> None:
    # column-norm scaling would shrink with the vanishing column, so use the max entry
    if abs(np.linalg.det(G)) < SPECTRAL_TOL * np.abs(G).max() ** 2:
        raise SpectralPoint(f"z = {complex(z)} is numerically an eigenvalue of the {what} operator")


def bdm_matrix(problem: Problem, from_bc: ABPair, to_bc: ABPair, z, tol: float = DEFAULT_TOL) -> np.ndarray:
    Y = solution_frames(problem, z, tol)
    G = from_bc.trace_op @ Y
    _check_regular(G, z, from_bc.label or "from")
    return np.linalg.solve(G.T, (to_bc.trace_op @ Y).T).T


def bdm_eval(problem: Problem, from_bc: ABPair, to_bc: ABPair, z, tol: float = DEFAULT_TOL) -> BdmValue:
    """Lambda_{from}^{to}(z).

    Raises:
        SpectralPoint: z is an eigenvalue of the ``from`` operator.
    """
    return BdmValue(complex(z), bdm_matrix(problem, from_bc, to_bc, z, tol), from_bc, to_bc)


def bdm_compose_check(problem: Problem, bc1: ABPair, bc2: ABPair, bc3: ABPair, z, tol: float = DEFAULT_TOL) -> float:
    """Max-norm residual of Lambda_{2}^{3} Lambda_{1}^{2} - Lambda_{1}^{3}."""
    L12 = bdm_matrix(problem, bc1, bc2, z, tol)
    L23 = bdm_matrix(problem, bc2, bc3, z, tol)
    L13 = bdm_matrix(problem, bc1, bc3, z, tol)
    return float(np.abs(L23 @ L12 - L13).max())


def fundamental_frames(problem: Problem, z, tol: float = DEFAULT_TOL) -> np.ndarray:
    """4 x 2 frames of the two-point basis (u1, u2) built from the initial-value basis.

    Raises:
        SpectralPoint: z is a Dirichlet eigenvalue.
    """
    Y = np.vstack([np.eye(2), transfer(problem, z, tol)])
    M = np.array([[Y[0, 0], Y[0, 1]], [Y[2, 0], Y[2, 1]]])
    _check_regular(M, z, "Dirichlet")
    C = np.linalg.solve(M, np.array([[0.0, 1.0], [1.0, 0.0]]))
    return Y @ C


def dirichlet_to_neumann(problem: Problem, z, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Lambda_D^N(z) = [[u2'(a), u1'(a)], [-u2'(b), -u1'(b)]] from the two-point basis."""
    F = fundamental_frames(problem, z, tol)
    u1, u2 = F[:, 0], F[:, 1]
    return np.array([[u2[1], u1[1]], [-u2[3], -u1[3]]])


def bdm_via_fractional(problem: Problem, from_bc: ABPair, to_bc: ABPair, z, tol: float = DEFAULT_TOL) -> BdmValue:
    """Lambda through the Dirichlet pivot: (D' + N' L)(D + N L)^{-1} with L = Lambda_D^N.

    Raises:
        SpectralPoint: z is a Dirichlet eigenvalue or an eigenvalue of ``from``.
    """
    L = dirichlet_to_neumann(problem, z, tol)
    f, t = trace_matrices(from_bc), trace_matrices(to_bc)
    den = f.D + f.N @ L
    _check_regular(den, z, from_bc.label or "from")
    M = np.linalg.solve(den.T, (t.D + t.N @ L).T).T
    return BdmValue(complex(z), M, from_bc, to_bc)


def _imag_part(M: np.ndarray) -> np.ndarray:
    return (M - M.conj().T) / 2j


def herglotz_probe(problem: Problem, from_bc: ABPair, to_bc: ABPair, z, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Eigenvalues of Im(Lambda(z) S*) for Im z > 0, ascending.

    Raises:
        ValueError: Im z <= 0.
        SingularS: the connection matrix S is not invertible.
    """
    z = complex(z)
    if z.imag <= 0:
        raise ValueError("the Herglotz probe needs Im z > 0")
    _, S = connection_matrices(to_bc, from_bc)
    if abs(np.linalg.det(S)) <= SPECTRAL_TOL * max(1.0, np.abs(S).max() ** 2):
        raise SingularS("S has rank < 2; use the scalar rank-one form instead")
    M = bdm_matrix(problem, from_bc, to_bc, z, tol) @ S.conj().T
    return np.linalg.eigvalsh(_imag_part(M))


def reflection_residual(problem: Problem, from_bc: ABPair, to_bc: ABPair, z, tol: float = DEFAULT_TOL) -> float:
    """|| Lambda(conj z) S* - (Lambda(z) S*)* ||, both sides evaluated directly."""
    z = complex(z)
    _, S = connection_matrices(to_bc, from_bc)
    left = bdm_matrix(problem, from_bc, to_bc, z.conjugate(), tol) @ S.conj().T
    right = (bdm_matrix(problem, from_bc, to_bc, z, tol) @ S.conj().T).conj().T
    return float(np.abs(left - right).max())


@dataclass(frozen=True)
class AsymptoticRow:
    y: float
    lambda11: complex
    lambda22: complex
    target11: complex
    target22: complex
    dev11: float
    dev22: float


def _principal_sqrt(z: complex) -> complex:
    """Principal branch, cut along the negative reals."""
    return cmath.sqrt(z)


def m_asymptotics(problem: Problem, sep: SeparatedBC, heights, tol: float = DEFAULT_TOL) -> list[AsymptoticRow]:
    """Diagonal entries of Lambda_{theta}^{theta + pi/2}(iy) against their large-y limits.

    The (1,1) entry is the m-function at a and tends to cot(theta_a), or is
    asymptotic to i z^{1/2} when theta_a = 0.  The (2,2) entry is minus the
    m-function at b and tends to cot(theta_b), or to i z^{1/2} when
    theta_b = 0.  For the angular cases ``dev`` is the absolute deviation from
    the limit; for theta = 0 it is ``|entry / (i z^{1/2}) - 1|``.  z^{1/2} is
    the principal branch.

    Raises:
        WrongCoefficients: p or r is not identically 1.
    """
    if not problem.unit_weights:
        raise WrongCoefficients("the m-function asymptotics assume p = r = 1")
    frm = sep.to_ab()
    to = SeparatedBC((sep.theta_a + math.pi / 2) % math.pi, (sep.theta_b + math.pi / 2) % math.pi).to_ab()
    rows = []
    for y in heights:
        z = 1j * float(y)
        M = bdm_matrix(problem, frm, to, z, tol)
        root = 1j * _principal_sqrt(z)
        out = []
        for entry, theta in ((M[0, 0], sep.theta_a), (M[1, 1], sep.theta_b)):
            if theta == 0.0:
                target = root
                dev = abs(entry / root - 1)
            else:
                target = complex(1 / math.tan(theta))
                dev = abs(entry - target)
            out.append((complex(entry), target, float(dev)))
        rows.append(AsymptoticRow(float(y), out[0][0], out[1][0], out[0][1], out[1][1], out[0][2], out[1][2]))
    return rows


def bdm_grid_csv(values: list[BdmValue]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ["z_re", "z_im"]
    for i in (1, 2):
        for j in (1, 2):
            cols += [f"re_m{i}{j}", f"im_m{i}{j}"]
    w.writerow(cols)
    for v in values:
        row = [repr(v.z.real), repr(v.z.imag)]
        for x in v.M.ravel():
            row += [repr(float(x.real)), repr(float(x.imag))]
        w.writerow(row)
    return buf.getvalue()

