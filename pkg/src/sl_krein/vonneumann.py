"""Von Neumann's unitary between the deficiency subspaces N_+ and N_-.

Every self-adjoint extension H_{A,B} has
dom H_{A,B} = dom H_min + N_+ + U N_+ for a unique isometry U: N_+ -> N_-.
Two representations are built here:

* ``eq38``: the bases {u_1(+-i), u_2(+-i)} normalized by u_1(a) = 0,
  u_1(b) = 1, u_2(a) = 1, u_2(b) = 0, with closed case formulas for
  separated and coupled conditions;
* ``gamma:<ref>``: bases with gamma_ref(u) = e_1 and gamma_ref(v) = e_2,
  where U = -Lambda_ref^bc(-i)^{-1} Lambda_ref^bc(i).

For a Dirichlet reference the gamma basis is {u_2, u_1}: the same functions
in swapped order.  The bases are not orthonormal, so isometry is checked as
U* G_- U = G_+ with the Gram matrices G_+-.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bdm import bdm_matrix, fundamental_frames
from .boundary import (
    DIRICHLET,
    ABPair,
    CoupledBC,
    SeparatedBC,
    canonicalize,
    complex_matrix_json,
)
from .problem import Problem
from .propagate import (
    DEFAULT_TOL,
    common_grid,
    deficiency_basis,
    gram_quadrature,
    iv_paths,
)
from .spectra import SIGMA, _path_frames

ISOMETRY_TOL = 1e-7
F12_ZERO = 1e-12
ILL_CONDITIONED = 1e10


@dataclass(frozen=True, eq=False)
class VnUnitary:
    """Matrix of U in a recorded pair of bases.

    Attributes:
        U: 2 x 2 matrix; column k holds the N_- coordinates of U applied to
            the k-th N_+ basis element.
        basis: ``"eq38"`` or ``"gamma:<ref label>"``.
        G_plus: Gram matrix (b_j, b_k) of the N_+ basis.
        G_minus: Gram matrix of the N_- basis.
        condition: condition number of the matrix inverted on the way, large
            when the construction is close to breaking down.
    """

    U: np.ndarray
    basis: str
    G_plus: np.ndarray
    G_minus: np.ndarray
    condition: float = 1.0

    @property
    def ill_conditioned(self) -> bool:
        return self.condition > ILL_CONDITIONED

    def to_json(self) -> dict:
        return {
            "basis": self.basis,
            "U": complex_matrix_json(self.U),
            "G_plus": complex_matrix_json(self.G_plus),
            "G_minus": complex_matrix_json(self.G_minus),
            "isometry_residual": isometry_residual(self),
        }


def isometry_residual(v: VnUnitary) -> float:
    """max |U* G_- U - G_+|."""
    return float(np.abs(v.U.conj().T @ v.G_minus @ v.U - v.G_plus).max())


# ---------------------------------------------------------------------------
# bases and Gram matrices


def _gamma_basis(problem: Problem, ref: ABPair, z: complex, tol: float):
    """Paths of the gamma_ref-normalized basis at z and the frames of both."""
    phi, psi = iv_paths(problem, z, tol, common_grid(problem))
    M = ref.trace_op @ _path_frames(phi, psi)
    C = np.linalg.inv(M)
    return phi.combine(psi, C[0, 0], C[1, 0]), phi.combine(psi, C[0, 1], C[1, 1])


def gram_eq38_closed(problem: Problem, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """G_+ and G_- of the eq38 bases from boundary values of quasi-derivatives.

    Green's identity for u_j(-+i) and u_k(+-i) collapses each inner product
    to a difference of u^{[1]} values at the endpoints.
    """
    plus = fundamental_frames(problem, 1j, tol)
    minus = fundamental_frames(problem, -1j, tol)

    def gram(fp: np.ndarray, fm: np.ndarray, s: int) -> np.ndarray:
        # fp: frames at s*i, fm: frames at -s*i
        u1a, u1b, u2a, u2b = fp[1, 0], fp[3, 0], fp[1, 1], fp[3, 1]
        v1a, v1b, v2a, v2b = fm[1, 0], fm[3, 0], fm[1, 1], fm[3, 1]
        k = -1.0 / (2j * s)
        return np.array(
            [
                [k * (u1b - v1b), k * (u2b + v1a)],
                [-k * (v2b + u1a), k * (v2a - u2a)],
            ]
        )

    return gram(plus, minus, 1), gram(minus, plus, -1)


def gram_eq38_quadrature(problem: Problem, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """G_+ and G_- of the eq38 bases by Simpson quadrature."""
    basis = deficiency_basis(problem, tol)
    return basis.G_plus, basis.G_minus


def eq38_to_gamma(problem: Problem, ref: ABPair, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Change-of-basis matrices C_+, C_- with gamma basis = eq38 basis @ C."""
    out = []
    for z in (1j, -1j):
        Fr = fundamental_frames(problem, z, tol)
        out.append(np.linalg.inv(ref.trace_op @ Fr))
    return out[0], out[1]


def to_eq38(v: VnUnitary, problem: Problem, ref: ABPair, tol: float = DEFAULT_TOL) -> VnUnitary:
    """Re-express a gamma_ref representation in the eq38 bases.

    With B_gamma = B_eq38 C, the matrix transforms as C_- U C_+^{-1} and the
    Gram matrices as C^{-*} G C^{-1}.
    """
    Cp, Cm = eq38_to_gamma(problem, ref, tol)
    Cpi, Cmi = np.linalg.inv(Cp), np.linalg.inv(Cm)
    U = Cm @ v.U @ Cpi
    Gp = Cpi.conj().T @ v.G_plus @ Cpi
    Gm = Cmi.conj().T @ v.G_minus @ Cmi
    return VnUnitary(U, "eq38", Gp, Gm, v.condition)


# ---------------------------------------------------------------------------
# routes


def vn_unitary_general(problem: Problem, bc: ABPair, ref: ABPair = DIRICHLET, tol: float = DEFAULT_TOL) -> VnUnitary:
    """U = -Lambda_ref^bc(-i)^{-1} Lambda_ref^bc(i) in the gamma_ref bases.

    Gram matrices come from quadrature of the normalized solutions.
    """
    Lp = bdm_matrix(problem, ref, bc, 1j, tol)
    Lm = bdm_matrix(problem, ref, bc, -1j, tol)
    U = -np.linalg.solve(Lm, Lp)
    Gp = gram_quadrature(list(_gamma_basis(problem, ref, 1j, tol)), problem)
    Gm = gram_quadrature(list(_gamma_basis(problem, ref, -1j, tol)), problem)
    label = ref.label or "ref"
    return VnUnitary(U, f"gamma:{label}", Gp, Gm, float(np.linalg.cond(Lm)))


def _quasi(problem: Problem, tol: float):
    """u_j^{[1]} at a and b for z = i and z = -i."""
    out = {}
    for s, z in ((1, 1j), (-1, -1j)):
        Fr = fundamental_frames(problem, z, tol)
        out[s] = {"u1a": Fr[1, 0], "u1b": Fr[3, 0], "u2a": Fr[1, 1], "u2b": Fr[3, 1]}
    return out


def vn_unitary_separated(problem: Problem, sep: SeparatedBC, tol: float = DEFAULT_TOL) -> VnUnitary:
    """Closed case formulas for u(a) cos ta + pu(a) sin ta = 0 = u(b) cos tb - pu(b) sin tb."""
    ta, tb = sep.theta_a, sep.theta_b
    w = _quasi(problem, tol)
    p, m = w[1], w[-1]
    cond = 1.0
    if ta != 0 and tb != 0:

        def Dm(v):
            return np.array(
                [[1 / math.tan(tb) - v["u1b"], -v["u2b"]], [v["u1a"], 1 / math.tan(ta) + v["u2a"]]]
            )

        U = -np.linalg.solve(Dm(m), Dm(p))
        cond = float(np.linalg.cond(Dm(m)))
    elif ta != 0:
        dp, dm = 1 / math.tan(ta) + p["u2a"], 1 / math.tan(ta) + m["u2a"]
        U = np.array([[-1.0, 0.0], [-(m["u2b"] + p["u1a"]) / dm, -dp / dm]], dtype=complex)
    elif tb != 0:
        dp, dm = 1 / math.tan(tb) - p["u1b"], 1 / math.tan(tb) - m["u1b"]
        U = np.array([[-dp / dm, (p["u2b"] + m["u1a"]) / dm], [0.0, -1.0]], dtype=complex)
    else:
        U = -np.eye(2, dtype=complex)
    Gp, Gm = gram_eq38_closed(problem, tol)
    return VnUnitary(U, "eq38", Gp, Gm, cond)


def vn_unitary_coupled(problem: Problem, c: CoupledBC, tol: float = DEFAULT_TOL) -> VnUnitary:
    """Closed case formulas for the coupled condition (phi, F); the branch is |F_12| < 1e-12."""
    F, ph = c.Fm, c.phi
    e = np.exp(1j * ph)
    w = _quasi(problem, tol)
    p, m = w[1], w[-1]
    if abs(F[0, 1]) >= F12_ZERO:

        def Q(v):
            return np.array(
                [
                    [F[1, 1] / F[0, 1] - v["u1b"], -e / F[0, 1] - v["u2b"]],
                    [-np.conj(e) / F[0, 1] + v["u1a"], F[0, 0] / F[0, 1] + v["u2a"]],
                ]
            )

        U = -np.linalg.solve(Q(m), Q(p))
        cond = float(np.linalg.cond(Q(m)))
    else:
        f22, ec = F[1, 1], np.conj(e)
        qm = F[1, 0] * f22 + f22**2 * m["u2a"] + e * f22 * m["u1a"] - ec * f22 * m["u2b"] - m["u1b"]
        c11 = p["u1b"] - m["u1b"] - e * f22 * (m["u2b"] + p["u1a"])
        c12 = f22 * (ec * (p["u1b"] - m["u1b"]) - f22 * (m["u2b"] + p["u1a"]))
        c22 = f22 * (f22 * (m["u2a"] - p["u2a"]) + ec * (p["u2b"] + m["u1a"]))
        c21 = e * f22 * (m["u2a"] - p["u2a"]) + p["u2b"] + m["u1a"]
        U = np.array([[c11, c21], [c12, c22]]) / qm - np.eye(2)
        cond = float(abs(np.abs([c11, c12, c21, c22]).max() / qm)) if qm != 0 else math.inf
    Gp, Gm = gram_eq38_closed(problem, tol)
    return VnUnitary(U, "eq38", Gp, Gm, cond)


def vn_unitary_specialized(problem: Problem, bc: ABPair, tol: float = DEFAULT_TOL) -> VnUnitary:
    """Dispatch on the canonical form of ``bc``."""
    canon = canonicalize(bc)
    if isinstance(canon, SeparatedBC):
        return vn_unitary_separated(problem, canon, tol)
    return vn_unitary_coupled(problem, canon, tol)


@dataclass(frozen=True)
class RouteAgreement:
    general_in_eq38: np.ndarray
    specialized: np.ndarray
    residual: float
    gram_residual: float


def vn_route_check(problem: Problem, bc: ABPair, tol: float = DEFAULT_TOL) -> RouteAgreement:
    """Compare the Lambda route (Dirichlet reference, swapped to eq38 order) with the case formulas.

    ``gram_residual`` compares the swapped quadrature Gram matrices with the
    closed boundary-value ones.
    """
    g = vn_unitary_general(problem, bc, DIRICHLET, tol)
    s = vn_unitary_specialized(problem, bc, tol)
    U = SIGMA @ g.U @ SIGMA
    gram = max(
        np.abs(SIGMA @ g.G_plus @ SIGMA - s.G_plus).max(),
        np.abs(SIGMA @ g.G_minus @ SIGMA - s.G_minus).max(),
    )
    return RouteAgreement(U, s.U, float(np.abs(U - s.U).max()), float(gram))
