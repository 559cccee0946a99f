"""Self-adjoint boundary conditions and their parametrizations.

A boundary condition is the kernel of the trace map
``gamma u = A (u(a), pu(a)) - B (u(b), pu(b))``.  The same extension is
described by an ``(A, B)`` pair, a separated ``(theta_a, theta_b)`` or coupled
``(phi, F)`` canonical form, a Dirichlet/Neumann trace pair ``(XD, XN)``, and
a unique unitary ``U``.  Equivalence classes are keyed by ``U``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.linalg import null_space

from .errors import BadDocument, NotLagrangian, RankDeficient

J = np.array([[0.0, -1.0], [1.0, 0.0]])
I2 = np.eye(2, dtype=complex)
LAGRANGE_TOL = 1e-12
RANK_TOL = 1e-10
EQUIV_TOL = 1e-10


def _mat(x) -> np.ndarray:
    m = np.array(x, dtype=complex).reshape(2, 2)
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class ABPair:
    """A validated pair (A, B) with rank(A B) = 2 and A J A* = B J B*."""

    A: np.ndarray
    B: np.ndarray
    label: str = ""

    @property
    def trace_op(self) -> np.ndarray:
        """The 2 x 4 matrix [A, -B] acting on frames."""
        return np.hstack([self.A, -self.B])

    def key(self) -> tuple:
        """Hashable identity of the pair itself (not of its class)."""
        return tuple(np.round(np.concatenate([self.A.ravel(), self.B.ravel()]), 15).tolist())

    def __repr__(self) -> str:
        tag = f" {self.label}" if self.label else ""
        return f"ABPair({tag} A={self.A.tolist()}, B={self.B.tolist()})"


@dataclass(frozen=True)
class SeparatedBC:
    theta_a: float
    theta_b: float

    def __post_init__(self):
        for t in (self.theta_a, self.theta_b):
            if not 0.0 <= t < math.pi:
                raise BadDocument(f"separated angles must lie in [0, pi), got {t}")

    def to_ab(self) -> ABPair:
        ca, sa = math.cos(self.theta_a), math.sin(self.theta_a)
        cb, sb = math.cos(self.theta_b), math.sin(self.theta_b)
        return validate_ab([[ca, sa], [0, 0]], [[0, 0], [-cb, sb]], f"separated({self.theta_a:g},{self.theta_b:g})")


@dataclass(frozen=True)
class CoupledBC:
    phi: float
    F: tuple[tuple[float, float], tuple[float, float]]

    def __post_init__(self):
        F = np.asarray(self.F, dtype=float)
        if F.shape != (2, 2) or abs(np.linalg.det(F) - 1.0) > 1e-12 * max(1.0, np.abs(F).max() ** 2):
            raise BadDocument("coupled boundary condition needs F in SL2(R)")
        if not 0.0 <= self.phi < 2 * math.pi:
            raise BadDocument(f"phi must lie in [0, 2pi), got {self.phi}")
        object.__setattr__(self, "F", tuple(tuple(float(v) for v in row) for row in F))

    @property
    def Fm(self) -> np.ndarray:
        return np.array(self.F)

    def to_ab(self) -> ABPair:
        return kvn_like_from_coupled(self)


@dataclass(frozen=True, eq=False)
class DNPair:
    XD: np.ndarray
    XN: np.ndarray


@dataclass(frozen=True, eq=False)
class UnitaryBC:
    U: np.ndarray


@dataclass(frozen=True, eq=False)
class TraceMatrices:
    D: np.ndarray
    N: np.ndarray
    Dperp: np.ndarray
    Nperp: np.ndarray


# ---------------------------------------------------------------------------
# validation and basic maps


def validate_ab(A, B, label: str = "") -> ABPair:
    """Check the two self-adjointness conditions on (A, B).

    Raises:
        RankDeficient: rank of the 2 x 4 matrix (A B) is below 2.
        NotLagrangian: A J A* differs from B J B*.
    """
    A, B = _mat(A), _mat(B)
    AB = np.hstack([A, B])
    s = np.linalg.svd(AB, compute_uv=False)
    if s[0] == 0 or s[1] <= RANK_TOL * s[0]:
        raise RankDeficient("rank(A B) < 2")
    scale = s[0] ** 2
    if np.abs(A @ J @ A.conj().T - B @ J @ B.conj().T).max() > LAGRANGE_TOL * scale:
        raise NotLagrangian("A J A* != B J B*")
    return ABPair(A, B, label)


def trace_matrices(ab: ABPair) -> TraceMatrices:
    """D, N with gamma = D gamma_D + N gamma_N, plus the complementary pair."""
    A, B = ab.A, ab.B
    D = np.array([[A[0, 0], -B[0, 0]], [A[1, 0], -B[1, 0]]])
    N = np.array([[A[0, 1], B[0, 1]], [A[1, 1], B[1, 1]]])
    G = D @ D.conj().T + N @ N.conj().T
    assert abs(np.linalg.det(G)) > 0, "DD* + NN* must be invertible"
    Ginv = np.linalg.inv(G)
    return TraceMatrices(D, N, -Ginv @ N, Ginv @ D)


def dirichlet_trace(frame) -> np.ndarray:
    f = np.asarray(frame)
    return np.array([f[0], f[2]])


def neumann_trace(frame) -> np.ndarray:
    f = np.asarray(frame)
    return np.array([f[1], -f[3]])


def apply_trace(ab: ABPair, frame) -> np.ndarray:
    """gamma_{A,B} applied to a frame (4-vector) or frame matrix (4 x k)."""
    if hasattr(frame, "as_array"):
        frame = frame.as_array()
    return ab.trace_op @ np.asarray(frame, dtype=complex)


def connection_matrices(to: ABPair, frm: ABPair) -> tuple[np.ndarray, np.ndarray]:
    """T and S with gamma_to = T gamma_from + S gamma_from^perp."""
    t, f = trace_matrices(to), trace_matrices(frm)
    T = t.D @ f.Nperp.conj().T - t.N @ f.Dperp.conj().T
    S = t.N @ f.D.conj().T - t.D @ f.N.conj().T
    return T, S


def complement(ab: ABPair) -> ABPair:
    """The pair whose trace map is the complementary trace gamma^perp."""
    tm = trace_matrices(ab)
    return dn_to_ab(DNPair(tm.Dperp, tm.Nperp))


def ab_to_dn(ab: ABPair) -> DNPair:
    tm = trace_matrices(ab)
    return DNPair(tm.D, tm.N)


def dn_to_ab(dn: DNPair) -> ABPair:
    XD, XN = dn.XD, dn.XN
    A = [[XD[0, 0], XN[0, 0]], [XD[1, 0], XN[1, 0]]]
    B = [[-XD[0, 1], XN[0, 1]], [-XD[1, 1], XN[1, 1]]]
    return validate_ab(A, B)


def validate_dn(XD, XN) -> DNPair:
    XD, XN = _mat(XD), _mat(XN)
    dn_to_ab(DNPair(XD, XN))
    return DNPair(XD, XN)


def dn_to_unitary(dn: DNPair) -> UnitaryBC:
    M = dn.XD + 1j * dn.XN
    if abs(np.linalg.det(M)) <= RANK_TOL * max(1.0, np.abs(M).max() ** 2):
        raise NotLagrangian("XD + i XN is singular")
    U = np.linalg.solve(M, 1j * dn.XN - dn.XD)
    if np.abs(U @ U.conj().T - I2).max() > 1e-8:
        raise NotLagrangian("the pair does not give a unitary U")
    return UnitaryBC(U)


def unitary_to_dn(u: UnitaryBC) -> DNPair:
    U = np.asarray(u.U, dtype=complex)
    if np.abs(U @ U.conj().T - I2).max() > LAGRANGE_TOL * 100:
        raise NotLagrangian("U is not unitary")
    return DNPair(0.5j * (I2 - U), 0.5 * (U + I2))


def to_unitary(ab: ABPair) -> np.ndarray:
    return dn_to_unitary(ab_to_dn(ab)).U


def equivalent(x: ABPair, y: ABPair) -> bool:
    """Same self-adjoint extension, decided by the unitary parameter."""
    return bool(np.abs(to_unitary(x) - to_unitary(y)).max() < EQUIV_TOL)


def kvn_like_from_coupled(c: CoupledBC) -> ABPair:
    """(e^{i phi} F, I) for a coupled canonical form."""
    return validate_ab(np.exp(1j * c.phi) * c.Fm, I2, f"coupled(phi={c.phi:g})")


# ---------------------------------------------------------------------------
# canonical forms


def _real_direction(v: np.ndarray) -> np.ndarray:
    """Rotate a complex multiple of a real vector onto the reals."""
    k = int(np.argmax(np.abs(v)))
    w = v * np.conj(v[k]) / abs(v[k])
    return w.real


def _snap_angle(t: float, period: float) -> float:
    t = t % period
    return 0.0 if period - t < 1e-12 or t < 1e-15 else t


def rank_of(M: np.ndarray) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > RANK_TOL * s[0]))


def canonicalize(ab: ABPair) -> SeparatedBC | CoupledBC:
    """Unique separated or coupled representative of the extension.

    For coupled conditions the pairs (phi, F) and (phi + pi, -F) describe the
    same extension; the representative with tr F >= 0 is returned (ties are
    broken by the first nonzero entry of F being positive).
    """
    A, B = ab.A, ab.B
    rank = rank_of(A)
    if rank == 0:
        raise RankDeficient("rank(A) = 0 cannot occur for a valid pair")
    if rank == 1:
        c = null_space(B.T, rcond=RANK_TOL)[:, 0]
        alpha = _real_direction(c @ A)
        d = null_space(A.T, rcond=RANK_TOL)[:, 0]
        beta = _real_direction(-(d @ B))
        ta = _snap_angle(math.atan2(alpha[1], alpha[0]), math.pi)
        tb = _snap_angle(math.atan2(-beta[1], beta[0]), math.pi)
        return SeparatedBC(ta, tb)
    M = np.linalg.solve(B, A)
    omega = np.sqrt(np.linalg.det(M) + 0j)
    F = M / omega
    Fr = F.real
    flip = np.trace(Fr) < -1e-12 or (abs(np.trace(Fr)) <= 1e-12 and Fr.ravel()[np.argmax(np.abs(Fr.ravel()) > 1e-12)] < 0)
    phi = float(np.angle(omega))
    if flip:
        Fr, phi = -Fr, phi + math.pi
    Fr = Fr / math.sqrt(np.linalg.det(Fr))
    return CoupledBC(_snap_angle(phi, 2 * math.pi), tuple(map(tuple, Fr)))


def canonical_to_ab(c: SeparatedBC | CoupledBC) -> ABPair:
    return c.to_ab()


# ---------------------------------------------------------------------------
# named conditions and documents

DIRICHLET = validate_ab([[1, 0], [0, 0]], [[0, 0], [-1, 0]], "dirichlet")
NEUMANN = validate_ab([[0, 1], [0, 0]], [[0, 0], [0, 1]], "neumann")
PERIODIC = validate_ab(I2, I2, "periodic")
ANTIPERIODIC = validate_ab(-I2, I2, "antiperiodic")

NAMED = {"dirichlet": DIRICHLET, "neumann": NEUMANN, "periodic": PERIODIC, "antiperiodic": ANTIPERIODIC}


def named(name: str) -> ABPair:
    try:
        return NAMED[name]
    except KeyError:
        raise BadDocument(f"unknown named boundary condition {name!r}") from None


def _complex_matrix(doc) -> np.ndarray:
    arr = np.asarray(doc, dtype=float)
    if arr.shape in ((4, 2), (2, 2, 2)):
        arr = arr.reshape(4, 2)
        return (arr[:, 0] + 1j * arr[:, 1]).reshape(2, 2)
    if arr.shape == (2, 2):
        return arr.astype(complex)
    raise BadDocument(f"cannot read a 2x2 complex matrix from shape {arr.shape}")


def complex_matrix_json(M: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(M, dtype=complex)]


def bc_from_json(doc: Any, problem=None) -> ABPair:
    """Parse a boundary-condition document.

    ``problem`` is needed only for ``{"kind": "named", "name": "kvn"}``.
    Plain strings are read as named conditions.
    """
    if isinstance(doc, str):
        doc = {"kind": "named", "name": doc}
    try:
        kind = doc["kind"]
        if kind == "ab":
            return validate_ab(_complex_matrix(doc["A"]), _complex_matrix(doc["B"]))
        if kind == "separated":
            return SeparatedBC(float(doc["theta_a"]), float(doc["theta_b"])).to_ab()
        if kind == "coupled":
            return CoupledBC(float(doc["phi"]), tuple(map(tuple, doc["F"]))).to_ab()
        if kind == "unitary":
            return dn_to_ab(unitary_to_dn(UnitaryBC(_complex_matrix(doc["U"]))))
        if kind == "named":
            if doc["name"] == "kvn":
                if problem is None:
                    raise BadDocument("the kvn condition needs a problem")
                from .spectra import kvn_extension

                return kvn_extension(problem).to_ab()
            return named(doc["name"])
    except (KeyError, TypeError, ValueError) as exc:
        raise BadDocument(f"bad boundary-condition document: {exc}") from exc
    raise BadDocument(f"unknown boundary-condition kind {doc.get('kind')!r}")


def bc_to_json(x: ABPair | SeparatedBC | CoupledBC | UnitaryBC | DNPair, kind: str = "ab") -> dict:
    """Serialize in the requested parametrization."""
    if isinstance(x, SeparatedBC):
        return {"kind": "separated", "theta_a": x.theta_a, "theta_b": x.theta_b}
    if isinstance(x, CoupledBC):
        return {"kind": "coupled", "phi": x.phi, "F": [list(r) for r in x.F]}
    if isinstance(x, UnitaryBC):
        return {"kind": "unitary", "U": complex_matrix_json(x.U)}
    if kind == "ab":
        return {"kind": "ab", "A": complex_matrix_json(x.A), "B": complex_matrix_json(x.B)}
    if kind == "unitary":
        return bc_to_json(dn_to_unitary(ab_to_dn(x)))
    if kind == "dn":
        dn = ab_to_dn(x)
        return {"kind": "dn", "XD": complex_matrix_json(dn.XD), "XN": complex_matrix_json(dn.XN)}
    if kind in ("canonical", "separated", "coupled"):
        return bc_to_json(canonicalize(x))
    raise BadDocument(f"unknown target parametrization {kind!r}")


# ---------------------------------------------------------------------------
# random instances for property checks


def random_unitary(rng: np.random.Generator) -> np.ndarray:
    Z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_ab(rng: np.random.Generator, kind: str = "any") -> ABPair:
    """A random valid pair, disguised by a random nonsingular left factor.

    ``kind`` is ``"any"`` (generic unitary, almost surely coupled),
    ``"separated"``, ``"coupled"`` or ``"mixed"`` (one of the three).
    """
    if kind == "mixed":
        kind = ("any", "separated", "coupled")[int(rng.integers(3))]
    if kind == "separated":
        base = SeparatedBC(*rng.uniform(0, math.pi, 2)).to_ab()
    elif kind == "coupled":
        F = rng.normal(size=(2, 2))
        d = np.linalg.det(F)
        if d < 0:
            F[0] *= -1
            d = -d
        base = CoupledBC(float(rng.uniform(0, 2 * math.pi)), tuple(map(tuple, F / math.sqrt(d)))).to_ab()
    else:
        base = dn_to_ab(unitary_to_dn(UnitaryBC(random_unitary(rng))))
    C = random_nonsingular(rng)
    return validate_ab(C @ base.A, C @ base.B)


def random_nonsingular(rng: np.random.Generator) -> np.ndarray:
    while True:
        C = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        if np.linalg.cond(C) < 1e2:
            return C
