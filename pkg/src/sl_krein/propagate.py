"""Solutions of (tau - z) u = 0 as the first-order system in (u, p u').

The system ``u' = pu / p``, ``(pu)' = (q - z r) u`` is integrated with an
adaptive embedded Runge-Kutta pair (scipy's DOP853).  Coefficient
breakpoints are always segment boundaries, so no step straddles a jump.

A *frame* is the 4-vector ``(u(a), pu(a), u(b), pu(b))``.  Several
solutions are carried as the columns of a 4 x k frame matrix, which makes
every boundary trace a single matrix product.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import cumulative_simpson, simpson, solve_ivp

from .errors import (
    DirichletEigenvalue,
    GramMismatch,
    GridMismatch,
    IntegratorFailure,
    PropertyViolation,
)
from .problem import Problem

DEFAULT_TOL = 1e-10
GRID_POINTS = 1025


@dataclass(frozen=True)
class BoundaryFrame:
    """Boundary values ``(u(a), pu(a), u(b), pu(b))`` of one solution."""

    ua: complex
    pua: complex
    ub: complex
    pub: complex

    def as_array(self) -> np.ndarray:
        return np.array([self.ua, self.pua, self.ub, self.pub], dtype=complex)

    @staticmethod
    def from_array(v) -> BoundaryFrame:
        v = np.asarray(v, dtype=complex).ravel()
        return BoundaryFrame(complex(v[0]), complex(v[1]), complex(v[2]), complex(v[3]))

    def conj(self) -> BoundaryFrame:
        return BoundaryFrame.from_array(np.conj(self.as_array()))


@dataclass(frozen=True, eq=False)
class SolutionPath:
    """A solution sampled on a grid that starts at a and ends at b."""

    z: complex
    grid: np.ndarray
    u: np.ndarray
    pu: np.ndarray

    @property
    def frame(self) -> BoundaryFrame:
        return BoundaryFrame(self.u[0], self.pu[0], self.u[-1], self.pu[-1])

    def combine(self, other: SolutionPath, c1: complex, c2: complex) -> SolutionPath:
        """The path of ``c1 * self + c2 * other``."""
        _check_same(self, other)
        return SolutionPath(self.z, self.grid, c1 * self.u + c2 * other.u, c1 * self.pu + c2 * other.pu)

    def conj(self) -> SolutionPath:
        """Complex conjugate, a solution at conj(z) for real coefficients."""
        return SolutionPath(np.conj(self.z), self.grid, np.conj(self.u), np.conj(self.pu))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "re_u", "im_u", "re_pu", "im_pu"])
        for x, u, pu in zip(self.grid, self.u, self.pu):
            w.writerow([repr(float(x)), repr(u.real), repr(u.imag), repr(pu.real), repr(pu.imag)])
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class FundamentalPair:
    """Solutions with u1(a)=0, u1(b)=1, u2(a)=1, u2(b)=0."""

    u1: SolutionPath
    u2: SolutionPath
    z: complex

    def frames(self) -> np.ndarray:
        """4 x 2 frame matrix with columns (u1, u2)."""
        return np.column_stack([self.u1.frame.as_array(), self.u2.frame.as_array()])


@dataclass(frozen=True, eq=False)
class DeficiencyBasis:
    plus: FundamentalPair
    minus: FundamentalPair
    G_plus: np.ndarray
    G_minus: np.ndarray
    gram_residual: float


# ---------------------------------------------------------------------------
# grids and quadrature


@lru_cache(maxsize=64)
def _common_grid(problem: Problem, n: int) -> np.ndarray:
    nodes = problem.nodes()
    pieces = []
    for lo, hi in zip(nodes[:-1], nodes[1:]):
        m = max(2, int(round((n - 1) * (hi - lo) / problem.length)))
        m += m % 2  # even interval count per segment for Simpson
        pieces.append(np.linspace(lo, hi, m + 1)[:-1])
    pieces.append(np.array([problem.b]))
    grid = np.concatenate(pieces)
    grid.setflags(write=False)
    return grid


def common_grid(problem: Problem, n: int = GRID_POINTS) -> np.ndarray:
    """Shared output grid: uniform on each coefficient segment, every node included.

    Each segment carries an even number of intervals so composite Simpson
    never straddles a breakpoint.
    """
    return _common_grid(problem, n)


def _segment_slices(problem: Problem, grid: np.ndarray) -> list[slice]:
    idx = np.searchsorted(grid, problem.nodes())
    return [slice(i, j + 1) for i, j in zip(idx[:-1], idx[1:])]


def integrate(problem: Problem, grid: np.ndarray, values: np.ndarray) -> complex:
    """Simpson quadrature of ``values`` over [a, b], segment by segment."""
    total = 0.0
    for s in _segment_slices(problem, grid):
        total = total + simpson(values[s], x=grid[s])
    return total


def cumulative_integral(problem: Problem, grid: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Running integral from a, with Simpson restarted at every breakpoint."""
    out = np.zeros(len(grid), dtype=np.result_type(values, float))
    offset = 0.0
    for s in _segment_slices(problem, grid):
        v = values[s]
        seg = cumulative_simpson(v.real, x=grid[s], initial=0)
        if np.iscomplexobj(v):
            seg = seg + 1j * cumulative_simpson(v.imag, x=grid[s], initial=0)
        out[s] = offset + seg
        offset = out[s][-1]
    return out


def weight(problem: Problem, grid: np.ndarray) -> np.ndarray:
    """r on the grid, with cell values taken from the interior of each segment."""
    return _coefficient_on_grid(problem, problem.r, grid)


def _coefficient_on_grid(problem, coef, grid):
    out = np.empty(len(grid))
    for s in _segment_slices(problem, grid):
        x = grid[s]
        if coef.kind == "sampled":
            out[s] = coef(x)
        else:
            out[s] = coef(0.5 * (x[0] + x[-1]))
    return out


# ---------------------------------------------------------------------------
# the integrator


def _segment_rhs(problem: Problem, lo: float, hi: float, z: np.ndarray, k: int):
    """Right-hand side for m values of z and k solutions each, on one segment."""
    mid = 0.5 * (lo + hi)
    zc = z[:, None]
    coefs = (problem.p, problem.q, problem.r)
    if all(c.kind != "sampled" for c in coefs):
        p0, q0, r0 = (c(mid) for c in coefs)
        inv_p = 1.0 / p0
        pot = np.broadcast_to(q0 - zc * r0, (z.size, k)).ravel().copy()
        n = z.size * k

        def rhs(x, y):
            return np.concatenate([y[n:] * inv_p, pot * y[:n]])

        return rhs
    n = z.size * k

    def rhs(x, y):
        p, q, r = (c(x) if c.kind == "sampled" else c(mid) for c in coefs)
        pot = np.broadcast_to(q - zc * r, (z.size, k)).ravel()
        return np.concatenate([y[n:] / p, pot * y[:n]])

    return rhs


def propagate(
    problem: Problem,
    z,
    y0: np.ndarray,
    tol: float = DEFAULT_TOL,
    forward: bool = True,
    grid: np.ndarray | None = None,
    stop: float | None = None,
):
    """Integrate k solutions for each of m spectral parameters.

    Args:
        problem: The differential expression.
        z: Scalar or array of shape (m,).
        y0: Initial data of shape (2, k): row 0 is u, row 1 is pu, at a when
            ``forward`` else at b.
        tol: Relative tolerance of the integrator.
        forward: Integrate from a to b, or from b to a.
        grid: Optional increasing grid; values are returned on it.
        stop: Interior point where integration ends instead of the far
            endpoint.  Not combined with ``grid``.

    Returns:
        ``end`` of shape (m, 2, k) and, when ``grid`` is given, ``path`` of
        shape (m, len(grid), 2, k).  A scalar ``z`` drops the leading axis.
    """
    scalar = np.ndim(z) == 0
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    y0 = np.asarray(y0, dtype=complex)
    m, k = zs.size, y0.shape[1]
    n = m * k
    state = np.concatenate([np.tile(y0[0], m), np.tile(y0[1], m)])
    nodes = problem.nodes()
    segs = list(zip(nodes[:-1], nodes[1:]))
    if stop is not None:
        if grid is not None:
            raise ValueError("stop and grid are exclusive")
        if forward:
            segs = [(lo, min(hi, stop)) for lo, hi in segs if lo < stop]
        else:
            segs = [(max(lo, stop), hi) for lo, hi in segs if hi > stop]
    if not forward:
        segs = [(hi, lo) for lo, hi in reversed(segs)]
    path = None
    if grid is not None:
        path = np.empty((len(grid), 2 * n), dtype=complex)
        path[0 if forward else -1] = state
    atol = 1e-3 * tol
    for x0, x1 in segs:
        lo, hi = min(x0, x1), max(x0, x1)
        rhs = _segment_rhs(problem, lo, hi, zs, k)
        t_eval = None
        if grid is not None:
            sel = np.nonzero((grid > lo) & (grid <= hi))[0] if forward else np.nonzero((grid >= lo) & (grid < hi))[0]
            if not forward:
                sel = sel[::-1]
            t_eval = grid[sel]
        sol = solve_ivp(rhs, (x0, x1), state, method="DOP853", rtol=tol, atol=atol, t_eval=t_eval)
        if sol.status != 0:
            raise IntegratorFailure(f"integration failed on [{lo}, {hi}]: {sol.message}")
        if grid is not None:
            path[sel] = sol.y.T
            state = sol.y[:, -1] if t_eval[-1] == x1 else _final(rhs, x0, x1, state, tol, atol)
        else:
            state = sol.y[:, -1]
    end = np.stack([state[:n].reshape(m, k), state[n:].reshape(m, k)], axis=1)
    if path is not None:
        path = np.stack([path[:, :n].reshape(-1, m, k), path[:, n:].reshape(-1, m, k)], axis=2)
        path = np.moveaxis(path, 1, 0)
    if scalar:
        end = end[0]
        path = None if path is None else path[0]
    return (end, path) if grid is not None else end


def _final(rhs, x0, x1, state, tol, atol):
    sol = solve_ivp(rhs, (x0, x1), state, method="DOP853", rtol=tol, atol=atol)
    return sol.y[:, -1]


def _key(z) -> complex:
    return complex(z)


@lru_cache(maxsize=4096)
def _transfer(problem: Problem, z: complex, tol: float, forward: bool) -> np.ndarray:
    out = propagate(problem, z, np.eye(2), tol, forward)
    out.setflags(write=False)
    return out


def transfer(problem: Problem, z, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Values at b of the solutions with (u, pu)(a) = e1 and e2.

    Column 0 is phi (phi(a)=1, pphi(a)=0), column 1 is psi (psi(a)=0, ppsi(a)=1).
    """
    return _transfer(problem, _key(z), float(tol), True)


def transfer_back(problem: Problem, z, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Values at a of the solutions with (u, pu)(b) = e1 and e2, integrated from b."""
    return _transfer(problem, _key(z), float(tol), False)


def transfer_many(problem: Problem, zs, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Batched :func:`transfer` for an array of z, shape (m, 2, 2)."""
    zs = np.asarray(zs, dtype=complex)
    if zs.size == 0:
        return np.zeros((0, 2, 2), dtype=complex)
    return propagate(problem, zs, np.eye(2), tol, True)


def iv_frames(problem: Problem, z, tol: float = DEFAULT_TOL) -> np.ndarray:
    """4 x 2 frame matrix of the initial-value basis (phi, psi) at a."""
    return np.vstack([np.eye(2), transfer(problem, z, tol)])


def solution_frames(problem: Problem, z, tol: float = DEFAULT_TOL) -> np.ndarray:
    """4 x 2 frame matrix of a well-conditioned solution basis.

    One solution is started at a and one at b, each integrated away from its
    starting point, so both carry full relative accuracy even when solutions
    grow exponentially across the interval.  Of the four cross pairs the one
    with the largest normalized Wronskian is used.
    """
    fwd = np.vstack([np.eye(2), transfer(problem, z, tol)])
    bwd = np.vstack([transfer_back(problem, z, tol), np.eye(2)])
    best, pair = -1.0, None
    for i in range(2):
        for j in range(2):
            f, g = fwd[:, i], bwd[:, j]
            w = abs(f[0] * g[1] - f[1] * g[0]) / (np.linalg.norm(f[:2]) * np.linalg.norm(g[:2]))
            if w > best:
                best, pair = w, (f, g)
    return np.column_stack(pair)


# ---------------------------------------------------------------------------
# public operations


def solve_iv(
    problem: Problem,
    z,
    u0: complex,
    pu0: complex,
    tol: float = DEFAULT_TOL,
    grid: np.ndarray | None = None,
) -> SolutionPath:
    """Solve the initial-value problem at a.

    Raises:
        ValueError: non-positive ``tol``.
        IntegratorFailure: the integrator gave up.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    grid = common_grid(problem) if grid is None else np.asarray(grid, dtype=float)
    _, path = propagate(problem, complex(z), np.array([[u0], [pu0]]), tol, True, grid)
    return SolutionPath(complex(z), grid, path[:, 0, 0].copy(), path[:, 1, 0].copy())


def iv_paths(problem: Problem, z, tol: float = DEFAULT_TOL, grid: np.ndarray | None = None):
    """Paths of phi and psi on a shared grid."""
    grid = common_grid(problem) if grid is None else np.asarray(grid, dtype=float)
    return _iv_paths(problem, complex(z), float(tol), _GridKey(grid))


class _GridKey:
    """Hashable wrapper so grids can key the path cache."""

    def __init__(self, grid: np.ndarray):
        self.grid = grid
        self._h = hash(grid.tobytes())

    def __hash__(self):
        return self._h

    def __eq__(self, other):
        return isinstance(other, _GridKey) and np.array_equal(self.grid, other.grid)


@lru_cache(maxsize=256)
def _iv_paths(problem: Problem, z: complex, tol: float, gk: _GridKey):
    grid = gk.grid
    _, path = propagate(problem, z, np.eye(2), tol, True, grid)
    phi = SolutionPath(z, grid, path[:, 0, 0].copy(), path[:, 1, 0].copy())
    psi = SolutionPath(z, grid, path[:, 0, 1].copy(), path[:, 1, 1].copy())
    return phi, psi


def fundamental_pair(problem: Problem, z, tol: float = DEFAULT_TOL, grid: np.ndarray | None = None) -> FundamentalPair:
    """The two-point normalized basis u1, u2 at z.

    Raises:
        DirichletEigenvalue: the endpoint system is singular, i.e. z is a
            Dirichlet eigenvalue.
    """
    phi, psi = iv_paths(problem, z, tol, grid)
    M = np.array([[phi.u[0], psi.u[0]], [phi.u[-1], psi.u[-1]]])
    if abs(np.linalg.det(M)) < 1e-10 * np.abs(M).max():
        raise DirichletEigenvalue(f"z = {complex(z)} is numerically a Dirichlet eigenvalue")
    c = np.linalg.solve(M, np.eye(2))
    u1 = phi.combine(psi, c[0, 1], c[1, 1])
    u2 = phi.combine(psi, c[0, 0], c[1, 0])
    # pin the exact normalization values against round-off
    u1.u[0], u1.u[-1], u2.u[0], u2.u[-1] = 0.0, 1.0, 1.0, 0.0
    return FundamentalPair(u1, u2, complex(z))


def _check_same(f: SolutionPath, g: SolutionPath) -> None:
    if len(f.grid) != len(g.grid) or not np.array_equal(f.grid, g.grid):
        raise GridMismatch("solution paths live on different grids")


def wronskian_path(f: SolutionPath, g: SolutionPath) -> np.ndarray:
    """W(f, g)(x) = f pg - pf g along the grid."""
    _check_same(f, g)
    return f.u * g.pu - f.pu * g.u


def wronskian(f: SolutionPath, g: SolutionPath, tol: float = DEFAULT_TOL) -> complex:
    """W(f, g) at a, after checking it is constant along the grid.

    Raises:
        GridMismatch: the paths use different grids.
        PropertyViolation: the Wronskian drifts by more than ``100 * tol``
            relative to the size of its terms.
    """
    if abs(f.z - g.z) > 1e-14 * max(1.0, abs(f.z)):
        raise GridMismatch("Wronskian needs solutions at the same z")
    w = wronskian_path(f, g)
    scale = max(1.0, float(np.max(np.abs(f.u * g.pu) + np.abs(f.pu * g.u))))
    drift = float(np.max(np.abs(w - w[0])))
    if drift > 100 * tol * scale:
        raise PropertyViolation(f"Wronskian drift {drift:.3e} exceeds 100*tol")
    return complex(w[0])


def l2_inner(f: SolutionPath, g: SolutionPath, problem: Problem) -> complex:
    """(f, g) = integral of r conj(f) g, by Simpson quadrature."""
    _check_same(f, g)
    return complex(integrate(problem, f.grid, weight(problem, f.grid) * np.conj(f.u) * g.u))


def frame_wronskian(f: np.ndarray, g: np.ndarray) -> tuple[complex, complex]:
    """W(f, g) at a and at b from two frames."""
    return f[0] * g[1] - f[1] * g[0], f[2] * g[3] - f[3] * g[2]


def gram_wronskian(frames: np.ndarray, z: complex) -> np.ndarray:
    """Gram matrix of solutions at non-real z from boundary frames alone.

    Uses d/dx W(conj f, g) = 2i Im(z) r conj(f) g, so each inner product is
    a boundary term divided by -2i Im z.
    """
    k = frames.shape[1]
    G = np.empty((k, k), dtype=complex)
    for j in range(k):
        for l in range(k):
            wa, wb = frame_wronskian(np.conj(frames[:, j]), frames[:, l])
            G[j, l] = (wb - wa) / (-2j * complex(z).imag)
    return G


def gram_quadrature(paths: list[SolutionPath], problem: Problem) -> np.ndarray:
    k = len(paths)
    return np.array([[l2_inner(paths[j], paths[l], problem) for l in range(k)] for j in range(k)])


def deficiency_basis(problem: Problem, tol: float = DEFAULT_TOL) -> DeficiencyBasis:
    """Two-point bases of ker(H_max - i) and ker(H_max + i) with their Gram matrices.

    Raises:
        GramMismatch: quadrature and boundary-term Gram matrices differ by
            more than ``1e3 * tol`` relative to their size.
    """
    plus = fundamental_pair(problem, 1j, tol)
    minus = fundamental_pair(problem, -1j, tol)
    G_plus = gram_quadrature([plus.u1, plus.u2], problem)
    G_minus = gram_quadrature([minus.u1, minus.u2], problem)
    W_plus = gram_wronskian(plus.frames(), 1j)
    W_minus = gram_wronskian(minus.frames(), -1j)
    scale = max(1.0, np.abs(G_plus).max())
    resid = max(np.abs(G_plus - W_plus).max(), np.abs(G_minus - W_minus).max()) / scale
    if resid > 1e3 * tol:
        raise GramMismatch(f"quadrature and boundary-term Gram matrices differ by {resid:.3e}")
    return DeficiencyBasis(plus, minus, G_plus, G_minus, float(resid))
