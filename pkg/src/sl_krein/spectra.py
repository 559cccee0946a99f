"""Eigenvalues, Green's functions, Krein resolvent corrections and the
Krein-von Neumann extension.

Eigenvalues are the real zeros of the characteristic function
``det[gamma(phi) gamma(psi)]`` built from the initial-value basis.  A scan on
a uniform grid brackets simple roots through sign changes of a de-rotated
real version of that function.  Doubles show up as sign-preserving dips and
are confirmed by a rank test.  A winding-number count on a rectangle around
the window guards against missed roots.
"""

from __future__ import annotations

import csv
import io
import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .bdm import _check_regular, bdm_matrix, fundamental_frames
from .boundary import (
    DIRICHLET,
    ABPair,
    CoupledBC,
    SeparatedBC,
    bc_to_json,
    canonicalize,
    connection_matrices,
    equivalent,
    to_unitary,
)
from .errors import (
    BadInterval,
    CountMismatch,
    NotStrictlyPositive,
    NumericError,
    OutOfInterval,
    SpectralPoint,
    SpectrumOutOfReach,
    WindowEdgeEigenvalue,
)
from .problem import Problem
from .propagate import (
    DEFAULT_TOL,
    SolutionPath,
    common_grid,
    cumulative_integral,
    integrate,
    iv_paths,
    propagate,
    transfer,
    transfer_many,
    weight,
)

EIG_TOL = 1e-10
RANK_REL_TOL = 1e-6
SCAN_CHUNK = 512
CONTOUR_GROWTH = 8.0
MAX_CONTOUR_POINTS = 40000
# exp(700) is close to the largest double
MAX_GROWTH_EXPONENT = 700.0
POLISH_TOL_FACTOR = 1e-2
EDGE_REL = 1e-8
KVN_POSITIVITY = 1e-8
SIGMA = np.array([[0.0, 1.0], [1.0, 0.0]])


# ---------------------------------------------------------------------------
# characteristic function


def _trace_blocks(bc: ABPair, T: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """gamma applied to the IV basis for each transfer matrix, plus a size scale.

    The scale bounds |det| from above, so the normalized determinant lies
    in the unit disc.
    """
    L = bc.trace_op
    G = L[:, :2] + L[:, 2:] @ T
    frame_norm2 = 2.0 + np.sum(np.abs(T) ** 2, axis=(-2, -1))
    scale = np.sum(np.abs(L) ** 2) * frame_norm2 / 2.0
    return G, scale


def _batch_transfer(problem: Problem, zs, tol: float) -> np.ndarray:
    zs = np.asarray(zs, dtype=complex)
    out = np.empty((zs.size, 2, 2), dtype=complex)
    for s in range(0, zs.size, SCAN_CHUNK):
        chunk = zs[s : s + SCAN_CHUNK]
        # the integrator controls an RMS error over the whole batch
        local = max(tol / math.sqrt(4 * chunk.size), 1e-13)
        out[s : s + SCAN_CHUNK] = transfer_many(problem, chunk, local)
    return out


def char_function(problem: Problem, bc: ABPair, z, tol: float = DEFAULT_TOL) -> complex:
    """det[gamma(phi) gamma(psi)] for the initial-value basis at a.

    Raises:
        IntegratorFailure: the integrator gave up.
    """
    G, _ = _trace_blocks(bc, transfer(problem, z, tol))
    return complex(np.linalg.det(G))


def char_normalized(problem: Problem, bc: ABPair, z, tol: float = DEFAULT_TOL) -> complex:
    """:func:`char_function` divided by a bound on its size (|value| <= 1)."""
    G, scale = _trace_blocks(bc, transfer(problem, z, tol))
    return complex(np.linalg.det(G) / scale)


def _separated(bc: ABPair) -> SeparatedBC | None:
    canon = canonicalize(bc)
    return canon if isinstance(canon, SeparatedBC) else None


def _matched_wronskian(problem: Problem, sep: SeparatedBC, zs, tol: float) -> np.ndarray:
    """W(y_a, y_b) at the midpoint over |y_a| |y_b|, for separated conditions.

    y_a satisfies the condition at a and y_b the one at b.  Each is carried
    only half way, so a strongly attractive Robin end does not bury the
    zero under a solution that grew over the whole interval.
    """
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    mid = 0.5 * (problem.a + problem.b)
    ya0 = np.array([[math.sin(sep.theta_a)], [-math.cos(sep.theta_a)]])
    yb0 = np.array([[math.sin(sep.theta_b)], [math.cos(sep.theta_b)]])
    out = np.empty(zs.size, dtype=complex)
    for s in range(0, zs.size, SCAN_CHUNK):
        chunk = zs[s : s + SCAN_CHUNK]
        local = max(tol / math.sqrt(2 * chunk.size), 1e-13)
        ya = propagate(problem, chunk, ya0, local, True, stop=mid)[:, :, 0]
        yb = propagate(problem, chunk, yb0, local, False, stop=mid)[:, :, 0]
        w = ya[:, 0] * yb[:, 1] - ya[:, 1] * yb[:, 0]
        out[s : s + SCAN_CHUNK] = w / (np.linalg.norm(ya, axis=1) * np.linalg.norm(yb, axis=1))
    return out


def _char_batch(problem: Problem, bc: ABPair, zs, tol: float):
    """Normalized characteristic function on a batch of z, plus trace blocks.

    Separated conditions use the matched Wronskian and return no blocks:
    their eigenvalues are always simple.
    """
    sep = _separated(bc)
    if sep is not None:
        return _matched_wronskian(problem, sep, zs, tol), None, None
    T = _batch_transfer(problem, zs, tol)
    G, scale = _trace_blocks(bc, T)
    return np.linalg.det(G) / scale, G, T


def _rank_profile(bc: ABPair, G: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Singular values of each trace matrix relative to ||L|| ||[I; T]||."""
    s = np.linalg.svd(G, compute_uv=False)
    size = np.linalg.norm(bc.trace_op) * np.sqrt(2.0 + np.sum(np.abs(T) ** 2, axis=(-2, -1)))
    return s / size[:, None]


# ---------------------------------------------------------------------------
# spectra


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigenvalues of one self-adjoint extension inside a window.

    Attributes:
        bc: The boundary condition.
        eigenvalues: Sorted ``(lambda, multiplicity)`` pairs.
        window: The open interval that was searched.
        tol: Requested accuracy of each eigenvalue.
    """

    bc: ABPair
    eigenvalues: tuple[tuple[float, int], ...]
    window: tuple[float, float]
    tol: float

    @property
    def values(self) -> np.ndarray:
        """Eigenvalues repeated according to multiplicity."""
        return np.array([lam for lam, m in self.eigenvalues for _ in range(m)])

    def to_json(self) -> dict:
        return {
            "bc": bc_to_json(self.bc),
            "eigs": [{"lambda": lam, "mult": m} for lam, m in self.eigenvalues],
            "window": list(self.window),
            "tol": self.tol,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "mult"])
        for lam, m in self.eigenvalues:
            w.writerow([repr(lam), m])
        return buf.getvalue()


class _RealChar:
    """Batched real-valued characteristic function after removing a constant phase."""

    def __init__(self, problem: Problem, bc: ABPair, rot: complex, tol: float):
        self.problem, self.bc, self.rot, self.tol = problem, bc, rot, tol
        self.calls = 0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        self.calls += 1
        f, _, _ = _char_batch(self.problem, self.bc, np.asarray(x, dtype=float), self.tol)
        return (f * self.rot).real

    def blocks(self, x: np.ndarray):
        _, G, T = _char_batch(self.problem, self.bc, np.asarray(x, dtype=float), self.tol)
        return G, T


def _polish(g: _RealChar, a, b, fa, fb, xtol: float) -> np.ndarray:
    """Dekker's secant/bisection iteration on many brackets at once.

    ``b`` is the best iterate and ``a`` the contrapoint with opposite sign.
    The secant uses the two latest iterates and is replaced by the bracket
    midpoint whenever it leaves the half of the bracket next to ``b``, or
    when the bracket failed to halve over the last three steps.  Every
    iteration evaluates all still-active brackets in one batched integration.
    """
    a, b = np.array(a, dtype=float), np.array(b, dtype=float)
    fa, fb = np.array(fa, dtype=float), np.array(fb, dtype=float)
    swap = np.abs(fa) < np.abs(fb)
    a, b = np.where(swap, b, a), np.where(swap, a, b)
    fa, fb = np.where(swap, fb, fa), np.where(swap, fa, fb)
    p, fp = a.copy(), fa.copy()
    # below ~1e-13 relative the integrator noise makes further steps pointless
    xtol = np.maximum(xtol, 1e-13 * np.maximum(1.0, np.abs(b)))
    widths = [np.abs(b - a)]
    for it in range(100):
        active = (np.abs(b - a) > xtol) & (fb != 0)
        if not active.any():
            break
        i = np.nonzero(active)[0]
        ai, bi, fai, fbi, pi_, fpi = a[i], b[i], fa[i], fb[i], p[i], fp[i]
        mid = 0.5 * (ai + bi)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = bi - fbi * (bi - pi_) / (fbi - fpi)
        tiny = np.abs(s - bi) < xtol[i]
        inside = np.isfinite(s) & ((s - bi) * (s - mid) < 0)
        s = np.where(inside, s, mid)
        # an iterate sitting on the root: step just past it so the bracket collapses
        s = np.where(tiny, bi + np.sign(mid - bi) * xtol[i], s)
        if it >= 3:
            slow = np.abs(b - a)[i] > 0.5 * widths[-3][i]
            s = np.where(slow & ~tiny, mid, s)
        fs = g(s)
        p[i], fp[i] = bi, fbi
        keep = np.sign(fs) != np.sign(fai)
        na, nfa = np.where(keep, ai, bi), np.where(keep, fai, fbi)
        sw = np.abs(nfa) < np.abs(fs)
        a[i], b[i] = np.where(sw, s, na), np.where(sw, na, s)
        fa[i], fb[i] = np.where(sw, fs, nfa), np.where(sw, nfa, fs)
        widths.append(np.abs(b - a))
    return b


def _gauss_newton(g: _RealChar, left, right, x0, iters: int = 12) -> np.ndarray:
    """Minimize ||Gamma(lambda)||_F on each interval by secant Gauss-Newton.

    At a double eigenvalue Gamma vanishes to first order, so the
    linearization locates the root to full precision in a few steps.
    """
    left, right = np.asarray(left, float), np.asarray(right, float)
    x = np.asarray(x0, float).copy()
    xp = np.clip(x + 1e-3 * (right - left), left, right)
    xp = np.where(xp == x, x - 1e-3 * (right - left), xp)
    Gx, _ = g.blocks(x)
    Gp, _ = g.blocks(xp)
    active = np.ones(x.size, dtype=bool)
    for _ in range(iters):
        i = np.nonzero(active)[0]
        if i.size == 0:
            break
        dG = (Gx[i] - Gp[i]) / (x[i] - xp[i])[:, None, None]
        num = np.real(np.sum(np.conj(dG) * Gx[i], axis=(1, 2)))
        den = np.sum(np.abs(dG) ** 2, axis=(1, 2))
        step = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
        xn = np.clip(x[i] - step, left[i], right[i])
        moved = np.abs(xn - x[i]) > 4e-16 * np.maximum(1.0, np.abs(x[i]))
        active[i[~moved]] = False
        j = i[moved]
        if j.size == 0:
            break
        Gn, _ = g.blocks(xn[moved])
        xp[j], Gp[j] = x[j], Gx[j]
        x[j], Gx[j] = xn[moved], Gn
    return x


def _parabola_dips(g0: float, g1: float, g2: float) -> bool:
    """Whether the parabola through three equally spaced values of |g| gets near zero.

    Near a double root |g| is close to c (x - x0)^2, whose vertex value is
    about zero; wiggles of the normalization leave it well above.
    """
    curv = g0 - 2 * g1 + g2
    if curv <= 0:
        return False
    vertex = g1 - (g2 - g0) ** 2 / (8 * curv)
    return vertex < 0.1 * max(g0, g2)


def _scan(problem: Problem, bc: ABPair, lo: float, hi: float, h: float, tol: float, int_tol: float):
    n = max(8, int(math.ceil((hi - lo) / h)))
    xs = np.linspace(lo, hi, n + 1)
    f, _, _ = _char_batch(problem, bc, xs, int_tol)
    rot = np.exp(-0.5j * np.angle(np.sum(f**2)))
    g = _RealChar(problem, bc, rot, POLISH_TOL_FACTOR * int_tol)
    gv = (f * rot).real

    brackets = [(xs[i], xs[i + 1], gv[i], gv[i + 1]) for i in np.nonzero(gv[:-1] * gv[1:] < 0)[0]]
    exact = list(xs[gv == 0])
    ag = np.abs(gv)
    simple_only = _separated(bc) is not None
    dips = [] if simple_only else [
        i
        for i in range(1, n)
        if ag[i] <= ag[i - 1]
        and ag[i] <= ag[i + 1]
        and gv[i - 1] * gv[i] > 0
        and gv[i] * gv[i + 1] > 0
        and _parabola_dips(ag[i - 1], ag[i], ag[i + 1])
    ]

    doubles = []
    if dips:
        left = xs[[i - 1 for i in dips]]
        right = xs[[i + 1 for i in dips]]
        sign = np.sign(gv[dips])
        best = _gauss_newton(g, left, right, xs[dips])
        G, T = g.blocks(best)
        prof = _rank_profile(bc, G, T)
        val = g(best)
        for k in range(len(dips)):
            if prof[k, 0] < RANK_REL_TOL:
                doubles.append(best[k])
            elif val[k] * sign[k] < 0:
                brackets += [(left[k], best[k], gv[dips[k] - 1], val[k]), (best[k], right[k], val[k], gv[dips[k] + 1])]
            else:
                fine = np.linspace(left[k], right[k], 33)
                fv = g(fine)
                for j in np.nonzero(fv[:-1] * fv[1:] < 0)[0]:
                    brackets.append((fine[j], fine[j + 1], fv[j], fv[j + 1]))

    simple = []
    if brackets:
        a, b, fa, fb = map(np.array, zip(*brackets))
        simple = list(_polish(g, a, b, fa, fb, 0.5 * tol))
    roots = np.array(sorted(simple + exact + doubles))
    if roots.size == 0:
        return []
    if simple_only:
        return [(float(r), 1) for r in roots]
    G, T = g.blocks(roots)
    prof = _rank_profile(bc, G, T)
    mult = 2 - np.sum(prof > RANK_REL_TOL, axis=1)
    return [(float(r), int(min(2, max(1, m)))) for r, m in zip(roots, mult)]


def _side(start: complex, end: complex, near: float, L: float) -> list[complex]:
    """Sample points from ``start`` toward ``end`` (exclusive).

    The step is capped twice: by half the distance to the real axis plus
    ``near``, so a zero just off the contour cannot hide between samples,
    and by sqrt(|z|) / (2 L), since solutions oscillate like exp(i L sqrt(z))
    and the argument of the characteristic function follows.
    """
    out = [start]
    length = abs(end - start)
    direction = (end - start) / length
    t = 0.0
    while True:
        z = start + t * direction
        step = min(0.5 * (abs(z.imag) + near), 0.5 * math.sqrt(max(abs(z), 1.0)) / L)
        t += step
        if t >= length:
            return out
        out.append(start + t * direction)


def _contour(lo: float, hi: float, H: float, near: float, L: float) -> np.ndarray:
    """Closed rectangle crossing the real axis at lo and hi."""
    corners = [lo - 1j * H, hi - 1j * H, hi, hi + 1j * H, lo + 1j * H, lo]
    pts = []
    for k in range(len(corners)):
        pts += _side(corners[k], corners[(k + 1) % len(corners)], near, L)
    pts.append(corners[0])
    return np.array(pts)


def count_eigenvalues(
    problem: Problem, bc: ABPair, lo: float, hi: float, tol: float = DEFAULT_TOL, near: float | None = None
) -> int:
    """Number of eigenvalues in (lo, hi), counted with multiplicity.

    The characteristic function is entire in z, so the count is its winding
    number around a rectangle whose vertical sides cross the real axis at
    ``lo`` and ``hi``.  ``near`` is a lower bound on the distance from
    either edge to the nearest eigenvalue and sets the sampling density
    close to the axis.  Segments are bisected until every step of the
    argument is below pi/4.

    Raises:
        CountMismatch: the refinement budget ran out or the winding number
            is not close to an integer.
    """
    L = problem.optical_length()
    if near is None:
        near = min(math.pi**2 / (4 * L * L), hi - lo)
    # far from the axis the transfer matrix grows like exp(L |Im sqrt z|) and
    # coupled conditions lose every digit to cancellation, so cap the height
    H = min(max(1.0, 0.5 * (hi - lo)), (CONTOUR_GROWTH / L) ** 2)
    # horizontal sides step by at most (H + near) / 2
    if 4 * (hi - lo) / (H + near) > MAX_CONTOUR_POINTS:
        raise CountMismatch(f"window ({lo:g}, {hi:g}) needs too many contour samples")
    pts = _contour(lo, hi, H, near, L)
    f = _char_batch(problem, bc, pts, tol)[0]
    for _ in range(80):
        d = np.angle(f[1:] / f[:-1])
        bad = np.nonzero(~(np.abs(d) < np.pi / 4))[0]
        if bad.size == 0:
            break
        if pts.size + bad.size > MAX_CONTOUR_POINTS:
            raise CountMismatch("argument-principle refinement did not converge")
        mid = 0.5 * (pts[bad] + pts[bad + 1])
        fm = _char_batch(problem, bc, mid, tol)[0]
        pts = np.insert(pts, bad + 1, mid)
        f = np.insert(f, bad + 1, fm)
    else:
        raise CountMismatch("argument-principle refinement did not converge")
    turns = np.sum(np.angle(f[1:] / f[:-1])) / (2 * np.pi)
    count = int(round(turns))
    if abs(turns - count) > 0.1:
        raise CountMismatch(f"winding number {turns:.3f} is not an integer")
    return count


def eigenvalues(
    problem: Problem,
    bc: ABPair,
    window: tuple[float, float],
    tol: float = EIG_TOL,
    int_tol: float = DEFAULT_TOL,
) -> Spectrum:
    """All eigenvalues of H_bc in the open window, with multiplicities.

    Args:
        problem: The differential expression.
        bc: The boundary condition.
        window: ``(lo, hi)`` with ``lo < hi``.
        tol: Target accuracy of each eigenvalue.
        int_tol: Integrator tolerance.

    Raises:
        BadInterval: the window is empty or not finite.
        WindowEdgeEigenvalue: an eigenvalue lies within ``tol`` of an edge.
        CountMismatch: the scan and the winding-number count disagree even
            after the scan step was refined twice.
    """
    lo, hi = float(window[0]), float(window[1])
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
        raise BadInterval(f"need a finite window lo < hi, got ({lo}, {hi})")
    if not tol > 0:
        raise ValueError("tol must be positive")
    L = problem.optical_length()
    h = min(math.pi**2 / (4 * L * L), (hi - lo) / 8)
    count = None
    for _ in range(3):
        roots = _scan(problem, bc, lo - h, hi + h, h, tol, int_tol)
        for lam, _m in roots:
            margin = max(tol, EDGE_REL * max(1.0, abs(lam)))
            if min(abs(lam - lo), abs(lam - hi)) < margin:
                raise WindowEdgeEigenvalue(f"eigenvalue {lam!r} sits on the window edge; widen the window")
        inside = tuple((lam, m) for lam, m in roots if lo < lam < hi)
        if count is None:
            near = min([h] + [min(abs(lam - lo), abs(lam - hi)) for lam, _m in roots])
            count = count_eigenvalues(problem, bc, lo, hi, int_tol, near)
        if sum(m for _, m in inside) == count:
            return Spectrum(bc, inside, (lo, hi), tol)
        h /= 4
    found = sum(m for _, m in inside)
    raise CountMismatch(f"scan found {found} eigenvalues but the contour count is {count}")


def _coefficient_bounds(problem: Problem) -> tuple[float, float, float]:
    """min p, min r and min q/r, exact for the supported coefficient kinds."""
    pts = set(problem.nodes().tolist())
    for c in (problem.p, problem.q, problem.r):
        if c.kind == "sampled":
            pts.update(c.nodes)
    x = np.array(sorted(pts))
    eps = 1e-12 * problem.length
    x = np.concatenate([x, 0.5 * (x[1:] + x[:-1]), x + eps, x - eps])
    x = x[(x >= problem.a) & (x <= problem.b)]
    p, q, r = (np.asarray(c(x), dtype=float) for c in (problem.p, problem.q, problem.r))
    return float(p.min()), float(r.min()), float((q / r).min())


def spectral_floor(problem: Problem, bc: ABPair, tol: float = DEFAULT_TOL) -> float:
    """A real number below every eigenvalue of H_bc.

    The bound combines min q/r with the most attractive Robin strength hidden
    in the unitary parameter of ``bc`` and is confirmed by a winding-number
    count below it.

    Raises:
        SpectrumOutOfReach: near-Dirichlet Robin conditions with a strongly
            attractive side put eigenvalues near -cot^2 theta, where shooting
            overflows.
    """
    pmin, rmin, E = _coefficient_bounds(problem)
    w = np.linalg.eigvals(to_unitary(bc))
    robin = [float(v.imag / (1 + v.real)) for v in w if abs(1 + v) > 1e-9]
    kappa = max([0.0, *robin])
    # kappa |u(a)|^2 <= pmin ||u'||^2 + (kappa^2 / pmin + 2 kappa / L) ||u||^2 on each half
    floor = E - 1.0 - (kappa**2 / pmin + 2.0 * kappa / problem.length) / rmin
    if math.sqrt(E - floor) * problem.optical_length() > MAX_GROWTH_EXPONENT:
        raise SpectrumOutOfReach(
            f"spectrum may reach below {floor:.3g}; solutions there overflow double precision"
        )
    for _ in range(10):
        span = max(1.0, abs(floor))
        if count_eigenvalues(problem, bc, floor - span, floor, tol) == 0:
            return floor
        floor -= 2 * span
    raise NumericError("could not find a lower bound for the spectrum")


def lowest_eigenvalues(
    problem: Problem, bc: ABPair, n: int, tol: float = EIG_TOL, int_tol: float = DEFAULT_TOL
) -> Spectrum:
    """A spectrum from the floor upward holding at least ``n`` eigenvalues.

    Results are memoized per (problem, bc, n, tolerances); the trace and
    shift routines ask for the same spectra at every spectral parameter.
    """
    key = (problem, bc.key(), n, tol, int_tol)
    hit = _LOWEST_CACHE.get(key)
    if hit is not None:
        _LOWEST_CACHE.move_to_end(key)
        return hit
    spec = _lowest_eigenvalues(problem, bc, n, tol, int_tol)
    _LOWEST_CACHE[key] = spec
    if len(_LOWEST_CACHE) > 64:
        _LOWEST_CACHE.popitem(last=False)
    return spec


_LOWEST_CACHE: OrderedDict = OrderedDict()


def _lowest_eigenvalues(problem: Problem, bc: ABPair, n: int, tol: float, int_tol: float) -> Spectrum:
    floor = spectral_floor(problem, bc, int_tol)
    _, _, E = _coefficient_bounds(problem)
    L = problem.optical_length()
    top = E + ((n + 2) * math.pi / L) ** 2 + 1.0
    for _ in range(40):
        try:
            spec = eigenvalues(problem, bc, (floor, top), tol, int_tol)
        except WindowEdgeEigenvalue:
            top += 0.1234 * math.pi**2 / L**2
            continue
        if spec.values.size >= n:
            return spec
        top = E + 2 * (top - E)
    raise NumericError(f"could not collect {n} eigenvalues")


def ground_state(problem: Problem, bc: ABPair, tol: float = EIG_TOL, int_tol: float = DEFAULT_TOL) -> float:
    return float(lowest_eigenvalues(problem, bc, 1, tol, int_tol).values[0])


def eigenfunction_frames(problem: Problem, bc: ABPair, lam: float, tol: float = DEFAULT_TOL) -> np.ndarray:
    """4 x k frames spanning the numerical kernel of the trace matrix at ``lam``."""
    T = transfer(problem, float(lam), tol)
    G, _ = _trace_blocks(bc, T)
    _, s, Vh = np.linalg.svd(G)
    size = np.linalg.norm(bc.trace_op) * math.sqrt(2.0 + float(np.sum(np.abs(T) ** 2)))
    k = max(1, int(np.sum(s / size < RANK_REL_TOL)))
    V = Vh.conj().T[:, 2 - k :]
    return np.vstack([np.eye(2), T]) @ V


# ---------------------------------------------------------------------------
# Green's functions and resolvents


def _check_points(problem: Problem, *pts: float) -> None:
    for x in pts:
        if not problem.a <= x <= problem.b:
            raise OutOfInterval(f"{x} lies outside [{problem.a}, {problem.b}]")


def _point_grid(problem: Problem, *pts: float) -> np.ndarray:
    return np.unique(np.concatenate([problem.nodes(), np.asarray(pts, dtype=float)]))


def _path_frames(phi: SolutionPath, psi: SolutionPath) -> np.ndarray:
    return np.array([[f.u[0], f.pu[0], f.u[-1], f.pu[-1]] for f in (phi, psi)]).T


def green_general(problem: Problem, bc: ABPair, z, x: float, xp: float, tol: float = DEFAULT_TOL) -> complex:
    """Green's function of H_bc from the IV basis and a 2 x 2 boundary solve.

    The kernel is the variation-of-parameters particular solution for a
    point source at ``xp`` plus the combination of phi and psi that restores
    the boundary condition.

    Raises:
        OutOfInterval: x or xp outside [a, b].
        SpectralPoint: z is an eigenvalue of H_bc.
    """
    x, xp = float(x), float(xp)
    _check_points(problem, x, xp)
    grid = _point_grid(problem, x, xp)
    phi, psi = iv_paths(problem, z, tol, grid)
    i, j = np.searchsorted(grid, x), np.searchsorted(grid, xp)
    M = bc.trace_op @ _path_frames(phi, psi)
    _check_regular(M, z, bc.label or "boundary")
    W = phi.u[0] * psi.pu[0] - phi.pu[0] * psi.u[0]
    kx = (phi.u[i] * psi.u[j] - psi.u[i] * phi.u[j]) / W if x >= xp else 0.0
    ub = (phi.u[-1] * psi.u[j] - psi.u[-1] * phi.u[j]) / W
    pub = (phi.pu[-1] * psi.u[j] - psi.pu[-1] * phi.u[j]) / W
    c = np.linalg.solve(M, -(bc.trace_op @ np.array([0.0, 0.0, ub, pub])))
    return complex(kx + c[0] * phi.u[i] + c[1] * psi.u[i])


def green_dirichlet(problem: Problem, z, x: float, xp: float, tol: float = DEFAULT_TOL) -> complex:
    """Dirichlet Green's function u2(x>) u1(x<) / W with W = u1'(a).

    Raises:
        OutOfInterval: x or xp outside [a, b].
        SpectralPoint: z is a Dirichlet eigenvalue.
    """
    x, xp = float(x), float(xp)
    _check_points(problem, x, xp)
    grid = _point_grid(problem, x, xp)
    u1, u2 = _two_point_paths(problem, z, tol, grid)
    i, j = np.searchsorted(grid, x), np.searchsorted(grid, xp)
    w21 = u1.pu[0]
    if xp <= x:
        return complex(u2.u[i] * u1.u[j] / w21)
    return complex(u1.u[i] * u2.u[j] / w21)


def green_direct(problem: Problem, bc: ABPair, z, x: float, xp: float, tol: float = DEFAULT_TOL) -> complex:
    """G_bc(z, x, xp), using the two-point basis formula for Dirichlet conditions."""
    if equivalent(bc, DIRICHLET):
        return green_dirichlet(problem, z, x, xp, tol)
    return green_general(problem, bc, z, x, xp, tol)


def _two_point_paths(problem: Problem, z, tol: float, grid: np.ndarray):
    phi, psi = iv_paths(problem, z, tol, grid)
    M = np.array([[phi.u[0], psi.u[0]], [phi.u[-1], psi.u[-1]]])
    _check_regular(M, z, "Dirichlet")
    c = np.linalg.solve(M, np.eye(2))
    return phi.combine(psi, c[0, 1], c[1, 1]), phi.combine(psi, c[0, 0], c[1, 0])


def _samples(problem: Problem, grid: np.ndarray, f) -> np.ndarray:
    return np.asarray(f(grid) if callable(f) else f, dtype=complex)


def resolvent_apply(problem: Problem, bc: ABPair, z, f, tol: float = DEFAULT_TOL) -> np.ndarray:
    """(H_bc - z)^{-1} f on the common grid by Green-kernel quadrature.

    ``f`` is a callable or an array of samples on :func:`common_grid`.

    Raises:
        SpectralPoint: z is an eigenvalue of H_bc.
    """
    grid = common_grid(problem)
    rf = weight(problem, grid) * _samples(problem, grid, f)
    phi, psi = iv_paths(problem, z, tol, grid)
    M = bc.trace_op @ _path_frames(phi, psi)
    _check_regular(M, z, bc.label or "boundary")
    W = phi.u[0] * psi.pu[0] - phi.pu[0] * psi.u[0]
    Ipsi = cumulative_integral(problem, grid, psi.u * rf)
    Iphi = cumulative_integral(problem, grid, phi.u * rf)
    up = (phi.u * Ipsi - psi.u * Iphi) / W
    pub = (phi.pu[-1] * Ipsi[-1] - psi.pu[-1] * Iphi[-1]) / W
    c = np.linalg.solve(M, -(bc.trace_op @ np.array([0.0, 0.0, up[-1], pub])))
    return up + c[0] * phi.u + c[1] * psi.u


def resolvent_dirichlet(problem: Problem, z, f, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Dirichlet resolvent from the two-point basis, on the common grid."""
    grid = common_grid(problem)
    rf = weight(problem, grid) * _samples(problem, grid, f)
    u1, u2 = _two_point_paths(problem, z, tol, grid)
    left = cumulative_integral(problem, grid, u1.u * rf)
    acc = cumulative_integral(problem, grid, u2.u * rf)
    right = acc[-1] - acc
    return (u2.u * left + u1.u * right) / u1.pu[0]


def _resolvent_ref(problem: Problem, ref: ABPair, z, f, tol: float) -> np.ndarray:
    if equivalent(ref, DIRICHLET):
        return resolvent_dirichlet(problem, z, f, tol)
    return resolvent_apply(problem, ref, z, f, tol)


def l2_norm(problem: Problem, values: np.ndarray) -> float:
    grid = common_grid(problem)
    return math.sqrt(max(0.0, float(np.real(integrate(problem, grid, weight(problem, grid) * np.abs(values) ** 2)))))


# ---------------------------------------------------------------------------
# Krein resolvent formulas


def normalized_basis(problem: Problem, ref: ABPair, z, tol: float = DEFAULT_TOL) -> tuple[SolutionPath, SolutionPath]:
    """Solutions u_1, u_2 at z with gamma_ref(u_k) = e_k, on the common grid.

    Raises:
        SpectralPoint: z is an eigenvalue of H_ref.
    """
    phi, psi = iv_paths(problem, z, tol, common_grid(problem))
    M = ref.trace_op @ _path_frames(phi, psi)
    _check_regular(M, z, ref.label or "reference")
    C = np.linalg.inv(M)
    return phi.combine(psi, C[0, 0], C[1, 0]), phi.combine(psi, C[0, 1], C[1, 1])


def _inner(problem: Problem, f: SolutionPath, g: np.ndarray) -> complex:
    return complex(integrate(problem, f.grid, weight(problem, f.grid) * np.conj(f.u) * g))


@dataclass(frozen=True, eq=False)
class SpecializedForm:
    """A closed-form Dirichlet-reference correction next to its general counterpart.

    ``general`` is the general P (or p) already permuted into the
    specialized ordering, so ``residual = max |value - general|``.
    """

    name: str
    value: np.ndarray
    general: np.ndarray
    residual: float


@dataclass(frozen=True, eq=False)
class KreinCorrection:
    """Finite-rank part of R_target(z) - R_ref(z).

    ``kind`` is ``"matrix2"`` (``P`` 2 x 2, two kernel elements),
    ``"rank1"`` (scalar ``p``, one kernel element) or ``"zero"``.
    ``basis`` holds the kernel elements at z and ``basis_conj`` the same
    combinations at conj(z).
    """

    kind: str
    z: complex
    S: np.ndarray
    P: np.ndarray | None
    p: complex | None
    basis: tuple[SolutionPath, ...]
    basis_conj: tuple[SolutionPath, ...]
    problem: Problem
    specialized: SpecializedForm | None = None

    def apply(self, f) -> np.ndarray:
        """The correction applied to f, on the common grid."""
        grid = common_grid(self.problem)
        fv = _samples(self.problem, grid, f)
        if self.kind == "zero":
            return np.zeros(grid.size, dtype=complex)
        coef = np.array([_inner(self.problem, u, fv) for u in self.basis_conj])
        if self.kind == "rank1":
            return coef[0] / self.p * self.basis[0].u
        c = np.linalg.solve(self.P, coef)
        return c[0] * self.basis[0].u + c[1] * self.basis[1].u


def _s_rank(S: np.ndarray, target: ABPair, ref: ABPair) -> int:
    size = np.linalg.norm(target.trace_op) * np.linalg.norm(ref.trace_op)
    return int(np.sum(np.linalg.svd(S, compute_uv=False) > 1e-10 * size))


def krein_correction(
    problem: Problem,
    target: ABPair,
    ref: ABPair = DIRICHLET,
    z: complex = -1.0,
    tol: float = DEFAULT_TOL,
    canonical: SeparatedBC | CoupledBC | None = None,
) -> KreinCorrection:
    """The Krein correction term, its kind fixed by rank(S).

    With ``canonical`` given and a Dirichlet reference, the matching closed
    form (D, d or Q, q) is computed as well; ``target`` must then be
    ``canonical.to_ab()`` since P depends on the chosen (A, B).

    Raises:
        SpectralPoint: z lies in the spectrum of the target or the reference.
    """
    z = complex(z)
    _, S = connection_matrices(target, ref)
    rank = _s_rank(S, target, ref)
    if rank == 0:
        spec = _specialized(problem, canonical, z, None, None, tol) if canonical is not None else None
        return KreinCorrection("zero", z, S, None, None, (), (), problem, spec)
    Lam = bdm_matrix(problem, ref, target, z, tol)
    uz = normalized_basis(problem, ref, z, tol)
    uc = normalized_basis(problem, ref, z.conjugate(), tol)
    if rank == 2:
        P = np.linalg.solve(S, Lam)
        _check_regular(P, z, target.label or "target")
        spec = _specialized(problem, canonical, z, P, None, tol) if canonical is not None else None
        return KreinCorrection("matrix2", z, S, P, None, uz, uc, problem, spec)
    U, _, _ = np.linalg.svd(S)
    e = U[:, 0]
    v = S.conj().T @ e
    p = complex(e.conj() @ Lam @ v)
    if abs(p) < 1e-12 * np.abs(Lam).max() * np.linalg.norm(v):
        raise SpectralPoint(f"z = {z} is numerically an eigenvalue of the target operator")
    u0 = uz[0].combine(uz[1], v[0], v[1])
    u0c = uc[0].combine(uc[1], v[0], v[1])
    spec = _specialized(problem, canonical, z, None, p, tol) if canonical is not None else None
    return KreinCorrection("rank1", z, S, None, p, (u0,), (u0c,), problem, spec)


def specialized_matrix(problem: Problem, canonical: SeparatedBC | CoupledBC, z, tol: float = DEFAULT_TOL):
    """The closed-form Dirichlet-reference quantity for a canonical condition.

    Returns ``(name, value)``: ``("D", 2x2)``, ``("d_a", scalar)``,
    ``("d_b", scalar)``, ``("Q", 2x2)``, ``("q", scalar)`` or
    ``("zero", 0)`` for the Dirichlet condition itself.  The scalars
    already carry the sin^2 prefactors, so they compare directly with p.
    """
    Fr = fundamental_frames(problem, z, tol)
    u1a, u1b = Fr[1, 0], Fr[3, 0]
    u2a, u2b = Fr[1, 1], Fr[3, 1]
    if isinstance(canonical, SeparatedBC):
        ta, tb = canonical.theta_a, canonical.theta_b
        if ta != 0 and tb != 0:
            D = np.array([[1 / math.tan(tb) - u1b, -u2b], [u1a, 1 / math.tan(ta) + u2a]])
            return "D", D
        if ta != 0:
            return "d_a", np.array(math.sin(ta) ** 2 * (1 / math.tan(ta) + u2a))
        if tb != 0:
            return "d_b", np.array(math.sin(tb) ** 2 * (1 / math.tan(tb) - u1b))
        return "zero", np.array(0.0)
    F, ph = canonical.Fm, canonical.phi
    w = np.exp(1j * ph)
    if abs(F[0, 1]) >= 1e-12:
        Q = np.array(
            [
                [F[1, 1] / F[0, 1] - u1b, -w / F[0, 1] - u2b],
                [-np.conj(w) / F[0, 1] + u1a, F[0, 0] / F[0, 1] + u2a],
            ]
        )
        return "Q", Q
    q = F[1, 0] * F[1, 1] + F[1, 1] ** 2 * u2a + w * F[1, 1] * u1a - np.conj(w) * F[1, 1] * u2b - u1b
    return "q", np.array(q)


def _specialized(problem, canonical, z, P, p, tol) -> SpecializedForm:
    name, value = specialized_matrix(problem, canonical, z, tol)
    if name in ("D", "Q"):
        general = SIGMA @ P @ SIGMA
    elif name == "zero":
        general = np.array(0.0)
    else:
        general = np.array(p)
    return SpecializedForm(name, value, general, float(np.abs(value - general).max()))


def krein_resolvent_check(
    problem: Problem,
    target: ABPair,
    ref: ABPair,
    z,
    trial_functions: list,
    tol: float = DEFAULT_TOL,
) -> float:
    """Largest L^2 gap between the two sides of Krein's formula.

    The left side applies the target resolvent directly through its Green
    kernel.  The right side applies the reference resolvent and subtracts
    the finite-rank correction.

    Raises:
        SpectralPoint: z lies in either spectrum.
    """
    corr = krein_correction(problem, target, ref, z, tol)
    worst = 0.0
    for f in trial_functions:
        direct = resolvent_apply(problem, target, z, f, tol)
        via = _resolvent_ref(problem, ref, z, f, tol) - corr.apply(f)
        worst = max(worst, l2_norm(problem, direct - via))
    return worst


# ---------------------------------------------------------------------------
# Krein-von Neumann extension


def kvn_extension(problem: Problem, tol: float = DEFAULT_TOL) -> CoupledBC:
    """The coupled condition (phi = 0, F_K) of the Krein-von Neumann extension.

    F_K is read off the z = 0 two-point basis.  Its determinant equals
    -u2'(0, b) / u1'(0, a), which must be 1.

    Raises:
        NotStrictlyPositive: the Dirichlet ground state is not above 1e-8.
    """
    e0 = ground_state(problem, DIRICHLET, int_tol=tol)
    if e0 <= KVN_POSITIVITY:
        raise NotStrictlyPositive(f"Dirichlet ground state {e0:.6g} is not strictly positive")
    Fr = fundamental_frames(problem, 0.0, tol)
    if np.abs(Fr.imag).max() > 1e-8 * np.abs(Fr).max():
        raise NumericError("z = 0 solutions are not real")
    Fr = Fr.real
    u1a, u1b, u2a, u2b = Fr[1, 0], Fr[3, 0], Fr[1, 1], Fr[3, 1]
    F = np.array([[-u2a, 1.0], [u1a * u2b - u1b * u2a, u1b]]) / u1a
    det = -u2b / u1a
    if abs(det - 1.0) > 1e-6:
        raise NumericError(f"det F_K = {det} differs from 1")
    F = F / math.sqrt(np.linalg.det(F))
    return CoupledBC(0.0, tuple(map(tuple, F)))


@dataclass(frozen=True)
class KvnCheck:
    """Diagnostics of the Krein-von Neumann extension.

    Attributes:
        eigenvalues: The two lowest eigenvalues of H_K.
        kernel_residual: Largest violation of the F_K condition by the
            normalized solutions of tau u = 0 (all of which lie in dom H_K).
        relation_residual: For q = 0 only, the largest violation of
            u'(b) = u'(a) = [integral of 1/p]^{-1} (u(b) - u(a)) on the
            eigenfunctions of the two lowest eigenvalues; None otherwise.
    """

    eigenvalues: tuple[float, float]
    kernel_residual: float
    relation_residual: float | None


def kvn_spectrum_check(problem: Problem, tol: float = DEFAULT_TOL) -> KvnCheck:
    """Two lowest eigenvalues of H_K plus boundary checks on its kernel."""
    kvn = kvn_extension(problem, tol)
    bc = kvn.to_ab()
    spec = lowest_eigenvalues(problem, bc, 2, int_tol=tol)
    lams = spec.values[:2]
    Y = fundamental_frames(problem, 0.0, tol)
    Y = Y / np.linalg.norm(Y, axis=0)
    kernel = float(np.abs(bc.trace_op @ Y).max())
    relation = None
    if problem.q.kind == "const" and problem.q.values[0] == 0.0:
        P = problem.p.integral_of_reciprocal(problem.a, problem.b)
        relation = 0.0
        for lam in sorted(set(lams.tolist())):
            E = eigenfunction_frames(problem, bc, lam, tol)
            for k in range(E.shape[1]):
                u = E[:, k] / np.linalg.norm(E[:, k])
                slope = (u[2] - u[0]) / P
                relation = max(relation, float(abs(u[3] - u[1])), float(abs(u[1] - slope)))
    return KvnCheck((float(lams[0]), float(lams[1])), kernel, relation)
