"""Perturbation determinants and the spectral shift function.

``det Lambda_{from}^{to}(z)`` is the 2 x 2 reduction of the symmetrized
perturbation determinant of the pair (H_to, H_from).  Its logarithmic
derivative is minus the trace of the resolvent difference, and the phase of
its boundary values on the real axis is pi times the spectral shift function
xi = N_from - N_to.
"""

from __future__ import annotations

import cmath
import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .bdm import bdm_matrix
from .boundary import ABPair, equivalent, trace_matrices
from .errors import (
    DegenerateN,
    InsufficientEigs,
    NonIntegerValue,
    PathThroughSpectrum,
    PropertyViolation,
    SpectralPoint,
    WindowEdgeEigenvalue,
)
from .problem import Problem
from .propagate import DEFAULT_TOL
from .spectra import (
    char_normalized,
    eigenvalues,
    ground_state,
    lowest_eigenvalues,
    spectral_floor,
)

SPECTRUM_GUARD = 1e-10
MAX_BISECT = 48


def det_lambda(problem: Problem, from_bc: ABPair, to_bc: ABPair, z, tol: float = DEFAULT_TOL) -> complex:
    """det Lambda_{from}^{to}(z).

    Raises:
        SpectralPoint: z is an eigenvalue of H_from or H_to.
    """
    if abs(char_normalized(problem, to_bc, z, tol)) < SPECTRUM_GUARD:
        raise SpectralPoint(f"z = {complex(z)} is numerically an eigenvalue of the target operator")
    return complex(np.linalg.det(bdm_matrix(problem, from_bc, to_bc, z, tol)))


def reference_energy(problem: Problem, from_bc: ABPair, to_bc: ABPair, tol: float = DEFAULT_TOL) -> float:
    """e0: one below the lower of the two ground states."""
    return min(ground_state(problem, from_bc, int_tol=tol), ground_state(problem, to_bc, int_tol=tol)) - 1.0


# ---------------------------------------------------------------------------
# continuous logarithm


@dataclass(frozen=True)
class LogDetPath:
    """A continuous branch of ln(eta det Lambda) along a path.

    Attributes:
        points: ``(z, logdet)`` at every requested path point.
        eta: Unimodular constant making eta det Lambda positive at the
            first point.
        reference: The first path point.
        evaluations: Number of determinant evaluations, refinement included.
    """

    points: tuple[tuple[complex, complex], ...]
    eta: complex
    reference: complex
    evaluations: int


class _Tracker:
    def __init__(self, problem, from_bc, to_bc, tol):
        self.problem, self.from_bc, self.to_bc, self.tol = problem, from_bc, to_bc, tol
        self.calls = 0

    def det(self, z) -> complex:
        self.calls += 1
        try:
            d = det_lambda(self.problem, self.from_bc, self.to_bc, z, self.tol)
        except SpectralPoint as exc:
            raise PathThroughSpectrum(f"path meets the spectrum near z = {complex(z)}") from exc
        if d == 0 or not np.isfinite(d):
            raise PathThroughSpectrum(f"det Lambda vanishes near z = {complex(z)}")
        return d

    def advance(self, z0: complex, d0: complex, z1: complex, d1: complex, depth: int = 0) -> complex:
        """Change of the continuous log from z0 to z1, bisecting until arg steps are < pi/2."""
        step = cmath.log(d1 / d0)
        if abs(step.imag) < math.pi / 2:
            return step
        if depth >= MAX_BISECT:
            raise PathThroughSpectrum(f"phase jumps by {step.imag:.3f} near z = {z0}")
        zm = 0.5 * (z0 + z1)
        dm = self.det(zm)
        return self.advance(z0, d0, zm, dm, depth + 1) + self.advance(zm, dm, z1, d1, depth + 1)


def logdet_track(problem: Problem, from_bc: ABPair, to_bc: ABPair, path, tol: float = DEFAULT_TOL) -> LogDetPath:
    """ln(eta det Lambda(z)) continued along ``path``.

    The first point should be real and below both spectra, so that
    det Lambda there is a nonzero constant-phase number; eta removes that
    phase.

    Raises:
        ValueError: empty path.
        PathThroughSpectrum: the path runs through (or too close to) an
            eigenvalue of either operator.
    """
    path = [complex(z) for z in path]
    if not path:
        raise ValueError("empty path")
    tr = _Tracker(problem, from_bc, to_bc, tol)
    d = tr.det(path[0])
    eta = abs(d) / d
    log = complex(math.log(abs(d)), 0.0)
    points = [(path[0], log)]
    for z in path[1:]:
        dn = tr.det(z)
        log = log + tr.advance(points[-1][0], d, z, dn)
        d = dn
        points.append((z, log))
    return LogDetPath(tuple(points), complex(eta), path[0], tr.calls)


# ---------------------------------------------------------------------------
# trace formula


@dataclass(frozen=True)
class TraceCheck:
    """Both sides of the trace formula at one z.

    Attributes:
        lhs: Sum over eigenvalues up to ``cutoff`` plus ``tail``.
        rhs: -d/dz ln det Lambda by central differences.
        residual: |lhs - rhs|.
        truncated: The bare eigenvalue sum.
        tail: Estimate of the neglected part above ``cutoff``.
        cutoff: Energy separating included from neglected eigenvalues.
    """

    lhs: complex
    rhs: complex
    residual: float
    truncated: complex
    tail: complex
    cutoff: float


def _step_average(jumps: list[tuple[float, int]], base: int, lo: float, hi: float, z: complex) -> complex:
    """Average of a step function on [lo, hi] with weight 1/(lambda - z)^2."""
    edges = [lo] + [x for x, _ in jumps if lo < x < hi] + [hi]
    total = 0.0
    for left, right in zip(edges[:-1], edges[1:]):
        total += _step_value(jumps, base, 0.5 * (left + right)) * (1 / (left - z) - 1 / (right - z))
    return total / (1 / (lo - z) - 1 / (hi - z))


def _step_value(jumps: list[tuple[float, int]], base: int, x: float) -> int:
    v = base
    for at, to in jumps:
        if at <= x:
            v = to
    return v


def trace_formula_check(
    problem: Problem,
    from_bc: ABPair,
    to_bc: ABPair,
    z,
    n_eigs: int,
    tol: float = 1e-5,
    int_tol: float = DEFAULT_TOL,
) -> TraceCheck:
    """Compare the resolvent-difference trace with -d/dz ln det Lambda.

    Eigenvalues of both operators are collected up to a common cutoff E
    placed in a gap of the joint spectrum.  Above E the difference of the
    two sums is the integral of xi against 1/(lambda - z)^2, estimated by
    freezing xi at its weighted average over the upper part of [e, E].
    Pairing sorted eigenvalues by index alone converges like E^{-1/2}
    when xi oscillates, which is too slow for interleaved spectra.

    Raises:
        SpectralPoint: z lies in either spectrum.
        InsufficientEigs: the tail estimate is uncertain beyond ``tol``.
    """
    z = complex(z)
    h = 1e-5 * max(1.0, abs(z))
    rhs = -cmath.log(det_lambda(problem, from_bc, to_bc, z + h, int_tol) / det_lambda(problem, from_bc, to_bc, z - h, int_tol)) / (2 * h)
    sf = lowest_eigenvalues(problem, from_bc, n_eigs + 1, int_tol=int_tol)
    st = lowest_eigenvalues(problem, to_bc, n_eigs + 1, int_tol=int_tol)
    top = min(sf.window[1], st.window[1])
    union = sorted(v for v in np.concatenate([sf.values, st.values]).tolist() if v < top)
    pts = union[-4:] + [top]
    gaps = [(pts[k + 1] - pts[k], k) for k in range(len(pts) - 1)]
    _, k = max(gaps)
    E = 0.5 * (pts[k] + pts[k + 1])
    vf = sf.values[sf.values < E]
    vt = st.values[st.values < E]
    truncated = complex(np.sum(1 / (vt - z)) - np.sum(1 / (vf - z)))
    jumps = _net_jumps(vf, vt)
    xi_E = _step_value(jumps, 0, E)
    lo = E - 0.75 * (E - union[0])
    mid = 0.5 * (lo + E)
    avg = _step_average(jumps, 0, lo, E, z)
    spread = abs(_step_average(jumps, 0, mid, E, z) - _step_average(jumps, 0, lo, mid, z))
    tail = (xi_E - avg) / (E - z)
    if spread / abs(E - z) > tol:
        raise InsufficientEigs(f"tail uncertainty {spread / abs(E - z):.2e} exceeds {tol:.1e}; raise n_eigs")
    lhs = truncated + tail
    return TraceCheck(complex(lhs), complex(rhs), float(abs(lhs - rhs)), truncated, complex(tail), float(E))


# ---------------------------------------------------------------------------
# determinant ratio


@dataclass(frozen=True)
class DetRatio:
    """[det N_from / det N_to] det Lambda(z), with a flag for det N_from = 0."""

    value: complex
    degenerate_from: bool


def det_ratio(problem: Problem, from_bc: ABPair, to_bc: ABPair, z, tol: float = DEFAULT_TOL) -> DetRatio:
    """The 2 x 2 reduction of the symmetrized perturbation determinant.

    Raises:
        DegenerateN: det N_to = 0.
    """
    nf, nt = trace_matrices(from_bc).N, trace_matrices(to_bc).N
    scale_t = max(1.0, float(np.abs(to_bc.trace_op).max()) ** 2)
    dt = complex(np.linalg.det(nt))
    if abs(dt) < 1e-12 * scale_t:
        raise DegenerateN("det N of the target condition vanishes")
    df = complex(np.linalg.det(nf))
    degenerate = abs(df) < 1e-12 * max(1.0, float(np.abs(from_bc.trace_op).max()) ** 2)
    if degenerate:
        df = 0.0
    return DetRatio(df / dt * det_lambda(problem, from_bc, to_bc, z, tol), degenerate)


# ---------------------------------------------------------------------------
# spectral shift function


@dataclass(frozen=True)
class StepFunction:
    """Integer-valued, right-continuous step function.

    ``jumps`` lists ``(at, to)``: from ``at`` on (inclusive) the value is ``to``.
    Below the first jump the value is ``base``.
    """

    base: int
    jumps: tuple[tuple[float, int], ...]

    def __call__(self, x: float) -> int:
        return _step_value(list(self.jumps), self.base, float(x))

    def to_json(self) -> dict:
        return {"base": self.base, "jumps": [{"at": at, "to": to} for at, to in self.jumps]}

    def to_csv(self, lambdas) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "xi"])
        for x in lambdas:
            w.writerow([repr(float(x)), self(x)])
        return buf.getvalue()


def _net_jumps(from_vals: np.ndarray, to_vals: np.ndarray, rel: float = 1e-8) -> list[tuple[float, int]]:
    """Merge +1 per eigenvalue of H_from and -1 per eigenvalue of H_to."""
    events = sorted([(float(v), 1) for v in from_vals] + [(float(v), -1) for v in to_vals])
    merged: list[list] = []
    for x, d in events:
        if merged and abs(x - merged[-1][0]) <= rel * max(1.0, abs(x)):
            merged[-1][1] += d
        else:
            merged.append([x, d])
    out, value = [], 0
    for x, d in merged:
        if d:
            value += d
            out.append((x, value))
    return out


def _spectrum_up_to(problem: Problem, bc: ABPair, floor: float, lam_max: float, tol: float, int_tol: float):
    span = max(1.0, abs(lam_max))
    for k in range(8):
        top = lam_max + span * 1e-3 * (1 + 0.37 * k)
        try:
            spec = eigenvalues(problem, bc, (floor, top), tol, int_tol)
        except WindowEdgeEigenvalue:
            continue
        return spec.values[spec.values <= lam_max]
    raise WindowEdgeEigenvalue(f"could not place a window edge near {lam_max}")


def ssf_counting(
    problem: Problem,
    from_bc: ABPair,
    to_bc: ABPair,
    lambda_max: float,
    tol: float = 1e-10,
    int_tol: float = DEFAULT_TOL,
) -> StepFunction:
    """xi = N_from - N_to on (-inf, lambda_max] from the two eigenvalue lists.

    The sign convention is cross-checked once against the trace formula:
    below both spectra -d/dz ln det Lambda must have the sign of
    sum over H_to minus sum over H_from.

    Raises:
        PropertyViolation: the cross-check disagrees in sign.
    """
    lam_max = float(lambda_max)
    floor = min(spectral_floor(problem, from_bc, int_tol), spectral_floor(problem, to_bc, int_tol))
    if lam_max <= floor:
        return StepFunction(0, ())
    vf = _spectrum_up_to(problem, from_bc, floor, lam_max, tol, int_tol)
    vt = _spectrum_up_to(problem, to_bc, floor, lam_max, tol, int_tol)
    step = StepFunction(0, tuple(_net_jumps(vf, vt)))
    if step.jumps and not equivalent(from_bc, to_bc):
        z = floor - 1.0
        h = 1e-5 * max(1.0, abs(z))
        rhs = -cmath.log(det_lambda(problem, from_bc, to_bc, z + h, int_tol) / det_lambda(problem, from_bc, to_bc, z - h, int_tol)) / (2 * h)
        lhs = float(np.sum(1 / (vt - z)) - np.sum(1 / (vf - z)))
        if abs(rhs.real) > 1e-6 and abs(lhs) > 1e-6 and np.sign(rhs.real) != np.sign(lhs):
            raise PropertyViolation("counting sign disagrees with the trace formula")
    return step


def ssf_boundary(
    problem: Problem,
    from_bc: ABPair,
    to_bc: ABPair,
    lambdas,
    epsilon: float = 1e-3,
    tol: float = DEFAULT_TOL,
    e0: float | None = None,
) -> list[float]:
    """xi(lambda) ~ pi^{-1} Im ln(eta det Lambda(lambda + i epsilon)).

    The branch is carried from z0 = e0 - 1 - |e0| straight up to height
    epsilon and then along the horizontal line through the sorted lambdas.
    Values come back in input order, unrounded.

    Raises:
        ValueError: epsilon is not positive.
        PathThroughSpectrum: the path meets an eigenvalue.
        NonIntegerValue: a value is further than 0.2 from every integer.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    lams = [float(x) for x in lambdas]
    if e0 is None:
        e0 = reference_energy(problem, from_bc, to_bc, tol)
    z0 = e0 - 1.0 - abs(e0)
    order = sorted(range(len(lams)), key=lams.__getitem__)
    path = [complex(z0), complex(z0, epsilon)] + [complex(lams[i], epsilon) for i in order]
    track = logdet_track(problem, from_bc, to_bc, path, tol)
    out = [0.0] * len(lams)
    for i, (_, log) in zip(order, track.points[2:]):
        v = log.imag / math.pi
        if abs(v - round(v)) > 0.2:
            raise NonIntegerValue(f"xi({lams[i]}) = {v:.3f} is not near an integer; reduce epsilon")
        out[i] = v
    return out
