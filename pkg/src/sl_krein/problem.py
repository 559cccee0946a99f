"""Differential expression tau = r^{-1}(-(p u')' + q u) on a finite interval.

Coefficients are constant, piecewise constant on half-open cells, or
linearly interpolated samples.  All three kinds are immutable and hashable,
so a :class:`Problem` can key caches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.integrate import trapezoid

from .errors import (
    BadDocument,
    BadGrid,
    BadInterval,
    NonPositiveCoefficient,
    UnknownPreset,
)

VALIDATION_POINTS = 1024


@dataclass(frozen=True)
class Coefficient:
    """A real coefficient function on [a, b].

    Attributes:
        kind: ``"const"``, ``"pw"`` or ``"sampled"``.
        values: Constant value (length 1), cell values (``len(nodes) + 1``)
            or sample values (``len(nodes)``).
        nodes: Empty, interior breakpoints, or the sample grid.
    """

    kind: str
    values: tuple[float, ...]
    nodes: tuple[float, ...] = ()

    @staticmethod
    def constant(value: float) -> Coefficient:
        return Coefficient("const", (float(value),))

    @staticmethod
    def piecewise(breaks, values) -> Coefficient:
        breaks = tuple(float(b) for b in breaks)
        values = tuple(float(v) for v in values)
        if len(values) != len(breaks) + 1:
            raise BadGrid("piecewise coefficient needs len(values) == len(breaks) + 1")
        if any(b1 >= b2 for b1, b2 in zip(breaks, breaks[1:])):
            raise BadGrid("breakpoints must be strictly increasing")
        return Coefficient("pw", values, breaks)

    @staticmethod
    def sampled(x, v) -> Coefficient:
        x = tuple(float(t) for t in x)
        v = tuple(float(t) for t in v)
        if len(x) != len(v) or len(x) < 2:
            raise BadGrid("sampled coefficient needs matching x and v of length >= 2")
        if any(x1 >= x2 for x1, x2 in zip(x, x[1:])):
            raise BadGrid("sample grid must be strictly increasing")
        return Coefficient("sampled", v, x)

    def __call__(self, x):
        """Evaluate at a scalar or an array of points."""
        if self.kind == "const":
            if np.ndim(x) == 0:
                return self.values[0]
            return np.full(np.shape(x), self.values[0])
        if self.kind == "pw":
            idx = np.searchsorted(self.nodes, x, side="right")
            if np.ndim(x) == 0:
                return self.values[int(idx)]
            return np.asarray(self.values)[idx]
        out = np.interp(x, self.nodes, self.values)
        return float(out) if np.ndim(x) == 0 else out

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Points where the coefficient may fail to be smooth."""
        return self.nodes

    def integral_of_reciprocal(self, a: float, b: float) -> float:
        """Exact value of the integral of 1/c over [a, b]."""
        if self.kind == "const":
            return (b - a) / self.values[0]
        if self.kind == "pw":
            edges = [a, *[t for t in self.nodes if a < t < b], b]
            total = 0.0
            for lo, hi in zip(edges, edges[1:]):
                total += (hi - lo) / self(0.5 * (lo + hi))
            return total
        xs = [a, *[t for t in self.nodes if a < t < b], b]
        total = 0.0
        for lo, hi in zip(xs, xs[1:]):
            c0, c1 = self(lo), self(hi)
            if abs(c1 - c0) <= 1e-14 * max(abs(c0), abs(c1)):
                total += (hi - lo) / c0
            else:
                total += (hi - lo) * math.log(c1 / c0) / (c1 - c0)
        return total

    def to_json(self) -> dict[str, Any]:
        if self.kind == "const":
            return {"const": self.values[0]}
        if self.kind == "pw":
            return {"pw": {"breaks": list(self.nodes), "vals": list(self.values)}}
        return {"sampled": {"x": list(self.nodes), "v": list(self.values)}}

    @staticmethod
    def from_json(doc: Any) -> Coefficient:
        if isinstance(doc, (int, float)):
            return Coefficient.constant(doc)
        if not isinstance(doc, dict) or len(doc) != 1:
            raise BadDocument(f"bad coefficient document: {doc!r}")
        try:
            if "const" in doc:
                return Coefficient.constant(doc["const"])
            if "pw" in doc:
                return Coefficient.piecewise(doc["pw"]["breaks"], doc["pw"]["vals"])
            if "sampled" in doc:
                return Coefficient.sampled(doc["sampled"]["x"], doc["sampled"]["v"])
        except (KeyError, TypeError) as exc:
            raise BadDocument(f"bad coefficient document: {doc!r}") from exc
        raise BadDocument(f"unknown coefficient kind: {doc!r}")


@dataclass(frozen=True)
class Problem:
    """A validated regular Sturm-Liouville expression on [a, b]."""

    a: float
    b: float
    p: Coefficient
    q: Coefficient
    r: Coefficient
    name: str = field(default="", compare=False)

    @property
    def length(self) -> float:
        return self.b - self.a

    def nodes(self) -> np.ndarray:
        """Sorted segment boundaries: endpoints plus every coefficient breakpoint."""
        pts = {self.a, self.b}
        for c in (self.p, self.q, self.r):
            pts.update(t for t in c.breakpoints if self.a < t < self.b)
        return np.array(sorted(pts))

    def optical_length(self, n: int = 4097) -> float:
        """L = integral of sqrt(r/p), used for Weyl-type step heuristics."""
        segs = self.nodes()
        total = 0.0
        for lo, hi in zip(segs[:-1], segs[1:]):
            m = max(3, int(n * (hi - lo) / self.length) | 1)
            x = np.linspace(lo, hi, m)
            # interior sample avoids the half-open cell ambiguity at lo/hi
            x[0] += 1e-12 * (hi - lo)
            x[-1] -= 1e-12 * (hi - lo)
            total += trapezoid(np.sqrt(self.r(x) / self.p(x)), x)
        return float(total)

    @property
    def unit_weights(self) -> bool:
        """True when p and r are identically 1."""
        return all(c.kind == "const" and c.values[0] == 1.0 for c in (self.p, self.r))

    def to_json(self) -> dict[str, Any]:
        return {
            "a": self.a,
            "b": self.b,
            "p": self.p.to_json(),
            "q": self.q.to_json(),
            "r": self.r.to_json(),
        }

    @staticmethod
    def from_json(doc: dict[str, Any]) -> Problem:
        try:
            return build_problem(
                doc["a"],
                doc["b"],
                Coefficient.from_json(doc["p"]),
                Coefficient.from_json(doc["q"]),
                Coefficient.from_json(doc["r"]),
            )
        except (KeyError, TypeError) as exc:
            raise BadDocument(f"bad problem document: {exc}") from exc


def _as_coefficient(c) -> Coefficient:
    return c if isinstance(c, Coefficient) else Coefficient.constant(c)


def build_problem(a: float, b: float, p, q, r, name: str = "") -> Problem:
    """Validate coefficients and build a :class:`Problem`.

    Plain numbers are accepted as constant coefficients.

    Raises:
        BadInterval: ``a >= b`` or an endpoint is not finite.
        BadGrid: breakpoints outside (a, b) or a sample grid not spanning [a, b].
        NonPositiveCoefficient: p or r is not strictly positive on the
            validation grid or at a breakpoint.
    """
    a, b = float(a), float(b)
    if not (math.isfinite(a) and math.isfinite(b)) or a >= b:
        raise BadInterval(f"need finite a < b, got ({a}, {b})")
    p, q, r = (_as_coefficient(c) for c in (p, q, r))
    for label, c in (("p", p), ("q", q), ("r", r)):
        if c.kind == "pw" and any(not (a < t < b) for t in c.nodes):
            raise BadGrid(f"{label}: breakpoints must lie strictly inside (a, b)")
        if c.kind == "sampled":
            x = c.nodes
            tol = 1e-12 * max(1.0, abs(a), abs(b))
            if abs(x[0] - a) > tol or abs(x[-1] - b) > tol:
                raise BadGrid(f"{label}: sample grid must start at a and end at b")
        if not all(math.isfinite(v) for v in c.values):
            raise BadGrid(f"{label}: non-finite coefficient value")
    grid = np.linspace(a, b, VALIDATION_POINTS)
    for label, c in (("p", p), ("r", r)):
        pts = np.concatenate([grid, np.asarray(c.breakpoints, dtype=float)])
        pts = pts[(pts >= a) & (pts <= b)]
        if np.any(np.asarray(c(pts)) <= 0):
            raise NonPositiveCoefficient(f"{label} must be strictly positive on [a, b]")
    return Problem(a, b, p, q, r, name)


PRESETS = ("free-unit", "free-pi", "step-q", "step-p")


def preset(name: str) -> Problem:
    """One of the built-in problems.

    >>> preset("free-unit").b
    1.0
    """
    one, zero = Coefficient.constant(1.0), Coefficient.constant(0.0)
    if name == "free-unit":
        return build_problem(0.0, 1.0, one, zero, one, name)
    if name == "free-pi":
        return build_problem(0.0, math.pi, one, zero, one, name)
    if name == "step-q":
        return build_problem(0.0, 1.0, one, Coefficient.piecewise([0.5], [0.0, 10.0]), one, name)
    if name == "step-p":
        return build_problem(0.0, 1.0, Coefficient.piecewise([0.5], [1.0, 2.0]), zero, one, name)
    raise UnknownPreset(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
