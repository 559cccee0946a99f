"""Built-in acceptance suite.

Each criterion runs against presets only, returns its measured residuals,
and passes when every residual is under its threshold.  Thresholds are the
published ones and are never loosened here; ``tol`` overrides only the
integrator tolerance.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import bdm as B
from . import boundary as bd
from . import shift as H
from . import spectra as S
from . import vonneumann as V
from .boundary import ANTIPERIODIC, DIRICHLET, NEUMANN, PERIODIC, CoupledBC, SeparatedBC
from .errors import SlKreinError
from .problem import preset
from .propagate import DEFAULT_TOL


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    seconds: float
    budget: float
    metrics: dict = field(default_factory=dict)
    error: str | None = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        worst = ", ".join(f"{k}={_fmt(v)}" for k, v in self.metrics.items())
        extra = f" error: {self.error}" if self.error else ""
        return f"[{status}] {self.number:2d} {self.title} ({self.seconds:.1f}s / {self.budget:.0f}s) {worst}{extra}"

    def to_json(self) -> dict:
        return {
            "criterion": self.number,
            "title": self.title,
            "passed": self.passed,
            "seconds": self.seconds,
            "budget_seconds": self.budget,
            "metrics": self.metrics,
            "error": self.error,
        }


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        return f"{v:.2e}"
    return str(v)


class _Recorder:
    """Collects named residuals against thresholds."""

    def __init__(self):
        self.metrics: dict = {}
        self.ok = True

    def below(self, name: str, value: float, limit: float) -> None:
        value = float(value)
        self.metrics[name] = max(value, self.metrics.get(name, value))
        if not value < limit:
            self.ok = False

    def above(self, name: str, value: float, limit: float) -> None:
        value = float(value)
        self.metrics[name] = min(value, self.metrics.get(name, value))
        if not value > limit:
            self.ok = False

    def check(self, name: str, flag: bool) -> None:
        self.metrics[name] = bool(flag) and self.metrics.get(name, True)
        if not flag:
            self.ok = False


# ---------------------------------------------------------------------------
# criteria


def c1_free_spectra(rec: _Recorder, tol: float) -> None:
    fp = preset("free-pi")
    # 100 = 10^2 sits on the window edge, so the edge is nudged outward
    spec = S.eigenvalues(fp, DIRICHLET, (0.5, 100.5), int_tol=tol)
    want = np.arange(1, 11) ** 2.0
    rec.check("dirichlet_count", spec.values.size == 10)
    if spec.values.size == 10:
        rec.below("dirichlet_err", np.abs(spec.values - want).max(), 1e-8)
    spec = S.eigenvalues(preset("free-unit"), NEUMANN, (-0.5, 100.0), int_tol=tol)
    want = (np.arange(4) * math.pi) ** 2
    rec.check("neumann_count", spec.values.size == 4)
    if spec.values.size == 4:
        rec.below("neumann_err", np.abs(spec.values - want).max(), 1e-6)


def c2_bdm_closed_form(rec: _Recorder, tol: float) -> None:
    fu = preset("free-unit")
    L = B.bdm_matrix(fu, DIRICHLET, NEUMANN, -1.0, tol)
    c, s = 1 / math.tanh(1.0), 1 / math.sinh(1.0)
    rec.below("lambda_err", np.abs(L - np.array([[-c, s], [s, -c]])).max(), 1e-8)
    for z in (-5.0, -2.0, -0.5, 0.5 + 1j, 3 - 2j, 1j, -1j, 20 + 5j, -30.0, 7 + 0.5j):
        d = np.linalg.det(B.bdm_matrix(fu, DIRICHLET, NEUMANN, z, tol))
        rec.below("det_rel_err", abs(d + z) / abs(z), 1e-7)


Z3 = (0.5 + 1.0j, -2.0 + 0.3j, 3.0 - 2.0j)


def c3_bdm_algebra(rec: _Recorder, tol: float) -> None:
    rng = np.random.default_rng(3)
    for name in ("free-unit", "step-q"):
        P = preset(name)
        for _ in range(20):
            b1, b2, b3 = (bd.random_ab(rng, "mixed") for _ in range(3))
            for z in Z3:
                L11 = B.bdm_matrix(P, b1, b1, z, tol)
                L12 = B.bdm_matrix(P, b1, b2, z, tol)
                L21 = B.bdm_matrix(P, b2, b1, z, tol)
                L23 = B.bdm_matrix(P, b2, b3, z, tol)
                L13 = B.bdm_matrix(P, b1, b3, z, tol)
                scale = max(1.0, np.abs(L12).max() * np.abs(L21).max(), np.abs(L23).max() * np.abs(L12).max())
                rec.below("identity", np.abs(L11 - np.eye(2)).max(), 1e-8)
                rec.below("composition", np.abs(L23 @ L12 - L13).max() / scale, 1e-8)
                rec.below("inverse", np.abs(L21 @ L12 - np.eye(2)).max() / scale, 1e-8)
                frac = B.bdm_via_fractional(P, b1, b2, z, tol).M
                rec.below("fractional", np.abs(frac - L12).max() / max(1.0, np.abs(L12).max()), 1e-8)


def c4_herglotz(rec: _Recorder, tol: float) -> None:
    fu = preset("free-unit")
    pairs = [
        (DIRICHLET, NEUMANN),
        (NEUMANN, DIRICHLET),
        (SeparatedBC(1.0, 2.0).to_ab(), DIRICHLET),
        (PERIODIC, ANTIPERIODIC),
        (PERIODIC, CoupledBC(0.3, ((1.0, 1.0), (0.0, 1.0))).to_ab()),
    ]
    zs = [complex(x, y) for x in (-5.0, -1.0, 2.0, 10.0, 40.0) for y in (0.1, 0.5, 1.0, 3.0, 10.0)]
    for frm, to in pairs:
        for z in zs:
            rec.above("min_eig_Im", B.herglotz_probe(fu, frm, to, z, tol)[0], 0.0)
            scale = max(1.0, np.abs(B.bdm_matrix(fu, frm, to, z, tol)).max())
            rec.below("reflection", B.reflection_residual(fu, frm, to, z, tol) / scale, 1e-8)


def _krein_family(P):
    return {
        "dirichlet": DIRICHLET,
        "neumann": NEUMANN,
        "separated(1,2)": SeparatedBC(1.0, 2.0).to_ab(),
        "periodic": PERIODIC,
        "antiperiodic": ANTIPERIODIC,
        "kvn": S.kvn_extension(P).to_ab(),
    }


TRIALS = (
    lambda x: np.ones_like(x),
    lambda x: x,
    lambda x: np.sin(3 * x) + x**2,
)


def c5_krein(rec: _Recorder, tol: float) -> None:
    zs = (-1.0 + 0.5j, -2.0, 2.0 + 1.0j)
    for name in ("free-unit", "step-q"):
        P = preset(name)
        fam = _krein_family(P)
        for t in fam.values():
            for r in fam.values():
                for z in zs:
                    rec.below("l2_gap", S.krein_resolvent_check(P, t, r, z, list(TRIALS), tol), 1e-6)


def c6_specialized(rec: _Recorder, tol: float) -> None:
    cases = [
        SeparatedBC(1.0, 2.0),
        SeparatedBC(math.pi / 2, math.pi / 2),
        SeparatedBC(1.0, 0.0),
        SeparatedBC(0.0, 2.5),
        SeparatedBC(0.0, 0.0),
        CoupledBC(0.3, ((1.0, 1.0), (0.0, 1.0))),
        CoupledBC(0.0, ((2.0, -1.0), (1.0, 0.0))),
        CoupledBC(1.0, ((2.0, 0.0), (3.0, 0.5))),
        CoupledBC(0.0, ((1.0, 0.0), (0.0, 1.0))),
    ]
    zs = (-1.0, -3.0 + 1.0j, 2.0 + 2.0j)
    for name in ("free-unit", "step-q"):
        P = preset(name)
        for c in cases:
            for z in zs:
                corr = S.krein_correction(P, c.to_ab(), DIRICHLET, z, tol, canonical=c)
                scale = max(1.0, float(np.abs(corr.specialized.value).max()))
                rec.below("permuted_gap", corr.specialized.residual / scale, 1e-8)


def c7_kvn(rec: _Recorder, tol: float) -> None:
    fu = S.kvn_extension(preset("free-unit"), tol)
    rec.below("free_FK_err", np.abs(fu.Fm - np.array([[1.0, 1.0], [0.0, 1.0]])).max(), 1e-8)
    rec.check("free_phi_zero", fu.phi == 0.0)
    sp = S.kvn_extension(preset("step-p"), tol)
    rec.below("step_p_F12_err", abs(sp.Fm[0, 1] - 0.75), 1e-8)
    for name in ("free-unit", "step-p"):
        chk = S.kvn_spectrum_check(preset(name), tol)
        rec.below("two_lowest_abs", max(abs(v) for v in chk.eigenvalues), 1e-6)
        rec.below("kernel_residual", chk.kernel_residual, 1e-6)
        rec.below("relation_residual", chk.relation_residual, 1e-6)


def c8_trace_ssf(rec: _Recorder, tol: float) -> None:
    fu = preset("free-unit")
    for z in (-1.0, -3.0, 2.0 + 2.0j):
        t = H.trace_formula_check(fu, DIRICHLET, NEUMANN, z, 20, int_tol=tol)
        rec.below("lhs_err", abs(t.lhs + 1 / z), 1e-6)
        rec.below("rhs_err", abs(t.rhs + 1 / z), 1e-6)
    xi = H.ssf_counting(fu, DIRICHLET, NEUMANN, 50.0, int_tol=tol)
    lams = np.linspace(1.0, 50.0, 50)
    rec.check("counting_is_minus_one", all(xi(x) == -1 for x in np.linspace(1e-6, 50.0, 2001)))
    vals = H.ssf_boundary(fu, DIRICHLET, NEUMANN, lams, 1e-3, tol)
    rec.check("rounded_match", all(round(v) == xi(x) for v, x in zip(vals, lams)))
    rec.below("pre_rounding_dev", max(abs(v - round(v)) for v in vals), 0.05)


def c9_parametrizations(rec: _Recorder, tol: float) -> None:
    rng = np.random.default_rng(9)
    for _ in range(100):
        ab = bd.random_ab(rng, "mixed")
        U = bd.to_unitary(ab)
        back = bd.dn_to_ab(bd.ab_to_dn(ab))
        rec.below("dn_roundtrip", np.abs(bd.to_unitary(back) - U).max(), 1e-10)
        via_u = bd.dn_to_ab(bd.unitary_to_dn(bd.UnitaryBC(U)))
        rec.below("unitary_roundtrip", np.abs(bd.to_unitary(via_u) - U).max(), 1e-10)
        canon = bd.canonicalize(ab).to_ab()
        rec.below("canonical_roundtrip", np.abs(bd.to_unitary(canon) - U).max(), 1e-10)
    rec.below("dirichlet_is_minus_I", np.abs(bd.to_unitary(DIRICHLET) + np.eye(2)).max(), 1e-10)
    rec.below("neumann_is_plus_I", np.abs(bd.to_unitary(NEUMANN) - np.eye(2)).max(), 1e-10)
    for _ in range(20):
        ab = bd.random_ab(rng, "mixed")
        C = bd.random_nonsingular(rng)
        moved = bd.validate_ab(C @ ab.A, C @ ab.B)
        rec.below("left_multiplication", np.abs(bd.to_unitary(moved) - bd.to_unitary(ab)).max(), 1e-10)


def c10_von_neumann(rec: _Recorder, tol: float) -> None:
    separated = [SeparatedBC(a, b) for a, b in ((0, 0), (1, 2), (math.pi / 2, math.pi / 2), (0.3, 0), (0, 0.7),
                                                 (math.pi / 2, 0), (0, math.pi / 2), (2.5, 0.4), (1.2, 1.2), (3.0, 2.9))]
    coupled = [
        CoupledBC(0.0, ((1.0, 0.0), (0.0, 1.0))),
        CoupledBC(math.pi, ((1.0, 0.0), (0.0, 1.0))),
        CoupledBC(0.3, ((1.0, 1.0), (0.0, 1.0))),
        CoupledBC(1.0, ((2.0, 0.0), (3.0, 0.5))),
        CoupledBC(4.0, ((0.5, -2.0), (0.25, 1.0))),
        CoupledBC(0.0, ((2.0, 1.0), (1.0, 1.0))),
    ]
    for name in ("free-unit", "step-q"):
        P = preset(name)
        for route in (V.vn_unitary_general(P, DIRICHLET, DIRICHLET, tol), V.vn_unitary_separated(P, SeparatedBC(0, 0), tol)):
            rec.below("U00_plus_I", np.abs(route.U + np.eye(2)).max(), 1e-8)
        for c in separated + coupled:
            r = V.vn_route_check(P, c.to_ab(), tol)
            rec.below("route_gap", r.residual, 1e-7)
            rec.below("gram_route_gap", r.gram_residual, 1e-7)
            g = V.vn_unitary_general(P, c.to_ab(), DIRICHLET, tol)
            s = V.vn_unitary_separated(P, c, tol) if isinstance(c, SeparatedBC) else V.vn_unitary_coupled(P, c, tol)
            rec.below("isometry", max(V.isometry_residual(g), V.isometry_residual(s)), 1e-7)
        Gq, Gc = V.gram_eq38_quadrature(P, tol), V.gram_eq38_closed(P, tol)
        rec.below("gram_quadrature_vs_closed", max(np.abs(Gq[0] - Gc[0]).max(), np.abs(Gq[1] - Gc[1]).max()), 1e-7)
    fu = preset("free-unit")
    d = V.vn_unitary_general(fu, DIRICHLET, DIRICHLET, tol).U
    n = V.vn_unitary_general(fu, NEUMANN, DIRICHLET, tol).U
    rec.above("dirichlet_neumann_distance", np.abs(d - n).max(), 1e-3)


def c11_m_asymptotics(rec: _Recorder, tol: float) -> None:
    fu = preset("free-unit")
    row = B.m_asymptotics(fu, SeparatedBC(math.pi / 4, math.pi / 4), [1e4], tol)[0]
    rec.below("angle_dev", abs(row.lambda11 - 1.0), 1e-1)
    row = B.m_asymptotics(fu, SeparatedBC(0.0, 0.0), [1e4], tol)[0]
    rec.below("dirichlet_dev", row.dev11, 1e-2)


CRITERIA: dict[int, tuple[str, Callable, float]] = {
    1: ("free spectra", c1_free_spectra, 5),
    2: ("boundary data map closed form", c2_bdm_closed_form, 2),
    3: ("algebra of Lambda", c3_bdm_algebra, 30),
    4: ("Herglotz and reflection", c4_herglotz, 20),
    5: ("Krein resolvent formulas", c5_krein, 120),
    6: ("specialized vs permuted general", c6_specialized, 20),
    7: ("Krein-von Neumann extension", c7_kvn, 15),
    8: ("trace formula and spectral shift", c8_trace_ssf, 60),
    9: ("parametrization bijections", c9_parametrizations, 5),
    10: ("von Neumann unitaries", c10_von_neumann, 60),
    11: ("m-function asymptotics", c11_m_asymptotics, 10),
}

SUITES = {
    "free": tuple(CRITERIA),
    "quick": (1, 2, 6, 7, 9, 11),
}


def run_criterion(number: int, tol: float = DEFAULT_TOL) -> CriterionResult:
    """Run one criterion; library errors and budget overruns count as failures, never as crashes."""
    title, fn, budget = CRITERIA[number]
    rec = _Recorder()
    start = time.perf_counter()
    error = None
    try:
        fn(rec, tol)
    except SlKreinError as exc:
        error = f"{type(exc).__name__}: {exc}"
        rec.ok = False
    seconds = time.perf_counter() - start
    if seconds > budget:
        error = error or f"over budget: {seconds:.1f}s > {budget:.0f}s"
        rec.ok = False
    return CriterionResult(number, title, rec.ok, seconds, budget, rec.metrics, error)


def run_suite(name: str = "free", tol: float = DEFAULT_TOL, report: Callable[[CriterionResult], None] | None = None):
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    results = []
    for n in SUITES[name]:
        res = run_criterion(n, tol)
        if report is not None:
            report(res)
        results.append(res)
    return results
