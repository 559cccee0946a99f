import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sl_krein.errors import (
    BadDocument,
    BadGrid,
    BadInterval,
    NonPositiveCoefficient,
    UnknownPreset,
)
from sl_krein.problem import Coefficient, Problem, build_problem, preset


def test_free_unit_from_identity_coefficients():
    pr = build_problem(0, 1, 1, 0, 1)
    assert (pr.a, pr.b) == (0.0, 1.0)
    assert pr.unit_weights


def test_free_pi():
    pr = build_problem(0, math.pi, 1, 0, 1)
    assert pr.b == math.pi
    assert pr.optical_length() == pytest.approx(math.pi, rel=1e-9)


def test_negative_p_rejected():
    with pytest.raises(NonPositiveCoefficient):
        build_problem(0, 1, -1, 0, 1)


def test_r_touching_zero_at_breakpoint_rejected():
    r = Coefficient.sampled([0, 0.5, 1], [1, 0, 1])
    with pytest.raises(NonPositiveCoefficient):
        build_problem(0, 1, 1, 0, r)


@pytest.mark.parametrize("a,b", [(1, 1), (2, 1), (0, math.inf), (math.nan, 1)])
def test_bad_interval(a, b):
    with pytest.raises(BadInterval):
        build_problem(a, b, 1, 0, 1)


def test_breakpoint_outside_interval():
    with pytest.raises(BadGrid):
        build_problem(0, 1, Coefficient.piecewise([1.5], [1, 2]), 0, 1)


def test_sampled_grid_must_span_interval():
    with pytest.raises(BadGrid):
        build_problem(0, 1, 1, Coefficient.sampled([0, 0.9], [0, 0]), 1)


def test_piecewise_shape_checked():
    with pytest.raises(BadGrid):
        Coefficient.piecewise([0.5], [1, 2, 3])


def test_presets():
    assert preset("free-unit") == build_problem(0, 1, 1, 0, 1)
    assert preset("free-pi") == build_problem(0, math.pi, 1, 0, 1)
    assert preset("step-p").p.integral_of_reciprocal(0, 1) == pytest.approx(0.75)
    assert list(preset("step-q").nodes()) == [0.0, 0.5, 1.0]


def test_unknown_preset():
    with pytest.raises(UnknownPreset):
        preset("cubic")


def test_json_round_trip():
    for name in ("free-unit", "step-q", "step-p"):
        pr = preset(name)
        assert Problem.from_json(pr.to_json()) == pr


def test_bad_document():
    with pytest.raises(BadDocument):
        Problem.from_json({"a": 0, "b": 1, "p": {"weird": 1}, "q": 0, "r": 1})
    with pytest.raises(BadDocument):
        Problem.from_json({"a": 0, "b": 1})


def test_piecewise_is_right_continuous():
    c = Coefficient.piecewise([0.5], [1.0, 2.0])
    assert c(0.5) == 2.0
    assert c(0.4999) == 1.0
    assert list(c(np.array([0.0, 0.5, 1.0]))) == [1.0, 2.0, 2.0]


def test_sampled_reciprocal_integral_is_exact_for_linear():
    c = Coefficient.sampled([0, 1], [1, 3])
    assert c.integral_of_reciprocal(0, 1) == pytest.approx(math.log(3) / 2, rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(
    st.floats(-5, 5),
    st.floats(0.1, 5),
    st.floats(0.1, 10),
    st.floats(0.1, 10),
)
def test_constant_optical_length(a, length, p, r):
    pr = build_problem(a, a + length, p, 0, r)
    assert pr.optical_length() == pytest.approx(length * math.sqrt(r / p), rel=1e-9)
