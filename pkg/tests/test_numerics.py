import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fsocap.channel import pdf_gg
from fsocap.numerics import (
    ConvergenceError,
    NoSignChangeError,
    QuadratureResult,
    ToleranceSpec,
    find_root_monotone,
    integrate_interval,
    integrate_semi_infinite,
)


def test_tolerance_validation():
    with pytest.raises(ValueError):
        ToleranceSpec(rel_tol=0.0)
    with pytest.raises(ValueError):
        ToleranceSpec(abs_tol=-1.0)
    with pytest.raises(ValueError):
        ToleranceSpec(max_evaluations=0)
    assert ToleranceSpec().rel_tol == 1e-10


def test_quadrature_result_validation():
    with pytest.raises(ValueError):
        QuadratureResult(1.0, -1e-3, 3)
    with pytest.raises(ValueError):
        QuadratureResult(1.0, 0.0, 0)


@pytest.mark.parametrize(
    "f, exact",
    [
        (lambda x: math.exp(-x), 1.0),
        (lambda x: x * math.exp(-x), 1.0),
        (lambda x: 1.0 / (1.0 + x) ** 3, 0.5),
        (lambda x: math.exp(-x) / math.sqrt(x), math.sqrt(math.pi)),
    ],
)
def test_semi_infinite_analytic(f, exact):
    res = integrate_semi_infinite(f, 0.0)
    assert res.value == pytest.approx(exact, rel=1e-10)
    assert res.abs_error_estimate >= 0 and res.evaluations >= 1


def test_semi_infinite_stretched_tail():
    # int_0^inf exp(-2 sqrt(x)) dx = 1/2
    res = integrate_semi_infinite(lambda x: np.exp(-2 * np.sqrt(x)), 0.0, sqrt_substitution=True, vectorized=True)
    assert res.value == pytest.approx(0.5, rel=1e-12)


def test_semi_infinite_lower_limit():
    res = integrate_semi_infinite(lambda x: math.exp(-x), 3.0)
    assert res.value == pytest.approx(math.exp(-3.0), rel=1e-12)


def test_gamma_gamma_normalisation():
    res = integrate_semi_infinite(
        lambda i: pdf_gg(i, 4.7424, 3.0133), 0.0, sqrt_substitution=True, vectorized=True
    )
    assert abs(res.value - 1.0) < 1e-8


def test_nan_integrand_raises():
    with pytest.raises(ConvergenceError):
        integrate_semi_infinite(lambda x: math.nan, 0.0)


def test_non_convergence_carries_estimate():
    tol = ToleranceSpec(max_evaluations=50)
    with pytest.raises(ConvergenceError) as info:
        integrate_semi_infinite(lambda x: math.sin(40 * x) * math.exp(-x / 50), 0.0, tol)
    assert math.isfinite(info.value.best_estimate)


@pytest.mark.parametrize("c", [0.3, 1.0, 7.5])
def test_split_additivity(c):
    f = lambda x: x**1.5 * math.exp(-x)  # noqa: E731
    whole = integrate_semi_infinite(f, 0.0)
    left = integrate_interval(f, 0.0, c)
    right = integrate_semi_infinite(f, c)
    bound = 2 * (whole.abs_error_estimate + left.abs_error_estimate + right.abs_error_estimate)
    assert abs(left.value + right.value - whole.value) <= max(bound, 1e-13)


def test_interval_endpoint_singularity():
    res = integrate_interval(lambda x: 1 / math.sqrt(x), 0.0, 1.0)
    assert res.value == pytest.approx(2.0, rel=1e-10)


def test_root_analytic():
    assert find_root_monotone(lambda x: math.exp(-x) - 0.5, (0.0, 10.0)) == pytest.approx(math.log(2), abs=1e-12)
    assert find_root_monotone(lambda x: x * x - 2, (0.0, 2.0)) == pytest.approx(math.sqrt(2), abs=1e-12)


def test_root_errors():
    with pytest.raises(NoSignChangeError):
        find_root_monotone(lambda x: x * x + 1, (-1.0, 1.0))
    with pytest.raises(ConvergenceError):
        find_root_monotone(lambda x: np.cbrt(x - 0.3), (0.0, 1.0), ToleranceSpec(rel_tol=1e-15, max_evaluations=2))


def test_root_is_idempotent():
    calls = []

    def g(x):
        calls.append(x)
        return math.exp(-x) - 0.5

    root = find_root_monotone(g, (0.0, 10.0))
    calls.clear()
    width = 1e-12
    again = find_root_monotone(g, (root - width, root + width))
    # two bracket evaluations, then at most two iterations
    assert len(calls) <= 4
    assert again == pytest.approx(root, abs=2 * width)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 20.0), st.floats(0.1, 5.0))
def test_root_recovers_planted_value(root, slope):
    got = find_root_monotone(lambda x: slope * (x - root), (0.0, 25.0))
    assert got == pytest.approx(root, rel=1e-10)
