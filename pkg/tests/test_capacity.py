import math

import numpy as np
import pytest
from scipy import integrate

from fsocap.capacity import (
    HD,
    IMDD,
    NATS_TO_BITS,
    CapacityPoint,
    DetectionScheme,
    Method,
    Regime,
    ValidityError,
    average_power,
    awgn_capacity,
    capacity_asymptotic_high,
    capacity_asymptotic_low,
    capacity_at_threshold,
    capacity_exact,
    capacity_montecarlo,
    capacity_oracle,
    db_to_linear,
    high_snr_asymptote_value,
    jitter_loss,
    jitter_loss_from_sigma,
    low_snr_scaling_factor,
    penalty_high_snr,
    power_constraint_residual,
    solve_threshold,
    threshold_asymptote,
)
from fsocap.channel import GGOnly, GGPointing, pdf_gg
from fsocap.special import ln_gamma

from .conftest import ROWS, models_for, scenario


def test_scheme_validation():
    assert HD.k == 1 and IMDD.k == 2
    with pytest.raises(ValueError):
        DetectionScheme("coherent")
    with pytest.raises(ValueError):
        DetectionScheme("HD", noise_density=0.0)
    assert DetectionScheme("HD", 2.0).snr(10.0) == 5.0


def test_capacity_point_contract():
    p = CapacityPoint(100.0, 0.01, math.log(2), Method.EXACT, HD)
    assert p.capacity_bits == pytest.approx(1.0, rel=1e-15)
    assert p.snr_db == pytest.approx(20.0, rel=1e-15)
    with pytest.raises(ValueError):
        CapacityPoint(1.0, 0.1, -1e-3, Method.EXACT, HD)
    assert NATS_TO_BITS == pytest.approx(1 / math.log(2))


def test_db_conversion():
    assert db_to_linear(30.0) == pytest.approx(1000.0, rel=1e-15)
    assert np.allclose(db_to_linear([-10, 0]), [0.1, 1.0])


# -- power constraint ----------------------------------------------------------


@pytest.mark.parametrize("name", list(ROWS))
def test_power_closed_form_matches_quadrature(name):
    for model in models_for(ROWS[name]):
        for mu in (1e-7, 1e-2, 0.3, 5.0):
            closed = average_power(mu, model)
            quad = average_power(mu, model, method="quadrature")
            assert closed == pytest.approx(quad, rel=1e-9)


def test_power_residual_is_decreasing(strong_models):
    for model in strong_models:
        mus = np.geomspace(1e-6, 10.0, 50)
        r = np.array([power_constraint_residual(m, model, 1.0) for m in mus])
        d = np.diff(r)
        # strict while the power is representable, flat once it underflows to 0
        assert np.all(d[r[1:] > -1.0] < 0) and np.all(d <= 0)


def test_power_method_argument():
    model, _ = models_for(6.0)
    with pytest.raises(ValueError):
        average_power(0.1, model, method="other")
    with pytest.raises(ValueError):
        average_power(-0.1, model)


def test_power_unit_jitter_ratio_falls_back():
    # xi^2 = 1 puts a pole of the inverse-moment form on the contour
    model = GGPointing(4.0, 2.0, 1.0, 0.02)
    assert average_power(0.01, model) == pytest.approx(average_power(0.01, model, "quadrature"), rel=1e-12)


def test_threshold_against_bisection_oracle():
    """Strong row without jitter at 0 dB, plain bisection on scipy quadrature."""
    _, gg = models_for(6.0)

    def power(mu):
        f = lambda lam: (1 / mu - 1 / lam) * pdf_gg(lam, gg.a, gg.b)  # noqa: E731
        val, _ = integrate.quad(f, mu, np.inf, epsabs=0, epsrel=1e-13, limit=400)
        return val

    lo, hi = 1e-3, 10.0
    for _ in range(80):
        mid = math.sqrt(lo * hi)
        lo, hi = (mid, hi) if power(mid) > 1.0 else (lo, mid)
    assert solve_threshold(gg, 1.0) == pytest.approx(math.sqrt(lo * hi), rel=1e-8)


def test_threshold_meets_constraint(row):
    _, rytov = row
    for model in models_for(rytov):
        for snr in (1e-3, 1.0, 1e4):
            mu = solve_threshold(model, snr)
            assert abs(average_power(mu, model) / snr - 1) <= 1e-10


def test_threshold_high_snr_limit(strong_models):
    for model in strong_models:
        # mu ~ 1/(snr + E[1/lambda]); E[1/lambda] is ~3e3 with jitter
        snr = 1e9
        assert solve_threshold(model, snr) * snr == pytest.approx(1.0, abs=1e-5)


def test_threshold_asymptote_forms(strong_models):
    model, _ = strong_models
    assert threshold_asymptote(model, 1e3, Regime.HIGH) == 1e-3
    snr = 1e-5
    expected = model.A0 / (4 * model.a * model.b) * math.log(1 / snr) ** 2
    assert threshold_asymptote(model, snr, "Low") == pytest.approx(expected, rel=1e-15)
    with pytest.raises(ValueError):
        threshold_asymptote(model, 0.0, Regime.LOW)


# -- capacity --------------------------------------------------------------------


@pytest.mark.parametrize("snr_db", [-20.0, 10.0, 40.0])
def test_exact_matches_oracle(row, snr_db):
    _, rytov = row
    snr = float(db_to_linear(snr_db))
    for model in models_for(rytov):
        exact = capacity_exact(model, HD, snr)
        oracle = capacity_oracle(model, HD, snr)
        assert exact.capacity == pytest.approx(oracle.capacity, rel=1e-8)
        assert exact.method is Method.EXACT and oracle.method is Method.ORACLE


def test_imdd_is_half_of_heterodyne(strong_models):
    for model in strong_models:
        c_hd = capacity_exact(model, HD, 1e3).capacity
        c_im = capacity_exact(model, IMDD, 1e3).capacity
        assert c_im == pytest.approx(c_hd / 2, rel=1e-14)


def test_imdd_validity_floor(strong_models):
    model, _ = strong_models
    with pytest.raises(ValidityError):
        capacity_exact(model, IMDD, 1.0)
    assert capacity_exact(model, IMDD, 1.0, allow_low_power=True).capacity > 0


def test_waterfilling_beats_constant_power(row):
    _, rytov = row
    _, gg = models_for(rytov)
    for snr in (1e-3, 1.0, 1e3):
        f = lambda lam: math.log1p(snr * lam) * pdf_gg(lam, gg.a, gg.b)  # noqa: E731
        constant, _ = integrate.quad(f, 0, np.inf, epsrel=1e-12, limit=400)
        assert capacity_exact(gg, HD, snr).capacity >= constant
    # at low SNR waterfilling even beats the unfaded channel
    assert capacity_exact(gg, HD, 1e-4).capacity > awgn_capacity(1e-4, HD)


def test_capacity_non_decreasing_in_snr(strong_models):
    for model in strong_models:
        caps = [capacity_exact(model, HD, s).capacity for s in db_to_linear(np.arange(-30, 61, 5))]
        assert np.all(np.diff(caps) > 0)


def test_capacity_at_threshold_is_non_negative(strong_models):
    model, _ = strong_models
    assert capacity_at_threshold(1e3, model, HD) == 0.0


def test_gain_scale_equals_snr_shift():
    a, b = 4.8184, 1.1896
    for s in (0.01, 0.3):
        scaled = capacity_exact(GGOnly(a, b, s), HD, 100.0).capacity
        shifted = capacity_exact(GGOnly(a, b), HD, 100.0 * s).capacity
        assert scaled == pytest.approx(shifted, rel=1e-10)


# -- asymptotes ----------------------------------------------------------------------


def test_penalty_formula():
    a, b, xi, A0 = 4.8184, 1.1896, 1.0269, 0.0107
    model = GGPointing(a, b, xi, A0)
    from scipy.special import digamma

    expected = math.log(A0 / (a * b)) + digamma(a) + digamma(b) - 1 / xi**2
    assert penalty_high_snr(model) == pytest.approx(expected, rel=1e-14)


def test_no_jitter_difference_identity(row):
    _, rytov = row
    pe, gg = models_for(rytov)
    for scheme in (HD, IMDD):
        diff = high_snr_asymptote_value(gg, scheme, 1e6) - high_snr_asymptote_value(pe, scheme, 1e6)
        assert diff == pytest.approx((1 / pe.xi2 - math.log(pe.A0)) / scheme.k, abs=1e-12)


def test_high_asymptote_slope(strong_models):
    model, _ = strong_models
    for scheme in (HD, IMDD):
        c1 = high_snr_asymptote_value(model, scheme, 1e5)
        c2 = high_snr_asymptote_value(model, scheme, 1e6)
        assert c2 - c1 == pytest.approx(math.log(10) / scheme.k, rel=1e-13)


def test_high_asymptote_clipped():
    model, _ = models_for(6.0)
    p = capacity_asymptotic_high(model, HD, 10.0)
    assert p.capacity == 0.0 and high_snr_asymptote_value(model, HD, 10.0) < 0
    with pytest.raises(ValueError):
        capacity_asymptotic_high(model, HD, 0.5)


def test_exact_exceeds_high_asymptote_with_shrinking_gap(row):
    # mu ~ 1/(snr + E[1/lambda]) < 1/snr, so the exact curve sits above
    _, rytov = row
    for model in models_for(rytov):
        gaps = [
            capacity_exact(model, HD, s).capacity - high_snr_asymptote_value(model, HD, s)
            for s in db_to_linear([50, 60, 70, 80])
        ]
        assert all(g > 0 for g in gaps)
        assert np.all(np.diff(gaps) < 0)


def test_high_gap_rate_for_small_jitter_ratio():
    """With xi^2 < 1, E[1/lambda] diverges and the gap decays like snr^-xi^2."""
    model, _ = models_for(0.8)
    a, b, xi2, A0 = model.a, model.b, model.xi2, model.A0
    c = xi2 * math.exp(
        xi2 * math.log(a * b / A0) + ln_gamma(a - xi2) + ln_gamma(b - xi2) - ln_gamma(a) - ln_gamma(b)
    )
    snr = 1e8
    mu = solve_threshold(model, snr)
    predicted = c * mu**xi2 * (1 / (xi2 * (1 - xi2)) + 1 / xi2**2)
    gap = capacity_exact(model, HD, snr).capacity - high_snr_asymptote_value(model, HD, snr)
    assert gap == pytest.approx(predicted, rel=0.02)


def test_low_asymptote_contract():
    model, _ = models_for(6.0)
    with pytest.raises(ValidityError):
        capacity_asymptotic_low(model, IMDD, 1e-3)
    with pytest.raises(ValueError):
        capacity_asymptotic_low(model, HD, 2.0)
    snr = 1e-6
    p = capacity_asymptotic_low(model, HD, snr)
    assert p.capacity == pytest.approx(low_snr_scaling_factor(model) * snr * math.log(1 / snr) ** 2, rel=1e-15)


def test_low_asymptote_scales_with_collected_fraction():
    a, b, xi = 3.9929, 1.7018, 0.6302
    base = capacity_asymptotic_low(GGPointing(a, b, xi, 0.02), HD, 1e-8).capacity
    for r in (0.5, 0.1, 3.0):
        other = capacity_asymptotic_low(GGPointing(a, b, xi, 0.02 * r), HD, 1e-8).capacity
        assert other == base * r or other == pytest.approx(base * r, rel=1e-15)


def test_low_snr_ratio_moves_towards_one(strong_models):
    # the approach is logarithmic in 1/snr; check the trend, not the value
    for model in strong_models:
        ratios = [
            capacity_exact(model, HD, s).capacity / capacity_asymptotic_low(model, HD, s).capacity
            for s in (1e-4, 1e-8, 1e-12)
        ]
        assert np.all(np.diff(np.abs(np.log(ratios))) < 0)


def test_scaling_factor_from_table_values():
    model = GGPointing(4.8184, 1.1896, 1.0269, 0.0107)
    assert low_snr_scaling_factor(model) == pytest.approx(4.6668e-4, rel=1e-4)
    assert low_snr_scaling_factor(GGOnly(4.8184, 1.1896)) == pytest.approx(1 / (4 * 4.8184 * 1.1896), rel=1e-15)


# -- jitter loss -------------------------------------------------------------------------


def test_jitter_loss_forms_agree():
    _, _, p = scenario(6.0)
    sigma = 0.3
    xi_old = p.w_Leq / (2 * sigma)
    xi_new = p.w_Leq / (2 * 0.4)
    for scheme in (HD, IMDD):
        assert jitter_loss(xi_old, xi_new, scheme) == pytest.approx(
            jitter_loss_from_sigma(sigma, 0.4, p.w_Leq, scheme), rel=1e-13
        )
    with pytest.raises(ValueError):
        jitter_loss(0.0, 1.0, HD)


def test_jitter_loss_matches_capacity_difference():
    model, _ = models_for(6.0)
    xi_new = 1.6
    other = GGPointing(model.a, model.b, xi_new, model.A0)
    snr = 1e6
    drop = capacity_exact(model, HD, snr).capacity - capacity_exact(other, HD, snr).capacity
    # larger xi means less jitter, so the "loss" is negative here
    assert drop == pytest.approx(jitter_loss(model.xi, xi_new, HD), abs=0.01)


# -- Monte Carlo -----------------------------------------------------------------------


def test_montecarlo_closure_small():
    model, _ = models_for(6.0)
    exact = capacity_exact(model, HD, 100.0)
    mc = capacity_montecarlo(model, HD, 100.0, 200_000, seed=7)
    assert mc.method is Method.MONTE_CARLO and mc.std_error > 0
    assert abs(mc.capacity - exact.capacity) < 4 * mc.std_error
    again = capacity_montecarlo(model, HD, 100.0, 200_000, seed=7)
    assert again.capacity == mc.capacity


def test_bits_conversion_of_penalty():
    model, _ = models_for(6.0)
    bits = penalty_high_snr(model) * NATS_TO_BITS
    assert bits == pytest.approx(penalty_high_snr(model) / math.log(2), rel=1e-15)
