"""Waterfilling threshold and ergodic capacity of the adaptive-power link.

The transmitter sends at power ``P(lambda) = (1/mu - 1/lambda)^+ `` per unit
noise so that the average constraint ``E[(1/mu - 1/lambda)^+] = snr`` holds,
and the resulting capacity is ``(1/k) E[log(lambda/mu)^+]`` in nats.  ``k``
is 1 for heterodyne detection and 2 for intensity modulation with direct
detection.

Closed forms are built from Meijer-G functions.  Below the switch argument
``x = ab mu / A0 <= 1`` the textbook forms are used; above it the identities
are rewritten in terms of the decaying part of G (G minus its left-pole
residues), which removes the cancellation between the ``log mu`` term and
the G term at large thresholds.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import channel
from .channel import ChannelModel, GGOnly, GGPointing
from .numerics import (
    ConvergenceError,
    NoSignChangeError,
    ToleranceSpec,
    find_root_monotone,
)
from .special import MeijerGSpec, digamma, ln_gamma, meijer_g, meijer_g_decaying

NATS_TO_BITS = 1.0 / math.log(2.0)
# transmit SNR below which the IM/DD lower bound is not trusted
IMDD_MIN_SNR_DB = 10.0
_DECAY_SWITCH = 1.0
RESIDUAL_TOL = 1e-10


class ValidityError(ValueError):
    """The requested operating point is outside the model's validity range."""


class Method(str, enum.Enum):
    EXACT = "Exact"
    ORACLE = "Oracle"
    ASYMPTOTIC_LOW = "AsymptoticLow"
    ASYMPTOTIC_HIGH = "AsymptoticHigh"
    MONTE_CARLO = "MonteCarlo"


class Regime(str, enum.Enum):
    LOW = "Low"
    HIGH = "High"


@dataclass(frozen=True)
class DetectionScheme:
    """Receiver type.  ``k`` is 1 for ``'HD'`` and 2 for ``'IMDD'``."""

    kind: str = "HD"
    noise_density: float = 1.0

    def __post_init__(self):
        if self.kind not in ("HD", "IMDD"):
            raise ValueError(f"unknown detection scheme {self.kind!r}")
        if not (math.isfinite(self.noise_density) and self.noise_density > 0):
            raise ValueError("noise_density must be positive")

    @property
    def k(self) -> int:
        return 1 if self.kind == "HD" else 2

    def snr(self, average_power: float) -> float:
        """Transmit SNR ``P_avg / N_k``."""
        return average_power / self.noise_density


HD = DetectionScheme("HD")
IMDD = DetectionScheme("IMDD")


@dataclass(frozen=True)
class CapacityPoint:
    snr: float
    threshold: float
    capacity: float
    method: Method
    scheme: DetectionScheme
    std_error: float | None = None

    def __post_init__(self):
        if not self.capacity >= 0:
            raise ValueError(f"capacity must be >= 0, got {self.capacity!r}")
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")

    @property
    def capacity_bits(self) -> float:
        return self.capacity * NATS_TO_BITS

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.snr)


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def _check_snr(snr):
    if not (math.isfinite(snr) and snr > 0):
        raise ValueError(f"snr must be positive and finite, got {snr!r}")


def _check_imdd(scheme: DetectionScheme, snr: float, allow_low_power: bool):
    if scheme.kind == "IMDD" and not allow_low_power:
        if 10.0 * math.log10(snr) < IMDD_MIN_SNR_DB:
            raise ValidityError(
                f"IM/DD capacity needs snr >= {IMDD_MIN_SNR_DB:g} dB "
                f"(got {10 * math.log10(snr):.3g} dB); pass allow_low_power=True to override"
            )


# -- model constants ---------------------------------------------------------


def _gain_scale(model: ChannelModel) -> float:
    return model.A0 if isinstance(model, GGPointing) else model.scale


def _inv_xi2(model: ChannelModel) -> float:
    return 1.0 / model.xi2 if isinstance(model, GGPointing) else 0.0


def penalty_high_snr(model: ChannelModel) -> float:
    """Constant offset of the high-SNR capacity from ``log snr`` (nats, k = 1).

    ``log(A0/ab) + psi(a) + psi(b) - 1/xi^2`` with jitter; without it the
    ``A0`` becomes the optional gain scale and the ``1/xi^2`` term drops.
    """
    a, b = model.a, model.b
    return math.log(_gain_scale(model) / (a * b)) + digamma(a) + digamma(b) - _inv_xi2(model)


def low_snr_scaling_factor(model: ChannelModel) -> float:
    """``A0 / (4ab)`` (``scale / (4ab)`` without jitter)."""
    return _gain_scale(model) / (4.0 * model.a * model.b)


def jitter_loss(xi_old: float, xi_new: float, scheme: DetectionScheme) -> float:
    """High-SNR capacity lost when the jitter ratio drops from ``xi_old`` to ``xi_new``."""
    if not (xi_old > 0 and xi_new > 0):
        raise ValueError("xi values must be positive")
    return (1.0 / xi_new**2 - 1.0 / xi_old**2) / scheme.k


def jitter_loss_from_sigma(sigma_old: float, sigma_new: float, w_Leq: float, scheme: DetectionScheme) -> float:
    """Same loss written with jitter standard deviations at a fixed ``w_Leq``."""
    if not (sigma_old > 0 and sigma_new > 0 and w_Leq > 0):
        raise ValueError("jitter sigmas and w_Leq must be positive")
    return 4.0 * (sigma_new**2 - sigma_old**2) / (w_Leq**2 * scheme.k)


def threshold_asymptote(model: ChannelModel, snr: float, regime: Regime | str) -> float:
    """Small- and large-SNR approximations of the waterfilling threshold.

    High: ``1/snr``.  Low: ``A0/(4ab) * log(1/snr)^2``.
    """
    _check_snr(snr)
    regime = Regime(regime)
    if regime is Regime.HIGH:
        return 1.0 / snr
    return low_snr_scaling_factor(model) * math.log(1.0 / snr) ** 2


# -- closed forms ------------------------------------------------------------


def _arg(model: ChannelModel, mu: float) -> float:
    return model.a * model.b * mu / _gain_scale(model)


def _log_gamma_ab(model):
    return ln_gamma(model.a) + ln_gamma(model.b)


def _power_closed(mu: float, model: ChannelModel) -> float:
    """``E[(1/mu - 1/lambda)^+]`` from the decaying parts of two G functions.

    With x = ab mu / A0:
    ``(xi^2/(G_a G_b mu)) [x Gd(x | 1, xi^2; xi^2-1, a-1, b-1, 0) - Gd(x | 1, xi^2+1; xi^2, a, b, 0)]``
    and the analogous (2,1,1,3) pair without jitter.  ``Gd`` is G minus its
    single left pole, so the expression is valid for every x > 0.
    """
    a, b = model.a, model.b
    x = _arg(model, mu)
    if isinstance(model, GGPointing):
        xi2 = model.xi2
        g_inv = MeijerGSpec.of(3, 1, [1.0, xi2], [xi2 - 1.0, a - 1.0, b - 1.0, 0.0])
        g_tail = MeijerGSpec.of(3, 1, [1.0, xi2 + 1.0], [xi2, a, b, 0.0])
        pref = math.exp(math.log(xi2) - _log_gamma_ab(model))
    else:
        g_inv = MeijerGSpec.of(2, 1, [1.0], [a - 1.0, b - 1.0, 0.0])
        g_tail = MeijerGSpec.of(2, 1, [1.0], [a, b, 0.0])
        pref = math.exp(-_log_gamma_ab(model))
    bracket = x * meijer_g_decaying(g_inv, x) - meijer_g_decaying(g_tail, x)
    return pref * bracket / mu


def _power_quadrature(mu: float, model: ChannelModel) -> float:
    return channel.averaged_expectation(model, mu, "power").value / mu


def average_power(mu: float, model: ChannelModel, method: str = "closed") -> float:
    """Normalised average transmit power ``E[(1/mu - 1/lambda)^+]`` at threshold ``mu``."""
    if not (math.isfinite(mu) and mu > 0):
        raise ValueError("mu must be positive")
    if method == "quadrature":
        return _power_quadrature(mu, model)
    if method != "closed":
        raise ValueError("method must be 'closed' or 'quadrature'")
    try:
        value = _power_closed(mu, model)
        if not math.isfinite(value):
            raise ConvergenceError("non-finite closed-form power")
        return value
    except (ConvergenceError, ValueError, FloatingPointError):
        return _power_quadrature(mu, model)


def power_constraint_residual(mu: float, model: ChannelModel, snr: float, method: str = "closed") -> float:
    """``E[(1/mu - 1/lambda)^+] - snr``; strictly decreasing in ``mu``."""
    _check_snr(snr)
    return average_power(mu, model, method) - snr


def solve_threshold(
    model: ChannelModel,
    snr: float,
    method: str = "closed",
    tol: ToleranceSpec | None = None,
) -> float:
    """Waterfilling threshold ``mu`` meeting the average-power constraint.

    The root is found in ``log mu``.  The starting bracket spans the two
    asymptotic thresholds with a factor-100 margin each way and is widened
    geometrically until the residual changes sign.

    Raises
    ------
    ConvergenceError
        If no bracket is found or the final residual exceeds
        ``RESIDUAL_TOL * snr``.
    """
    _check_snr(snr)
    guesses = [threshold_asymptote(model, snr, Regime.HIGH)]
    low = threshold_asymptote(model, snr, Regime.LOW)
    if math.isfinite(low) and low > 0:
        guesses.append(low)
    lo = math.log(min(guesses) / 100.0)
    hi = math.log(max(guesses) * 100.0)

    def g(t):
        return average_power(math.exp(t), model, method) / snr - 1.0

    step = math.log(10.0)
    for _ in range(60):
        g_lo, g_hi = g(lo), g(hi)
        if g_lo > 0 and g_hi < 0:
            break
        if g_lo <= 0:
            lo -= step
        if g_hi >= 0:
            hi += step
    else:
        raise ConvergenceError(f"could not bracket the threshold at snr={snr!r}")

    tol = tol or ToleranceSpec(rel_tol=1e-15)
    try:
        t = find_root_monotone(g, (lo, hi), tol)
    except NoSignChangeError as exc:  # pragma: no cover - bracket checked above
        raise ConvergenceError(str(exc)) from exc
    mu = math.exp(t)
    resid = abs(g(t))
    if resid > RESIDUAL_TOL:
        raise ConvergenceError(
            f"threshold residual {resid:.3e} (relative) above tolerance", best_estimate=mu
        )
    return mu


def _k_capacity_closed(mu: float, model: ChannelModel) -> float:
    """``k * C`` at threshold ``mu`` from the Meijer-G closed form."""
    a, b = model.a, model.b
    x = _arg(model, mu)
    if isinstance(model, GGPointing):
        xi2 = model.xi2
        spec = MeijerGSpec.of(3, 2, [1.0, 1.0, xi2 + 1.0], [xi2, a, b, 0.0, 0.0])
        pref = math.exp(math.log(xi2) - _log_gamma_ab(model))
    else:
        spec = MeijerGSpec.of(2, 2, [1.0, 1.0], [a, b, 0.0, 0.0])
        pref = math.exp(-_log_gamma_ab(model))
    if x > _DECAY_SWITCH:
        return pref * meijer_g_decaying(spec, x)
    return penalty_high_snr(model) - math.log(mu) + pref * meijer_g(spec, x)


def capacity_at_threshold(mu: float, model: ChannelModel, scheme: DetectionScheme) -> float:
    """Closed-form capacity (nats) for a given threshold, skipping the solve."""
    return max(_k_capacity_closed(mu, model), 0.0) / scheme.k


def capacity_exact(
    model: ChannelModel,
    scheme: DetectionScheme,
    snr: float,
    *,
    allow_low_power: bool = False,
) -> CapacityPoint:
    """Exact ergodic capacity from the Meijer-G closed form.

    Args:
        model: channel statistics.
        scheme: detection scheme.
        snr: transmit SNR (linear).
        allow_low_power: skip the IM/DD validity floor.

    Raises:
        ValidityError: IM/DD below the validity floor.
    """
    _check_snr(snr)
    _check_imdd(scheme, snr, allow_low_power)
    mu = solve_threshold(model, snr)
    return CapacityPoint(snr, mu, capacity_at_threshold(mu, model, scheme), Method.EXACT, scheme)


def capacity_oracle(
    model: ChannelModel,
    scheme: DetectionScheme,
    snr: float,
    *,
    allow_low_power: bool = False,
) -> CapacityPoint:
    """Capacity by direct quadrature, independent of the Meijer-G forms.

    Both the power constraint and ``E[log(lambda/mu)^+]`` are integrated over
    the turbulence gain with the jitter loss averaged analytically.
    """
    _check_snr(snr)
    _check_imdd(scheme, snr, allow_low_power)
    mu = solve_threshold(model, snr, method="quadrature")
    res = channel.averaged_expectation(model, mu, "capacity")
    return CapacityPoint(snr, mu, max(res.value, 0.0) / scheme.k, Method.ORACLE, scheme)


def capacity_montecarlo(
    model: ChannelModel,
    scheme: DetectionScheme,
    snr: float,
    samples: int,
    seed: int,
    *,
    threshold: float | None = None,
    allow_low_power: bool = False,
) -> CapacityPoint:
    """Empirical waterfilled efficiency ``(1/k) mean(log(lambda/mu)^+)``.

    The threshold comes from the closed-form solve unless given.  The
    standard error of the mean is stored on ``std_error``.
    """
    _check_snr(snr)
    _check_imdd(scheme, snr, allow_low_power)
    mu = solve_threshold(model, snr) if threshold is None else threshold
    total = 0.0
    total_sq = 0.0
    for chunk in channel.iter_irradiance(model, seed, samples):
        gain = np.log(np.maximum(chunk, mu) / mu)
        total += float(gain.sum())
        total_sq += float((gain * gain).sum())
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0) * samples / max(samples - 1, 1)
    se = math.sqrt(var / samples)
    return CapacityPoint(snr, mu, mean / scheme.k, Method.MONTE_CARLO, scheme, std_error=se / scheme.k)


def capacity_asymptotic_low(model: ChannelModel, scheme: DetectionScheme, snr: float) -> CapacityPoint:
    """``(1/k) A0/(4ab) snr log(1/snr)^2``; heterodyne detection only, ``0 < snr < 1``."""
    _check_snr(snr)
    if scheme.kind != "HD":
        raise ValidityError("the low-SNR asymptote applies to heterodyne detection only")
    if not snr < 1:
        raise ValueError("the low-SNR asymptote needs snr < 1")
    mu = threshold_asymptote(model, snr, Regime.LOW)
    value = low_snr_scaling_factor(model) * snr * math.log(1.0 / snr) ** 2 / scheme.k
    return CapacityPoint(snr, mu, value, Method.ASYMPTOTIC_LOW, scheme)


def capacity_asymptotic_high(model: ChannelModel, scheme: DetectionScheme, snr: float) -> CapacityPoint:
    """``(1/k) [log snr + penalty]``, the high-SNR asymptote; needs ``snr > 1``.

    The asymptote can be negative at moderate SNR; it is clipped at 0 in
    the returned point.
    """
    _check_snr(snr)
    if not snr > 1:
        raise ValueError("the high-SNR asymptote needs snr > 1")
    value = high_snr_asymptote_value(model, scheme, snr)
    return CapacityPoint(snr, 1.0 / snr, max(value, 0.0), Method.ASYMPTOTIC_HIGH, scheme)


def high_snr_asymptote_value(model: ChannelModel, scheme: DetectionScheme, snr: float) -> float:
    """Unclipped high-SNR asymptote (nats)."""
    return (math.log(snr) + penalty_high_snr(model)) / scheme.k


def awgn_capacity(snr: float, scheme: DetectionScheme) -> float:
    return math.log1p(snr) / scheme.k
