"""Irradiance statistics for Gamma-Gamma turbulence with optional jitter.

Two channel variants are supported:

* :class:`GGOnly` -- ``I = scale * I_a`` with ``I_a`` Gamma-Gamma of unit
  mean.  ``scale`` is an optional geometric loss, 1 by default.
* :class:`GGPointing` -- ``I = I_a * I_p`` with ``I_p`` the zero-boresight
  jitter loss, supported on ``(0, A0]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Union

import numpy as np

from .numerics import ToleranceSpec, integrate_semi_infinite
from .special import (
    MeijerGSpec,
    ln_gamma,
    log_bessel_k,
    meijer_g,
    meijer_g_decaying,
)

# above this Meijer-G argument the tail is taken from the decaying part of G
_DECAY_SWITCH = 1.0
_DEFAULT_CHUNK = 1 << 20


def _positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class GGOnly:
    """Gamma-Gamma channel without jitter, optionally scaled by a fixed loss."""

    a: float
    b: float
    scale: float = 1.0

    def __post_init__(self):
        _positive("a", self.a)
        _positive("b", self.b)
        _positive("scale", self.scale)
        if self.scale > 1:
            raise ValueError("scale is a loss factor and must not exceed 1")

    @property
    def gain_scale(self) -> float:
        return self.scale


@dataclass(frozen=True)
class GGPointing:
    """Gamma-Gamma channel with zero-boresight pointing jitter."""

    a: float
    b: float
    xi: float
    A0: float

    def __post_init__(self):
        _positive("a", self.a)
        _positive("b", self.b)
        _positive("xi", self.xi)
        if not (0 < self.A0 <= 1):
            raise ValueError(f"A0 must lie in (0, 1], got {self.A0!r}")

    @property
    def gain_scale(self) -> float:
        return self.A0

    @property
    def xi2(self) -> float:
        return self.xi * self.xi

    def without_jitter(self, keep_loss: bool = True) -> GGOnly:
        """Matching jitter-free channel; ``keep_loss`` keeps A0 as a gain scale."""
        return GGOnly(self.a, self.b, self.A0 if keep_loss else 1.0)


ChannelModel = Union[GGOnly, GGPointing]


def _log_norm(a, b):
    return ln_gamma(a) + ln_gamma(b)


# -- densities ---------------------------------------------------------------


def pdf_gg(i, a: float, b: float):
    """Unit-mean Gamma-Gamma density.

    ``f(i) = 2 (ab)^((a+b)/2) / (Gamma(a) Gamma(b)) i^((a+b)/2 - 1) K_{a-b}(2 sqrt(ab i))``,
    evaluated in log space so large ``a, b`` and large ``i`` do not overflow.
    """
    i_arr = np.asarray(i, dtype=float)
    if not np.all(i_arr > 0):
        raise ValueError("pdf_gg requires i > 0")
    _positive("a", a)
    _positive("b", b)
    ab = a * b
    half = 0.5 * (a + b)
    z = 2.0 * np.sqrt(ab * i_arr)
    log_f = (
        math.log(2.0)
        + half * math.log(ab)
        - _log_norm(a, b)
        + (half - 1.0) * np.log(i_arr)
        + np.asarray(log_bessel_k(a - b, z))
    )
    out = np.exp(log_f)
    return float(out) if out.ndim == 0 else out


def pdf_pointing(i, xi: float, A0: float):
    """Jitter-loss density ``xi^2 / A0^xi^2 * i^(xi^2 - 1)`` on ``(0, A0]``; 0 elsewhere."""
    _positive("xi", xi)
    if not (0 < A0 <= 1):
        raise ValueError(f"A0 must lie in (0, 1], got {A0!r}")
    i_arr = np.asarray(i, dtype=float)
    xi2 = xi * xi
    inside = (i_arr > 0) & (i_arr <= A0)
    safe = np.where(inside, i_arr, A0)
    vals = np.where(inside, xi2 / A0 * (safe / A0) ** (xi2 - 1.0), 0.0)
    return float(vals) if vals.ndim == 0 else vals


def _composite_spec(model: GGPointing) -> MeijerGSpec:
    xi2 = model.xi2
    return MeijerGSpec.of(3, 0, [xi2], [xi2 - 1.0, model.a - 1.0, model.b - 1.0])


def pdf_composite(i, model: ChannelModel):
    """Density of the overall irradiance.

    For :class:`GGPointing` this is the Meijer-G closed form
    ``ab xi^2 / (A0 Gamma(a) Gamma(b)) * G^{3,0}_{1,3}(ab i / A0 | xi^2; xi^2-1, a-1, b-1)``.
    For :class:`GGOnly` it is the (scaled) Gamma-Gamma density.
    """
    if isinstance(model, GGOnly):
        s = model.scale
        out = np.asarray(pdf_gg(np.asarray(i, dtype=float) / s, model.a, model.b)) / s
        return float(out) if out.ndim == 0 else out
    i_arr = np.asarray(i, dtype=float)
    if not np.all(i_arr > 0):
        raise ValueError("pdf_composite requires i > 0")
    spec = _composite_spec(model)
    ab = model.a * model.b
    coeff = math.exp(math.log(ab * model.xi2 / model.A0) - _log_norm(model.a, model.b))
    flat = np.array([coeff * meijer_g(spec, ab * v / model.A0) for v in i_arr.ravel()])
    out = flat.reshape(i_arr.shape)
    return float(out) if out.ndim == 0 else out


def pdf(i, model: ChannelModel):
    return pdf_composite(i, model)


def pdf_composite_quadrature(i: float, model: GGPointing, tol: ToleranceSpec | None = None) -> float:
    """Composite density by conditioning on the turbulence gain.

    ``f(i) = int_{i/A0}^inf f_{I|I_a}(i | y) f_a(y) dy`` with the conditional
    jitter density ``xi^2/(A0^xi^2 y) (i/y)^(xi^2-1)``.
    """
    _positive("i", i)
    xi2 = model.xi2
    A0 = model.A0
    lower = i / A0

    def integrand(y):
        return (xi2 / (A0 * y)) * (lower / y) ** (xi2 - 1.0) * pdf_gg(y, model.a, model.b)

    tol = tol or ToleranceSpec(rel_tol=1e-11, abs_tol=1e-300)
    res = integrate_semi_infinite(
        integrand, lower, tol, scale=1.0, sqrt_substitution=True, vectorized=True
    )
    return res.value


# -- distribution functions --------------------------------------------------


def _cdf_parts(mu: float, model: ChannelModel):
    """(x, prefactor, spec) with cdf = prefactor * G(x) and tail = -prefactor * Gexp(x)."""
    a, b = model.a, model.b
    if isinstance(model, GGPointing):
        xi2 = model.xi2
        x = a * b * mu / model.A0
        spec = MeijerGSpec.of(3, 1, [1.0, xi2 + 1.0], [xi2, a, b, 0.0])
        pref = math.exp(math.log(xi2) - _log_norm(a, b))
    else:
        x = a * b * mu / model.scale
        spec = MeijerGSpec.of(2, 1, [1.0], [a, b, 0.0])
        pref = math.exp(-_log_norm(a, b))
    return x, pref, spec


def tail_probability(mu: float, model: ChannelModel) -> float:
    """``P(I > mu)``, accurate in both the bulk and the far tail."""
    _positive("mu", mu)
    x, pref, spec = _cdf_parts(mu, model)
    if x > _DECAY_SWITCH:
        val = -pref * meijer_g_decaying(spec, x)
    else:
        val = 1.0 - pref * meijer_g(spec, x)
    return min(max(val, 0.0), 1.0)


def cdf(mu: float, model: ChannelModel) -> float:
    """``P(I <= mu)``; computed directly for small ``mu`` to keep relative accuracy."""
    _positive("mu", mu)
    x, pref, spec = _cdf_parts(mu, model)
    if x > _DECAY_SWITCH:
        val = 1.0 + pref * meijer_g_decaying(spec, x)
    else:
        val = pref * meijer_g(spec, x)
    return min(max(val, 0.0), 1.0)


def mean_irradiance(model: ChannelModel) -> float:
    """Closed-form ``E[I]``: ``scale`` without jitter, ``A0 xi^2/(1+xi^2)`` with it."""
    if isinstance(model, GGOnly):
        return model.scale
    return model.A0 * model.xi2 / (1.0 + model.xi2)


# -- jitter-averaged kernels -------------------------------------------------
# For I = y * I_p with I_p on (0, A0] these are E_p[h(y I_p)] in closed form,
# written in terms of r = mu / (A0 y) in (0, 1).  They let tails, the power
# constraint and the capacity integral be computed as one-dimensional
# integrals over the Gamma-Gamma density, without any Meijer-G function.


def _ratio_power(r, e):
    return np.exp(e * np.log(r))


def _pe_tail_kernel(r, xi2):
    # P(y I_p > mu)
    return -np.expm1(xi2 * np.log(r))


def _pe_capacity_kernel(r, xi2):
    # E[log(y I_p / mu)^+]
    return -np.log(r) + np.expm1(xi2 * np.log(r)) / xi2


def _pe_power_kernel(r, xi2):
    # mu * E[(1/mu - 1/(y I_p))^+]
    log_r = np.log(r)
    e = xi2 - 1.0
    if abs(e) < 1e-8:
        ratio = -log_r * (1.0 + 0.5 * e * log_r)
    else:
        ratio = -np.expm1(e * log_r) / e  # (1 - r^e) / e
    return -np.expm1(xi2 * log_r) - xi2 * r * ratio


def averaged_expectation(model: ChannelModel, mu: float, kind: str, tol: ToleranceSpec | None = None):
    """``E[h(I)]`` for ``h`` one of ``'tail'``, ``'capacity'``, ``'power'``.

    * ``tail``: ``1{I > mu}``
    * ``capacity``: ``log(I/mu)^+``
    * ``power``: ``mu * (1/mu - 1/I)^+``

    Evaluated by quadrature over the turbulence gain only (jitter averaged
    analytically).  Returns a :class:`~fsocap.numerics.QuadratureResult`.
    """
    _positive("mu", mu)
    a, b = model.a, model.b
    if isinstance(model, GGPointing):
        g0, xi2 = model.A0, model.xi2
        kernels = {"tail": _pe_tail_kernel, "capacity": _pe_capacity_kernel, "power": _pe_power_kernel}
        kernel = kernels[kind]

        def h(r):
            return kernel(r, xi2)
    else:
        g0 = model.scale
        plain = {
            "tail": lambda r: np.ones_like(r),
            "capacity": lambda r: -np.log(r),
            "power": lambda r: 1.0 - r,
        }
        h = plain[kind]

    lower = mu / g0

    def integrand(y):
        r = np.clip(lower / y, 1e-300, 1.0)
        dens = pdf_gg(y, a, b)
        # far out the density underflows first; avoid 0 * inf
        return np.where(dens > 0, h(r) * dens, 0.0)

    tol = tol or ToleranceSpec(rel_tol=1e-12, abs_tol=1e-300)
    # bulk of the mass near y ~ 1; beyond it the density falls off on a
    # scale of sqrt(y / ab)
    scale = 1.0 if lower < 1 else math.sqrt(lower / (a * b))
    return integrate_semi_infinite(
        integrand, lower, tol, scale=scale, sqrt_substitution=True, vectorized=True
    )


# -- sampling ----------------------------------------------------------------


def _streams(rng_seed: int):
    seq = np.random.SeedSequence(rng_seed)
    return [np.random.default_rng(s) for s in seq.spawn(3)]


def iter_irradiance(
    model: ChannelModel,
    rng_seed: int,
    count: int,
    *,
    chunk: int = _DEFAULT_CHUNK,
    pointing: str = "inverse",
) -> Iterator[np.ndarray]:
    """Yield i.i.d. irradiance draws in chunks of at most ``chunk`` values.

    ``I_a`` is the product of two independent unit-mean Gamma variates.  The
    jitter loss is drawn either by inverse transform, ``A0 * U^(1/xi^2)``
    (``pointing='inverse'``), or from a 2-D Gaussian displacement,
    ``A0 * exp(-R^2 / (2 xi^2))`` with ``R`` a unit Rayleigh radius
    (``pointing='geometric'``).  Each factor has its own child stream of the
    seed, so the output depends only on ``rng_seed`` and ``count``.
    """
    if int(count) < 1:
        raise ValueError("count must be >= 1")
    if pointing not in ("inverse", "geometric"):
        raise ValueError("pointing must be 'inverse' or 'geometric'")
    rng_a, rng_b, rng_p = _streams(rng_seed)
    a, b = model.a, model.b
    remaining = int(count)
    while remaining:
        n = min(chunk, remaining)
        remaining -= n
        ia = rng_a.gamma(a, 1.0 / a, n) * rng_b.gamma(b, 1.0 / b, n)
        if isinstance(model, GGOnly):
            yield model.scale * ia
            continue
        if pointing == "inverse":
            # 1 - U lies in (0, 1], so the power is never log(0)
            u = 1.0 - rng_p.random(n)
            ip = model.A0 * np.exp(np.log(u) / model.xi2)
        else:
            dx, dy = rng_p.standard_normal((2, n))
            ip = model.A0 * np.exp(-(dx * dx + dy * dy) / (2.0 * model.xi2))
        yield ia * ip


def sample_irradiance(model: ChannelModel, rng_seed: int, count: int, *, pointing: str = "inverse") -> np.ndarray:
    """``count`` seeded irradiance draws as one array; see :func:`iter_irradiance`."""
    return np.concatenate(list(iter_irradiance(model, rng_seed, count, pointing=pointing)))
