"""Physical link geometry to Gamma-Gamma and pointing-error parameters.

Plane-wave expressions throughout.  Lengths are SI metres.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .special import erf

RYTOV_COEFF = 1.23
COHERENCE_COEFF = 1.46
# below this beam-to-aperture ratio the jitter model is a poor approximation
MIN_BEAM_APERTURE_RATIO = 5.0


class BeamApertureWarning(UserWarning):
    """Beam footprint is not much wider than the receive aperture."""


@dataclass(frozen=True)
class LinkGeometry:
    """Transmitter, path and receiver geometry (metres)."""

    wavelength: float = 1550e-9
    beam_waist: float = 1.2e-2
    path_length: float = 1800.0
    aperture_radius: float = 1.5e-2
    jitter_sigma: float = 0.1

    def __post_init__(self):
        for name in ("wavelength", "beam_waist", "path_length", "aperture_radius"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite length, got {value!r}")
        if not (math.isfinite(self.jitter_sigma) and self.jitter_sigma >= 0):
            raise ValueError(f"jitter_sigma must be >= 0, got {self.jitter_sigma!r}")

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength


@dataclass(frozen=True)
class TurbulenceState:
    rytov_variance: float
    cn2: float
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("Gamma-Gamma shape parameters must be positive")
        if not (self.rytov_variance > 0 and self.cn2 > 0):
            raise ValueError("rytov_variance and cn2 must be positive")

    @classmethod
    def from_rytov(cls, rytov_variance: float, geom: LinkGeometry) -> "TurbulenceState":
        a, b = gg_params_from_rytov(rytov_variance)
        return cls(rytov_variance, cn2_from_rytov(rytov_variance, geom), a, b)

    @classmethod
    def from_cn2(cls, cn2: float, geom: LinkGeometry) -> "TurbulenceState":
        rytov = rytov_from_cn2(cn2, geom)
        a, b = gg_params_from_rytov(rytov)
        return cls(rytov, cn2, a, b)


@dataclass(frozen=True)
class PointingState:
    """Beam footprint and jitter parameters at the receiver.

    ``xi`` is ``math.inf`` when there is no jitter.
    """

    w_L: float
    w_Leq: float
    v: float
    A0: float
    xi: float
    rho0: float
    epsilon: float

    def __post_init__(self):
        if not (0 < self.A0 <= 1):
            raise ValueError(f"A0 must lie in (0, 1], got {self.A0!r}")
        if not self.xi > 0:
            raise ValueError("xi must be positive")

    @property
    def has_jitter(self) -> bool:
        return math.isfinite(self.xi)


def gg_params_from_rytov(rytov_variance: float) -> tuple[float, float]:
    """Large- and small-scale scintillation shapes (a, b) for a plane wave.

    Args:
        rytov_variance: Rytov variance, must be positive.

    Returns:
        The pair ``(a, b)``.
    """
    s2 = float(rytov_variance)
    if not (math.isfinite(s2) and s2 > 0):
        raise ValueError(f"Rytov variance must be positive, got {rytov_variance!r}")
    s125 = s2 ** 1.2  # sigma_R^{12/5}
    a = 1.0 / math.expm1(0.49 * s2 / (1.0 + 1.11 * s125) ** (7.0 / 6.0))
    b = 1.0 / math.expm1(0.51 * s2 / (1.0 + 0.69 * s125) ** (5.0 / 6.0))
    return a, b


def _rytov_per_cn2(geom: LinkGeometry) -> float:
    return RYTOV_COEFF * geom.wavenumber ** (7.0 / 6.0) * geom.path_length ** (11.0 / 6.0)


def rytov_from_cn2(cn2: float, geom: LinkGeometry) -> float:
    if not (math.isfinite(cn2) and cn2 > 0):
        raise ValueError(f"cn2 must be positive, got {cn2!r}")
    return cn2 * _rytov_per_cn2(geom)


def cn2_from_rytov(rytov_variance: float, geom: LinkGeometry) -> float:
    if not (math.isfinite(rytov_variance) and rytov_variance > 0):
        raise ValueError(f"Rytov variance must be positive, got {rytov_variance!r}")
    return rytov_variance / _rytov_per_cn2(geom)


def derive_pointing_state(geom: LinkGeometry, cn2: float) -> PointingState:
    """Beam radius, collected-power fraction and jitter ratio at the receiver.

    Parameters
    ----------
    geom : LinkGeometry
    cn2 : float
        Refractive-index structure parameter in m^(-2/3).

    Returns
    -------
    PointingState

    Notes
    -----
    The far-field spreading term enters squared,
    ``w_L = w0 * sqrt(1 + eps * (lambda L / (pi w0^2))^2)``.  Emits
    :class:`BeamApertureWarning` when ``w_L / r_A <= 5``.
    """
    if not (math.isfinite(cn2) and cn2 > 0):
        raise ValueError(f"cn2 must be positive, got {cn2!r}")
    k = geom.wavenumber
    L = geom.path_length
    w0 = geom.beam_waist

    rho0 = (COHERENCE_COEFF * cn2 * k * k * L) ** (-0.6)
    epsilon = 1.0 + 2.0 * w0 * w0 / (rho0 * rho0)
    spread = geom.wavelength * L / (math.pi * w0 * w0)
    w_L = w0 * math.sqrt(1.0 + epsilon * spread * spread)
    if w_L / geom.aperture_radius <= MIN_BEAM_APERTURE_RATIO:
        warnings.warn(
            f"w_L/r_A = {w_L / geom.aperture_radius:.3g} is not >> 1; "
            "the jitter model is approximate here",
            BeamApertureWarning,
            stacklevel=2,
        )

    v = math.sqrt(math.pi) * geom.aperture_radius / (math.sqrt(2.0) * w_L)
    erf_v = erf(v)
    A0 = erf_v * erf_v
    w_Leq = w_L * math.sqrt(math.sqrt(math.pi) * erf_v / (2.0 * v * math.exp(-v * v)))
    if geom.jitter_sigma == 0:
        xi = math.inf
    else:
        xi = w_Leq / (2.0 * geom.jitter_sigma)
    return PointingState(w_L=w_L, w_Leq=w_Leq, v=v, A0=A0, xi=xi, rho0=rho0, epsilon=epsilon)
