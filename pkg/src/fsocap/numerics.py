"""Quadrature and root-finding kernels shared by the oracles and solvers.

The semi-infinite integrator is a double-exponential (exp-sinh) rule with
level doubling.  Integrands with stretched-exponential tails such as
``exp(-2*sqrt(x))`` can be mapped through ``x = lower + u**2`` first, which
restores plain exponential decay in ``u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize


class ConvergenceError(RuntimeError):
    """Raised when an iterative method stops short of its tolerance.

    The best estimate reached so far is kept on ``best_estimate`` so callers
    can decide whether it is usable.
    """

    def __init__(self, message: str, best_estimate: float = math.nan):
        super().__init__(message)
        self.best_estimate = best_estimate


class NoSignChangeError(ValueError):
    """The residual has the same sign at both ends of the bracket."""


@dataclass(frozen=True)
class ToleranceSpec:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_evaluations: int = 1_000_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("rel_tol and abs_tol must be strictly positive")
        if self.max_evaluations < 1:
            raise ValueError("max_evaluations must be a positive integer")


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    evaluations: int

    def __post_init__(self):
        if not self.abs_error_estimate >= 0:
            raise ValueError("abs_error_estimate must be non-negative")
        if self.evaluations < 1:
            raise ValueError("evaluations must be >= 1")


DEFAULT_TOL = ToleranceSpec()

# exp-sinh abscissae stay inside double range for |t| <= 6.5
_T_LIMIT = 6.5
_MAX_LEVEL = 12


def _evaluate(f, x, vectorized):
    if vectorized:
        y = np.asarray(f(x), dtype=float)
    else:
        y = np.fromiter((f(float(xi)) for xi in x), dtype=float, count=len(x))
    if np.isnan(y).any():
        bad = x[np.isnan(y)][0]
        raise ConvergenceError(f"integrand returned NaN at x={bad!r}")
    return y


def integrate_semi_infinite(
    f: Callable,
    lower: float = 0.0,
    tol: ToleranceSpec | None = None,
    *,
    scale: float = 1.0,
    sqrt_substitution: bool = False,
    vectorized: bool = False,
) -> QuadratureResult:
    """Integrate ``f`` over ``[lower, inf)``.

    Parameters
    ----------
    f : callable
        Integrand.  With ``vectorized=True`` it receives a numpy array of
        abscissae and must return an array of the same shape.
    lower : float
        Finite lower limit, ``lower >= 0``.
    tol : ToleranceSpec, optional
        Convergence target; defaults to ``ToleranceSpec()``.
    scale : float
        Characteristic width of the integrand above ``lower``.  The rule is
        centred on ``lower + scale``.
    sqrt_substitution : bool
        Integrate over ``u`` with ``x = lower + u**2`` (use for tails that
        decay like ``exp(-c*sqrt(x))``).
    vectorized : bool
        Whether ``f`` accepts arrays.

    Raises
    ------
    ConvergenceError
        If ``f`` produces NaN or the rule does not settle within
        ``tol.max_evaluations`` evaluations.
    """
    tol = tol or DEFAULT_TOL
    if not lower >= 0:
        raise ValueError("lower limit must be >= 0")
    if not scale > 0:
        raise ValueError("scale must be positive")

    if sqrt_substitution:
        u_scale = math.sqrt(scale)

        def nodes(t):
            e = np.exp(0.5 * np.pi * np.sinh(t))
            u = u_scale * e
            du = u * 0.5 * np.pi * np.cosh(t)
            return lower + u * u, 2.0 * u * du
    else:

        def nodes(t):
            e = np.exp(0.5 * np.pi * np.sinh(t))
            x = scale * e
            return lower + x, x * 0.5 * np.pi * np.cosh(t)

    evaluations = 0

    def terms_at(t):
        nonlocal evaluations
        x, w = nodes(t)
        keep = np.isfinite(x) & np.isfinite(w) & (x > lower)
        out = np.zeros_like(t)
        if keep.any():
            out[keep] = w[keep] * _evaluate(f, x[keep], vectorized)
            evaluations += int(keep.sum())
        return out

    # level 0: walk outwards from t=0 until the terms die off
    h = 0.5
    centre = terms_at(np.array([0.0]))[0]
    total = centre
    t_lo = t_hi = 0.0
    for direction in (+1, -1):
        quiet = 0
        k = 1
        while k * h <= _T_LIMIT:
            term = terms_at(np.array([direction * k * h]))[0]
            total += term
            if abs(term) <= 1e-18 * max(abs(total), 1e-300) or term == 0.0:
                quiet += 1
                if quiet >= 3:
                    break
            else:
                quiet = 0
            k += 1
        if direction > 0:
            t_hi = min(k * h, _T_LIMIT)
        else:
            t_lo = -min(k * h, _T_LIMIT)

    estimate = h * total
    error = math.inf
    for _level in range(1, _MAX_LEVEL + 1):
        h *= 0.5
        odd = np.arange(t_lo + h, t_hi, 2 * h)
        total += terms_at(odd).sum()
        new_estimate = h * total
        error = abs(new_estimate - estimate)
        estimate = new_estimate
        if error <= max(tol.rel_tol * abs(estimate), tol.abs_tol):
            return QuadratureResult(float(estimate), float(error), max(evaluations, 1))
        if evaluations > tol.max_evaluations:
            break
    raise ConvergenceError(
        f"exp-sinh quadrature did not converge (last change {error:.3e})",
        best_estimate=float(estimate),
    )


def integrate_interval(
    f: Callable,
    lower: float,
    upper: float,
    tol: ToleranceSpec | None = None,
    *,
    vectorized: bool = False,
) -> QuadratureResult:
    """tanh-sinh rule on a finite interval; tolerates endpoint singularities."""
    tol = tol or DEFAULT_TOL
    if not upper > lower:
        if upper == lower:
            return QuadratureResult(0.0, 0.0, 1)
        raise ValueError("upper must be >= lower")
    half = 0.5 * (upper - lower)
    evaluations = 0

    def terms_at(t):
        nonlocal evaluations
        s = 0.5 * np.pi * np.sinh(t)
        cs = np.cosh(s)
        w = half * 0.5 * np.pi * np.cosh(t) / cs**2
        # offsets from the nearer endpoint, free of cancellation
        x = np.where(t < 0, lower + half * np.exp(s) / cs, upper - half * np.exp(-s) / cs)
        keep = (w > 0) & (x > lower) & (x < upper)
        out = np.zeros_like(t)
        if keep.any():
            out[keep] = w[keep] * _evaluate(f, x[keep], vectorized)
            evaluations += int(keep.sum())
        return out

    t_max = 4.0
    h = 0.25
    grid = np.arange(-t_max, t_max + h / 2, h)
    total = terms_at(grid).sum()
    estimate = h * total
    error = math.inf
    for _level in range(1, _MAX_LEVEL + 1):
        h *= 0.5
        odd = np.arange(-t_max + h, t_max, 2 * h)
        total += terms_at(odd).sum()
        new_estimate = h * total
        error = abs(new_estimate - estimate)
        estimate = new_estimate
        if error <= max(tol.rel_tol * abs(estimate), tol.abs_tol):
            return QuadratureResult(float(estimate), float(error), max(evaluations, 1))
        if evaluations > tol.max_evaluations:
            break
    raise ConvergenceError(
        f"tanh-sinh quadrature did not converge (last change {error:.3e})",
        best_estimate=float(estimate),
    )


def find_root_monotone(
    g: Callable[[float], float],
    bracket: tuple[float, float],
    tol: ToleranceSpec | None = None,
) -> float:
    """Root of a continuous, strictly monotone ``g`` inside ``bracket``.

    Brent's method (scipy's ``brentq``) behind a stricter contract: a bracket
    without a sign change raises ``NoSignChangeError`` and exhausting the
    iteration budget raises ``ConvergenceError``.
    """
    tol = tol or DEFAULT_TOL
    lo, hi = map(float, bracket)
    if lo > hi:
        lo, hi = hi, lo
    g_lo, g_hi = g(lo), g(hi)
    if math.isnan(g_lo) or math.isnan(g_hi):
        raise ConvergenceError("residual is NaN at the bracket ends")
    if g_lo == 0.0:
        return lo
    if g_hi == 0.0:
        return hi
    if (g_lo > 0) == (g_hi > 0):
        raise NoSignChangeError(
            f"no sign change on [{lo:.6g}, {hi:.6g}]: g={g_lo:.3e}, {g_hi:.3e}"
        )
    rtol = max(tol.rel_tol, 4 * np.finfo(float).eps)
    maxiter = int(min(tol.max_evaluations, 500))
    try:
        root, info = optimize.brentq(
            g, lo, hi, xtol=1e-300, rtol=rtol, maxiter=maxiter, full_output=True, disp=False
        )
    except ValueError as exc:  # NaN from g surfaces here
        raise ConvergenceError(str(exc)) from exc
    if not info.converged:
        raise ConvergenceError(
            f"root finder stopped after {info.iterations} iterations", best_estimate=root
        )
    return float(root)
