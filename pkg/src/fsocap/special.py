"""Special functions used by the channel and capacity formulas.

Gamma, digamma, erf and the modified Bessel function of the second kind are
thin, domain-checked wrappers over ``scipy.special``.  The Meijer-G evaluator
is implemented here; see :func:`meijer_g` for the method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc


class UnsupportedMeijerG(NotImplementedError):
    """The requested (m, n, p, q) shape is outside the supported families."""


# The shapes that appear in the irradiance, tail, power-constraint and
# capacity formulas.  (2,1,1,3) is the no-pointing-error tail/constraint form.
SUPPORTED_SHAPES = frozenset(
    {(2, 0, 0, 2), (3, 0, 1, 3), (3, 1, 2, 4), (2, 2, 2, 4), (3, 2, 3, 5), (2, 1, 1, 3)}
)


def _check_positive(name, x):
    arr = np.asarray(x, dtype=float)
    if not np.all(arr > 0):
        raise ValueError(f"{name} requires a positive argument, got {x!r}")
    return arr


def _out(value):
    return float(value) if np.ndim(value) == 0 else value


def ln_gamma(x):
    """log Gamma(x) for x > 0."""
    return _out(sc.gammaln(_check_positive("ln_gamma", x)))


def digamma(x):
    """psi(x) = d/dx log Gamma(x) for x > 0."""
    return _out(sc.digamma(_check_positive("digamma", x)))


def erf(x):
    return _out(sc.erf(np.asarray(x, dtype=float)))


def bessel_k(nu, x):
    """Modified Bessel function of the second kind K_nu(x), x > 0."""
    x = _check_positive("bessel_k", x)
    return _out(sc.kv(np.abs(np.asarray(nu, dtype=float)), x))


def log_bessel_k(nu, x):
    """log K_nu(x), stable for large x where K_nu underflows."""
    x = _check_positive("log_bessel_k", x)
    return _out(np.log(sc.kve(np.abs(np.asarray(nu, dtype=float)), x)) - x)


@dataclass(frozen=True)
class MeijerGSpec:
    """Shape and parameters of G^{m,n}_{p,q}(x | a; b)."""

    m: int
    n: int
    p: int
    q: int
    a_params: tuple[float, ...]
    b_params: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "a_params", tuple(float(v) for v in self.a_params))
        object.__setattr__(self, "b_params", tuple(float(v) for v in self.b_params))
        if min(self.m, self.n, self.p, self.q) < 0:
            raise ValueError("m, n, p, q must be non-negative")
        if self.m > self.q or self.n > self.p:
            raise ValueError("need m <= q and n <= p")
        if len(self.a_params) != self.p or len(self.b_params) != self.q:
            raise ValueError("parameter lists must have lengths p and q")

    @classmethod
    def of(cls, m: int, n: int, a_params, b_params) -> "MeijerGSpec":
        return cls(m, n, len(a_params), len(b_params), tuple(a_params), tuple(b_params))

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.m, self.n, self.p, self.q)


def _log_phi(spec: MeijerGSpec, s):
    """log of the Mellin-Barnes kernel, excluding the x**s factor."""
    m, n = spec.m, spec.n
    a, b = spec.a_params, spec.b_params
    s = np.asarray(s, dtype=complex)
    out = np.zeros_like(s)
    for bj in b[:m]:
        out += sc.loggamma(bj - s)
    for aj in a[:n]:
        out += sc.loggamma(1.0 - aj + s)
    for bj in b[m:]:
        out -= sc.loggamma(1.0 - bj + s)
    for aj in a[n:]:
        out -= sc.loggamma(aj - s)
    return out


def _kernel(spec, s, log_x):
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        return np.exp(_log_phi(spec, s) + s * log_x)


@dataclass
class _Pole:
    where: float
    order: int
    kind: str  # "R" (right family), "L" (left family) or "RL"


def _same(u, v):
    return abs(u - v) <= 1e-12 * max(1.0, abs(u), abs(v))


def _poles(spec: MeijerGSpec, lo: float, hi: float) -> list[_Pole]:
    """Net poles of the kernel in [lo, hi] after Gamma cancellations."""
    m, n = spec.m, spec.n
    a, b = spec.a_params, spec.b_params
    events = []  # (location, +1/-1, kind)
    for bj in b[:m]:
        for k in range(0, max(0, math.floor(hi - bj)) + 1):
            if bj + k >= lo:
                events.append((bj + k, +1, "R"))
    for aj in a[n:]:
        for k in range(0, max(0, math.floor(hi - aj)) + 1):
            if aj + k >= lo:
                events.append((aj + k, -1, ""))
    for aj in a[:n]:
        for k in range(0, max(0, math.floor(aj - 1 - lo)) + 1):
            if aj - 1 - k <= hi:
                events.append((aj - 1 - k, +1, "L"))
    for bj in b[m:]:
        for k in range(0, max(0, math.floor(bj - 1 - lo)) + 1):
            if bj - 1 - k <= hi:
                events.append((bj - 1 - k, -1, ""))
    events.sort(key=lambda e: e[0])

    poles: list[_Pole] = []
    group: list = []

    def flush():
        if not group:
            return
        order = sum(e[1] for e in group)
        kinds = {e[2] for e in group if e[1] > 0}
        if order > 0:
            kind = "RL" if kinds == {"R", "L"} else kinds.pop()
            poles.append(_Pole(group[0][0], order, kind))

    for ev in events:
        if group and not _same(group[0][0], ev[0]):
            flush()
            group = []
        group.append(ev)
    flush()
    return poles


_CLUSTER_GAP = 0.2


def _clusters(poles: list[_Pole], split_kinds: bool) -> list[list[_Pole]]:
    if split_kinds:
        out = []
        for kind in ("R", "L"):
            out.extend(_clusters([p for p in poles if p.kind == kind], False))
        return out
    out: list[list[_Pole]] = []
    for p in sorted(poles, key=lambda p: p.where):
        if out and p.where - out[-1][-1].where < _CLUSTER_GAP:
            out[-1].append(p)
        else:
            out.append([p])
    return out


def _cluster_residue(spec, cluster, all_poles, log_x):
    """Sum of residues of kernel * x**s inside a circle around ``cluster``."""
    left, right = cluster[0].where, cluster[-1].where
    centre = 0.5 * (left + right)
    inner = 0.5 * (right - left)
    members = {id(p) for p in cluster}
    others = [abs(p.where - centre) for p in all_poles if id(p) not in members]
    outer = min(others) if others else inner + 2.0
    # x**s varies like exp(|log x| * r) around the circle; keep r small
    growth = max(abs(log_x), 1.0)
    radius = inner + min(0.4 * (outer - inner), max(0.02, 1.5 / growth))
    ratio = max(inner / radius, radius / outer, 1e-3)
    npts = max(
        math.ceil(math.log(1e-19) / math.log(ratio)),
        math.ceil(math.e * growth * radius) + 30,
        16,
    )
    npts = int(min(2048, npts))
    npts += npts % 2
    theta = 2 * np.pi * (np.arange(npts) + 0.5) / npts
    z = radius * np.exp(1j * theta)
    vals = _kernel(spec, centre + z, log_x) * z
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("non-finite kernel value on residue contour")
    return float(np.mean(vals).real), float(np.max(np.abs(vals)))


def _line_integral(spec, c, log_x, dist, scale_hint):
    """(1/2 pi i) * integral of kernel * x**s over Re(s) = c."""
    dd = min(dist, 1.0)
    h = min(0.2, 2 * np.pi * dd / (40.0 + dd * abs(log_x)))

    def f(t):
        return _kernel(spec, c + 1j * t, log_x).real

    # find the truncation point on the coarse grid
    chunk = 8.0
    t_end = 0.0
    peak = abs(f(np.array([0.0]))[0])
    while True:
        t = np.arange(t_end + h, t_end + chunk + h / 2, h)
        vals = np.abs(f(t))
        if not np.all(np.isfinite(vals)):
            raise FloatingPointError("non-finite kernel value on integration line")
        peak = max(peak, float(vals.max()))
        t_end = float(t[-1])
        if vals.max() <= 1e-18 * peak or t_end > 4000:
            break

    def trapezoid(step):
        t = np.arange(0.0, t_end + step / 2, step)
        v = f(t)
        return step * (np.sum(v) - 0.5 * v[0]) / np.pi

    coarse = trapezoid(h)
    for _ in range(8):
        h *= 0.5
        fine = trapezoid(h)
        err = abs(fine - coarse)
        coarse = fine
        if err <= 1e-15 * max(abs(fine), scale_hint, peak * 1e-3):
            break
    return coarse, err, peak


def _choose_abscissa(spec, cands, poles, log_x, decaying):
    """Pick Re(s) for the line integral.

    Every term of the final sum (the line integral and each residue moved
    across) limits the attainable relative accuracy through its magnitude.
    Score each candidate by the largest of those magnitudes, then prefer the
    candidate that moves the fewest poles.
    """
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        line = np.maximum(
            _log_phi(spec, cands).real, _log_phi(spec, cands + 0.5j).real
        ) + cands * log_x
    line[~np.isfinite(line)] = np.inf
    if not poles:
        return float(cands[int(np.argmin(line))])

    where = np.array([p.where for p in poles])
    order = np.array([p.order for p in poles])
    probe = 0.05
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        size = (
            _log_phi(spec, where + 1j * probe).real
            + order * math.log(probe)
            + where * log_x
        )
    size[~np.isfinite(size)] = np.inf
    if decaying:
        moved = where[None, :] < cands[:, None]
    else:
        right = np.array([p.kind == "R" for p in poles])
        moved = np.where(
            right[None, :], where[None, :] < cands[:, None], where[None, :] > cands[:, None]
        )
    worst = np.where(moved, size[None, :], -np.inf).max(axis=1)
    cost = np.maximum(line, worst)
    crossings = (moved * order[None, :]).sum(axis=1)
    ok = cost <= cost.min() + 2.0
    best = min(np.flatnonzero(ok), key=lambda i: (crossings[i], line[i]))
    return float(cands[best])


def _evaluate(spec: MeijerGSpec, x: float, decaying: bool):
    if spec.shape not in SUPPORTED_SHAPES:
        raise UnsupportedMeijerG(f"Meijer-G shape {spec.shape} is not supported")
    if not (x > 0 and math.isfinite(x)):
        raise ValueError(f"Meijer-G argument must be positive and finite, got {x!r}")
    log_x = math.log(x)
    params = spec.a_params + spec.b_params
    span = max(abs(v) for v in params) if params else 0.0
    hi = span + 42.0
    order_gap = max(spec.q - spec.p, 1)
    root = x ** (1.0 / order_gap)
    # beyond this the exponentially decaying part underflows in double
    if order_gap * root - (spec.p + spec.q) * (span + 1.0) * abs(log_x) > 760.0:
        if decaying:
            return 0.0, 0.0
        poles = [p for p in _poles(spec, -span - 30.0, hi + 2.0) if p.kind == "L"]
        if not any(p.where < -span - 25.0 for p in poles):
            total = sum(
                _cluster_residue(spec, cl, poles, log_x)[0] for cl in _clusters(poles, False)
            )
            return total, 1e-15 * abs(total)
    lo = -span - 3.0 * root - 25.0
    # the pole window grows with |params| and x; cap it to keep memory bounded
    if lo < -5e3:
        raise ValueError(f"Meijer-G argument {x!r} or parameters too large for the contour method")
    poles = _poles(spec, lo - 2.0, hi + 2.0)

    if not decaying and any(p.kind == "RL" for p in poles):
        raise ValueError(
            "left and right pole families coincide; no separating contour exists"
        )
    if decaying and any(p.kind in ("L", "RL") and p.where < lo + 1.0 for p in poles):
        raise ValueError("left pole family is not finite; decaying part undefined")

    # candidate abscissae: gap midpoints plus grids beyond the outermost poles
    where = sorted(p.where for p in poles)
    cands = []
    if where:
        cands.extend(np.arange(where[0] - 0.5, lo, -0.5))
        for u, v in zip(where, where[1:]):
            if v - u > _CLUSTER_GAP:
                cands.append(0.5 * (u + v))
                if v - u > 1.0:
                    cands.extend(np.arange(u + 0.5, v - 0.49, 0.5))
        cands.extend(np.arange(where[-1] + 0.5, hi, 0.5))
    else:
        cands.extend(np.arange(lo, hi, 0.5))
    c = _choose_abscissa(spec, np.asarray(cands, dtype=float), poles, log_x, decaying)
    dist = min((abs(c - w) for w in where), default=1.0)

    total = 0.0
    magnitude = 0.0
    for cluster in _clusters(poles, split_kinds=not decaying):
        centre = 0.5 * (cluster[0].where + cluster[-1].where)
        kind = cluster[0].kind
        if decaying:
            sign = -1.0 if centre < c else 0.0
        elif kind == "R":
            sign = -1.0 if centre < c else 0.0
        else:
            sign = 1.0 if centre > c else 0.0
        if sign == 0.0:
            continue
        res, mag = _cluster_residue(spec, cluster, poles, log_x)
        total += sign * res
        magnitude = max(magnitude, mag)

    line, err, peak = _line_integral(spec, c, log_x, dist, abs(total))
    value = total + line
    return value, err + 1e-15 * max(magnitude, peak)


def meijer_g(spec: MeijerGSpec, x: float) -> float:
    """Meijer G-function G^{m,n}_{p,q}(x | a; b) for real x > 0.

    The Mellin-Barnes integral is taken along a vertical line Re(s) = c,
    with c placed where the kernel's magnitude on the real axis is smallest
    (the real saddle, which removes cancellation along the line).  Poles that
    end up on the wrong side of that line are accounted for by contour
    integrals around clusters of nearby poles, so coincident or
    near-coincident poles (integer parameter differences, a == b, ...) need
    no special treatment.

    Raises
    ------
    UnsupportedMeijerG
        For shapes outside ``SUPPORTED_SHAPES``.
    ValueError
        If ``x <= 0`` or the left and right pole families collide.
    """
    return float(_evaluate(spec, float(x), decaying=False)[0])


def meijer_g_decaying(spec: MeijerGSpec, x: float) -> float:
    """G minus the residues at its (finitely many) left-family poles.

    For the families used here that difference is the part of G that vanishes
    as x -> inf (exponentially, since q > p).  Tails, power constraints and
    capacities at large arguments are computed from it directly, avoiding
    the cancellation ``1 - (1 - tiny)``.
    """
    return float(_evaluate(spec, float(x), decaying=True)[0])


def meijer_g_with_error(spec: MeijerGSpec, x: float, decaying: bool = False):
    """(value, absolute error estimate) pair; see :func:`meijer_g`."""
    value, err = _evaluate(spec, float(x), decaying=decaying)
    return float(value), float(err)
