"""Renormalized Green's-function denominator D(E) in scaled units.

All values are returned without the ``m*/2pi`` prefactor; it never moves a
zero. Three regimes:

* free particle, ``ln(E_B / E)`` with the retarded branch;
* magnetic field only, ``ln(|E_B|/2) - psi((1 - E)/2)``;
* crossed fields, the zero-field form plus the proper-time integral

      J(E) = int_0^inf e^{iEs} (e^{i Phi(s)} - 1) / sin s ds,
      Phi(s) = F^2 s (s cot s - 1),

  taken on a path just below the real axis and continued to Im E < 0.

For the crossed-field case two independent evaluation routes exist. The
contour route integrates J on a descent-then-horizontal path and closes the
remainder of the ``-1/sin s`` part analytically. The Landau route (see
:mod:`zrp.landau`) expands the integrand over Landau levels; it stays
accurate for weak fields and wider resonances, where the horizontal contour
would have to integrate an exponentially growing integrand.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AccuracyError, DomainError, FieldTooWeakError, LandauPoleError, PoleError
from .quadrature import integrate_path
from .specfun import digamma

_LANDAU_POLE_RADIUS = 1e-12
_TAIL_POLE_RADIUS = 1e-10
_TAYLOR_RADIUS = 0.1
# growth exponent and path length the contour route tolerates before handing over
_CONTOUR_GROWTH_LIMIT = 10.0
_CONTOUR_LENGTH_LIMIT = 1000.0
# supported parameter box; beyond it work grows without bound (levels, tail terms)
E_LIMIT = 1000.0
F_LIMIT = 100.0


@dataclass(frozen=True)
class QuadOptions:
    """Tolerances and contour settings for crossed-field evaluation.

    ``method`` is ``"auto"``, ``"contour"`` or ``"landau"``. ``depth`` and
    ``descent_angle`` shape the contour route's path; ``truncation_scale``
    stretches its truncation point (robustness checks use 1.5).
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_subdivisions: int = 2000
    tail_tol: float = 1e-13
    depth: float = 1.0
    descent_angle: float = -math.pi / 4
    truncation_cap: float = 1e4
    truncation_scale: float = 1.0
    method: str = "auto"

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "tail_tol", "depth", "truncation_cap", "truncation_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if not -math.pi / 2 < self.descent_angle < 0:
            raise ValueError("descent_angle must lie in (-pi/2, 0)")
        if self.method not in ("auto", "contour", "landau"):
            raise ValueError(f"unknown method {self.method!r}")


DEFAULT_OPTIONS = QuadOptions()


@dataclass(frozen=True)
class Contour:
    depth: float
    descent_angle: float
    truncation: float
    tail_order: int
    segment_breaks: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not self.depth > 0:
            raise ValueError("depth must be positive")
        if not self.truncation > self.corner.real:
            raise ValueError("truncation must lie beyond the end of the descent segment")
        if self.tail_order < 1:
            raise ValueError("tail_order must be >= 1")
        b = np.asarray(self.segment_breaks, dtype=float)
        if b.size == 0 or np.any(np.diff(b) <= 0) or b[-1] != self.truncation:
            raise ValueError("segment_breaks must increase strictly and end at truncation")

    @property
    def corner(self):
        """End of the descent segment, where the horizontal part starts."""
        return complex(self.depth / math.tan(abs(self.descent_angle)), -self.depth)

    @property
    def end(self):
        return complex(self.truncation, -self.depth)

    def knots(self):
        """Path vertices: origin, descent corner, then every segment break."""
        pts = [0j, self.corner]
        pts += [complex(x, -self.depth) for x in self.segment_breaks if x > self.corner.real]
        return np.array(pts)


@dataclass(frozen=True)
class DenomResult:
    value: complex
    abs_err: float
    evals: int


def d_free(energy, binding):
    """Free-particle denominator ``ln(E_B / (E + i0))``.

    The branch is the retarded one: for real positive `energy` the
    imaginary part is ``+pi``, for real negative `energy` it is 0.
    """
    if not binding < 0:
        raise DomainError("binding energy must be negative (attractive impurity)")
    e = complex(energy)
    if e == 0:
        raise PoleError("free denominator is singular at E = 0")
    # log has its cut on the negative axis and +0j picks the upper side there
    return math.log(-binding) + 1j * math.pi - np.log(complex(e.real, e.imag))


def _check_landau_pole(e):
    e = np.atleast_1d(np.asarray(e, dtype=complex))
    n = np.round((e.real - 1.0) / 2.0)
    hit = (n >= 0) & (np.abs(e - (2 * n + 1)) < _LANDAU_POLE_RADIUS)
    if hit.any():
        idx = np.flatnonzero(hit)[0]
        raise LandauPoleError(int(n[idx]), complex(e[idx]))


def d_zero_field(e_tilde, eb_tilde):
    """Magnetic-field-only denominator ``ln(|E_B|/2) - psi((1 - E)/2)``.

    Accepts scalar or array `e_tilde`. Raises
    :class:`~zrp.errors.LandauPoleError` on a Landau level ``E = 2n + 1``.
    """
    if not eb_tilde < 0:
        raise DomainError("eb_tilde must be negative")
    _check_landau_pole(e_tilde)
    e = np.asarray(e_tilde, dtype=complex)
    out = math.log(-eb_tilde / 2.0) - digamma((1.0 - e) / 2.0)
    return complex(out) if np.ndim(out) == 0 else out


def _s_cot_s_minus_one(s):
    s = np.asarray(s, dtype=complex)
    small = np.abs(s) < _TAYLOR_RADIUS
    out = np.empty_like(s)
    if small.any():
        s2 = s[small] ** 2
        out[small] = -s2 * (1 / 3 + s2 * (1 / 45 + s2 * (2 / 945 + s2 * (1 / 4725 + s2 * 2 / 93555))))
    big = ~small
    if big.any():
        sb = s[big]
        sign = np.where(sb.imag <= 0, 1.0, -1.0)
        w = np.exp(-2j * sign * sb)
        out[big] = sb * (1j * sign * (1 + w) / (1 - w)) - 1.0
    return out


def phase_phi(s, f_tilde):
    """Field phase ``Phi(s) = F^2 s (s cot s - 1)``.

    Uses the Taylor form of ``s cot s - 1`` inside ``|s| < 0.1`` and an
    overflow-free exponential form of ``cot`` outside.
    """
    s_arr = np.asarray(s, dtype=complex)
    on_axis = (s_arr.imag == 0) & (s_arr.real != 0)
    if on_axis.any():
        r = s_arr.real[on_axis] / math.pi
        if np.any(np.abs(r - np.round(r)) * math.pi < 1e-12):
            raise PoleError("Phi is singular at nonzero real multiples of pi")
    out = f_tilde**2 * s_arr * _s_cot_s_minus_one(s_arr)
    return complex(out) if np.ndim(out) == 0 else out


def tail_order(depth, tail_tol, e_tilde=0j, truncation=0.0):
    """Number of analytic tail terms for the contour route.

    The dropped term ``k`` has magnitude ``exp((Re E - 2k - 1) depth -
    Im E * U)``; the smallest ``K`` pushing that below `tail_tol` is
    returned. With ``e_tilde = 0`` this reduces to
    ``exp(-(2K + 1) depth) < tail_tol``.
    """
    e = complex(e_tilde)
    shift = max(e.real, 0.0) * depth + max(-e.imag, 0.0) * truncation
    k = math.ceil((math.log(1.0 / tail_tol) + shift) / (2.0 * depth) - 0.5)
    k = max(k, 1)
    while math.exp(-(2 * k + 1) * depth + shift) >= tail_tol:
        k += 1
    return k


def _envelope_log(u, e, f, depth):
    """log of an upper bound on the discarded integrand beyond ``u``.

    On ``Im s = -depth`` one has ``|exp(i Phi)| <= exp(-F^2 tanh(depth)
    (u^2 - depth^2) + 2 F^2 u depth / sinh(2 depth))``.
    """
    q = math.tanh(depth)
    lin = 2.0 * depth / math.sinh(2.0 * depth)
    gauss = -f * f * (q * (u * u - depth * depth) - lin * u)
    growth = max(-e.imag, 0.0) * u + abs(e.real) * depth
    inv_sin = math.log(2.0 / (1.0 - math.exp(-2.0 * depth))) - depth
    width = -math.log(max(2.0 * f * f * q * u, 1e-300))
    return gauss + growth + inv_sin + min(width, 0.0) + max(width, 0.0)


def build_contour(e_tilde, f_tilde, opts=DEFAULT_OPTIONS, depth=None, descent_angle=None):
    """Descent-then-horizontal integration path for the contour route.

    The truncation point is the smallest ``U`` where the Gaussian envelope
    of the discarded integrand drops below ``opts.tail_tol``; it is then
    multiplied by ``opts.truncation_scale``. Break points sit at every
    multiple of pi.
    """
    if f_tilde == 0:
        raise DomainError("zero field: use d_zero_field")
    if not f_tilde > 0:
        raise DomainError("f_tilde must be positive")
    depth = opts.depth if depth is None else depth
    angle = opts.descent_angle if descent_angle is None else descent_angle
    e = complex(e_tilde)
    x0 = depth / math.tan(abs(angle))
    target = math.log(opts.tail_tol)

    lo = x0
    if _envelope_log(lo, e, f_tilde, depth) < target:
        u = lo
    else:
        hi = max(2 * x0, 1.0)
        while _envelope_log(hi, e, f_tilde, depth) >= target:
            hi *= 2
            if hi > 64 * opts.truncation_cap:
                raise FieldTooWeakError(hi, opts.truncation_cap)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if _envelope_log(mid, e, f_tilde, depth) >= target:
                lo = mid
            else:
                hi = mid
        u = hi
    u = max(u, x0 + math.pi) * opts.truncation_scale
    if u > opts.truncation_cap:
        raise FieldTooWeakError(u, opts.truncation_cap)

    first = math.floor(x0 / math.pi) + 1
    breaks = [k * math.pi for k in range(first, int(u / math.pi) + 1) if k * math.pi < u]
    if not breaks or breaks[0] > x0:
        breaks.insert(0, x0)
    breaks.append(u)
    k = tail_order(depth, opts.tail_tol, e, u)
    return Contour(depth, angle, u, k, tuple(breaks))


def tail_sum(e_tilde, s_end, k_terms):
    """Closed form of ``int_{s_end}^inf e^{iEs} (-1/sin s) ds``, first K terms.

    ``T = 2 sum_{k<K} exp(i(E - 2k - 1) s_end) / (E - 2k - 1)``, from
    ``1/sin s = 2i sum_k exp(-i(2k+1)s)`` for ``Im s < 0``.
    """
    s_end = complex(s_end)
    if not s_end.imag < 0:
        raise DomainError("s_end must lie below the real axis")
    if k_terms <= 0:
        return 0j
    e = complex(e_tilde)
    alpha = e - (2.0 * np.arange(k_terms) + 1.0)
    if np.any(np.abs(alpha) < _TAIL_POLE_RADIUS):
        k = int(np.argmin(np.abs(alpha)))
        raise PoleError(
            f"tail term k = {k} is singular at E = {2 * k + 1}; "
            "pair it with the digamma pole (d_field does this)"
        )
    return complex(np.sum(2.0 * np.exp(1j * alpha * s_end) / alpha))


def _paired_tail(e, s_end, k_terms):
    """``-psi((1-E)/2) + T(E)`` with each pole of psi cancelled against its tail term."""
    alpha = e - (2.0 * np.arange(k_terms) + 1.0)
    x = 1j * alpha * s_end
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(x == 0, 1.0, np.expm1(x) / np.where(x == 0, 1.0, x))
    # 2 (e^{i a S} - 1) / a  ==  2 i S expm1(x)/x
    paired = np.sum(2j * s_end * ratio)
    return -digamma((1.0 - e) / 2.0 + k_terms) + paired


def _contour_integrand(e, f):
    def g(s):
        phase = phase_phi(s, f)
        return np.exp(1j * e * s) * np.expm1(1j * phase) / np.sin(s)

    return g


def contour_growth(e_tilde, f_tilde, opts=DEFAULT_OPTIONS):
    """Log-magnitude by which the contour integrand exceeds O(1), or inf."""
    e = complex(e_tilde)
    try:
        c = build_contour(e, f_tilde, opts)
    except FieldTooWeakError:
        return math.inf
    return max(-e.imag, 0.0) * c.truncation + max(e.real - 1.0, 0.0) * c.depth


def _prefers_contour(e, f, opts):
    try:
        c = build_contour(e, f, opts)
    except FieldTooWeakError:
        return False
    growth = max(-e.imag, 0.0) * c.truncation + max(e.real - 1.0, 0.0) * c.depth
    return growth <= _CONTOUR_GROWTH_LIMIT and c.truncation <= _CONTOUR_LENGTH_LIMIT


def _d_field_contour(e, eb, f, opts, contour):
    c = contour if contour is not None else build_contour(e, f, opts)
    knots = c.knots()
    value, err, evals = integrate_path(
        _contour_integrand(e, f),
        knots,
        rel_tol=opts.rel_tol,
        abs_tol=opts.abs_tol,
        # long paths need a budget proportional to their segment count
        max_subdivisions=max(opts.max_subdivisions, 4 * knots.size),
    )
    s_end = c.end
    k = c.tail_order
    head = math.log(-eb / 2.0) + _paired_tail(e, s_end, k)
    alpha_k = e - (2 * k + 1)
    dropped = 2.0 * abs(np.exp(1j * alpha_k * s_end) / alpha_k) / (1.0 - math.exp(-2.0 * c.depth))
    cut = math.exp(_envelope_log(c.truncation, e, f, c.depth))
    return DenomResult(complex(head + value), float(err + dropped + cut), int(evals))


def d_field(e_tilde, eb_tilde, f_tilde, opts=DEFAULT_OPTIONS, contour=None):
    """Crossed-field denominator, analytically continued to Im E < 0.

    Parameters
    ----------
    e_tilde : complex
        Scaled energy ``2E/omega``.
    eb_tilde : float
        Scaled binding energy, negative.
    f_tilde : float
        Scaled electric field, positive.
    opts : QuadOptions
        Tolerances; ``opts.method`` selects the evaluation route. ``"auto"``
        uses the contour route while its integrand growth stays below
        ``e^10`` and its path is shorter than 1000, the Landau route
        otherwise or when the contour quadrature exhausts its budget.
    contour : Contour, optional
        Explicit path for the contour route (forces that route).

    Returns
    -------
    DenomResult
    """
    if not eb_tilde < 0:
        raise DomainError("eb_tilde must be negative")
    if f_tilde == 0:
        raise DomainError("zero field: use d_zero_field")
    if not f_tilde > 0:
        raise DomainError("f_tilde must be positive")
    e = complex(e_tilde)
    if not abs(e) <= E_LIMIT:
        raise DomainError(f"|e_tilde| must be finite and at most {E_LIMIT:g}")
    if f_tilde > F_LIMIT:
        raise DomainError(f"f_tilde must be at most {F_LIMIT:g}")

    method = opts.method
    if contour is not None:
        method = "contour"
    elif method == "auto":
        if _prefers_contour(e, f_tilde, opts):
            try:
                return _d_field_contour(e, eb_tilde, f_tilde, opts, None)
            except AccuracyError:
                # long, fast-oscillating paths can exhaust the budget; the Landau route has no such path
                pass
        method = "landau"
    if method == "contour":
        return _d_field_contour(e, eb_tilde, f_tilde, opts, contour)

    from .landau import d_field_landau

    return d_field_landau(e, eb_tilde, f_tilde, opts)
