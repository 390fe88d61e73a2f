"""Complex digamma function and the Landau partial-fraction series.

The zero-field denominator is ``ln(|E_B|/2) - psi((1 - E)/2)``; the same
quantity can be written as ``gamma + ln(2|E_B|) + S(E)`` with the
partial-fraction series

    S(E) = 2 E sum_{n>=0} 1 / ((2n + 1)(2n + 1 - E)).

Both are implemented here independently so that each can check the other.
"""

from dataclasses import dataclass

import numpy as np

from .errors import PoleError

EULER_GAMMA = 0.57721566490153286

# psi(w) ~ ln w - 1/(2w) - sum_k B_2k / (2k w^2k), k = 1..7
_ASYMPTOTIC_COEFFS = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)
_RECURRENCE_THRESHOLD = 10.0
_POLE_RADIUS = 1e-12


def _cot_pi(z):
    # overflow-free cot(pi z) for any imaginary part
    z = np.asarray(z, dtype=complex)
    sign = np.where(z.imag <= 0, 1.0, -1.0)
    # |w| <= 1 on both half-planes
    w = np.exp(-2j * np.pi * sign * z)
    return 1j * sign * (1 + w) / (1 - w)


def _digamma_right(z):
    """psi(z) for Re z >= 0, by upward recurrence then the asymptotic series."""
    shift = np.zeros(z.shape, dtype=complex)
    w = z.copy()
    while True:
        low = w.real < _RECURRENCE_THRESHOLD
        if not low.any():
            break
        shift[low] += 1.0 / w[low]
        w[low] += 1.0
    inv2 = 1.0 / (w * w)
    series = np.zeros(w.shape, dtype=complex)
    for c in reversed(_ASYMPTOTIC_COEFFS):
        series = (series + c) * inv2
    return np.log(w) - 0.5 / w - series - shift


def digamma(z):
    """Digamma function psi(z) on the complex plane.

    Parameters
    ----------
    z : complex or array_like of complex
        Argument; must stay away from the poles 0, -1, -2, ...

    Returns
    -------
    complex or ndarray
        ``psi(z)``, with the shape of `z`.

    Raises
    ------
    PoleError
        If any element of `z` is within 1e-12 of a non-positive integer.
    """
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=complex)).copy()
    nearest = np.round(z.real)
    at_pole = (nearest <= 0) & (np.abs(z - nearest) < _POLE_RADIUS)
    if at_pole.any():
        raise PoleError(f"digamma pole at z = {z[at_pole][0]!r}")

    out = np.empty_like(z)
    left = z.real < 0
    if (~left).any():
        out[~left] = _digamma_right(z[~left])
    if left.any():
        zl = z[left]
        # reflection: psi(z) = psi(1 - z) - pi cot(pi z)
        # cot(pi z) has period 1; reduce first to keep pi*z small
        out[left] = _digamma_right(1.0 - zl) - np.pi * _cot_pi(zl - np.round(zl.real))
    return out[0] if scalar else out


@dataclass(frozen=True)
class SeriesResult:
    value: complex
    terms_used: int
    truncation_bound: float


def _series_term_derivative(x, e, order):
    # d^m/dn^m of 2/(2n+1-E) - 2/(2n+1) evaluated at 2n+1 = x
    fact = float(np.prod(np.arange(1, order + 1))) if order else 1.0
    pref = 2.0 * (-1) ** order * fact * 2.0**order
    # (x - e)^-(m+1) - x^-(m+1) without cancellation for small e
    return pref * x ** (-order - 1.0) * np.expm1(-(order + 1) * np.log1p(-e / x))


# B_2p / (2p)!
_BERNOULLI_OVER_FACT = (
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
)


def landau_series(e_tilde, tol=1e-12):
    """Partial-fraction series ``2E sum 1/((2n+1)(2n+1-E))``.

    A direct partial sum over ``n < N`` followed by an Euler-Maclaurin
    evaluation of the remainder ``n >= N`` (closed-form integral and odd
    derivatives of the summand). `N` grows until the first omitted
    Euler-Maclaurin correction falls below `tol`.

    Parameters
    ----------
    e_tilde : complex
        Scaled energy.
    tol : float
        Target bound on the omitted remainder.

    Returns
    -------
    SeriesResult
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    e = complex(e_tilde)
    if e.real > 0:
        k = round((e.real - 1) / 2)
        if k >= 0 and abs(e - (2 * k + 1)) < 1e-10:
            raise PoleError(f"series pole at E = {2 * k + 1}")

    n_terms = max(32, int(2 * abs(e)) + 32)
    while True:
        x = 2.0 * n_terms + 1.0
        bound = abs(_BERNOULLI_OVER_FACT[-1] * _series_term_derivative(x, e, 11))
        if bound < tol or n_terms > 10**7:
            break
        n_terms *= 2

    odd = 2.0 * np.arange(n_terms) + 1.0
    partial = np.sum(2.0 * e / (odd * (odd - e)))

    # remainder sum_{n>=N} f(n):  int_N^inf f + f(N)/2 - sum_p B_2p/(2p)! f^(2p-1)(N)
    x = 2.0 * n_terms + 1.0
    integral = -np.log1p(-e / x)
    remainder = integral + 0.5 * (2.0 / (x - e) - 2.0 / x)
    for p, b in enumerate(_BERNOULLI_OVER_FACT[:-1], start=1):
        remainder -= b * _series_term_derivative(x, e, 2 * p - 1)
    return SeriesResult(complex(partial + remainder), n_terms, float(bound))
