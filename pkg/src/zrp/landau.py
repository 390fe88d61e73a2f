"""Landau-level route for the crossed-field denominator.

For ``Im s < 0`` the field integrand expands over Landau levels,

    e^{iEs} e^{i Phi(s)} / sin s
        = 2i sum_j L_j(2 F^2 s^2) exp(i(E - 2j - 1 - F^2) s - F^2 s^2),

with L_j the Laguerre polynomials. Each level integrates to a
field-broadened band,

    band_j(E) = (2i / F) K_j(b_j),   b_j = (E - 2j - 1 - F^2) / F,
    K_j(b)    = int_0^inf L_j(2t^2) exp(i b t - t^2) dt,

which is entire in ``E``. Levels far above ``Re E`` are not expanded: with
``M`` levels split off,

    D = ln(|E_B|/2) - psi((1 - E)/2 + M) + sum_{j<M} band_j + R_M,

where ``R_M`` is the proper-time integral of the unexpanded levels
``j >= M`` (and of the matching ``-1/sin s`` terms). That integrand decays
like ``exp(-(2M + 1 - Re E) Im(-s))``, so ``R_M`` is computed on the ray
``s = u (1 - i kappa)`` with no exponential growth, for any field strength.
"""

import functools
import math

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import gammaln

from .errors import AccuracyError
from .quadrature import integrate_path
from .specfun import digamma

_KAPPA = 0.25
# |w| = |exp(-2is)| above which the ray integrand is formed as full minus expanded part
_W_SWITCH = 0.25
_MIN_GAP = 2.0
_ASYMPTOTIC_REL = 1e-17
_EXP_LIMIT = 700.0


def level_split(e_tilde, kappa=_KAPPA):
    """Number ``M`` of Landau levels expanded into bands at energy `e_tilde`."""
    e = complex(e_tilde)
    gap = max(_MIN_GAP, 4.0 * abs(e.imag) / kappa)
    return max(0, math.ceil((e.real + gap - 1.0) / 2.0))


def laguerre_table(n, x, scale=1.0):
    """Rows ``scale * L_j(x)`` and ``L_j(x) - 1`` for ``j < n`` and a flat array `x`.

    A `scale` such as ``exp(-x/2)`` keeps the first table finite where
    the bare polynomials would overflow.
    """
    x = np.asarray(x, dtype=complex)
    lag = np.empty((max(n, 1),) + x.shape, dtype=complex)
    lm1 = np.empty_like(lag)
    lag[0] = scale
    lm1[0] = 0.0
    if n > 1:
        lag[1] = scale * (1.0 - x)
        lm1[1] = -x
    for j in range(1, n - 1):
        # (j+1) L_{j+1} = (2j+1-x) L_j - j L_{j-1}; same for L - 1 with the constant absorbed
        lag[j + 1] = ((2 * j + 1 - x) * lag[j] - j * lag[j - 1]) / (j + 1)
        lm1[j + 1] = ((2 * j + 1 - x) * lm1[j] - j * lm1[j - 1] - x) / (j + 1)
    return lag[:n], lm1[:n]


@functools.lru_cache(maxsize=256)
def _gaussian_coeffs(j):
    """Coefficients ``d_p`` of ``L_j(2t^2) e^{-t^2} = sum_p d_p t^{2p}`` (p < j + 60).

    ``d_p = (-1)^p sum_k C(j, k) 2^k / (k! (p - k)!)``: every term has the
    same sign, so there is no cancellation; past float factorial range the
    sum is formed in log space.
    """
    n_p = j + 60
    if n_p <= 160:
        c = np.array([math.comb(j, k) * (-2.0) ** k / math.factorial(k) for k in range(j + 1)])
        g = np.array([(-1.0) ** q / math.factorial(q) for q in range(n_p)])
        return np.convolve(c, g)[:n_p]
    p = np.arange(n_p)[:, None]
    k = np.arange(j + 1)[None, :]
    kk = np.minimum(k, p)
    log_terms = gammaln(j + 1) - gammaln(kk + 1) - gammaln(j - kk + 1) + kk * math.log(2.0)
    log_terms = log_terms - gammaln(kk + 1) - gammaln(p - kk + 1)
    log_terms = np.where(k <= p, log_terms, -np.inf)
    top = np.max(log_terms, axis=1)
    mag = np.exp(top) * np.sum(np.exp(log_terms - top[:, None]), axis=1)
    return np.where(np.arange(n_p) % 2 == 0, 1.0, -1.0) * mag


def _band_asymptotic(j, b):
    """``K_j(b) - i/b`` from the large-``|b|`` expansion, or None if it does not converge."""
    d = _gaussian_coeffs(j)
    inv = 1.0 / (-1j * b)
    total = 0j
    prev = math.inf
    fact = 1.0
    power = inv
    converged = False
    for p in range(1, d.size):
        fact *= (2 * p - 1) * (2 * p)
        power *= inv * inv
        term = d[p] * fact * power
        mag = abs(term)
        if not math.isfinite(mag):
            break
        if mag > prev and mag > 1e-300:
            break
        total += term
        prev = mag if mag > 0 else prev
        if mag < _ASYMPTOTIC_REL * max(abs(total), abs(1.0 / b)):
            converged = True
            break
    if not converged:
        return None
    if b.imag < 0:
        # saddle at t* = ib/2 lies to the right of the origin and is crossed
        t_star = 0.5j * b
        if (t_star * t_star).real > _EXP_LIMIT:
            return complex(np.inf, np.inf)
        nodes, weights = hermgauss(j + 1)
        with np.errstate(over="ignore", invalid="ignore"):
            lag, _ = laguerre_table(j + 1, 2.0 * (t_star + nodes) ** 2)
            total += np.exp(t_star * t_star) * np.sum(weights * lag[j])
    return complex(total)


def _band_quadrature(j, b, rel_tol, abs_tol, max_subdivisions):
    """``K_j(b)`` by integrating on a path where ``exp(ibt - t^2)`` does not grow."""
    t_star = 0.5j * b
    scale = 1.0 / max(abs(b), 1.0)
    reach = 10.0 + math.sqrt(2.0 * j)
    near = [scale * c for c in (0.5, 2.0, 8.0) if scale * c < 1.0]

    def integrand(t):
        lag, _ = laguerre_table(j + 1, 2.0 * t * t)
        return lag[j] * np.exp(1j * b * t - t * t)

    if t_star.real > 0:
        if (t_star * t_star).real > _EXP_LIMIT:
            return complex(np.inf, np.inf), math.inf, 0
        knots = [0j] + [t_star * (c / abs(t_star)) for c in near if c < abs(t_star)] + [t_star]
        knots += [t_star + x for x in (0.5, 2.0, 4.0, reach)]
    else:
        phi = math.atan2(t_star.imag, t_star.real) if t_star != 0 else math.pi
        theta = math.copysign(min(math.pi - abs(phi), math.pi / 8), phi)
        ray = complex(math.cos(theta), math.sin(theta))
        knots = [0j] + [ray * c for c in near] + [ray * x for x in (1.0, 2.0, 4.0, reach)]
    value, err, evals = integrate_path(
        integrand,
        np.array(knots),
        rel_tol=rel_tol,
        abs_tol=abs_tol,
        max_subdivisions=max_subdivisions,
    )
    return complex(value), err, evals


def band(j, e_tilde, f_tilde, rel_tol=1e-12, abs_tol=1e-14, max_subdivisions=2000):
    """Contribution of Landau level `j` to the field integral.

    Returns ``(value, abs_err, evals)``. In the weak-field limit the value tends
    to the pole term ``-2 / (E - 2j - 1)``.
    """
    e = complex(e_tilde)
    f = float(f_tilde)
    beta = e - (2 * j + 1) - f * f
    b = beta / f
    if abs(b) > 8.0:
        rest = _band_asymptotic(j, b)
        if rest is not None:
            return -2.0 / beta + (2j / f) * rest, 4 * _ASYMPTOTIC_REL * abs(2.0 / beta), 0
    k_val, err, evals = _band_quadrature(j, b, rel_tol, 0.5 * abs_tol * f, max_subdivisions)
    return (2j / f) * k_val, 2.0 * err / f, evals


def _remainder_integrand(e, f, m):
    f2 = f * f
    alpha_m = e - (2 * m + 1)
    def g(s):
        s = np.asarray(s, dtype=complex)
        w = np.exp(-2j * s)
        out = np.zeros(s.shape, dtype=complex)
        x = 2.0 * f2 * s * s
        q = -f2 * s * s - 1j * f2 * s
        near = np.abs(w) > _W_SWITCH
        if near.any():
            sn, xn, qn = s[near], x[near], q[near]
            from .denominator import phase_phi

            with np.errstate(over="ignore", invalid="ignore"):
                full = np.exp(1j * e * sn) * np.expm1(1j * phase_phi(sn, f)) / np.sin(sn)
            part = np.zeros(sn.shape, dtype=complex)
            if m > 0:
                lag, lm1 = laguerre_table(m, xn)
                alphas = e - (2.0 * np.arange(m) + 1.0)
                phases = np.exp(1j * alphas[:, None] * sn[None, :])
                part = 2j * np.sum(phases * (lag * np.expm1(qn)[None, :] + lm1), axis=0)
            out[near] = full - part
        far = ~near
        if far.any():
            sf, xf, qf, wf = s[far], x[far], q[far], w[far]
            # e^q sum_{i>=0} L_{m+i}(x) w^i - 1/(1 - w); where e^q underflows
            # only -1/(1 - w) is left
            bracket = -1.0 / (1.0 - wf)
            live = qf.real > -_EXP_LIMIT
            if live.any():
                # the Laguerre terms decay more slowly as |x| grows
                n_terms = 31 + int(4.0 * math.sqrt(np.max(np.abs(xf[live]))))
                small = live & (np.abs(qf) < 1.0)
                big = live & ~small
                if small.any():
                    # weak Gaussian: expm1(q) S_L + sum (L - 1) w^i, free of cancellation
                    p = wf[small][None, :] ** np.arange(n_terms)[:, None]
                    lag, lm1 = laguerre_table(m + n_terms, xf[small])
                    bracket[small] = np.expm1(qf[small]) * np.sum(lag[m:] * p, axis=0) + np.sum(lm1[m:] * p, axis=0)
                if big.any():
                    p = wf[big][None, :] ** np.arange(n_terms)[:, None]
                    with np.errstate(over="ignore", invalid="ignore"):
                        # the unscaled L - 1 table is unused here and may overflow
                        lag, _ = laguerre_table(m + n_terms, xf[big], scale=np.exp(qf[big]))
                    bracket[big] += np.sum(lag[m:] * p, axis=0)
            out[far] = 2j * np.exp(1j * alpha_m * sf) * bracket
        return out

    return g


def remainder(e_tilde, f_tilde, m, rel_tol=1e-12, abs_tol=1e-14, max_subdivisions=2000, kappa=_KAPPA):
    """Proper-time integral of the Landau levels ``j >= m`` on a descending ray."""
    e = complex(e_tilde)
    alpha_m = e - (2 * m + 1)
    ray = complex(1.0, -kappa)
    rate = -(alpha_m * ray * 1j).real
    if rate <= 0:
        raise ValueError("remainder ray does not decay; increase m")
    u_max = 42.0 / rate
    g = _remainder_integrand(e, float(f_tilde), m)
    u_switch = math.log(1.0 / _W_SWITCH) / (2.0 * kappa)
    us = sorted({0.0, *[u for u in (0.5, 1.0, u_switch) if u < u_max], *np.arange(2.0, u_max, 2.0), u_max})
    knots = np.array(us) * ray
    value, err, evals = integrate_path(g, knots, rel_tol=rel_tol, abs_tol=abs_tol, max_subdivisions=max_subdivisions)
    return complex(value), err, evals


def d_field_landau(e_tilde, eb_tilde, f_tilde, opts):
    """Crossed-field denominator from the Landau-band expansion."""
    from .denominator import DenomResult

    e = complex(e_tilde)
    f = float(f_tilde)
    m = level_split(e)
    value = math.log(-eb_tilde / 2.0) - digamma((1.0 - e) / 2.0 + m)
    err = 0.0
    evals = 0
    tol = dict(rel_tol=min(opts.rel_tol, 1e-11), abs_tol=0.1 * opts.abs_tol, max_subdivisions=opts.max_subdivisions)
    for j in range(m):
        v, ej, nj = band(j, e, f, **tol)
        value += v
        err += ej
        evals += nj
    r, er, nr = remainder(e, f, m, **tol)
    value += r
    err += er
    evals += nr
    if not np.isfinite(value):
        raise AccuracyError("Landau route overflowed at this energy", complex(value), math.inf)
    return DenomResult(complex(value), float(err + 1e-15 * abs(value)), int(evals))
