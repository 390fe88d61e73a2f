"""Zeros of the denominator: Newton polishing, 2D fixed-width solves, grid seeding."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .denominator import DEFAULT_OPTIONS, d_field, d_zero_field
from .errors import (
    ConvergenceError,
    DegenerateError,
    DomainError,
    DomainExitError,
    ScanError,
    ZrpError,
)

LOGGER = logging.getLogger(__name__)

_MAX_BACKTRACKS = 8
_CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class SolveOptions:
    residual_tol: float = 1e-10
    step_tol: float = 1e-10
    max_iter: int = 50
    fd_step: float = 1e-6
    damping: float = 0.5

    def __post_init__(self):
        for name in ("residual_tol", "step_tol", "fd_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 < self.damping < 1:
            raise ValueError("damping must lie in (0, 1)")


DEFAULT_SOLVE = SolveOptions()


@dataclass(frozen=True)
class RootResult:
    """Outcome of a root polish.

    ``location`` is a complex number for :func:`newton_complex` and a pair
    ``(re_e, f_tilde)`` for :func:`solve_fixed_im`.
    """

    location: object
    residual: float
    iterations: int
    converged: bool


def _safe(f, z):
    try:
        v = complex(f(z))
    except ZrpError:
        return None
    return v if math.isfinite(v.real) and math.isfinite(v.imag) else None


def newton_complex(f, seed, opts=DEFAULT_SOLVE):
    """Damped Newton iteration for an analytic ``f: C -> C``.

    The derivative is the central difference ``(f(z+h) - f(z-h)) / 2h``
    with ``h = fd_step * max(1, |z|)``. A step is halved (at most 8 times)
    until ``|f|`` decreases.

    Raises
    ------
    DegenerateError
        If the derivative vanishes.
    ConvergenceError
        If the tolerances are not met within ``opts.max_iter`` iterations;
        ``result`` carries the best iterate.
    """
    z = complex(seed)
    fz = _safe(f, z)
    if fz is None:
        raise DomainError(f"function cannot be evaluated at the seed {z!r}")
    best = (abs(fz), z)
    step = math.inf
    for it in range(1, opts.max_iter + 1):
        h = opts.fd_step * max(1.0, abs(z))
        fp, fm = _safe(f, z + h), _safe(f, z - h)
        if fp is None or fm is None:
            raise DomainExitError("derivative stencil left the domain", z, abs(fz))
        deriv = (fp - fm) / (2.0 * h)
        if abs(deriv) < 1e-300:
            raise DegenerateError("vanishing derivative", z, abs(fz))
        delta = -fz / deriv
        for _ in range(_MAX_BACKTRACKS + 1):
            cand = z + delta
            fc = _safe(f, cand)
            if fc is not None and abs(fc) < abs(fz):
                break
            delta *= opts.damping
        else:
            # no decrease: accept the shortest step if it is at least finite
            if fc is None:
                raise ConvergenceError("line search failed", best[1], best[0])
        step = abs(cand - z)
        z, fz = cand, fc
        if abs(fz) < best[0]:
            best = (abs(fz), z)
        if abs(fz) < opts.residual_tol and step < opts.step_tol:
            return RootResult(z, abs(fz), it, True)
    raise ConvergenceError(
        f"no convergence in {opts.max_iter} iterations (|f| = {best[0]:.3g})", best[1], best[0]
    )


def _fixed_im_residual(im_e, eb_tilde, quad):
    def g(x, y):
        if not y > 0:
            return None
        try:
            v = d_field(complex(x, im_e), eb_tilde, y, quad).value
        except ZrpError:
            return None
        return np.array([v.real, v.imag]) if math.isfinite(abs(v)) else None

    return g


def solve_fixed_im(im_e, eb_tilde, seed_re_e, seed_f, opts=DEFAULT_SOLVE, quad=DEFAULT_OPTIONS):
    """Solve ``D(x + i im_e; eb_tilde, y) = 0`` for the real pair ``(x, y)``.

    Two-variable Newton with a forward-difference Jacobian and the same
    damping and convergence rules as :func:`newton_complex`.

    Returns
    -------
    RootResult
        ``location`` is ``(re_e, f_tilde)``.

    Raises
    ------
    DomainExitError
        If every damped step leaves ``f_tilde > 0`` or the denominator
        cannot be evaluated.
    DegenerateError
        If the Jacobian condition number exceeds 1e12.
    ConvergenceError
        If the iteration budget runs out.
    """
    if not im_e < 0:
        raise DomainError("im_e must be negative")
    if not eb_tilde < 0:
        raise DomainError("eb_tilde must be negative")
    if not seed_f > 0:
        raise DomainError("seed_f must be positive")
    g = _fixed_im_residual(im_e, eb_tilde, quad)
    p = np.array([float(seed_re_e), float(seed_f)])
    r = g(*p)
    if r is None:
        raise DomainExitError("denominator cannot be evaluated at the seed", tuple(p), None)
    norm = float(np.hypot(*r))
    best = (norm, tuple(p))
    for it in range(1, opts.max_iter + 1):
        jac = np.empty((2, 2))
        for k in range(2):
            h = opts.fd_step * max(1.0, abs(p[k]))
            q = p.copy()
            q[k] += h
            if k == 1 and q[1] <= 0:
                q[1] = p[1] - h
                h = -h
            rq = g(*q)
            if rq is None:
                raise DomainExitError("Jacobian stencil left the domain", tuple(p), norm)
            jac[:, k] = (rq - r) / h
        if not np.all(np.isfinite(jac)) or np.linalg.cond(jac) > _CONDITION_LIMIT:
            raise DegenerateError("singular Jacobian", tuple(p), norm)
        delta = -np.linalg.solve(jac, r)
        accepted = None
        for _ in range(_MAX_BACKTRACKS + 1):
            cand = p + delta
            rc = g(*cand)
            if rc is not None and np.hypot(*rc) < norm:
                accepted = (cand, rc)
                break
            delta = delta * opts.damping
        if accepted is None:
            rc = g(*cand)
            if rc is None:
                raise DomainExitError("iterate left the domain", best[1], best[0])
            accepted = (cand, rc)
        step = float(np.max(np.abs(accepted[0] - p)))
        p, r = accepted
        norm = float(np.hypot(*r))
        if norm < best[0]:
            best = (norm, tuple(p))
        if norm < opts.residual_tol and step < opts.step_tol:
            return RootResult((float(p[0]), float(p[1])), norm, it, True)
    raise ConvergenceError(
        f"no convergence in {opts.max_iter} iterations (|D| = {best[0]:.3g})", best[1], best[0]
    )


@dataclass(frozen=True)
class ScanMinimum:
    """Local minimum of ``|D|`` on a scan grid: a seed for polishing."""

    re_e: float
    y: float
    magnitude: float


@dataclass(frozen=True)
class ScanGrid:
    """``|D|`` sampled on a rectangular grid; failed cells hold NaN."""

    xs: np.ndarray
    ys: np.ndarray
    magnitude: np.ndarray
    failed: int


def _scan_value(eb_tilde, mode, im_e, f_tilde, quad):
    if mode == "field":
        if im_e is None:
            raise DomainError("mode 'field' needs im_e")

        def value(x, y):
            return d_field(complex(x, im_e), eb_tilde, y, quad).value

    elif mode == "im":
        if f_tilde is None:
            raise DomainError("mode 'im' needs f_tilde")

        def value(x, y):
            if f_tilde == 0:
                return d_zero_field(complex(x, y), eb_tilde)
            return d_field(complex(x, y), eb_tilde, f_tilde, quad).value

    else:
        raise DomainError(f"unknown scan mode {mode!r}")
    return value


def evaluate_grid(
    re_range,
    y_range,
    eb_tilde,
    n_cells=(64, 64),
    mode="field",
    im_e=None,
    f_tilde=None,
    quad=DEFAULT_OPTIONS,
    workers=1,
):
    """Sample ``|D|`` on the scan grid; arguments as for :func:`grid_scan`.

    Raises
    ------
    ScanError
        If more than half of the cells fail to evaluate.
    """
    nx, ny = (int(n) for n in n_cells)
    if nx < 8 or ny < 8:
        raise DomainError("n_cells must be >= 8 per axis")
    if not (re_range[1] > re_range[0] and y_range[1] > y_range[0]):
        raise DomainError("scan ranges must be non-degenerate")
    value = _scan_value(eb_tilde, mode, im_e, f_tilde, quad)
    xs = np.linspace(*re_range, nx)
    ys = np.linspace(*y_range, ny)

    def cell(idx):
        i, j = divmod(idx, ny)
        try:
            v = abs(value(xs[i], ys[j]))
        except ZrpError as exc:
            LOGGER.debug("scan cell (%g, %g) failed: %s", xs[i], ys[j], exc)
            return math.nan
        return v if math.isfinite(v) else math.nan

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            flat = list(pool.map(cell, range(nx * ny)))
    else:
        flat = [cell(k) for k in range(nx * ny)]
    mag = np.array(flat).reshape(nx, ny)
    failed = int(np.isnan(mag).sum())
    if failed > 0.5 * mag.size:
        raise ScanError(f"{failed} of {mag.size} scan cells failed")
    if failed:
        LOGGER.info("%d of %d scan cells failed and were skipped", failed, mag.size)
    return ScanGrid(xs, ys, mag, failed)


def grid_minima(grid):
    """Interior local minima of a :class:`ScanGrid`, merged within one cell diagonal."""
    filled = np.where(np.isnan(grid.magnitude), np.inf, grid.magnitude)
    nx, ny = filled.shape
    center = filled[1:-1, 1:-1]
    is_min = np.isfinite(center)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                other = filled[1 + di : nx - 1 + di, 1 + dj : ny - 1 + dj]
                # exact ties (e.g. mirror rows about Im E = 0) go to the earlier cell
                is_min &= (center <= other) if (di, dj) > (0, 0) else (center < other)
    ii, jj = np.nonzero(is_min)
    order = np.argsort(center[ii, jj], kind="stable")
    kept = []
    for k in order:
        i, j = ii[k] + 1, jj[k] + 1
        if any((i - a) ** 2 + (j - b) ** 2 <= 2 for a, b in kept):
            continue
        kept.append((i, j))
    return [ScanMinimum(float(grid.xs[i]), float(grid.ys[j]), float(filled[i, j])) for i, j in kept]


def grid_scan(
    re_range,
    y_range,
    eb_tilde,
    n_cells=(64, 64),
    mode="field",
    im_e=None,
    f_tilde=None,
    quad=DEFAULT_OPTIONS,
    workers=1,
):
    """Seed candidates for roots from local minima of ``|D|`` on a grid.

    Parameters
    ----------
    re_range : (float, float)
        Range of ``Re E``.
    y_range : (float, float)
        Range of the second axis: ``f_tilde`` when ``mode="field"`` (with
        fixed `im_e`), ``Im E`` when ``mode="im"`` (with fixed `f_tilde`;
        ``f_tilde = 0`` scans the zero-field denominator).
    eb_tilde : float
        Scaled binding energy.
    n_cells : (int, int)
        Grid points per axis, endpoints included; at least 8 each.
    workers : int
        Threads for independent cell evaluations.

    Returns
    -------
    list of ScanMinimum
        Interior minima over the 8-neighbourhood (exact ties resolved by
        cell order), ascending in ``|D|``, merged within one cell diagonal.

    Raises
    ------
    ScanError
        If more than half of the cells fail to evaluate.
    """
    grid = evaluate_grid(re_range, y_range, eb_tilde, n_cells, mode, im_e, f_tilde, quad, workers)
    return grid_minima(grid)


def _zero_field_real(e, eb_tilde):
    return d_zero_field(e, eb_tilde).real


def zero_field_roots(eb_tilde, n_levels, xtol=1e-14):
    """Real zero-field roots, one per Landau level, by bracketing.

    Root ``n`` lies in ``(2n - 1, 2n + 1)`` for ``n >= 1`` and below 1 for
    ``n = 0``; on each such interval the denominator is real and
    increasing from ``-inf`` to ``+inf``.
    """
    if not eb_tilde < 0:
        raise DomainError("eb_tilde must be negative")
    roots = []
    for n in range(n_levels):
        hi = 2 * n + 1 - 1e-9
        if n == 0:
            lo = 0.0
            while _zero_field_real(lo, eb_tilde) > 0:
                lo = 2 * lo - 1.0
        else:
            lo = 2 * n - 1 + 1e-9
        roots.append(brentq(_zero_field_real, lo, hi, args=(eb_tilde,), xtol=xtol, rtol=1e-15, maxiter=200))
    return roots
