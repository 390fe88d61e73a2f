"""Continuation of resonance branches and the per-level resonance census.

Two tracing modes:

* fixed width: ``Im E`` is held fixed and the solution set of
  ``D(E; E_B, F) = 0`` is a curve in ``(E_B, Re E, F)``, followed by
  pseudo-arclength continuation (it has turning points in ``F``);
* fixed binding: ``E_B`` is held fixed and the complex root ``E(F)`` is
  followed by natural continuation in ``F``.
"""

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .denominator import DEFAULT_OPTIONS, d_field
from .errors import ConvergenceError, DomainError, ZrpError
from .rootfind import DEFAULT_SOLVE, SolveOptions, grid_scan, newton_complex, solve_fixed_im

LOGGER = logging.getLogger(__name__)

EB_BOUNDS = (-30.0, -1e-3)
F_MAX = 2.0
_GROWTH = 1.3
_EASY_ITERATIONS = 3
_EASY_RUN = 3
_MIN_STEP_FRACTION = 1.0 / 64.0
_MAX_STEP_FACTOR = 8.0
# largest accepted angle (rad) between predictor tangent and the step actually taken
_MAX_TURN = 0.1
_CORRECTOR_ITERATIONS = 8
_DISTINCT = 1e-4


class Termination(str, enum.Enum):
    LOOP_CLOSED = "loop-closed"
    PARAMETER_BOUND = "parameter-bound"
    MAX_STEPS = "max-steps"
    STEP_UNDERFLOW = "step-underflow"
    DOMAIN_EXIT = "domain-exit"


@dataclass(frozen=True)
class BranchPoint:
    e_tilde: complex
    eb_tilde: float
    f_tilde: float
    residual: float
    arclength: float = 0.0


@dataclass(frozen=True)
class Branch:
    """An ordered, arclength-parameterized solution curve.

    ``mode`` is ``"fixed-im"`` or ``"fixed-ebind"``; ``landau_index`` is
    the Landau level nearest to ``Re E`` at the weakest-field point.
    """

    mode: str
    points: tuple
    termination: Termination
    landau_index: int
    step0: float = field(default=0.0, compare=False)

    def __len__(self):
        return len(self.points)

    def as_arrays(self):
        """Columns ``(arclength, e_tilde, eb_tilde, f_tilde, residual)`` as arrays."""
        pts = self.points
        return (
            np.array([p.arclength for p in pts]),
            np.array([p.e_tilde for p in pts], dtype=complex),
            np.array([p.eb_tilde for p in pts]),
            np.array([p.f_tilde for p in pts]),
            np.array([p.residual for p in pts]),
        )


def _landau_index(points):
    weakest = min(points, key=lambda p: p.f_tilde)
    return max(0, int(round((weakest.e_tilde.real - 1.0) / 2.0)))


def _in_box(eb, f):
    return EB_BOUNDS[0] <= eb <= EB_BOUNDS[1] and 0.0 < f <= F_MAX


def _point_segment_distance(p, a, b):
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0 else min(1.0, max(0.0, float((p - a) @ ab) / denom))
    return float(np.linalg.norm(a + t * ab - p))


class _FixedWidthSystem:
    """``(Re D, Im D)`` at ``E = x + i im_e`` as a map of ``u = (E_B, x, F)``."""

    def __init__(self, im_e, quad, fd_step):
        self.im_e = im_e
        self.quad = quad
        self.fd_step = fd_step

    def residual(self, u):
        eb, x, f = u
        if not (eb < 0 and f > 0):
            return None
        try:
            v = d_field(complex(x, self.im_e), eb, f, self.quad).value
        except ZrpError:
            return None
        return np.array([v.real, v.imag]) if math.isfinite(abs(v)) else None

    def jacobian(self, u, r):
        jac = np.zeros((2, 3))
        # D depends on E_B only through ln|E_B|
        jac[0, 0] = 1.0 / u[0]
        for k in (1, 2):
            h = self.fd_step * max(1.0, abs(u[k]))
            v = u.copy()
            v[k] += h
            rv = self.residual(v)
            if rv is None:
                v[k] = u[k] - h
                rv = self.residual(v)
                h = -h
                if rv is None:
                    return None
            jac[:, k] = (rv - r) / h
        return jac


def _null_direction(jac):
    _, _, vt = np.linalg.svd(jac)
    t = vt[-1]
    return t / np.linalg.norm(t)


def _correct(system, u_pred, tangent, opts):
    """Newton on ``G(u) = 0`` within the hyperplane through `u_pred` normal to `tangent`."""
    u = u_pred.copy()
    r = system.residual(u)
    if r is None:
        return None
    for it in range(1, _CORRECTOR_ITERATIONS + 1):
        jac = system.jacobian(u, r)
        if jac is None:
            return None
        full = np.vstack([jac, tangent])
        rhs = np.concatenate([r, [float(tangent @ (u - u_pred))]])
        try:
            delta = -np.linalg.solve(full, rhs)
        except np.linalg.LinAlgError:
            return None
        u = u + delta
        r = system.residual(u)
        if r is None:
            return None
        norm = float(np.hypot(*r))
        if norm < opts.residual_tol and float(np.max(np.abs(delta))) < max(opts.step_tol, 1e-8):
            return u, norm, it
    return None


def trace_fixed_im(
    im_e,
    start,
    step0,
    max_steps,
    direction=1,
    opts=DEFAULT_SOLVE,
    quad=DEFAULT_OPTIONS,
):
    """Follow the fixed-width solution curve through `start`.

    Pseudo-arclength continuation in ``u = (E_B, Re E, F)``: a secant
    predictor (the first tangent is the null vector of the Jacobian at
    `start`, oriented by `direction` so that ``F`` initially grows for
    ``direction = +1``) and a Newton corrector in the hyperplane normal to
    the tangent. Steps halve on corrector failure or when the corrected
    step turns more than 0.1 rad away from the tangent, and grow by 1.3
    after three easy steps, within ``[step0/64, 8 step0]``.

    Parameters
    ----------
    im_e : float
        Fixed ``Im E`` (negative).
    start : BranchPoint
        A converged root at this ``im_e``.
    step0 : float
        Initial arclength step.
    max_steps : int
        Step budget.
    direction : {1, -1}
        Initial orientation.

    Returns
    -------
    Branch
    """
    if not im_e < 0:
        raise DomainError("im_e must be negative")
    if not step0 > 0:
        raise DomainError("step0 must be positive")
    if complex(start.e_tilde).imag != im_e:
        raise DomainError("start point does not lie at the requested Im E")
    system = _FixedWidthSystem(im_e, quad, opts.fd_step)
    u0 = np.array([start.eb_tilde, complex(start.e_tilde).real, start.f_tilde])
    r0 = system.residual(u0)
    if r0 is None or float(np.hypot(*r0)) >= opts.residual_tol:
        raise DomainError("start is not a converged root at the requested Im E")
    jac0 = system.jacobian(u0, r0)
    if jac0 is None:
        raise DomainError("Jacobian cannot be formed at the start point")
    tangent = _null_direction(jac0)
    if tangent[2] * direction < 0 or (tangent[2] == 0 and tangent[1] * direction < 0):
        tangent = -tangent

    def make_point(u, res, s):
        return BranchPoint(complex(u[1], im_e), float(u[0]), float(u[2]), float(res), float(s))

    points = [make_point(u0, float(np.hypot(*r0)), 0.0)]
    us = [u0]
    h = step0
    easy = 0
    s = 0.0
    termination = Termination.MAX_STEPS
    last_failure_domain = False
    for _ in range(max_steps):
        if len(us) >= 2:
            sec = us[-1] - us[-2]
            tangent = sec / np.linalg.norm(sec)
        result = None
        while h >= step0 * _MIN_STEP_FRACTION:
            u_pred = us[-1] + h * tangent
            result = _correct(system, u_pred, tangent, opts)
            if result is not None:
                move = result[0] - us[-1]
                jump = float(np.linalg.norm(move))
                # a corrected point much farther than the step means a branch jump;
                # a sharp turn means the step cuts a corner of the curve
                turn = math.acos(min(1.0, max(-1.0, float(move @ tangent) / max(jump, 1e-300))))
                if jump <= 2.0 * h and (turn <= _MAX_TURN or h < 2.0 * step0 * _MIN_STEP_FRACTION):
                    break
                result = None
            last_failure_domain = system.residual(u_pred) is None
            h *= 0.5
            easy = 0
        if result is None:
            termination = Termination.DOMAIN_EXIT if last_failure_domain else Termination.STEP_UNDERFLOW
            break
        u, res, iters = result
        if not _in_box(u[0], u[2]):
            termination = Termination.PARAMETER_BOUND
            break
        if s > 10.0 * step0 and _point_segment_distance(u0, us[-1], u) < 0.5 * step0:
            # the step passed the start: close the loop on the start point itself
            s += float(np.linalg.norm(u0 - us[-1]))
            points.append(make_point(u0, points[0].residual, s))
            termination = Termination.LOOP_CLOSED
            break
        s += float(np.linalg.norm(u - us[-1]))
        points.append(make_point(u, res, s))
        us.append(u)
        easy = easy + 1 if iters <= _EASY_ITERATIONS else 0
        if easy >= _EASY_RUN:
            h = min(h * _GROWTH, _MAX_STEP_FACTOR * step0)
            easy = 0
    return Branch("fixed-im", tuple(points), termination, _landau_index(points), step0)


def trace_locus(im_e, start, step0, max_steps, opts=DEFAULT_SOLVE, quad=DEFAULT_OPTIONS):
    """Trace a fixed-width curve both ways from `start` and join the halves.

    If the first direction already closes a loop that branch is returned.
    Otherwise the result runs from the far end of the ``direction = -1``
    half through `start` to the far end of the ``+1`` half, with arclength
    measured from its first point. Its termination is that of whichever
    half did not stop at the parameter box (``parameter-bound`` if both did).
    """
    forward = trace_fixed_im(im_e, start, step0, max_steps, 1, opts, quad)
    if forward.termination == Termination.LOOP_CLOSED:
        return forward
    backward = trace_fixed_im(im_e, start, step0, max_steps, -1, opts, quad)
    total = backward.points[-1].arclength
    points = [
        BranchPoint(p.e_tilde, p.eb_tilde, p.f_tilde, p.residual, total - p.arclength)
        for p in reversed(backward.points)
    ]
    points += [
        BranchPoint(p.e_tilde, p.eb_tilde, p.f_tilde, p.residual, total + p.arclength) for p in forward.points[1:]
    ]
    termination = Termination.PARAMETER_BOUND
    for half in (backward, forward):
        if half.termination != Termination.PARAMETER_BOUND:
            termination = half.termination
            break
    return Branch("fixed-im", tuple(points), termination, _landau_index(points), step0)


def field_zero_limits(branch, n_fit=5):
    """``Re E`` extrapolated linearly to ``F = 0`` from each end of `branch`.

    Returns ``(first_end, last_end)``; each value comes from a straight-line
    fit of ``Re E`` against ``F`` over the `n_fit` points nearest that end.
    """
    pts = branch.points
    if len(pts) < max(2, n_fit):
        raise DomainError("branch too short to extrapolate")
    out = []
    for chunk in (pts[:n_fit], pts[-n_fit:]):
        f = np.array([p.f_tilde for p in chunk])
        x = np.array([complex(p.e_tilde).real for p in chunk])
        slope, intercept = np.polyfit(f, x, 1)
        out.append(float(intercept))
    return tuple(out)


def compare_sheets(branch, samples=25):
    """The two halves of a fixed-width branch at shared field values.

    The branch is split at its largest field. Each half must be monotone in
    ``F``; both are interpolated on `samples` fields spread over their
    common range.

    Returns
    -------
    list of tuple
        ``(F, re_first, eb_first, re_second, eb_second)``, "first" being
        the half before the maximum in branch order.
    """
    if branch.mode != "fixed-im":
        raise DomainError("compare_sheets needs a fixed-im branch")
    _, e, eb, f, _ = branch.as_arrays()
    k = int(np.argmax(f))
    if k in (0, len(f) - 1):
        raise DomainError("field maximum at a branch end: no second sheet")
    halves = []
    for sl in (slice(0, k + 1), slice(k, None)):
        ff, xx, bb = f[sl], e.real[sl], eb[sl]
        order = np.argsort(ff)
        ff, xx, bb = ff[order], xx[order], bb[order]
        if np.any(np.diff(ff) <= 0):
            raise DomainError("a sheet is not monotone in the field")
        halves.append((ff, xx, bb))
    lo = max(h[0][0] for h in halves)
    hi = min(h[0][-1] for h in halves)
    grid = np.linspace(lo, hi, samples + 2)[1:-1]
    (fa, xa, ba), (fb, xb, bb) = halves
    return [
        (float(g), float(np.interp(g, fa, xa)), float(np.interp(g, fa, ba)), float(np.interp(g, fb, xb)), float(np.interp(g, fb, bb)))
        for g in grid
    ]


def _root_slope(eb, f, z, fd_step, quad):
    """``dE/dF = -(dD/dF) / (dD/dE)`` at a root, by central differences."""
    hz = fd_step * max(1.0, abs(z))
    hf = fd_step * max(1.0, f)
    hf = min(hf, 0.5 * f)
    dz = (d_field(z + hz, eb, f, quad).value - d_field(z - hz, eb, f, quad).value) / (2.0 * hz)
    df = (d_field(z, eb, f + hf, quad).value - d_field(z, eb, f - hf, quad).value) / (2.0 * hf)
    if dz == 0:
        return 0j
    return -df / dz


def trace_fixed_ebind(
    eb_tilde,
    f_start,
    f_end,
    seed_e,
    step0,
    max_steps,
    opts=DEFAULT_SOLVE,
    quad=DEFAULT_OPTIONS,
):
    """Follow a complex root ``E(F)`` at fixed binding energy from `f_start` to `f_end`.

    Natural continuation: each step seeds :func:`newton_complex` with a
    linear extrapolation of the last two roots (of the implicit-function
    slope ``dE/dF`` on the first step). A step is rejected (and
    halved) if Newton fails or lands farther from the prediction than the
    predicted move itself.
    """
    if not eb_tilde < 0:
        raise DomainError("eb_tilde must be negative")
    if not (f_start > 0 and f_end > 0) or f_start == f_end:
        raise DomainError("f_start and f_end must be positive and distinct")
    if not step0 > 0:
        raise DomainError("step0 must be positive")
    sign = 1.0 if f_end > f_start else -1.0

    def solve(f, seed):
        return newton_complex(lambda z: d_field(z, eb_tilde, f, quad).value, seed, opts)

    first = solve(f_start, complex(seed_e))
    points = [BranchPoint(first.location, float(eb_tilde), float(f_start), first.residual, 0.0)]
    slope0 = _root_slope(eb_tilde, f_start, first.location, opts.fd_step, quad)
    h = step0
    easy = 0
    s = 0.0
    termination = Termination.MAX_STEPS
    for _ in range(max_steps):
        f_prev = points[-1].f_tilde
        if (f_end - f_prev) * sign <= 1e-14 * max(1.0, abs(f_end)):
            termination = Termination.PARAMETER_BOUND
            break
        accepted = None
        while h >= step0 * _MIN_STEP_FRACTION:
            f_new = f_prev + sign * h
            if (f_new - f_end) * sign > 0:
                f_new = f_end
            z_prev = points[-1].e_tilde
            if len(points) >= 2:
                slope = (z_prev - points[-2].e_tilde) / (f_prev - points[-2].f_tilde)
            else:
                slope = slope0
            z_pred = z_prev + slope * (f_new - f_prev)
            try:
                root = solve(f_new, z_pred)
            except ZrpError:
                root = None
            if root is not None:
                moved = abs(z_pred - z_prev)
                if abs(root.location - z_pred) <= max(0.5 * moved, 0.1 * abs(f_new - f_prev), 1e-9):
                    accepted = (f_new, root)
                    break
            h *= 0.5
            easy = 0
        if accepted is None:
            termination = Termination.STEP_UNDERFLOW
            break
        f_new, root = accepted
        prev = points[-1]
        ds = math.sqrt(abs(root.location - prev.e_tilde) ** 2 + (f_new - prev.f_tilde) ** 2)
        s += ds
        points.append(BranchPoint(root.location, float(eb_tilde), float(f_new), root.residual, s))
        easy = easy + 1 if root.iterations <= _EASY_ITERATIONS else 0
        if easy >= _EASY_RUN:
            h = min(h * _GROWTH, _MAX_STEP_FACTOR * step0)
            easy = 0
    else:
        termination = Termination.MAX_STEPS
    return Branch("fixed-ebind", tuple(points), termination, _landau_index(points), step0)


@dataclass(frozen=True)
class CensusResult:
    landau_n: int
    count: int
    roots: tuple
    seeds: int


def census(
    landau_n,
    im_e,
    eb_tilde,
    f_max=1.0,
    resolution=64,
    f_min=0.01,
    opts=DEFAULT_SOLVE,
    quad=DEFAULT_OPTIONS,
    workers=1,
):
    """Count distinct fixed-width resonances around Landau level `landau_n`.

    Scans ``Re E`` in ``(2n + 0.05, 2n + 1.95)`` and ``F`` in
    ``(f_min, f_max)`` on a ``resolution x resolution`` grid, polishes
    every minimum with :func:`~zrp.rootfind.solve_fixed_im` and counts
    converged roots inside the window that are more than 1e-4 apart.

    Returns
    -------
    CensusResult
        ``roots`` holds ``(re_e, f_tilde)`` pairs sorted by ``Re E``.
    """
    if landau_n < 0:
        raise DomainError("landau_n must be >= 0")
    if not im_e < 0:
        raise DomainError("im_e must be negative")
    center = 2 * landau_n + 1
    lo, hi = center - 0.95, center + 0.95
    seeds = grid_scan(
        (lo, hi), (f_min, f_max), eb_tilde, (resolution, resolution), im_e=im_e, quad=quad, workers=workers
    )

    def polish(seed):
        try:
            return solve_fixed_im(im_e, eb_tilde, seed.re_e, seed.y, opts, quad)
        except ZrpError as exc:
            LOGGER.debug("seed (%g, %g) did not polish: %s", seed.re_e, seed.y, exc)
            return None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(polish, seeds))
    else:
        results = [polish(sd) for sd in seeds]
    roots = []
    for res in results:
        if res is None or not res.converged:
            continue
        x, f = res.location
        if not (lo < x < hi and f_min <= f <= f_max):
            continue
        if all(math.hypot(x - a, f - b) > _DISTINCT for a, b in roots):
            roots.append((x, f))
    roots.sort()
    return CensusResult(landau_n, len(roots), tuple(roots), len(seeds))


@dataclass(frozen=True)
class FieldMaximum:
    f_max: float
    point: BranchPoint
    at_boundary: bool


def max_field(branch):
    """Largest field reached on a fixed-width branch.

    The discrete maximum is refined by the vertex of the parabola through
    it and its two neighbours (in arclength). A maximum at either end of an
    open branch is returned unrefined with ``at_boundary=True``.
    """
    if branch.mode != "fixed-im":
        raise DomainError("max_field needs a fixed-im branch")
    pts = branch.points
    if len(pts) < 3:
        raise DomainError("max_field needs at least three points")
    s = np.array([p.arclength for p in pts])
    f = np.array([p.f_tilde for p in pts])
    k = int(np.argmax(f))
    closed = branch.termination == Termination.LOOP_CLOSED
    if k in (0, len(pts) - 1) and not closed:
        LOGGER.warning("field maximum sits at a branch end; the branch may be truncated")
        return FieldMaximum(float(f[k]), pts[k], True)
    if k == 0 or k == len(pts) - 1:
        # closed loop: the start and end points coincide
        idx = [len(pts) - 2, 0, 1]
        s_loc = np.array([s[-2] - s[-1], 0.0, s[1]])
    else:
        idx = [k - 1, k, k + 1]
        s_loc = s[idx]
    coeff = np.polyfit(s_loc - s_loc[1], f[idx], 2)
    if coeff[0] >= 0:
        return FieldMaximum(float(f[k]), pts[k], False)
    vertex = -coeff[1] / (2 * coeff[0])
    peak = float(np.polyval(coeff, vertex))
    return FieldMaximum(max(peak, float(f[k])), pts[k], False)


def lifetime_profile(branch):
    """``(F, 1/|Im E|)`` for every point of a fixed-binding branch; ``inf`` where ``Im E >= 0``."""
    if branch.mode != "fixed-ebind":
        raise DomainError("lifetime_profile needs a fixed-ebind branch")
    out = []
    for p in branch.points:
        width = complex(p.e_tilde).imag
        out.append((p.f_tilde, math.inf if width >= 0 else 1.0 / abs(width)))
    return out
