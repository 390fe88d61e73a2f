"""Acceptance checks, one per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v``. Criteria that
the model does not satisfy at the stated tolerance are kept at that
tolerance and marked ``xfail(strict=True)``; their printed line reads FAIL.
"""

import csv
import math
import time

import numpy as np
import pytest

from zrp.cli import main
from zrp.denominator import QuadOptions, d_field, d_zero_field
from zrp.rootfind import solve_fixed_im, zero_field_roots
from zrp.specfun import EULER_GAMMA, digamma, landau_series
from zrp.trace import (
    BranchPoint,
    census,
    compare_sheets,
    field_zero_limits,
    lifetime_profile,
    max_field,
    trace_fixed_ebind,
    trace_locus,
)

REF_RE, REF_EB, REF_F = 3.0703456182811, -2.2860459726451, 0.2647
LAB_VALUES = {
    1.0: (0.506, 6.423, 7.52),
    2.0: (1.013, 18.167, 3.76),
    4.0: (2.025, 51.383, 1.88),
    6.0: (3.038, 94.396, 1.25),
}


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")

    return emit


def test_criterion_1_table(tmp_path, report):
    out = tmp_path / "table1.csv"
    t0 = time.perf_counter()
    code = main(["table1", "--out", str(out)])
    elapsed = time.perf_counter() - t0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    worst = 0.0
    for row in rows:
        b, e, tau = LAB_VALUES[float(row["E_B_meV"])]
        for got, want in ((row["B_tesla"], b), (row["E_kV_per_m"], e), (row["tau_ns"], tau)):
            worst = max(worst, abs(float(got) / want - 1))
    ok = code == 0 and len(rows) == 4 and worst < 5e-3 and elapsed < 1.0
    report(1, ok, f"16 values, worst relative error {worst:.2e}, {elapsed:.2f} s")
    assert ok


def test_criterion_2_resonance_point(report):
    t0 = time.perf_counter()
    value = d_field(complex(REF_RE, -1e-4), REF_EB, REF_F).value
    root = solve_fixed_im(-1e-4, REF_EB, 3.07, 0.26)
    elapsed = time.perf_counter() - t0
    x, f = root.location
    ok = abs(value) < 1e-6 and abs(x - REF_RE) < 1e-6 and abs(f - REF_F) < 1e-6 and elapsed < 10
    report(2, ok, f"|D| = {abs(value):.2e}, dRe = {x - REF_RE:.1e}, dF = {f - REF_F:.1e}, {elapsed:.2f} s")
    assert ok


def small_field_samples(n=100, seed=3):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        e = complex(rng.uniform(-4.0, 12.0), rng.uniform(-0.05, 0.05))
        if min(abs(e - (2 * k + 1)) for k in range(-3, 8)) <= 0.1:
            continue
        out.append((e, -rng.uniform(0.5, 10.0)))
    return out


@pytest.fixture(scope="module")
def small_field_differences():
    t0 = time.perf_counter()
    rows = []
    for e, eb in small_field_samples():
        base = d_zero_field(e, eb)
        rows.append((e, [d_field(e, eb, f).value - base for f in (1e-2, 1e-3, 1e-4)]))
    return rows, time.perf_counter() - t0


def quadratic_ratios(rows):
    return [abs(d[0] / d[1]) for _, d in rows] + [abs(d[1] / d[2]) for _, d in rows]


def test_weak_field_scaling_is_quadratic(small_field_differences):
    # F = 1e-3 and 1e-4 only; at F = 1e-2 the F^4 term is visible near high levels
    rows, _ = small_field_differences
    assert all(abs(abs(d[1] / d[2]) / 100 - 1) < 0.01 for _, d in rows)


@pytest.mark.xfail(strict=True, reason="the field shift near a level is ~4(2j+1)F^2/d^3, 4e-3 at d = 0.1")
def test_criterion_3_zero_field_consistency(small_field_differences, report):
    rows, elapsed = small_field_differences
    gaps = [abs(d[1]) for _, d in rows]
    ratios = quadratic_ratios(rows)
    over = sum(g >= 1e-4 for g in gaps)
    ratio_ok = all(abs(r / 100 - 1) < 0.2 for r in ratios)
    ok = over == 0 and ratio_ok and elapsed < 120
    report(
        3,
        ok,
        f"{over}/100 samples over 1e-4 (max {max(gaps):.2e}), "
        f"ratios {min(ratios):.1f} to {max(ratios):.1f}, {elapsed:.1f} s",
    )
    assert ok


def test_criterion_4_contour_independence(report):
    rng = np.random.default_rng(4)
    variants = [
        QuadOptions(method="contour", depth=0.5),
        QuadOptions(method="contour", depth=1.5),
        QuadOptions(method="contour", truncation_scale=1.5),
    ]
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        e = complex(rng.uniform(-5.0, 11.0), rng.uniform(-0.5, 0.2))
        f = rng.uniform(0.1, 1.5)
        eb = -rng.uniform(0.5, 10.0)
        ref = d_field(e, eb, f, QuadOptions(method="contour"))
        for opts in variants:
            r = d_field(e, eb, f, opts)
            worst = max(worst, abs(r.value - ref.value) / (10 * (r.abs_err + ref.abs_err)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1.0 and elapsed < 120
    report(4, ok, f"largest difference is {worst:.3f} of 10x the error estimates, {elapsed:.1f} s")
    assert ok


def test_criterion_5_series_identity(report):
    rng = np.random.default_rng(5)
    t0 = time.perf_counter()
    worst = 0.0
    count = 0
    while count < 200:
        e = complex(rng.uniform(-20, 20), rng.uniform(-5, 5))
        if min(abs(e - (2 * k + 1)) for k in range(-1, 12)) < 1e-3:
            continue
        s = landau_series(e, tol=1e-12).value
        worst = max(worst, abs(digamma((1 - e) / 2) + EULER_GAMMA + 2 * math.log(2) + s))
        count += 1
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-9 and elapsed < 10
    report(5, ok, f"max residual {worst:.2e}, {elapsed:.2f} s")
    assert ok


@pytest.fixture(scope="module")
def level_census():
    t0 = time.perf_counter()
    results = [census(n, -1e-4, -3.0, 1.0) for n in range(4)]
    return results, time.perf_counter() - t0


@pytest.mark.xfail(strict=True, reason="window placement and grid resolution do not isolate n + 1 roots per level")
def test_criterion_6_census(level_census, report):
    results, elapsed = level_census
    counts = [r.count for r in results]
    ok = counts == [1, 2, 3, 4] and elapsed < 1200
    report(6, ok, f"counts {counts} for n = 0..3, expected [1, 2, 3, 4], {elapsed:.0f} s")
    assert ok


@pytest.fixture(scope="module")
def n1_loci(level_census):
    t0 = time.perf_counter()
    # the field-induced root of the n = 1 window seeds the branch
    x, f = level_census[0][1].roots[0]
    start = solve_fixed_im(-1e-4, -3.0, x, f)
    xs, fs = start.location
    wide = trace_locus(-1e-4, BranchPoint(complex(xs, -1e-4), -3.0, fs, start.residual), 0.01, 3000)
    narrow_root = solve_fixed_im(-1e-6, -3.0, x, f)
    xn, fn = narrow_root.location
    narrow = trace_locus(-1e-6, BranchPoint(complex(xn, -1e-6), -3.0, fn, narrow_root.residual), 0.01, 3000)
    return wide, narrow, time.perf_counter() - t0


def loop_structure(branch):
    """Closure at the Landau level, single field maximum, sheet ordering."""
    f = branch.as_arrays()[3]
    peak = max_field(branch)
    ends = field_zero_limits(branch)
    # with a single field maximum both ends are the weak-field ends of their sheets
    closes = all(abs(x - 3.0) < 1e-2 for x in ends)
    turns = int(np.sum(np.diff(np.sign(np.diff(f))) != 0))
    sheets = compare_sheets(branch)
    ordered = all((xa - xb) * (abs(ba) - abs(bb)) < 0 for _, xa, ba, xb, bb in sheets)
    return closes, turns == 1 and not peak.at_boundary, ordered, peak.f_max, ends


def test_n1_loop_structure(n1_loci):
    wide, narrow, _ = n1_loci
    for branch in (wide, narrow):
        closes, single_peak, ordered, _, _ = loop_structure(branch)
        assert closes and single_peak and ordered


@pytest.mark.xfail(strict=True, reason="the maximum field drops by 14% between Im E = -1e-4 and -1e-6")
def test_criterion_7_branch_structure(n1_loci, report):
    wide, narrow, elapsed = n1_loci
    closes, single_peak, ordered, f_wide, ends = loop_structure(wide)
    f_narrow = max_field(narrow).f_max
    drop = (f_wide - f_narrow) / f_wide
    ok = closes and single_peak and ordered and 0 < drop < 0.1 and elapsed < 1800
    report(
        7,
        ok,
        f"closes at the level {closes} (ends at Re E {ends[0]:.4f}, {ends[1]:.4f}), single maximum {single_peak}, "
        f"sheets ordered {ordered}, F_max {f_wide:.5f} vs {f_narrow:.5f} (drop {drop:.1%}), {elapsed:.0f} s",
    )
    assert ok


def interior_lifetime_maximum(profile):
    tau = np.array([t for _, t in profile])
    for k in range(1, len(tau) - 1):
        if tau[k] >= tau[: k + 1].max() * 0.999 and tau[k] > 1.5 * tau[0] and tau[k] > 1.5 * tau[k:].min():
            return True
    return False


def test_criterion_8_fixed_binding_branches(level_census, report):
    # exploratory, not gating
    f_low, f_high = 0.01, 0.4
    impurity_seed = zero_field_roots(-3.0, 4)[3]
    impurity = trace_fixed_ebind(-3.0, f_low, f_high, impurity_seed, 0.005, 400)
    field_induced = []
    for x, f in level_census[0][3].roots:
        down = trace_fixed_ebind(-3.0, f, f_low, complex(x, -1e-4), 0.005, 400)
        if down.points[-1].f_tilde != pytest.approx(f_low):
            continue
        low_end = down.points[-1].e_tilde
        if abs(field_zero_limits(down)[1] - 7.0) >= 1e-2:
            continue
        if all(abs(low_end - b.points[0].e_tilde) > 1e-6 for b in field_induced):
            field_induced.append(trace_fixed_ebind(-3.0, f_low, f_high, low_end, 0.005, 400))
    tau_a = np.array([t for _, t in lifetime_profile(impurity)])
    f_a = np.array([p.f_tilde for p in impurity.points])
    plateau = tau_a[f_a <= 0.05].min()
    tail = tau_a[f_a >= 0.15]
    drops = plateau > 1e8 and tail.size > 1 and np.all(np.diff(tail) < 0) and tail[0] < 1e-4 * plateau
    stabilized = sum(interior_lifetime_maximum(lifetime_profile(b)) for b in field_induced)
    ok = len(field_induced) == 3 and drops and stabilized >= 1
    report(
        8,
        ok,
        f"1 impurity + {len(field_induced)} field-induced branches near E = 7, impurity lifetime drop {drops}, "
        f"{stabilized} branch(es) with an interior lifetime maximum; exploratory",
    )
    assert ok
