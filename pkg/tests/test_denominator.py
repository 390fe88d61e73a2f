import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from zrp.denominator import (
    Contour,
    DEFAULT_OPTIONS,
    QuadOptions,
    build_contour,
    contour_growth,
    d_field,
    d_free,
    d_zero_field,
    phase_phi,
    tail_order,
    tail_sum,
)
from zrp.errors import DomainError, FieldTooWeakError, LandauPoleError, PoleError

CONTOUR = QuadOptions(method="contour")
LANDAU = QuadOptions(method="landau")
RESONANCE = (3.0703456182811 - 1e-4j, -2.2860459726451, 0.2647)


class TestFree:
    def test_branch_above_threshold(self):
        assert d_free(2.0, -2.0) == pytest.approx(1j * math.pi, abs=1e-15)

    def test_below_threshold_is_real(self):
        v = d_free(-1.0, -2.0)
        assert v.imag == pytest.approx(0.0, abs=1e-15)
        assert v.real == pytest.approx(math.log(2.0))

    def test_zero_at_bound_state(self):
        assert abs(d_free(-2.0, -2.0)) < 1e-15

    def test_rejects(self):
        with pytest.raises(DomainError):
            d_free(1.0, 1.0)
        with pytest.raises(PoleError):
            d_free(0.0, -1.0)


class TestZeroField:
    @settings(max_examples=60, deadline=None)
    @given(st.floats(-12, 12), st.floats(-3, 3))
    def test_matches_mpmath(self, x, y):
        e = complex(x, y)
        if min(abs(e - (2 * k + 1)) for k in range(8)) < 1e-3:
            return
        ref = oracles.zero_field_denominator(e, -3.0)
        assert abs(d_zero_field(e, -3.0) - ref) < 1e-12 * max(1, abs(ref))

    def test_vectorized(self):
        e = np.array([0.0, 2.0 - 0.1j, -4.0])
        out = d_zero_field(e, -1.0)
        assert out.shape == (3,)
        assert out[1] == pytest.approx(d_zero_field(2.0 - 0.1j, -1.0))

    def test_landau_pole(self):
        with pytest.raises(LandauPoleError) as info:
            d_zero_field(5.0, -3.0)
        assert info.value.level == 2

    def test_real_below_levels_are_real(self):
        assert abs(d_zero_field(0.5, -2.0).imag) < 1e-15


class TestPhase:
    def test_taylor_branch_is_continuous(self):
        f = 0.7
        for s in (0.1 - 1e-12, 0.1 * np.exp(-0.3j), -0.0999 + 0.0001j):
            inner = phase_phi(np.array([s]), f)[0]
            # direct form just outside the Taylor disc, scaled back in
            direct = f * f * s * (s / np.tan(s) - 1)
            assert abs(inner - direct) < 1e-13

    def test_small_argument(self):
        s = 1e-4 - 1e-4j
        assert phase_phi(s, 1.0) == pytest.approx(-(s**3) / 3, rel=1e-7)

    def test_scales_with_field_squared(self):
        s = 1.3 - 0.4j
        assert phase_phi(s, 2.0) == pytest.approx(4 * phase_phi(s, 1.0), rel=1e-15)


class TestContour:
    def test_defaults(self):
        c = build_contour(3 - 1e-4j, 0.26)
        assert c.depth == 1.0
        assert c.corner == pytest.approx(1 - 1j)
        k = c.knots()
        assert k[0] == 0 and np.all(np.diff(k[1:].real) > 0)
        assert np.allclose(k[1:].imag, -1.0)

    def test_tail_order_reduces_to_plain_rule(self):
        k = tail_order(1.0, 1e-13)
        assert math.exp(-(2 * k + 1)) < 1e-13 <= math.exp(-(2 * k - 1))

    def test_weak_field_refused(self):
        with pytest.raises(FieldTooWeakError):
            build_contour(3 - 1e-4j, 1e-4)

    def test_invalid(self):
        with pytest.raises(ValueError):
            Contour(1.0, -math.pi / 4, 0.5, 10, (0.5,))
        with pytest.raises(ValueError):
            QuadOptions(method="simpson")

    def test_growth_finite_for_moderate_fields(self):
        assert contour_growth(3 - 1e-4j, 0.26) < 10
        assert contour_growth(3 - 1e-4j, 1e-4) == math.inf

    def test_tail_sum_pole(self):
        with pytest.raises(PoleError):
            tail_sum(3.0, 10 - 1j, 5)
        with pytest.raises(DomainError):
            tail_sum(2.0, 10.0, 5)
        assert tail_sum(2.0, 10 - 1j, 0) == 0


class TestFieldDenominator:
    @pytest.mark.parametrize("e, eb, f, ref", oracles.FIELD_VALUES)
    @pytest.mark.parametrize("opts", [CONTOUR, LANDAU], ids=["contour", "landau"])
    def test_against_mpmath_oracle(self, e, eb, f, ref, opts):
        r = d_field(e, eb, f, opts)
        assert abs(r.value - ref) < 1e-9

    @pytest.mark.slow
    def test_oracle_values_recomputed(self):
        for e, eb, f, ref in oracles.FIELD_VALUES[:1]:
            assert abs(oracles.denominator(e, eb, f) - ref) < 1e-13

    @pytest.mark.parametrize(
        "e, f",
        [(3.07 - 1e-4j, 0.26), (1.5 - 0.2j, 0.8), (5.2 - 0.05j, 0.4), (-2.0 - 0.01j, 0.3), (9.1 - 0.02j, 0.5)],
    )
    def test_routes_agree(self, e, f):
        a = d_field(e, -2.0, f, CONTOUR)
        b = d_field(e, -2.0, f, LANDAU)
        assert abs(a.value - b.value) < 1e-9

    def test_resonance_point(self):
        e, eb, f = RESONANCE
        r = d_field(e, eb, f)
        assert abs(r.value) < 1e-6
        assert r.abs_err < 1e-8

    def test_binding_enters_only_through_log(self):
        e, f = 3.2 - 0.1j, 0.3
        a = d_field(e, -1.0, f).value
        b = d_field(e, -5.0, f).value
        assert b - a == pytest.approx(math.log(5.0), abs=1e-12)

    def test_small_field_limit(self):
        e = 2.0 - 0.02j
        gap = d_field(e, -3.0, 1e-3).value - d_zero_field(e, -3.0)
        assert abs(gap) < 1e-4

    def test_finite_at_landau_level(self):
        r = d_field(3.0, -2.0, 0.3)
        assert np.isfinite(r.value)

    @pytest.mark.parametrize(
        "args",
        [(3.0, 1.0, 0.3), (3.0, -1.0, 0.0), (3.0, -1.0, -0.1), (5000.0, -1.0, 0.3), (3.0, -1.0, 1e3)],
    )
    def test_rejects(self, args):
        with pytest.raises(DomainError):
            d_field(*args)

    def test_explicit_contour(self):
        e, eb, f = RESONANCE
        c = build_contour(e, f, DEFAULT_OPTIONS, depth=0.5)
        assert abs(d_field(e, eb, f, contour=c).value) < 1e-6
