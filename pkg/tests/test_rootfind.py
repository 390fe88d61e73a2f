import cmath
import math

import mpmath
import numpy as np
import pytest

from zrp.denominator import d_field, d_zero_field
from zrp.errors import ConvergenceError, DegenerateError, DomainError, ScanError
from zrp.rootfind import (
    SolveOptions,
    evaluate_grid,
    grid_minima,
    grid_scan,
    newton_complex,
    solve_fixed_im,
    zero_field_roots,
)

REF_RE, REF_EB, REF_F = 3.0703456182811, -2.2860459726451, 0.2647


class TestNewton:
    def test_quadratic(self):
        r = newton_complex(lambda z: z * z + 1, 0.5 + 0.5j)
        assert r.converged
        assert abs(r.location - 1j) < 1e-12
        assert r.residual < 1e-10

    def test_transcendental(self):
        r = newton_complex(lambda z: cmath.exp(z) - 2, 0.3 + 0.2j)
        assert abs(r.location - math.log(2)) < 1e-12

    def test_no_root(self):
        with pytest.raises(ConvergenceError) as info:
            newton_complex(cmath.exp, 1.0)
        assert info.value.residual is not None

    def test_flat_function(self):
        with pytest.raises(DegenerateError):
            newton_complex(lambda z: 1.0 + 0 * z, 0.0)

    def test_bad_seed(self):
        with pytest.raises(DomainError):
            newton_complex(lambda z: complex("nan"), 1.0)

    def test_options_validated(self):
        with pytest.raises(ValueError):
            SolveOptions(damping=1.5)
        with pytest.raises(ValueError):
            SolveOptions(max_iter=0)

    def test_zero_field_root_matches_mpmath(self):
        r = newton_complex(lambda z: d_zero_field(z, -3.0), 4.0 - 0.01j)
        ref = mpmath.findroot(lambda e: mpmath.log(1.5) - mpmath.digamma((1 - e) / 2), 4.0)
        assert abs(r.location - float(ref)) < 1e-10


class TestZeroFieldRoots:
    def test_against_mpmath(self):
        roots = zero_field_roots(-3.0, 5)
        for n, x in enumerate(roots):
            ref = mpmath.findroot(lambda e: mpmath.log(1.5) - mpmath.digamma((1 - e) / 2), x)
            assert abs(x - float(ref)) < 1e-12
            if n:
                assert 2 * n - 1 < x < 2 * n + 1

    def test_frozen_values(self):
        ref = [-2.946740703565799, 1.917755414675555, 4.063234150457199, 6.14364583345835]
        assert np.allclose(zero_field_roots(-3.0, 4), ref, rtol=0, atol=1e-12)

    def test_ground_state_matches_free_limit(self):
        # deep binding: ground state -> E_B, excited states -> 2n - 1 from above
        roots = zero_field_roots(-200.0, 2)
        assert roots[0] == pytest.approx(-200.0, rel=2e-3)


class TestFixedIm:
    def test_recovers_resonance(self):
        r = solve_fixed_im(-1e-4, REF_EB, 3.07, 0.26)
        x, f = r.location
        assert abs(x - REF_RE) < 1e-6
        assert abs(f - REF_F) < 1e-6

    def test_root_satisfies_denominator(self):
        r = solve_fixed_im(-1e-4, -3.0, 3.03, 0.2)
        x, f = r.location
        assert abs(d_field(complex(x, -1e-4), -3.0, f).value) < 1e-10

    @pytest.mark.parametrize("args", [(1e-4, -2.0, 3.0, 0.2), (-1e-4, 2.0, 3.0, 0.2), (-1e-4, -2.0, 3.0, -0.2)])
    def test_rejects(self, args):
        with pytest.raises(DomainError):
            solve_fixed_im(*args)


class TestScan:
    def test_zero_field_minimum(self):
        seeds = grid_scan((1.05, 2.95), (-0.5, 0.5), -3.0, (16, 16), mode="im", f_tilde=0.0)
        assert len(seeds) == 1
        assert abs(seeds[0].re_e - 1.9178) < 0.15

    def test_empty_window(self):
        assert grid_scan((-0.8, -0.2), (-0.3, 0.3), -3.0, (12, 12), mode="im", f_tilde=0.0) == []

    def test_grid_includes_endpoints(self):
        g = evaluate_grid((2.0, 4.0), (0.1, 0.3), -3.0, (9, 8), im_e=-1e-4)
        assert g.xs[0] == 2.0 and g.xs[-1] == 4.0
        assert g.ys[0] == 0.1 and g.ys[-1] == 0.3
        assert g.magnitude.shape[0] * g.magnitude.shape[1] == 72

    def test_minima_on_synthetic_grid(self):
        g = evaluate_grid((2.0, 4.0), (0.1, 0.3), -3.0, (9, 8), im_e=-1e-4)
        xs, ys = np.meshgrid(g.xs, g.ys, indexing="ij")
        mag = np.hypot(xs - 2.5, ys - 0.2)
        if mag.shape != g.magnitude.shape:
            mag = mag.T
        found = grid_minima(type(g)(g.xs, g.ys, mag, g.failed))
        assert len(found) == 1
        assert found[0].re_e == 2.5

    def test_too_small_grid(self):
        with pytest.raises((DomainError, ValueError)):
            grid_scan((2.0, 4.0), (0.1, 0.3), -3.0, (4, 4), im_e=-1e-4)

    def test_failed_scan(self):
        # every cell sits outside the supported energy box
        with pytest.raises(ScanError):
            evaluate_grid((2000.0, 3000.0), (0.1, 0.3), -3.0, (8, 8), im_e=-1e-4)
