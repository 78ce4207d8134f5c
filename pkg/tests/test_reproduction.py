import warnings

import numpy as np
import pytest

from conftest import W0
from temfri.kernels import convolve_box, make_bspline, make_espline
from temfri.reproduction import (KnotFreeInterval, ReproductionError, exact_coefficients,
                                 find_knot_free_interval, lsq_coefficients)

QUAD = [1j * np.pi / 3, -1j * np.pi / 3, 1j * np.pi / 6, -1j * np.pi / 6]


def shifted(kernel, shifts):
    return tuple(kernel.shifted(s) for s in shifts)


class TestLinearBSpline:
    def test_closed_form_coefficients(self):
        t0, t1 = 1.3, 1.75
        k = make_bspline(1)
        interval = KnotFreeInterval(t1 - 1, t0, shifted(k, [t0, t1]))
        res = exact_coefficients(interval, degrees=(0, 1))
        assert res.coefs[0] == pytest.approx([1 / (t0 - t1), 1 / (t1 - t0)], abs=1e-12)
        assert res.coefs[1] == pytest.approx([t1 / (t0 - t1), t0 / (t1 - t0)], abs=1e-12)

    def test_locality_of_coefficients(self):
        # shifts {2, 2.625}: constant and ramp on two different intervals
        k = make_bspline(1)
        kernels = shifted(k, [2.0, 2.625])
        first = exact_coefficients(KnotFreeInterval(0.625, 1.0, kernels), degrees=(0, 1))
        second = exact_coefficients(KnotFreeInterval(1.0, 1.625, kernels), degrees=(0, 1))
        for res in (first, second):
            t = res.interval.probes(1000)
            assert np.max(np.abs(res.reproduce(t) - np.vstack([np.ones_like(t), t]))) < 1e-12
        assert not np.allclose(first.coefs, second.coefs)

    def test_knot_inside_is_named(self):
        k = make_bspline(1)
        with pytest.raises(ReproductionError, match="knot at 1"):
            exact_coefficients(KnotFreeInterval(0.7, 1.3, shifted(k, [2.0, 2.625])),
                               degrees=(0,))


class TestExponentials:
    @pytest.mark.parametrize("gammas,length", [([1j * W0, -1j * W0], 2), (QUAD, 4)])
    def test_residual_on_knot_free_interval(self, gammas, length, rng):
        k = make_espline(gammas, length)
        P = len(gammas)
        h = length / P
        done = 0
        while done < 20:
            shifts = np.sort(rng.uniform(0, 0.9 * h, P)) + 3.0
            if np.min(np.diff(shifts)) <= 0.02 * h:
                continue
            done += 1
            interval = find_knot_free_interval([shifts[0], shifts[-1]], h, shifted(k, shifts))
            res = exact_coefficients(interval, gammas)
            t = interval.probes(1000)
            target = np.exp(np.multiply.outer(np.asarray(gammas), t))
            assert np.max(np.abs(res.reproduce(t) - target)) < 1e-10

    def test_single_shift_single_exponential(self):
        k = make_espline([0.4], 1.0)
        t0 = 2.0
        interval = KnotFreeInterval(1.2, 1.9, (k.shifted(t0),))
        res = exact_coefficients(interval, [0.4])
        for t in (1.3, 1.5, 1.8):
            assert res.coefs[0, 0] == pytest.approx(np.exp(0.4 * t) / k(t - t0), rel=1e-12)

    def test_coincident_shifts_degenerate(self):
        k = make_espline(QUAD, 4)
        kernels = shifted(k, [3.0, 3.0, 3.1, 3.2])
        with pytest.raises(ReproductionError, match="degenerate|singular"):
            exact_coefficients(KnotFreeInterval(2.25, 2.95, kernels), QUAD)

    def test_extra_shifts_give_minimum_norm(self, rng):
        k = make_espline([1j * W0, -1j * W0], 2)
        shifts = [3.0, 3.2, 3.5]
        interval = find_knot_free_interval([3.0, 3.5], 1.0, shifted(k, shifts))
        res = exact_coefficients(interval, [1j * W0, -1j * W0])
        assert res.residual < 1e-10
        assert res.coefs.shape == (2, 3)

    def test_continuous_in_shifts(self):
        k = make_espline(QUAD, 4)
        base = np.array([3.0, 3.2, 3.45, 3.7])
        ref = exact_coefficients(find_knot_free_interval([3.0, 3.7], 1.0, shifted(k, base)),
                                 QUAD).coefs
        moved = base + np.array([0, 1e-6, 0, 0])
        got = exact_coefficients(find_knot_free_interval([3.0, 3.7], 1.0, shifted(k, moved)),
                                 QUAD).coefs
        assert np.max(np.abs(got - ref)) < 1e-3 * np.max(np.abs(ref))

    def test_uniform_shifts_are_a_special_case(self):
        # Strang-Fix weights exp(gamma n) for integer shifts
        k = make_espline([0.3j, -0.3j], 2)
        shifts = np.arange(-1, 4)
        interval = KnotFreeInterval(1.05, 1.95, shifted(k, shifts))
        t = interval.probes(1000)
        direct = sum(np.exp(0.3j * n) * k.evaluate(t - n) for n in shifts)
        ratio = direct / np.exp(0.3j * t)
        assert np.max(np.abs(ratio - ratio[0])) < 1e-12
        res = exact_coefficients(interval, [0.3j])
        assert res.residual < 1e-10


class TestLeastSquares:
    def test_matches_exact_path_when_in_span(self):
        k = make_espline(QUAD, 4)
        shifts = [3.0, 3.2, 3.45, 3.7]
        interval = find_knot_free_interval([3.0, 3.7], 1.0, shifted(k, shifts))
        exact = exact_coefficients(interval, QUAD)
        approx = lsq_coefficients(interval, QUAD)
        scale = np.max(np.abs(exact.coefs))
        assert np.max(np.abs(exact.coefs - approx.coefs)) < 1e-8 * scale
        assert approx.residual < 1e-10

    def test_scalar_projection(self):
        k = make_bspline(3)
        interval = KnotFreeInterval(0.3, 1.1, (k.shifted(2.0),))
        res = lsq_coefficients(interval, [0.5j])
        t = np.linspace(0.3, 1.1, 200001)
        phi = k(t - 2.0)
        target = np.exp(0.5j * t)
        expected = np.trapezoid(target * phi, t) / np.trapezoid(phi * phi, t)
        assert res.coefs[0, 0] == pytest.approx(expected, rel=1e-8)

    def test_cubic_bspline_with_boxes(self):
        # four box-convolved cubic B-spline shifts reproducing exp(+-j pi/8 t)
        k = make_bspline(3)
        times = [1.4, 1.45, 1.5, 1.56, 1.6]
        kernels = tuple(convolve_box(k, b - a).shifted(a) for a, b in zip(times, times[1:]))
        interval = KnotFreeInterval(times[-1] - 1, times[0], kernels)
        res = lsq_coefficients(interval, [1j * np.pi / 8, -1j * np.pi / 8])
        assert res.mse < 1e-11
        assert not res.warnings

    def test_ill_conditioned_gram_warns(self):
        k = make_bspline(3)
        kernels = (k.shifted(2.0), k.shifted(2.0 + 1e-9))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            res = lsq_coefficients(KnotFreeInterval(0.5, 1.5, kernels), [0.3j])
        assert res.warnings and any("ill-conditioned" in str(w.message) for w in caught)


class TestKnotFreeInterval:
    def test_crossing_single_dirac(self):
        t1, t2 = 2.3, 2.9
        interval = find_knot_free_interval([t1, t2], 1.0)
        assert (interval.lo, interval.hi) == pytest.approx((t2 - 1, t1))

    def test_if_single_dirac(self):
        t1, t2, t3 = 2.3, 2.5, 2.9
        interval = find_knot_free_interval([t1, t2, t3], 1.0)
        assert (interval.lo, interval.hi) == pytest.approx((t3 - 1, t1))

    def test_empty(self):
        with pytest.raises(ReproductionError, match="empty"):
            find_knot_free_interval([2.0, 3.0], 1.0)
        with pytest.raises(ReproductionError):
            KnotFreeInterval(1.0, 1.0)

    def test_probe_count(self):
        assert len(KnotFreeInterval(0, 1).probes(1000)) == 1000
        assert KnotFreeInterval(0, 1).contains(0.5) and not KnotFreeInterval(0, 1).contains(1.0)
