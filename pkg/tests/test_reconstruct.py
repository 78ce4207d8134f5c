import warnings

import numpy as np
import pytest

from conftest import W0
from temfri.kernels import convolve_pulse, cos2_pulse, make_bspline, make_espline, parse_kernel
from temfri.reconstruct import (ChannelBank, Estimate, burst_if_window, crossing_conditions,
                                decode_arbitrary_kernel, decode_burst_crossing, decode_burst_if,
                                decode_burst_if_single_channel, decode_opposite_sign_burst,
                                decode_piecewise_constant, decode_pulse_stream_if,
                                decode_single_dirac_crossing, decode_single_dirac_if,
                                decode_stream_crossing, decode_stream_if, piecewise_bound,
                                pulse_width_feasible, pulse_window,
                                single_channel_burst_safe_bound, single_channel_burst_window,
                                single_dirac_if_bound, stream_if_bound)
from temfri.signal_models import DiracStream, FilteredInput, random_bursts
from temfri.tem import CrossingConfig, IntegrateFireConfig, encode_crossing, encode_if

PAIR = [1j * W0, -1j * W0]


@pytest.fixture
def kernel():
    return make_espline(PAIR, 2)


def crossing(x, k, cfg, tail=3.0):
    return encode_crossing(FilteredInput(x, k), cfg, (0.0, x.taus[-1] + tail))


def integrate(x, k, ct, tail=3.0):
    return encode_if(FilteredInput(x, k), IntegrateFireConfig(ct), (0.0, x.taus[-1] + tail))


def errors(x, est):
    assert len(est.taus) == len(x), est.errors
    return (np.max(np.abs(np.sort(est.taus) - np.array(x.taus))),
            np.max(np.abs(est.amps[np.argsort(est.taus)] - np.array(x.amps))))


def multichannel(x, kernels, encode):
    trains = []
    for m, k in enumerate(kernels):
        tr = encode(x, k)
        tr.channel = m
        trains.append(tr)
    return trains


class TestSingleDiracCrossing:
    def test_example(self, kernel):
        x = DiracStream((1.3,), (0.8,))
        cfg = CrossingConfig(1.0, 1.3)
        assert crossing_conditions(cfg, kernel, 0.8) == []
        est = decode_single_dirac_crossing(crossing(x, kernel, cfg), kernel)
        assert max(errors(x, est)) < 1e-9

    def test_negative_amplitude(self, kernel):
        x = DiracStream((1.3,), (-0.8,))
        est = decode_single_dirac_crossing(crossing(x, kernel, CrossingConfig(1.0, 1.3)), kernel)
        assert max(errors(x, est)) < 1e-9

    def test_weak_reference_reported(self, kernel):
        problems = crossing_conditions(CrossingConfig(0.5, 1.3), kernel, 0.8)
        assert problems and "reference amplitude" in problems[0]
        assert crossing_conditions(CrossingConfig(1.0, 0.5), kernel, 0.8)[0].startswith(
            "reference period")

    def test_estimate_inside_certified_interval(self, kernel, rng):
        cfg = CrossingConfig(2.1, 1.26)
        for _ in range(50):
            x = DiracStream((rng.uniform(1, 2),), (rng.uniform(0.5, 2),))
            est = decode_single_dirac_crossing(crossing(x, kernel, cfg), kernel)
            lo, hi = est.bursts[0]["interval"]
            assert lo < est.taus[0] < hi


class TestStreamCrossing:
    def test_three_diracs(self, kernel):
        x = DiracStream((1.2, 3.9, 6.5), (1.0, -1.5, 0.7))
        cfg = CrossingConfig(2.1, 1.26)
        est = decode_stream_crossing(crossing(x, kernel, cfg), kernel, expected=3)
        assert max(errors(x, est)) < 1e-8

    def test_empty_stream(self, kernel):
        cfg = CrossingConfig(2.1, 1.26)
        tr = encode_crossing(lambda t: np.zeros(np.shape(t)), cfg, (0.0, 5.0))
        est = decode_stream_crossing(tr, kernel)
        assert len(tr) > 0 and len(est.taus) == 0

    def test_spacing_boundary(self, kernel):
        cfg = CrossingConfig(2.1, 1.26)
        wide = DiracStream((1.2, 3.3), (1.0, 1.2))
        est = decode_stream_crossing(crossing(wide, kernel, cfg), kernel, expected=2)
        assert max(errors(wide, est)) < 1e-8
        close = DiracStream((1.2, 2.7), (1.0, 1.2))
        est = decode_stream_crossing(crossing(close, kernel, cfg), kernel, expected=2)
        assert not est.ok and "certified interval" in est.errors[0]


class TestBurstCrossing:
    def test_two_channel_bursts(self, rng):
        bank = ChannelBank(W0, 2, 2.0)
        cfg = CrossingConfig(2.1, 1.76)
        for _ in range(20):
            bs = random_bursts(rng, 2, 2, 2.0, rng.uniform(0.1, 0.2), start=1.0,
                               amp_low=0.5, amp_high=1.0)
            x = bs.stream()
            trains = multichannel(x, bank.kernels(), lambda x, k: crossing(x, k, cfg))
            est = decode_burst_crossing(trains, bank, 2, expected=2)
            assert max(errors(x, est)) < 1e-8

    def test_frequencies_of_bank(self):
        bank = ChannelBank(W0, 2, 2.0)
        assert np.allclose(bank.frequencies(0), [W0, -W0])
        assert np.allclose(bank.frequencies(1), [W0 / 3, -W0 / 3])
        assert bank.ladder.step == pytest.approx(-2 * W0 / 3)

    def test_single_dirac_matches_single_channel_path(self, kernel):
        x = DiracStream((1.3,), (0.8,))
        cfg = CrossingConfig(2.1, 1.76)
        bank = ChannelBank(W0, 1, 2.0)
        tr = crossing(x, kernel, cfg)
        est_bank = decode_burst_crossing([tr], bank, 1, expected=1)
        assert max(errors(x, est_bank)) < 1e-8

    def test_sample_density(self):
        # two crossings per reference period and channel
        cfg = CrossingConfig(2.1, 1.75)
        zero = lambda t: np.zeros(np.shape(t))
        counts = [len(encode_crossing(zero, cfg, (0.0, 100.0))) for _ in range(2)]
        assert sum(counts) / 100.0 == pytest.approx(7.0, abs=0.02)


class TestSingleDiracIF:
    def test_reference_threshold(self, kernel):
        x = DiracStream((1.4,), (1.0,))
        est = decode_single_dirac_if(integrate(x, kernel, 0.15), kernel)
        assert max(errors(x, est)) < 1e-9

    def test_random_sweep(self, kernel, rng):
        ct = 0.9 * single_dirac_if_bound(kernel, 1.0)
        worst = 0.0
        for _ in range(100):
            x = DiracStream((rng.uniform(1, 2),), (rng.uniform(1, 2) * rng.choice([-1, 1]),))
            worst = max(worst, *errors(x, decode_single_dirac_if(integrate(x, kernel, ct), kernel)))
        assert worst < 1e-8

    def test_threshold_too_high(self, kernel):
        x = DiracStream((1.4,), (1.0,))
        est = decode_single_dirac_if(integrate(x, kernel, 0.5), kernel)
        assert not est.ok and "not enough spikes" in est.errors[0]


class TestStreamIF:
    def test_reference_configuration(self, kernel):
        assert stream_if_bound(kernel, 1.0) == pytest.approx(0.11399, abs=1e-5)
        x = DiracStream((1.2, 4.1, 7.3), (1.0, 1.7, 1.3))
        est = decode_stream_if(integrate(x, kernel, 0.11), kernel, expected=3)
        assert max(errors(x, est)) < 1e-8

    def test_quiet_between_diracs(self, kernel):
        x = DiracStream((1.2, 5.1), (1.0, 1.7))
        tr = integrate(x, kernel, 0.11)
        assert not np.any((tr.times > 3.2 + 1e-9) & (tr.times < 5.1))

    def test_threshold_above_bound_is_honest(self, kernel, rng):
        assert 0.12 > stream_if_bound(kernel, 1.0)
        for _ in range(20):
            taus = 1.0 + np.cumsum(rng.uniform(2.5, 3.5, 3))
            x = DiracStream(tuple(taus), tuple(rng.uniform(1, 2, 3)))
            est = decode_stream_if(integrate(x, kernel, 0.12), kernel, expected=3)
            if est.ok:
                assert max(errors(x, est)) < 1e-6
            else:
                assert est.errors

    def test_smaller_threshold_stays_exact(self, kernel):
        x = DiracStream((1.2, 4.1, 7.3), (1.0, 1.7, 1.3))
        for ct in (0.11, 0.05, 0.01):
            est = decode_stream_if(integrate(x, kernel, ct), kernel, expected=3)
            assert max(errors(x, est)) < 1e-8

    def test_concatenation(self, kernel):
        a = DiracStream((1.2, 4.1), (1.0, 1.7))
        b = DiracStream((8.0, 11.2), (1.3, 1.1))
        both = DiracStream(a.taus + b.taus, a.amps + b.amps)
        full = decode_stream_if(integrate(both, kernel, 0.05), kernel)
        first = decode_stream_if(integrate(a, kernel, 0.05), kernel)
        second = decode_stream_if(integrate(b, kernel, 0.05), kernel)
        joined = np.concatenate([first.taus, second.taus])
        assert np.allclose(full.taus, joined, atol=1e-9)


class TestPulses:
    def test_cos2_pulses(self, kernel):
        pk = convolve_pulse(kernel, cos2_pulse(0.2))
        lower, upper = pulse_window(pk, 30, 40)
        assert lower < 0.8 < upper
        x = DiracStream((1.3, 4.3, 7.1), (33.0, 38.0, 31.0))
        est = decode_pulse_stream_if(integrate(x, pk, 0.8), pk, expected=3)
        assert max(errors(x, est)) < 1e-8

    def test_dirac_limit(self, kernel):
        pk = convolve_pulse(kernel, cos2_pulse(0.0))
        x = DiracStream((1.2, 4.1), (1.0, 1.7))
        tr = integrate(x, kernel, 0.1)
        a = decode_pulse_stream_if(tr, pk, expected=2)
        b = decode_stream_if(tr, kernel, expected=2)
        assert np.array_equal(a.taus, b.taus)

    def test_infeasible_width(self, kernel):
        assert pulse_width_feasible(convolve_pulse(kernel, cos2_pulse(0.2)))
        assert not pulse_width_feasible(convolve_pulse(kernel, cos2_pulse(0.45)))


class TestBurstIF:
    def test_reference_window(self):
        kernels = ChannelBank(-W0, 2, 2.0).kernels()
        lower, upper = burst_if_window(kernels, 2, 1.0, 2.0, 0.2)
        assert lower < upper

    def test_exact_below_upper_bound(self, rng):
        bank = ChannelBank(-W0, 2, 2.0)
        kernels = bank.kernels()
        _, upper = burst_if_window(kernels, 2, 1.0, 2.0, 0.2)
        for _ in range(20):
            x = random_bursts(rng, 1, 2, 2.0, 0.2, start=1.0).stream()
            trains = multichannel(x, kernels, lambda x, k: integrate(x, k, 0.9 * upper))
            assert max(errors(x, decode_burst_if(trains, bank, 2, expected=1))) < 1e-8

    def test_empty_window(self):
        kernels = ChannelBank(-W0, 2, 2.0).kernels()
        lower, upper = burst_if_window(kernels, 2, 1.0, 10.0, 0.6)
        assert lower >= upper


class TestSingleChannelBurst:
    def test_two_dirac_burst(self, rng):
        k = make_espline([-1j * W0, -1j * W0 / 3, 1j * W0 / 3, 1j * W0], 4)
        ct = single_channel_burst_safe_bound(k, 2, 1.0, 0.2)
        lower, upper = single_channel_burst_window(k, 2, 1.0, 2.0, 0.2)
        assert lower < ct < upper
        for _ in range(10):
            x = random_bursts(rng, 1, 2, 4.0, 0.2, start=1.0).stream()
            est = decode_burst_if_single_channel(integrate(x, k, ct, 5.0), k, 2, expected=1)
            assert max(errors(x, est)) < 1e-6

    def test_single_dirac_reduces_to_single_dirac_path(self, kernel):
        x = DiracStream((1.4,), (1.2,))
        tr = integrate(x, kernel, 0.1)
        a = decode_burst_if_single_channel(tr, kernel, 1, expected=1)
        b = decode_single_dirac_if(tr, kernel)
        assert max(errors(x, a)) < 1e-9 and max(errors(x, b)) < 1e-9


class TestPiecewise:
    def test_jumps_exact(self):
        k = parse_kernel("espline:P=4,w0=pi/3,L=4")
        jumps = DiracStream((1.3, 6.9, 12.0), (1.5, -2.7, 1.9))
        assert 0.001 < piecewise_bound(k, 1.5)
        est = decode_piecewise_constant(integrate(jumps, k, 0.001, 5.0), k, expected=3)
        assert max(errors(jumps, est)) < 1e-8
        signal = est.piecewise()
        assert signal(7.5) == pytest.approx(1.5 - 2.7, abs=1e-8)

    def test_constant_signal(self):
        k = parse_kernel("espline:P=4,w0=pi/3,L=4")
        tr = encode_if(FilteredInput(DiracStream((), ()), k), IntegrateFireConfig(0.001),
                       (0.0, 10.0))
        est = decode_piecewise_constant(tr, k)
        assert len(tr) == 0 and len(est.taus) == 0

    def test_close_jumps_with_burst_decoder(self, rng):
        k = make_espline([-1j * W0, -1j * W0 / 3, 1j * W0 / 3, 1j * W0], 4)
        jumps = DiracStream((1.3, 1.45), (1.5, 1.2))
        ct = single_channel_burst_safe_bound(k, 2, 1.2, 0.15)
        est = decode_burst_if_single_channel(integrate(jumps, k, ct, 5.0), k, 2, expected=1)
        assert max(errors(jumps, est)) < 1e-6


class TestArbitraryKernel:
    def run(self, kernel, bank, x, ct=0.01, noise=0.0, iters=20, rng=None):
        tr = integrate(x, kernel, ct, 5.0)
        if noise:
            tr.values = tr.values + rng.normal(0.0, noise, len(tr))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return decode_arbitrary_kernel([tr] * bank.channels, [kernel] * bank.channels, bank,
                                           2, cadzow_iters=iters, expected=1)

    def test_cubic_bspline(self, rng):
        k = make_bspline(3)
        bank = ChannelBank(np.pi / 8, 2, k.length, 4)
        x = random_bursts(rng, 1, 2, 4.0, 0.2, start=1.0).stream()
        est = self.run(k, bank, x)
        assert est.bursts[0]["diagnostics"]["reproduction_error"] <= 1e-11
        dt, _ = errors(x, est)
        assert dt ** 2 < 1e-3

    def test_exponential_kernel_matches_exact_path(self):
        k = make_espline([1j * W0, 1j * W0 / 3, -1j * W0 / 3, -1j * W0], 4)
        bank = ChannelBank(W0, 1, 4.0, 4)
        x = DiracStream((1.3, 1.8), (1.2, 1.7))
        approx = self.run(k, bank, x, ct=0.005)
        assert max(errors(x, approx)) < 1e-8

    def test_cadzow_under_noise(self, rng):
        # eight moments for two Diracs leave little room for denoising, so
        # the iterations should change the error only marginally
        k = make_bspline(3)
        bank = ChannelBank(np.pi / 8, 2, k.length, 4)
        off, on = [], []
        for _ in range(20):
            x = random_bursts(rng, 1, 2, 4.0, 0.2, start=1.0).stream()
            seed = int(rng.integers(1 << 30))
            off.append(errors(x, self.run(k, bank, x, noise=1e-9, iters=0,
                                          rng=np.random.default_rng(seed)))[0])
            on.append(errors(x, self.run(k, bank, x, noise=1e-9, iters=20,
                                         rng=np.random.default_rng(seed)))[0])
        assert np.mean(on) < 1.1 * np.mean(off)
        assert np.mean(on) < 1e-2


class TestOppositeSigns:
    def test_same_sign_in_window_always_succeeds(self, rng):
        bank = ChannelBank(W0, 2, 2.0)
        kernels = bank.kernels()
        lower, upper = burst_if_window(kernels, 2, 1.0, 2.0, 0.2)
        for _ in range(30):
            x = DiracStream((1.0, 1.2), tuple(rng.uniform(1, 2, 2)))
            trains = multichannel(x, kernels, lambda x, k: integrate(x, k, 0.9 * upper))
            est = decode_opposite_sign_burst(trains, bank)
            assert max(errors(x, est)) < 1e-6

    def test_opposite_signs_separated(self):
        bank = ChannelBank(W0, 2, 2.0)
        x = DiracStream((1.0, 2.5), (1.3, -0.9))
        trains = multichannel(x, bank.kernels(), lambda x, k: integrate(x, k, 0.001))
        est = decode_opposite_sign_burst(trains, bank)
        assert max(errors(x, est)) < 1e-6
        assert est.bursts[0]["diagnostics"]["path"] == "rank1"


class TestEstimate:
    def test_json_and_views(self):
        est = Estimate([{"taus": [2.0, 1.0], "amps": [np.float64(0.5), 1.0],
                         "interval": [0.5, 2.5], "diagnostics": {"rank": np.int64(2)}}])
        assert est.ok and est.stream().taus == (1.0, 2.0)
        data = est.to_json()
        assert data["bursts"][0]["diagnostics"]["rank"] == 2
        assert type(data["bursts"][0]["diagnostics"]["rank"]) is int
