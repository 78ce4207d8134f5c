"""Decoders turning spike trains back into Diracs, bursts, pulses and jumps.

Every decoder follows the same recipe. It picks the spikes that follow an
event, builds the kernels seen by their samples, and checks that these
kernels have no knot on the interval that must hold the event. It then
combines the samples into moments of the reproduced exponentials and
solves for locations and amplitudes with Prony's method.
"""

from dataclasses import dataclass, field

import numpy as np

from .kernels import convolve_box, make_espline
from .reproduction import (ReproductionError, exact_coefficients, find_knot_free_interval,
                           lsq_coefficients)
from .signal_models import BurstSequence, DiracStream, FilteredInput, PiecewiseConstant
from .spectral import SpectralError, cadzow, prony, rank_probe, unwrap_locations
from .tem import sample_kernels


class DecodeError(RuntimeError):
    """A decoder could not produce an estimate."""


@dataclass
class Estimate:
    """Recovered events.

    Attributes
    ----------
    bursts : list of dict
        One entry per decoded event with ``taus``, ``amps``, ``interval`` and
        ``diagnostics``.
    errors : list of str
        Problems met while decoding; empty on success.
    """

    bursts: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.errors

    @property
    def taus(self):
        return np.array([t for b in self.bursts for t in b["taus"]])

    @property
    def amps(self):
        return np.array([a for b in self.bursts for a in b["amps"]])

    def stream(self):
        order = np.argsort(self.taus)
        return DiracStream(tuple(self.taus[order]), tuple(self.amps[order]))

    def bursts_sequence(self, length):
        return BurstSequence(tuple(DiracStream(tuple(b["taus"]), tuple(b["amps"]))
                                   for b in self.bursts), length)

    def piecewise(self, base=0.0):
        return PiecewiseConstant(self.stream(), base)

    def to_json(self):
        def clean(v):
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, (list, tuple, np.ndarray)):
                return [clean(x) for x in v]
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            return v
        return {"bursts": clean(self.bursts), "errors": list(self.errors)}


@dataclass
class Channel:
    """One acquisition channel: its spikes, the kernel seen by the Diracs and its frequencies."""

    train: object
    kernel: object
    omegas: np.ndarray

    def __post_init__(self):
        self.omegas = np.asarray(self.omegas, dtype=float)


@dataclass(frozen=True)
class Ladder:
    """Frequencies ``omega0 + step * p`` shared by all moments."""

    omega0: float
    step: float

    def index(self, omega):
        return int(round((omega - self.omega0) / self.step))


@dataclass
class ChannelBank:
    """Kernels of an ``M``-channel system sharing one symmetric frequency ladder.

    With ``N = M * per_channel`` ladder frequencies ``omega0 + lambda p``,
    ``lambda = -2 omega0 / (N - 1)``, channel ``m`` reproduces the pairs
    ``p`` and ``N - 1 - p`` for ``p`` in ``[m h, (m + 1) h)``,
    ``h = per_channel / 2``. For ``per_channel = 2`` channel ``m`` holds
    ``+-(omega0 + lambda m)``.
    """

    omega0: float
    channels: int
    length: float = 2.0
    per_channel: int = 2

    @property
    def count(self):
        return self.channels * self.per_channel

    @property
    def ladder(self):
        return Ladder(self.omega0, -2.0 * self.omega0 / (self.count - 1))

    def frequencies(self, m):
        h = self.per_channel // 2
        idx = [m * h + i for i in range(h)]
        idx += [self.count - 1 - p for p in reversed(idx)]
        return self.omega0 + self.ladder.step * np.array(idx)

    def kernels(self):
        return [make_espline(1j * self.frequencies(m), self.length) for m in range(self.channels)]


def single_ladder(omegas):
    """Ladder spanned by a kernel's own frequencies (first and second entries)."""
    omegas = np.asarray(omegas, dtype=float)
    return Ladder(omegas[0], omegas[1] - omegas[0])


def solve_moments(values, ladder, order, window, clean=True):
    """Locations and amplitudes from ladder moments ``s_p = sum x_k exp(j w_p tau_k)``.

    Parameters
    ----------
    values : ndarray
        Moments ordered by ladder index ``p = 0, 1, ...``.
    ladder : Ladder
    order : int
        Number of Diracs ``K``.
    window : (float, float)
        Interval known to hold the Diracs; used to unwrap locations.

    Returns
    -------
    taus, amps, diagnostics
    """
    sol = prony(values, order)
    taus = unwrap_locations(sol.roots, ladder.step, window)
    weights = sol.weights * np.exp(-1j * ladder.omega0 * taus)
    order_idx = np.argsort(taus)
    taus, weights = taus[order_idx], weights[order_idx]
    imag = float(np.max(np.abs(weights.imag) / np.maximum(np.abs(weights), 1e-300)))
    diag = {"singular_values": sol.singular_values.tolist(), "rank": sol.rank,
            "imag_ratio": imag, "root_modulus": np.abs(sol.roots).tolist()}
    if clean and imag > 1e-6:
        diag["flag"] = "complex amplitude"
    return taus, weights.real, diag


def _nonzero(train, i, tol):
    return train.kind != "crossing" or abs(train.values[i]) > tol


def _first_after(train, t, tol):
    for i in np.nonzero(train.times > t)[0]:
        if _nonzero(train, i, tol):
            return int(i)
    return None


def _used_indices(train, start, count):
    if train.kind == "crossing":
        idx = list(range(start, start + count))
        spikes = idx
    else:
        idx = list(range(start + 1, start + 1 + count))
        spikes = [start] + idx
    if idx[-1] >= len(train):
        raise DecodeError(f"channel {train.channel}: not enough spikes after t={train.times[start]:.6g}")
    return idx, train.times[spikes]


def channel_moments(channel, start, count, eps=0.0, values=None, approximate=False):
    """Moments of one channel from ``count`` samples after spike ``start``.

    For a crossing train the samples are spikes ``start .. start+count-1``;
    for an integrate-and-fire train spike ``start`` only anchors the first
    used sample. The event must lie in ``(t_last - L/P + eps, t_anchor - eps)``.

    Returns
    -------
    moments : ndarray
        One moment per channel frequency.
    coefficients : ReproductionCoefficients
    indices : list of int
    """
    train, kernel = channel.train, channel.kernel
    idx, spikes = _used_indices(train, start, count)
    kernels = sample_kernels(train, kernel, idx)
    if approximate:
        interval = find_knot_free_interval(spikes, kernel.knot_spacing, (), eps)
        interval = type(interval)(interval.lo, interval.hi, tuple(kernels))
        coeffs = lsq_coefficients(interval, 1j * channel.omegas)
    else:
        interval = find_knot_free_interval(spikes, kernel.knot_spacing, kernels, eps)
        coeffs = exact_coefficients(interval, 1j * channel.omegas)
    y = train.values[idx] if values is None else np.asarray(values)[idx]
    return coeffs.moments(y), coeffs, idx


def merged_moments(channel, anchor, stop, count, eps=0.0):
    """Moments from every sample between spike ``anchor`` and time ``stop``.

    Consecutive integrate-and-fire samples add up to one sample whose box
    spans them all, so the spikes after the anchor are merged into
    ``count`` groups of roughly equal duration. Wide, well separated boxes
    keep the reproduction coefficients small when spikes are dense.

    Returns ``None`` when fewer than ``count`` spikes are available.
    """
    train, kernel = channel.train, channel.kernel
    times = train.times
    last = anchor + int(np.searchsorted(times[anchor + 1:], stop, side="right"))
    if last - anchor < count:
        return None
    t0 = times[anchor]
    edges = t0 + (times[last] - t0) * np.arange(1, count + 1) / count
    ends = np.searchsorted(times[anchor + 1:last + 1], edges[:-1], side="right") + anchor
    ends = np.append(ends, last)
    if np.any(np.diff(np.concatenate([[anchor], ends])) < 1):
        # uneven spikes: fall back to groups of equal size
        ends = anchor + np.round(np.arange(1, count + 1) * (last - anchor) / count).astype(int)
    starts = np.concatenate([[anchor], ends[:-1]])
    kernels = [convolve_box(kernel, times[b] - times[a]).shifted(times[a])
               for a, b in zip(starts, ends)]
    y = np.array([train.values[a + 1:b + 1].sum() for a, b in zip(starts, ends)])
    interval = find_knot_free_interval([t0, times[last]], kernel.knot_spacing, kernels, eps)
    coeffs = exact_coefficients(interval, 1j * channel.omegas)
    return coeffs.moments(y), coeffs, list(range(anchor + 1, last + 1))


def _refine(channels, ladder, order, count, eps, anchors, taus, clean):
    # second pass with wide merged samples, trusted only inside its certified interval
    lead = float(np.min(taus))
    per, intervals = [], []
    for c, a in zip(channels, anchors):
        if c.train.kind == "crossing":
            return None
        margin = 1e-6 * c.kernel.knot_spacing
        got = merged_moments(c, a, lead + c.kernel.knot_spacing - 2 * eps - margin, count, eps)
        if got is None:
            return None
        per.append(got[0])
        intervals.append(got[1].interval)
    window = (max(i.lo for i in intervals), min(i.hi for i in intervals))
    if window[1] <= window[0]:
        return None
    new_taus, amps, diag = solve_moments(_assemble(channels, per, ladder), ladder, order,
                                         window, clean)
    if np.any(new_taus <= window[0]) or np.any(new_taus >= window[1]):
        return None
    return new_taus, amps, diag


def _assemble(channels, per_channel, ladder):
    n = sum(len(c.omegas) for c in channels)
    s = np.full(n, np.nan + 0j)
    for ch, m in zip(channels, per_channel):
        for w, v in zip(ch.omegas, m):
            s[ladder.index(w)] = v
    if np.isnan(s).any():
        raise DecodeError("channel frequencies do not cover the ladder")
    return s


def decode_events(channels, ladder, order, count, skip=0, eps=0.0, support=None,
                  expected=None, max_skips=1, approximate=False, cadzow_iters=0,
                  zero_tol=1e-9, clean=True, min_amp=0.0, resync=False, refine=True):
    """Sequential decoder shared by every pipeline.

    Parameters
    ----------
    channels : list of Channel
    ladder : Ladder
    order : int
        Diracs per event.
    count : int
        Samples per channel per event.
    skip : int
        Extra spikes skipped after the first one following a quiet zone.
    eps : float
        Half-width of a pulse (shrinks the interval on both sides).
    support : float
        Length of the kernel support seen by a Dirac; the next event is
        searched after ``max(tau) + support``.
    expected : int, optional
        Stop after this many events.
    max_skips : int
        How many times the start spike may be advanced when the interval
        comes out empty.
    approximate : bool
        Use least-squares reproduction (arbitrary kernels).
    cadzow_iters : int
        Cadzow iterations applied to the moments before Prony.
    min_amp : float
        Events whose largest amplitude is below this are treated as noise
        and dropped.
    resync : bool
        On a failed event, resume the search after its first spike instead
        of stopping. Meant for noisy trains.
    refine : bool
        For clean integrate-and-fire trains, decode a second time from all
        spikes that the first estimate shows to be usable, merged into
        ``count`` wide samples per channel.

    Returns
    -------
    Estimate
    """
    support = channels[0].kernel.length if support is None else support
    est = Estimate()
    quiet_end = -np.inf
    amp_scale = [max(np.max(np.abs(c.train.values), initial=0.0), 1.0) for c in channels]
    while expected is None or len(est.bursts) < expected:
        starts = [_first_after(c.train, quiet_end, zero_tol * a) for c, a in zip(channels, amp_scale)]
        if any(s is None for s in starts):
            if expected is not None:
                est.errors.append(f"only {len(est.bursts)} of {expected} events found")
            break
        result, last_err = None, None
        for attempt in range(max_skips + 1):
            try:
                per, intervals, used, residuals = [], [], [], []
                for c, s in zip(channels, starts):
                    m, coeffs, idx = channel_moments(c, s + skip + attempt, count, eps,
                                                     approximate=approximate)
                    per.append(m)
                    intervals.append(coeffs.interval)
                    used.append(idx)
                    residuals.append(coeffs.mse if approximate else coeffs.residual)
                window = (max(i.lo for i in intervals), min(i.hi for i in intervals))
                if window[1] <= window[0]:
                    raise ReproductionError("channel intervals do not overlap")
                s = _assemble(channels, per, ladder)
                if cadzow_iters:
                    s = cadzow(s, order, cadzow_iters)
                taus, amps, diag = solve_moments(s, ladder, order, window, clean)
                slack = 1e-9 * max(1.0, abs(window[1]))
                if np.any(taus < window[0] - slack) or np.any(taus > window[1] + slack):
                    # the anchor fired before the event ended; move one spike on
                    raise ReproductionError("estimate outside the certified interval")
                diag.update(reproduction_error=max(residuals),
                            samples=[list(map(int, u)) for u in used], attempt=attempt)
                if refine and clean and not approximate:
                    try:
                        anchors = [i + skip + attempt for i in starts]
                        better = _refine(channels, ladder, order, count, eps, anchors, taus, clean)
                    except (ReproductionError, SpectralError):
                        better = None
                    if better is not None:
                        taus, amps = better[0], better[1]
                        diag["refined"] = True
                result = {"taus": taus.tolist(), "amps": amps.tolist(),
                          "interval": [window[0], window[1]], "diagnostics": diag}
                break
            except (ReproductionError, SpectralError) as err:
                last_err = err
            except DecodeError as err:
                last_err = err
                break
        anchor = max(c.train.times[i] for c, i in zip(channels, starts))
        if result is None:
            est.errors.append(f"event {len(est.bursts) + 1}: {last_err}")
            if not resync:
                break
            quiet_end = anchor
            continue
        if np.max(np.abs(result["amps"])) < min_amp:
            quiet_end = anchor
            continue
        est.bursts.append(result)
        quiet_end = max(result["taus"]) + support
    return est


def _kernel_channel(train, kernel):
    return Channel(train, kernel, kernel.exponents.imag)


def decode_single_dirac_crossing(train, kernel):
    """One Dirac from the first two crossings with a nonzero sample."""
    return decode_events([_kernel_channel(train, kernel)], single_ladder(kernel.exponents.imag),
                         1, 2, expected=1, max_skips=0)


def decode_stream_crossing(train, kernel, expected=None):
    """Diracs separated by more than ``L``, two crossings each."""
    return decode_events([_kernel_channel(train, kernel)], single_ladder(kernel.exponents.imag),
                         1, 2, expected=expected, max_skips=0)


def decode_burst_crossing(trains, bank, order, expected=None):
    """Bursts of ``order`` Diracs from the second and third crossing of every channel."""
    channels = [Channel(tr, k, bank.frequencies(m)) for m, (tr, k) in
                enumerate(zip(trains, bank.kernels()))]
    return decode_events(channels, bank.ladder, order, 2, skip=1, expected=expected,
                         max_skips=0)


def decode_single_dirac_if(train, kernel):
    """One Dirac from the second and third integrate-and-fire samples."""
    return decode_events([_kernel_channel(train, kernel)], single_ladder(kernel.exponents.imag),
                         1, 2, expected=1, max_skips=0)


def decode_stream_if(train, kernel, expected=None, max_skips=1, clean=True, min_amp=0.0,
                     resync=False):
    """Diracs separated by more than ``L``; the first spike after each quiet zone only anchors."""
    return decode_events([_kernel_channel(train, kernel)], single_ladder(kernel.exponents.imag),
                         1, 2, expected=expected, max_skips=max_skips, clean=clean,
                         min_amp=min_amp, resync=resync)


def decode_pulse_stream_if(train, kernel, expected=None):
    """Dirac stream behind a pulse stream; ``kernel`` is the pulse-convolved kernel."""
    eps = kernel.params.get("eps", 0.0)
    return decode_events([_kernel_channel(train, kernel)], single_ladder(kernel.exponents.imag),
                         1, 2, eps=eps, support=kernel.length + 2 * eps,
                         expected=expected, max_skips=1)


def decode_burst_if(trains, bank, order, expected=None):
    """Bursts from samples three and four after each burst on every channel.

    The first spike after a quiet zone may fire before the burst is over;
    the second is anchored after it.
    """
    channels = [Channel(tr, k, bank.frequencies(m)) for m, (tr, k) in
                enumerate(zip(trains, bank.kernels()))]
    return decode_events(channels, bank.ladder, order, 2, skip=1, expected=expected,
                         max_skips=0)


def decode_burst_if_single_channel(train, kernel, order, expected=None):
    """Bursts from ``P`` consecutive samples of one channel with an order-``P`` kernel."""
    omegas = kernel.exponents.imag
    return decode_events([_kernel_channel(train, kernel)], single_ladder(omegas), order,
                         len(omegas), skip=1, expected=expected, max_skips=1)


def decode_piecewise_constant(train, kernel, order=1, base=0.0, expected=None, max_skips=1,
                              clean=True, min_amp=0.0, resync=False):
    """Jumps of a piecewise constant signal seen through the derivative filter.

    ``kernel`` is the E-spline whose derivative filtered the signal; the
    jumps behave as Diracs seen through the E-spline itself.
    """
    omegas = kernel.exponents.imag
    est = decode_events([_kernel_channel(train, kernel)], single_ladder(omegas), order,
                        len(omegas), expected=expected, max_skips=max_skips, clean=clean,
                        min_amp=min_amp, resync=resync)
    for b in est.bursts:
        b["diagnostics"]["base"] = base
    return est


def decode_arbitrary_kernel(trains, kernels, bank, order, samples=4, cadzow_iters=20,
                            expected=None):
    """Bursts seen through kernels that only approximately reproduce exponentials."""
    channels = [Channel(tr, k, bank.frequencies(m)) for m, (tr, k) in
                enumerate(zip(trains, kernels))]
    return decode_events(channels, bank.ladder, order, samples, expected=expected,
                         max_skips=0, approximate=True, cadzow_iters=cadzow_iters,
                         clean=False)


def decode_opposite_sign_burst(trains, bank, rank_tol_noisy=False):
    """Burst of two Diracs of arbitrary signs seen by two channels.

    Moments from samples two and three of each channel decide the path: if
    their matrix has rank one, only the first Dirac has been seen, so it is
    decoded, its contribution is removed from later samples and the second
    Dirac is decoded from the residual. Otherwise samples four and five
    carry both Diracs and the burst decoder is used.
    """
    kernels = bank.kernels()
    channels = [Channel(tr, k, bank.frequencies(m)) for m, (tr, k) in
                enumerate(zip(trains, kernels))]
    ladder = bank.ladder
    est = Estimate()
    starts = [_first_after(c.train, -np.inf, 0.0) for c in channels]
    if any(s is None for s in starts):
        est.errors.append("a channel produced no spikes")
        return est
    try:
        per, intervals = [], []
        for c, s in zip(channels, starts):
            m, coeffs, _ = channel_moments(c, s, 2)
            per.append(m)
            intervals.append(coeffs.interval)
        s_first = _assemble(channels, per, ladder)
        rank = rank_probe(s_first, 2, noisy=rank_tol_noisy)
        if rank <= 1:
            window = (max(i.lo for i in intervals), min(i.hi for i in intervals))
            tau1, amp1, _ = solve_moments(s_first, ladder, 1, window)
            per2, intervals2 = [], []
            first = DiracStream((float(tau1[0]),), (float(amp1[0]),))
            for c, s in zip(channels, starts):
                # y_i minus the integral of the first Dirac's response over (t_{i-1}, t_i)
                edges = np.concatenate([[c.train.start], c.train.times])
                seen = np.diff(FilteredInput(first, c.kernel).integral(edges))
                resid = c.train.values - seen
                scale = max(np.max(np.abs(c.train.values)), 1.0)
                hits = np.nonzero(np.abs(resid[s + 3:]) > 1e-7 * scale)[0]
                if not hits.size:
                    raise DecodeError("second Dirac left no residual samples")
                hit = s + 3 + int(hits[0])
                m, coeffs, _ = channel_moments(c, hit, 2, values=resid)
                per2.append(m)
                intervals2.append(coeffs.interval)
            window2 = (max(i.lo for i in intervals2), min(i.hi for i in intervals2))
            tau2, amp2, _ = solve_moments(_assemble(channels, per2, ladder), ladder, 1, window2)
            taus = np.concatenate([tau1, tau2])
            amps = np.concatenate([amp1, amp2])
            path = "rank1"
        else:
            per, intervals = [], []
            for c, s in zip(channels, starts):
                m, coeffs, _ = channel_moments(c, s + 2, 2)
                per.append(m)
                intervals.append(coeffs.interval)
            window = (max(i.lo for i in intervals), min(i.hi for i in intervals))
            taus, amps, _ = solve_moments(_assemble(channels, per, ladder), ladder, 2, window)
            path = "rank2"
        order_idx = np.argsort(taus)
        est.bursts.append({"taus": taus[order_idx].tolist(), "amps": amps[order_idx].tolist(),
                           "interval": None, "diagnostics": {"rank": rank, "path": path}})
    except (DecodeError, ReproductionError, SpectralError, IndexError) as err:
        est.errors.append(str(err))
    return est


# sufficient conditions on the reference and on the trigger mark

def primitive_near_zero(kernel, x):
    """``int_0^x kernel(-t) dt``."""
    return kernel.integral(-x, 0.0)


def crossing_conditions(cfg, kernel, amp_max, order=1, spread=0.0):
    """Violated hypotheses of the crossing decoders (empty list when all hold)."""
    L = kernel.length
    out = []
    if not cfg.amplitude > order * amp_max:
        out.append(f"reference amplitude {cfg.amplitude} <= {order} * max |x| = {order * amp_max}")
    bound = 2 * L / (5 if order == 1 else 7)
    if not cfg.period < bound:
        out.append(f"reference period {cfg.period:.6g} >= {bound:.6g}")
    w0 = np.max(np.abs(kernel.exponents.imag))
    if w0 > np.pi / L + 1e-12:
        out.append(f"frequency {w0:.6g} > pi/L")
    if order > 1 and not spread < cfg.period / 2:
        out.append(f"burst spread {spread} >= T_s/2")
    return out


def single_dirac_if_bound(kernel, amp_min):
    """Largest trigger mark guaranteeing three spikes within ``L/2`` of a lone Dirac."""
    return amp_min / 3 * primitive_near_zero(kernel, kernel.length / 2)


def stream_if_bound(kernel, amp_min):
    """Largest trigger mark for a Dirac stream (first spike after a quiet zone dropped)."""
    return amp_min / 4 * primitive_near_zero(kernel, kernel.length / 2)


def burst_if_window(kernels, order, amp_min, amp_max, spread):
    """``(lower, upper)`` trigger-mark window for multichannel burst decoding.

    The lower bound keeps the first ``K-1`` Diracs from firing before the
    last one; the upper bound places two usable samples within ``L/2 - spread``.
    Both are taken over all channels.
    """
    lower = max((order - 1) * amp_max * primitive_near_zero(k, spread) for k in kernels)
    upper = min(order * amp_min / 5 * primitive_near_zero(k, k.length / 2 - spread)
                for k in kernels)
    return lower, upper


def single_channel_burst_window(kernel, order, amp_min, amp_max, spread):
    """``(lower, upper)`` trigger-mark window for single-channel burst decoding."""
    P = kernel.order
    lower = (order - 1) * amp_max * primitive_near_zero(kernel, spread)
    upper = order * amp_min / (P + 3) * primitive_near_zero(kernel, kernel.knot_spacing)
    return lower, upper


def single_channel_burst_safe_bound(kernel, order, amp_min, spread):
    """Trigger mark that leaves ``P + 3`` spikes before ``tau_1 + L/P`` for any burst.

    Unlike :func:`single_channel_burst_window`, the later Diracs of a burst
    are only credited with the part of their response that falls before
    ``tau_1 + L/P``, so the guarantee also holds when the burst spread is
    a sizeable fraction of ``L/P``.
    """
    h = kernel.knot_spacing
    seen = primitive_near_zero(kernel, h) + (order - 1) * primitive_near_zero(kernel, h - spread)
    return amp_min * seen / (kernel.order + 3)


def piecewise_bound(kernel, amp_min):
    """Largest trigger mark for jumps seen through the derivative of an order-``P`` E-spline."""
    return amp_min / (kernel.order + 2) * primitive_near_zero(kernel, kernel.knot_spacing)


def pulse_window(pulse_kernel, amp_min, amp_max=1.0):
    """``(lower, upper)`` trigger-mark window for a pulse stream.

    The lower bound keeps the first spike after the pulse support; it is
    scaled by ``amp_max`` since a larger Dirac fills the integrator faster.
    """
    eps = pulse_kernel.params.get("eps", 0.0)
    L = pulse_kernel.length
    lower = amp_max * pulse_kernel.integral(-eps, eps)
    upper = amp_min / 4 * pulse_kernel.integral(eps - L / 2, eps)
    return lower, upper


def pulse_width_feasible(pulse_kernel):
    """Whether some trigger mark fits the pulse window for equal amplitudes."""
    lower, upper = pulse_window(pulse_kernel, 1.0, 1.0)
    return lower < upper
