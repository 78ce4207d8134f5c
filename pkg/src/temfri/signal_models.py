"""Input signal classes, random generators, filtering and additive noise."""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import oaconvolve

from .kernels import convolve_pulse


@dataclass(frozen=True)
class DiracStream:
    """Weighted Diracs ``sum_k x_k delta(t - tau_k)`` with increasing locations."""

    taus: tuple
    amps: tuple

    def __post_init__(self):
        taus = tuple(float(t) for t in self.taus)
        amps = tuple(float(a) for a in self.amps)
        if len(taus) != len(amps):
            raise ValueError("taus and amps must have the same length")
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise ValueError("Dirac locations must be strictly increasing")
        if any(a == 0 for a in amps):
            raise ValueError("Dirac amplitudes must be nonzero")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "amps", amps)

    def __len__(self):
        return len(self.taus)

    @classmethod
    def from_pairs(cls, pairs):
        pairs = sorted(pairs)
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    def scaled(self, c):
        return DiracStream(self.taus, tuple(c * a for a in self.amps))

    def to_json(self):
        return {"diracs": [{"tau": t, "x": a} for t, a in zip(self.taus, self.amps)]}

    @classmethod
    def from_json(cls, data):
        if isinstance(data, str):
            data = json.loads(data)
        return cls.from_pairs([(d["tau"], d["x"]) for d in data["diracs"]])


@dataclass(frozen=True)
class BurstSequence:
    """Bursts of ``K`` Diracs separated by more than ``L``."""

    bursts: tuple
    length: float

    def __post_init__(self):
        for a, b in zip(self.bursts, self.bursts[1:]):
            if b.taus[0] - a.taus[-1] <= self.length:
                raise ValueError("bursts must be separated by more than L")

    @property
    def spreads(self):
        return [b.taus[-1] - b.taus[0] for b in self.bursts]

    def stream(self):
        taus = [t for b in self.bursts for t in b.taus]
        amps = [a for b in self.bursts for a in b.amps]
        return DiracStream(tuple(taus), tuple(amps))


@dataclass(frozen=True)
class PulseStream:
    """Dirac stream convolved with a pulse ``g``."""

    diracs: DiracStream
    pulse: object

    def check(self, length):
        if 2 * self.pulse.eps >= length / 2:
            raise ValueError("pulse support 2*eps must be below L/2")


@dataclass(frozen=True)
class PiecewiseConstant:
    """Piecewise constant signal: ``base`` plus a jump ``z_k`` at each ``tau_k``."""

    jumps: DiracStream
    base: float = 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, self.base)
        for tau, z in zip(self.jumps.taus, self.jumps.amps):
            out = out + z * (t >= tau)
        return out

    def derivative(self):
        return self.jumps


@dataclass(frozen=True)
class NoiseSpec:
    """White Gaussian noise on a dense grid."""

    sigma: float
    seed: int = 0
    step: float = 1e-4

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")


class FilteredInput:
    """Exact filtered input ``f(t) = sum_k x_k phi(tau_k - t)`` and its running integral.

    Parameters
    ----------
    diracs : DiracStream
    kernel : SplineKernel
        Anti-causal kernel; a Dirac at ``tau`` influences ``f`` on
        ``[tau - hi, tau - lo]`` where ``[lo, hi]`` is the kernel support.
    """

    def __init__(self, diracs, kernel):
        self.diracs = diracs
        self.kernel = kernel
        self.response = kernel.reflected()
        self.primitive = self.response.cumulative()
        self._taus = np.asarray(diracs.taus)
        self._amps = np.asarray(diracs.amps)

    @property
    def support(self):
        lo, hi = self.response.support
        if not len(self._taus):
            return (0.0, 0.0)
        return (self._taus[0] + lo, self._taus[-1] + hi)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for tau, x in zip(self._taus, self._amps):
            out += x * self.response(t - tau)
        return out

    def integral(self, t):
        """``int_{-inf}^t f``."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for tau, x in zip(self._taus, self._amps):
            out += x * self.primitive(t - tau)
        return out


def filtered_input(x, kernel, t):
    """Evaluate ``sum_k x_k kernel(tau_k - t)`` exactly.

    Examples
    --------
    >>> import numpy as np
    >>> from temfri.kernels import make_espline
    >>> k = make_espline([1j * np.pi / 3, -1j * np.pi / 3], 2)
    >>> round(float(filtered_input(DiracStream((0.0,), (1.0,)), k, 1.0)), 5)
    0.82699
    """
    return FilteredInput(x, kernel)(t)


def pulse_kernel(kernel, pulse):
    """Kernel seen by the Diracs of a pulse stream."""
    return convolve_pulse(kernel, pulse)


def signal_power(values):
    return float(np.mean(np.asarray(values) ** 2))


def snr_db(signal_values, sigma):
    """``10 log10(P_signal / sigma^2)``."""
    return 10.0 * np.log10(signal_power(signal_values) / sigma ** 2)


def add_noise(values, spec, rng=None):
    """Add i.i.d. ``N(0, sigma^2)`` samples to a waveform on its grid.

    Parameters
    ----------
    values : array_like
        Waveform samples.
    spec : NoiseSpec
    rng : numpy.random.Generator, optional
        Overrides ``spec.seed``.

    Returns
    -------
    ndarray
    """
    values = np.asarray(values, dtype=float)
    if spec.sigma == 0:
        return values.copy()
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    return values + rng.normal(0.0, spec.sigma, values.shape)


def noise_filtered(noise, kernel, step):
    """Noise as seen after the sampling filter.

    The noise is a sampled waveform on a grid of ``step``; the result is
    ``int n(a) kernel(a - t) da`` on the same grid, computed as an FFT
    correlation with the kernel tabulated at the grid spacing.
    """
    lo, hi = kernel.support
    j_lo, j_hi = int(np.floor(lo / step)), int(np.ceil(hi / step))
    taps = kernel(np.arange(j_lo, j_hi + 1) * step)
    # f(t_i) = step * sum_j n_j k(t_j - t_i) = step * sum_d n_{i+d} k(d step)
    full = oaconvolve(np.asarray(noise, dtype=float), taps[::-1], mode="full") * step
    # full[i + j_hi] = step * sum_d n_{i+d} k(d step)
    return full[j_hi:j_hi + len(noise)]


def random_stream(rng, count, start, min_gap, max_gap, amp_low=1.0, amp_high=2.0,
                  random_sign=False):
    """Dirac stream with gaps drawn in ``[min_gap, max_gap]`` and uniform amplitudes."""
    gaps = rng.uniform(min_gap, max_gap, count)
    taus = start + np.cumsum(gaps) - gaps[0]
    amps = rng.uniform(amp_low, amp_high, count)
    if random_sign:
        amps *= rng.choice([-1.0, 1.0], count)
    return DiracStream(tuple(taus), tuple(amps))


def random_bursts(rng, n_bursts, K, length, spread, start=0.0, gap=None, amp_low=1.0,
                  amp_high=2.0, gaussian=False):
    """Bursts of ``K`` Diracs spanning exactly ``spread`` seconds each.

    Inner Dirac locations are uniform inside the burst; consecutive bursts
    start ``gap`` apart (default ``L + spread + 1``).
    """
    gap = length + spread + 1.0 if gap is None else gap
    bursts = []
    for b in range(n_bursts):
        first = start + b * gap
        inner = np.sort(rng.uniform(0.0, spread, K - 2)) if K > 2 else np.zeros(0)
        offsets = np.concatenate([[0.0], inner, [spread]]) if K > 1 else np.zeros(1)
        if gaussian:
            amps = rng.normal(0.0, 1.0, K)
        else:
            amps = rng.uniform(amp_low, amp_high, K)
        bursts.append(DiracStream(tuple(first + offsets), tuple(amps)))
    return BurstSequence(tuple(bursts), length)
