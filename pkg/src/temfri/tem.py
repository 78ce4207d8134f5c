"""Crossing and integrate-and-fire time encoding machines."""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .kernels import convolve_box


@dataclass(frozen=True)
class CrossingConfig:
    """Sinusoidal reference ``g(t) = A cos(2 pi f_s t + phase)``."""

    amplitude: float
    frequency: float
    phase: float = 0.0

    def __post_init__(self):
        if self.amplitude <= 0 or self.frequency <= 0:
            raise ValueError("reference amplitude and frequency must be positive")

    @property
    def period(self):
        return 1.0 / self.frequency

    @property
    def omega(self):
        return 2 * np.pi * self.frequency

    def reference(self, t):
        return self.amplitude * np.cos(self.omega * np.asarray(t, dtype=float) + self.phase)


@dataclass(frozen=True)
class IntegrateFireConfig:
    """Integrator that fires and resets to zero whenever it reaches ``+-threshold``."""

    threshold: float

    def __post_init__(self):
        if self.threshold <= 0:
            raise ValueError("trigger mark must be positive")


@dataclass
class SpikeTrain:
    """Output of one time encoding machine.

    Attributes
    ----------
    times : ndarray
        Strictly increasing spike times.
    values : ndarray
        Sample value attached to each spike: the reference value for a
        crossing machine, ``+-C_T`` for an integrate-and-fire machine.
    polarity : ndarray
        Sign of each sample.
    start : float
        Time from which an integrator started from zero.
    kind : str
        ``"crossing"`` or ``"if"``.
    """

    times: np.ndarray
    values: np.ndarray
    polarity: np.ndarray
    channel: int = 0
    kind: str = "if"
    start: float = 0.0
    kernel: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.polarity = np.asarray(self.polarity, dtype=int)

    def __len__(self):
        return len(self.times)

    @property
    def gaps(self):
        return np.diff(np.concatenate([[self.start], self.times]))

    def records(self):
        return [{"channel": self.channel, "t": float(t), "y": float(y), "polarity": int(p)}
                for t, y, p in zip(self.times, self.values, self.polarity)]

    def to_jsonl(self):
        return "".join(json.dumps(r) + "\n" for r in self.records())

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.DictWriter(buf, ["channel", "t", "y", "polarity"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.records())
        return buf.getvalue()

    @classmethod
    def from_jsonl(cls, text, kind="if"):
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        channel = rows[0]["channel"] if rows else 0
        return cls([r["t"] for r in rows], [r["y"] for r in rows],
                   [r["polarity"] for r in rows], channel, kind)


def _bisect_roots(fn, lo, hi, flo, tol):
    """Vectorized bisection of ``fn`` on brackets ``[lo, hi]`` with ``sign(fn(lo)) = flo``."""
    lo, hi = lo.copy(), hi.copy()
    for _ in range(200):
        if np.max(hi - lo, initial=0.0) <= tol:
            break
        mid = 0.5 * (lo + hi)
        if np.all((mid == lo) | (mid == hi)):
            break
        fm = fn(mid)
        same = np.sign(fm) == flo
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    return 0.5 * (lo + hi)


def _falsi_roots(fn, lo, hi, flo, fhi, iterations=60):
    """Vectorized Anderson-Bjorck regula falsi on brackets with ``flo * fhi < 0``.

    Runs until every bracket stops shrinking, so roots come out at float
    resolution in far fewer evaluations than bisection.
    """
    lo, hi, flo, fhi = lo.copy(), hi.copy(), flo.copy(), fhi.copy()
    side = np.zeros(len(lo), dtype=int)
    streak = np.zeros(len(lo), dtype=int)
    last = np.full(len(lo), np.inf)
    ratio = np.zeros(len(lo))
    x = 0.5 * (lo + hi)
    active = np.ones(len(lo), dtype=bool)
    for _ in range(iterations):
        if not active.any():
            break
        i = np.nonzero(active)[0]
        a, b, fa, fb = lo[i], hi[i], flo[i], fhi[i]
        xi = b - fb * (b - a) / (fb - fa)
        # a secant step below float resolution from either end means converged
        ulp = 2 * np.spacing(np.abs(b))
        settled = (np.abs(xi - b) <= ulp) | (np.abs(xi - a) <= ulp)
        if settled.any():
            active[i[settled]] = False
            keep = ~settled
            i, a, b, fa, fb, xi = i[keep], a[keep], b[keep], fa[keep], fb[keep], xi[keep]
            if not i.size:
                break
        # a kink near the root makes regula falsi one-sided; bisect then
        bad = ~((xi > a) & (xi < b)) | ((streak[i] >= 2) & (ratio[i] > 0.25))
        xi = np.where(bad, 0.5 * (a + b), xi)
        fx = fn(xi)
        ratio[i] = np.abs(fx) / last[i]
        last[i] = np.abs(fx)
        left = np.sign(fx) == np.sign(fa)
        # Anderson-Bjorck: shrink the stale end when the same side moves twice
        with np.errstate(divide="ignore", invalid="ignore"):
            m = np.where(left, 1 - fx / fa, 1 - fx / fb)
        m = np.where((m > 0) & np.isfinite(m), m, 0.5)
        fhi[i] = np.where(left & (side[i] == 1), m * fb, fhi[i])
        flo[i] = np.where(~left & (side[i] == -1), m * fa, flo[i])
        lo[i] = np.where(left, xi, a)
        flo[i] = np.where(left, fx, flo[i])
        hi[i] = np.where(left, hi[i], xi)
        fhi[i] = np.where(left, fhi[i], fx)
        new_side = np.where(left, 1, -1)
        streak[i] = np.where(new_side == side[i], streak[i] + 1, 0)
        side[i] = new_side
        done = (fx == 0) | (np.abs(xi - x[i]) <= 2 * np.spacing(np.abs(xi))) | \
               (hi[i] - lo[i] <= 4 * np.spacing(np.abs(xi)))
        x[i] = xi
        active[i[done]] = False
    # the bracket end with the smaller residual is the better root
    return np.where(np.abs(fn(lo)) <= np.abs(fn(hi)), lo, hi)


def encode_crossing(signal, cfg, window, tol=0.0, step=None):
    """Times where the reference ``g`` meets the filtered input ``f``.

    Zeros of ``h = g - f`` are bracketed by sign changes on a grid of step
    at most ``T_s / 64``. They are refined to float resolution, or by
    bisection below ``tol`` when it is positive.

    Parameters
    ----------
    signal : callable
        Vectorized filtered input ``f``.
    cfg : CrossingConfig
    window : (float, float)

    Returns
    -------
    SpikeTrain
    """
    step = cfg.period / 64 if step is None else min(step, cfg.period / 64)
    n = int(np.ceil((window[1] - window[0]) / step))
    grid = np.linspace(window[0], window[1], n + 1)

    def h(t):
        return cfg.reference(t) - signal(t)

    hv = h(grid)
    sv = np.sign(hv)
    exact = grid[sv == 0]
    idx = np.nonzero(sv[:-1] * sv[1:] < 0)[0]
    if tol > 0:
        roots = _bisect_roots(h, grid[idx], grid[idx + 1], sv[idx], tol)
    else:
        roots = _falsi_roots(h, grid[idx], grid[idx + 1], hv[idx], hv[idx + 1])
    times = np.sort(np.concatenate([roots, exact]))
    flags = []
    if len(times) > 1:
        keep = np.concatenate([[True], np.diff(times) > 1e-9])
        if not keep.all():
            flags.append("tangential crossing merged")
        times = times[keep]
    values = cfg.reference(times)
    return SpikeTrain(times, values, np.sign(values).astype(int), kind="crossing",
                      start=window[0], flags=flags)


def _scan_levels(cum, threshold):
    """Grid cells where a tabulated running integral reaches each trigger level.

    Returns the cell indices ``k`` (spike in ``(grid[k-1], grid[k]]``), the
    lattice indices ``j`` of the levels reached (level ``j * threshold``
    above ``cum[0]``) and their signs.

    The integrator keeps ``|cum - level| < threshold`` by moving the level
    one step at a time, so ``j_k = clip(j_{k-1}, floor(u_k), ceil(u_k))``
    with ``u = (cum - cum[0]) / threshold``. On a run where ``u`` does not
    decrease this is a running maximum (a running minimum where it does not
    increase), which is evaluated run by run.
    """
    u = (np.asarray(cum, dtype=float) - cum[0]) / threshold
    d = np.sign(np.diff(u))
    nz = np.nonzero(d)[0]
    turns = nz[1:][d[nz[1:]] != d[nz[:-1]]]
    ends = np.concatenate([turns, [len(u) - 1]])
    starts = np.concatenate([[0], turns])
    up = u[ends] >= u[starts]
    # level at the start of each run, carried through run endpoints
    first, current = [], 0.0
    for rising, end in zip(up.tolist(), u[ends].tolist()):
        first.append(current)
        current = max(current, np.floor(end)) if rising else min(current, np.ceil(end))
    first = np.array(first)
    run = np.searchsorted(ends, np.arange(1, len(u)))
    tail = u[1:]
    j = np.zeros(len(u), dtype=np.int64)
    j[1:] = np.where(up[run], np.maximum(first[run], np.floor(tail)),
                     np.minimum(first[run], np.ceil(tail)))
    step = np.diff(j)
    moved = np.nonzero(step)[0]
    counts = np.abs(step[moved])
    cells = np.repeat(moved + 1, counts)
    signs = np.repeat(np.sign(step[moved]), counts).astype(float)
    # level index after each spike: previous index plus 1, 2, ... steps
    offset = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts) + 1
    levels = np.repeat(j[moved], counts) + signs.astype(np.int64) * offset
    return cells, levels, signs


def _newton(signal, excess, times, a, b, tol, steps=6):
    # excess(t, which) evaluates the residual of the roots selected by ``which``
    times = times.copy()
    active = np.arange(len(times))
    for _ in range(steps):
        if not active.size:
            break
        t = times[active]
        slope = signal(t)
        ok = slope != 0
        nxt = t - np.where(ok, excess(t, active) / np.where(ok, slope, 1.0), 0.0)
        nxt = np.clip(nxt, a[active], b[active])
        times[active] = nxt
        active = active[np.abs(nxt - t) > tol]
    return times


def encode_if(signal, cfg, window, step=1e-3, tol=1e-14):
    """Integrate-and-fire encoding of an exact filtered input.

    The running integral is the closed-form primitive of ``f``; each spike
    time solves ``int_{t_prev}^{t} f = +-C_T`` inside the grid cell where
    the tabulated integral crosses the level. Newton steps start from the
    linear interpolation of the table and refine the root to ``tol``; roots
    where they stall are bracketed by bisection first.

    Parameters
    ----------
    signal : FilteredInput
        Must provide ``signal.integral(t)`` and ``signal.support``.
    cfg : IntegrateFireConfig
    window : (float, float)
        The integrator starts from zero at ``window[0]``.
    step : float
        Bracketing grid step.

    Returns
    -------
    SpikeTrain
    """
    n = int(np.ceil((window[1] - window[0]) / step))
    grid = np.linspace(window[0], window[1], n + 1)
    lo, hi = signal.support
    grid = np.union1d(grid, [x for x in (lo, hi) if window[0] < x < window[1]])
    F = signal.integral(grid)
    cells, levels, signs = _scan_levels(F, cfg.threshold)
    targets = F[0] + levels * cfg.threshold

    def excess(t, which):
        return signal.integral(t) - targets[which]

    times = np.zeros(0)
    if cells.size:
        a, b = grid[cells - 1], grid[cells]
        fa, fb = F[cells - 1], F[cells]
        # regula falsi on the tabulated integral, then Newton on the exact one
        frac = np.clip((targets - fa) / np.where(fb != fa, fb - fa, 1.0), 0.0, 1.0)
        times = _newton(signal, excess, a + frac * (b - a), a, b, tol)
        slow = np.abs(excess(times, slice(None))) > 1e-12 * max(1.0, abs(cfg.threshold))
        if slow.any():
            # F - target changes sign from -sign to +sign across the cell
            idx = np.nonzero(slow)[0]
            start = _bisect_roots(lambda t: excess(t, idx), a[idx], b[idx], -signs[idx], 1e-7)
            times[idx] = _newton(signal, lambda t, w: excess(t, idx[w]), start, a[idx], b[idx],
                                 tol)
        # two levels inside one cell: keep spike times ordered
        for i in np.nonzero(np.diff(times) <= 0)[0] + 1:
            sub = _bisect_roots(lambda t: excess(t, slice(i, i + 1)), times[i - 1:i],
                                b[i:i + 1], -signs[i:i + 1], tol)
            times[i] = sub[0]
    return SpikeTrain(times, signs * cfg.threshold, signs.astype(int), kind="if", start=window[0])


def _cell_roots(h, f0, f1, base, target, lo_s):
    """Smallest ``s`` in ``[lo_s, h]`` with ``base + f0 s + (f1 - f0) s^2 / (2 h) = target``."""
    qa, qb, qc = (f1 - f0) / (2 * h), f0, base - target
    linear = np.abs(qa) * h < 1e-14 * np.maximum(np.abs(qb), 1e-300)
    disc = np.sqrt(np.maximum(qb * qb - 4 * qa * qc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        # numerically stable pair of quadratic roots
        q = -0.5 * (qb + np.where(qb >= 0, disc, -disc))
        r1 = np.where(q != 0, qc / q, np.inf)
        r2 = np.where(qa != 0, q / qa, np.inf)
        lin = np.where(qb != 0, -qc / qb, 0.5 * h)
    r1 = np.where(linear, lin, r1)
    r2 = np.where(linear, lin, r2)
    slack = 1e-12 * h
    ok1 = (r1 >= lo_s - slack) & (r1 <= h + slack)
    ok2 = (r2 >= lo_s - slack) & (r2 <= h + slack)
    both = np.where(ok1 & ok2, np.minimum(r1, r2), np.where(ok1, r1, r2))
    fallback = np.where(np.abs(r1 - 0.5 * (lo_s + h)) <= np.abs(r2 - 0.5 * (lo_s + h)), r1, r2)
    out = np.where(ok1 | ok2, both, fallback)
    return np.clip(out, lo_s, h)


def encode_if_sampled(grid, values, cfg):
    """Integrate-and-fire encoding of a waveform known on a grid.

    ``f`` is linear between grid points, so the running integral is the
    trapezoid rule and each spike time solves a quadratic inside its cell.
    """
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(grid) * (values[1:] + values[:-1]))])
    cells, levels, signs = _scan_levels(cum, cfg.threshold)
    if not cells.size:
        return SpikeTrain([], [], [], kind="if", start=grid[0])
    h = grid[cells] - grid[cells - 1]
    args = (values[cells - 1], values[cells], cum[cells - 1], levels * cfg.threshold)
    s = _cell_roots(h, *args, np.zeros(len(cells)))
    # several spikes in one cell: each must come after the previous one
    for i in np.nonzero(np.diff(cells) == 0)[0] + 1:
        lo_s = s[i - 1]
        s[i] = _cell_roots(h[i:i + 1], *(a[i:i + 1] for a in args), np.array([lo_s]))[0]
    times = grid[cells - 1] + s
    return SpikeTrain(times, signs * cfg.threshold, signs.astype(int), kind="if", start=grid[0])


def encode_crossing_sampled(grid, values, cfg):
    """Crossing encoding of a waveform known on a grid (linear interpolation)."""
    h = cfg.reference(grid) - values
    idx = np.nonzero(np.sign(h[:-1]) * np.sign(h[1:]) < 0)[0]
    frac = h[idx] / (h[idx] - h[idx + 1])
    times = grid[idx] + frac * (grid[idx + 1] - grid[idx])
    vals = cfg.reference(times)
    return SpikeTrain(times, vals, np.sign(vals).astype(int), kind="crossing", start=grid[0])


def sample_kernels(train, kernel, indices):
    """Shifted kernels seen by the samples ``train[i]`` for ``i`` in ``indices``.

    A crossing sample ``y_n = f(t_n)`` sees ``kernel(s - t_n)``. An
    integrate-and-fire sample ``y_n = int_{t_{n-1}}^{t_n} f`` sees
    ``(kernel * q_theta)(s - t_{n-1})`` with ``theta = t_n - t_{n-1}``;
    the first sample is anchored at ``train.start``.
    """
    out = []
    for i in indices:
        if train.kind == "crossing":
            out.append(kernel.shifted(train.times[i]))
        else:
            prev = train.times[i - 1] if i > 0 else train.start
            out.append(convolve_box(kernel, train.times[i] - prev).shifted(prev))
    return out


def samples_as_inner_products(train, kernel):
    """List of ``(t_n, y_n, shifted kernel, reliable)`` for every spike.

    For an integrate-and-fire train the first sample depends on when the
    integrator started and is marked unreliable.
    """
    kernels = sample_kernels(train, kernel, range(len(train)))
    reliable = [train.kind == "crossing" or i > 0 for i in range(len(train))]
    return list(zip(train.times, train.values, kernels, reliable))


def keep_first_per_burst(train, count, quiet):
    """Keep the first ``count`` spikes after every quiet gap longer than ``quiet``.

    Emulates raising the trigger mark after the useful samples of a burst.
    """
    keep, run = [], 0
    last = -np.inf
    for i, t in enumerate(train.times):
        if t - last > quiet:
            run = 0
        if run < count:
            keep.append(i)
        run += 1
        last = t
    keep = np.array(keep, dtype=int)
    return SpikeTrain(train.times[keep], train.values[keep], train.polarity[keep],
                      train.channel, train.kind, train.start, train.kernel)
