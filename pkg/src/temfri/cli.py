"""Experiment runner: seeded Monte-Carlo scenarios, density analysis and reports.

Configuration files are plain ``key = value`` lines; ``#`` starts a comment.
Every scenario reads the keys it needs, with defaults, and rejects unknown
ones. Example::

    scenario = stream_if
    trials = 1000
    seed = 1
    threshold = 0.11
    out = runs/stream_if
"""

import argparse
import csv
import io
import json
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kernels import (cos2_pulse, convolve_pulse, derivative_kernel, make_bspline, make_espline,
                      parse_kernel, parse_number)
from .reconstruct import (ChannelBank, burst_if_window, crossing_conditions,
                          decode_arbitrary_kernel, decode_burst_crossing, decode_burst_if,
                          decode_burst_if_single_channel, decode_opposite_sign_burst,
                          decode_piecewise_constant, decode_pulse_stream_if,
                          decode_single_dirac_crossing, decode_single_dirac_if,
                          decode_stream_crossing, decode_stream_if, piecewise_bound, pulse_window,
                          single_channel_burst_safe_bound, single_channel_burst_window,
                          single_dirac_if_bound, stream_if_bound)
from .reproduction import KnotFreeInterval, exact_coefficients
from .signal_models import (DiracStream, FilteredInput, PiecewiseConstant, noise_filtered,
                            random_bursts, random_stream, signal_power)
from .tem import CrossingConfig, IntegrateFireConfig, encode_crossing, encode_if, encode_if_sampled


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


# configuration

@dataclass
class ExperimentConfig:
    """Scenario id, trial count, master seed, output directory and scenario keys."""

    scenario: str
    trials: int = 100
    seed: int = 0
    out: str = ""
    params: dict = field(default_factory=dict)

    @classmethod
    def from_text(cls, text):
        values = {}
        for number, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise ConfigError(f"line {number}: expected 'key = value'")
            values[key.strip()] = value.strip()
        return cls.from_dict(values)

    @classmethod
    def from_file(cls, path):
        return cls.from_text(Path(path).read_text())

    @classmethod
    def from_dict(cls, values):
        values = {k: str(v) for k, v in values.items()}
        if "scenario" not in values:
            raise ConfigError("missing required key 'scenario'")
        scenario = values.pop("scenario")
        if scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {scenario!r}; choose from {sorted(SCENARIOS)}")
        try:
            trials = int(values.pop("trials", 100))
            seed = int(values.pop("seed", 0))
        except ValueError as err:
            raise ConfigError(str(err)) from err
        if trials < 1 and scenario != "density":
            raise ConfigError("trials must be positive")
        out = values.pop("out", "")
        unknown = set(values) - set(SCENARIOS[scenario].defaults)
        if unknown:
            raise ConfigError(f"unknown keys for {scenario}: {sorted(unknown)}")
        return cls(scenario, trials, seed, out, values)

    def echo(self):
        return {"scenario": self.scenario, "trials": self.trials, "seed": self.seed,
                "out": self.out, **self.params}


class Params:
    """Typed access to scenario keys, falling back to the scenario defaults."""

    def __init__(self, values, defaults):
        self.values = dict(defaults)
        self.values.update(values)

    def text(self, key):
        return str(self.values[key])

    def num(self, key):
        try:
            return parse_number(self.values[key])
        except ValueError as err:
            raise ConfigError(f"{key}: {err}") from err

    def int(self, key):
        return int(round(self.num(key)))

    def maybe(self, key):
        """Number, or ``None`` for ``auto``/``max``."""
        value = self.text(key).lower()
        return None if value in ("auto", "max", "") else self.num(key)

    def resolved(self):
        return {k: str(v) for k, v in self.values.items()}


# scoring

def match_errors(true_taus, true_amps, est_taus, est_amps):
    """Pair each true Dirac with the nearest estimate; return location and amplitude errors."""
    true_taus, true_amps = np.asarray(true_taus, float), np.asarray(true_amps, float)
    est_taus, est_amps = np.asarray(est_taus, float), np.asarray(est_amps, float)
    if not est_taus.size:
        return np.full(true_taus.shape, np.inf), np.full(true_taus.shape, np.inf)
    idx = np.argmin(np.abs(est_taus[None, :] - true_taus[:, None]), axis=1)
    return est_taus[idx] - true_taus, est_amps[idx] - true_amps


def score_row(truth, estimate, tol=None):
    """Per-trial error columns. ``ok`` needs the right count and, with ``tol``, errors below it."""
    taus, amps = np.asarray(truth.taus), np.asarray(truth.amps)
    dt, da = match_errors(taus, amps, estimate.taus, estimate.amps)
    count_ok = len(estimate.taus) == len(taus)
    finite = np.all(np.isfinite(dt))
    row = {"n_true": len(taus), "n_est": int(len(estimate.taus)),
           "max_loc_err": float(np.max(np.abs(dt))) if finite else float("inf"),
           "max_amp_err": float(np.max(np.abs(da))) if finite else float("inf"),
           "sum_sq_loc": float(np.sum(dt ** 2)), "sum_sq_amp": float(np.sum(da ** 2)),
           "sum_abs_loc": float(np.sum(np.abs(dt))),
           "sum_rel_amp": float(np.sum(np.abs(da) / np.abs(amps))),
           "sum_amp2": float(np.sum(amps ** 2))}
    ok = count_ok and finite
    if tol is not None and ok:
        ok = row["max_loc_err"] < tol and row["max_amp_err"] < tol
    row["ok"] = int(bool(ok))
    row["decode_error"] = "; ".join(estimate.errors)
    return row


def aggregate(rows):
    """Aggregates recomputed from the per-trial rows."""
    n = len(rows)
    if not n:
        return {}

    def col(key):
        return np.array([r[key] for r in rows if key in r and r[key] != ""], dtype=float)

    out = {"trials": n, "success_rate": float(np.mean(col("ok"))),
           "precondition_failures": int(sum(1 for r in rows if r.get("precondition"))),
           "mean_spikes": float(np.mean(col("n_spikes")))}
    valid = [r for r in rows if np.isfinite(r.get("max_loc_err", np.inf))]
    if valid:
        dirac = sum(r["n_true"] for r in valid)
        if dirac:
            sq_err = sum(r["sum_sq_amp"] for r in valid)
            out.update(
                loc_mse=sum(r["sum_sq_loc"] for r in valid) / dirac,
                amp_mse=sq_err / dirac,
                eps_t=sum(r["sum_abs_loc"] for r in valid) / dirac,
                eps_a=sum(r["sum_rel_amp"] for r in valid) / dirac,
                ser_db=float(10 * np.log10(sum(r["sum_amp2"] for r in valid) / sq_err))
                if sq_err > 0 else float("inf"),
                max_loc_err=max(r["max_loc_err"] for r in valid),
                max_amp_err=max(r["max_amp_err"] for r in valid),
                decoded_trials=len(valid))
    for key in ("samples_per_burst", "snr_db", "repro_mse", "spikes_half_support",
                "threshold"):
        values = col(key)
        if values.size:
            out[f"mean_{key}"] = float(np.mean(values))
            out[f"min_{key}"] = float(np.min(values))
            out[f"max_{key}"] = float(np.max(values))
    return out


# scenarios

@dataclass
class Scenario:
    """``setup(params) -> context`` once per run, ``trial(context, rng) -> (row, plot)`` per trial."""

    name: str
    defaults: dict
    setup: object
    trial: object
    required: float = 1.0


SCENARIOS = {}


def scenario(name, required=1.0, **defaults):
    def register(setup_and_trial):
        setup, trial = setup_and_trial()
        defaults.setdefault("required", str(required))
        SCENARIOS[name] = Scenario(name, defaults, setup, trial, required)
        return setup_and_trial
    return register


def _amps(rng, p, n):
    amps = rng.uniform(p.num("amp_low"), p.num("amp_high"), n)
    if p.text("random_sign").lower() in ("1", "true", "yes"):
        amps *= rng.choice([-1.0, 1.0], n)
    return amps


def _stream(rng, p, gap_low, gap_high, start=1.0):
    n = p.int("count")
    gaps = rng.uniform(gap_low, gap_high, n)
    taus = start + rng.uniform(0.0, 0.5) + np.concatenate([[0.0], np.cumsum(gaps[1:])])
    return DiracStream(tuple(taus), tuple(_amps(rng, p, n)))


def _plot(truth, trains, estimate, signals, window, step=None):
    return {"truth": truth, "trains": trains, "estimate": estimate, "signals": signals,
            "window": window, "step": step}


def _crossing_ctx(p, channels=1):
    if channels == 1:
        kernels = [parse_kernel(p.text("kernel"))]
        bank = None
    else:
        bank = ChannelBank(p.num("w0"), channels, p.num("L"))
        kernels = bank.kernels()
    cfg = CrossingConfig(p.num("ref_amplitude"), p.num("fs"))
    return {"p": p, "kernels": kernels, "bank": bank, "cfg": cfg}


@scenario("single_crossing", kernel="espline:P=2,w0=pi/3,L=2", fs="1.26", ref_amplitude="2.1",
          amp_low="0.5", amp_high="2", random_sign="1")
def _single_crossing():
    def trial(ctx, rng):
        p, k, cfg = ctx["p"], ctx["kernels"][0], ctx["cfg"]
        x = DiracStream((rng.uniform(1.0, 2.0),), tuple(_amps(rng, p, 1)))
        window = (0.0, x.taus[-1] + k.length + 1.0)
        sig = FilteredInput(x, k)
        tr = encode_crossing(sig, cfg, window)
        est = decode_single_dirac_crossing(tr, k)
        row = score_row(x, est, tol=1e-8)
        row.update(n_spikes=len(tr), precondition="; ".join(
            crossing_conditions(cfg, k, p.num("amp_high"))))
        return row, _plot(x, [tr], est, [sig], window)
    return _crossing_ctx, trial


@scenario("stream_crossing", kernel="espline:P=2,w0=pi/3,L=2", fs="1.26", ref_amplitude="2.1",
          amp_low="0.5", amp_high="2", random_sign="1", count="3")
def _stream_crossing():
    def trial(ctx, rng):
        p, k, cfg = ctx["p"], ctx["kernels"][0], ctx["cfg"]
        x = _stream(rng, p, k.length + 0.2, k.length + 1.5)
        window = (0.0, x.taus[-1] + k.length + 1.0)
        sig = FilteredInput(x, k)
        tr = encode_crossing(sig, cfg, window)
        est = decode_stream_crossing(tr, k, expected=len(x))
        row = score_row(x, est, tol=1e-8)
        row.update(n_spikes=len(tr), precondition="; ".join(
            crossing_conditions(cfg, k, p.num("amp_high"))))
        return row, _plot(x, [tr], est, [sig], window)
    return _crossing_ctx, trial


@scenario("burst_crossing", w0="pi/3", L="2", channels="2", fs="1.76", ref_amplitude="2.1",
          amp_low="0.5", amp_high="1", bursts="2", spread_low="0.1", spread="0.2")
def _burst_crossing():
    def setup(p):
        return _crossing_ctx(p, p.int("channels"))

    def trial(ctx, rng):
        p, bank, cfg = ctx["p"], ctx["bank"], ctx["cfg"]
        L = p.num("L")
        spread = rng.uniform(p.num("spread_low"), p.num("spread"))
        bs = random_bursts(rng, p.int("bursts"), 2, L, spread, start=1.0,
                           amp_low=p.num("amp_low"), amp_high=p.num("amp_high"))
        x = bs.stream()
        window = (0.0, x.taus[-1] + L + 1.0)
        sigs = [FilteredInput(x, k) for k in ctx["kernels"]]
        trains = [encode_crossing(s, cfg, window) for s in sigs]
        for m, tr in enumerate(trains):
            tr.channel = m
        est = decode_burst_crossing(trains, bank, 2, expected=len(bs.bursts))
        row = score_row(x, est, tol=1e-8)
        pre = crossing_conditions(cfg, ctx["kernels"][0], p.num("amp_high"), 2, spread)
        row.update(n_spikes=sum(len(t) for t in trains), precondition="; ".join(pre))
        return row, _plot(x, trains, est, sigs, window)
    return setup, trial


def _if_ctx(p):
    return {"p": p, "kernel": parse_kernel(p.text("kernel"))}


def _threshold(p, bound):
    value = p.maybe("threshold")
    return 0.9 * bound if value is None else value


@scenario("single_if", kernel="espline:P=2,w0=pi/3,L=2", threshold="auto", amp_low="1",
          amp_high="2", random_sign="1")
def _single_if():
    def trial(ctx, rng):
        p, k = ctx["p"], ctx["kernel"]
        bound = single_dirac_if_bound(k, p.num("amp_low"))
        ct = _threshold(p, bound)
        x = DiracStream((rng.uniform(1.0, 2.0),), tuple(_amps(rng, p, 1)))
        window = (0.0, x.taus[0] + k.length + 1.0)
        sig = FilteredInput(x, k)
        tr = encode_if(sig, IntegrateFireConfig(ct), window)
        est = decode_single_dirac_if(tr, k)
        row = score_row(x, est, tol=1e-8)
        tau = x.taus[0]
        half = int(np.sum((tr.times > tau) & (tr.times < tau + k.length / 2)))
        row.update(n_spikes=len(tr), threshold=ct, spikes_half_support=half,
                   precondition="" if ct < bound else f"C_T {ct:.6g} >= bound {bound:.6g}")
        return row, _plot(x, [tr], est, [sig], window)
    return _if_ctx, trial


@scenario("stream_if", kernel="espline:P=2,w0=pi/3,L=2", threshold="0.11", amp_low="1",
          amp_high="2", random_sign="0", count="3", sigma="0", snr_db="", noise_step="0.01",
          min_amp_ratio="0.5")
def _stream_if():
    def trial(ctx, rng):
        p, k = ctx["p"], ctx["kernel"]
        bound = stream_if_bound(k, p.num("amp_low"))
        ct = _threshold(p, bound)
        x = _stream(rng, p, k.length + 0.5, k.length + 1.5)
        window = (0.0, x.taus[-1] + k.length + 1.0)
        sig = FilteredInput(x, k)
        noisy = p.text("snr_db") != "" or p.num("sigma") > 0
        if not noisy:
            tr = encode_if(sig, IntegrateFireConfig(ct), window)
            est = decode_stream_if(tr, k, expected=len(x))
            row = score_row(x, est, tol=1e-8)
            plot = _plot(x, [tr], est, [sig], window)
        else:
            step = p.num("noise_step")
            grid = np.arange(window[0], window[1], step)
            f = sig(grid)
            if p.text("snr_db") != "":
                sigma = np.sqrt(signal_power(f) / 10 ** (p.num("snr_db") / 10))
            else:
                sigma = p.num("sigma")
            fn = f + rng.normal(0.0, sigma, f.shape)
            tr = encode_if_sampled(grid, fn, IntegrateFireConfig(ct))
            est = decode_stream_if(tr, k, clean=False, resync=True,
                                   min_amp=p.num("min_amp_ratio") * p.num("amp_low"))
            row = score_row(x, est)
            row.update(snr_db=float(10 * np.log10(signal_power(f) / sigma ** 2)))
            plot = _plot(x, [tr], est, [(grid, fn)], window, step)
        row.update(n_spikes=len(tr), threshold=ct,
                   precondition="" if ct < bound else f"C_T {ct:.6g} >= bound {bound:.6g}")
        return row, plot
    return _if_ctx, trial


@scenario("pulses", kernel="espline:P=2,w0=pi/3,L=2", eps="0.2", threshold="0.8",
          amp_low="30", amp_high="40", random_sign="0", count="3")
def _pulses():
    def setup(p):
        base = parse_kernel(p.text("kernel"))
        pulse = cos2_pulse(p.num("eps"))
        return {"p": p, "kernel": convolve_pulse(base, pulse), "pulse": pulse}

    def trial(ctx, rng):
        p, k = ctx["p"], ctx["kernel"]
        eps = p.num("eps")
        lower, upper = pulse_window(k, p.num("amp_low"), p.num("amp_high"))
        ct = _threshold(p, upper)
        support = k.length + 2 * eps
        x = _stream(rng, p, support + 0.3, support + 1.3)
        window = (0.0, x.taus[-1] + support + 1.0)
        sig = FilteredInput(x, k)
        tr = encode_if(sig, IntegrateFireConfig(ct), window)
        est = decode_pulse_stream_if(tr, k, expected=len(x))
        row = score_row(x, est, tol=1e-8)
        pre = []
        if not lower < ct < upper:
            pre.append(f"C_T {ct:.6g} outside ({lower:.6g}, {upper:.6g})")
        if not 2 * eps < k.length / 2:
            pre.append("2 eps >= L/2")
        row.update(n_spikes=len(tr), threshold=ct, precondition="; ".join(pre))
        return row, _plot(x, [tr], est, [sig], window)
    return setup, trial


def _burst_trial(ctx, rng, kernels, decode, window_fn, L, safe_fn=None):
    p = ctx["p"]
    lower, upper = window_fn(p.num("amp_low"), p.num("amp_high"), p.num("spread"))
    if p.text("threshold") == "safe":
        ct = safe_fn(p.num("amp_low"), p.num("spread"))
    else:
        value = p.maybe("threshold")
        ct = upper if value is None else value
    bs = random_bursts(rng, p.int("bursts"), p.int("K"), L, p.num("spread"), start=1.0,
                       amp_low=p.num("amp_low"), amp_high=p.num("amp_high"))
    x = bs.stream()
    window = (0.0, x.taus[-1] + L + 1.0)
    sigs = [FilteredInput(x, k) for k in kernels]
    trains = [encode_if(s, IntegrateFireConfig(ct), window) for s in sigs]
    for m, tr in enumerate(trains):
        tr.channel = m
    est = decode(trains)
    row = score_row(x, est, tol=1e-6)
    spikes = sum(len(t) for t in trains)
    pre = "" if lower < ct <= upper else f"C_T {ct:.6g} outside ({lower:.6g}, {upper:.6g}]"
    row.update(n_spikes=spikes, samples_per_burst=spikes / len(bs.bursts), threshold=ct,
               precondition=pre)
    return row, _plot(x, trains, est, sigs, window)


@scenario("burst_if", w0="-pi/3", L="2", channels="2", K="2", spread="0.2", threshold="max",
          amp_low="1", amp_high="2", bursts="1")
def _burst_if():
    def setup(p):
        bank = ChannelBank(p.num("w0"), p.int("channels"), p.num("L"))
        return {"p": p, "bank": bank, "kernels": bank.kernels()}

    def trial(ctx, rng):
        p, bank, kernels = ctx["p"], ctx["bank"], ctx["kernels"]
        K = p.int("K")
        return _burst_trial(
            ctx, rng, kernels, lambda trains: decode_burst_if(trains, bank, K, p.int("bursts")),
            lambda lo, hi, d: burst_if_window(kernels, K, lo, hi, d), p.num("L"))
    return setup, trial


@scenario("burst_1ch", kernel="espline:P=4,w0=-pi/3,L=4", K="2", spread="0.2",
          threshold="safe", amp_low="1", amp_high="2", bursts="1")
def _burst_1ch():
    def trial(ctx, rng):
        p, k = ctx["p"], ctx["kernel"]
        K = p.int("K")
        return _burst_trial(
            ctx, rng, [k],
            lambda trains: decode_burst_if_single_channel(trains[0], k, K, p.int("bursts")),
            lambda lo, hi, d: single_channel_burst_window(k, K, lo, hi, d), k.length,
            lambda lo, d: single_channel_burst_safe_bound(k, K, lo, d))
    return _if_ctx, trial


@scenario("piecewise", kernel="espline:P=4,w0=pi/3,L=4", threshold="0.001", amp_low="1",
          amp_high="2", count="3", sigma="0", grid_step="1e-4", noise_step="1e-4",
          min_amp_ratio="0.3")
def _piecewise():
    def setup(p):
        k = parse_kernel(p.text("kernel"))
        # the signal is filtered by -phi'; integrating by parts, each jump
        # z at tau then contributes z * phi(tau - t)
        return {"p": p, "kernel": k, "noise_kernel": derivative_kernel(k).scaled(-1.0)}

    def trial(ctx, rng):
        p, k = ctx["p"], ctx["kernel"]
        n = p.int("count")
        gaps = rng.uniform(k.length + 1.0, k.length + 2.0, n)
        taus = 1.0 + rng.uniform(0.0, 0.5) + np.concatenate([[0.0], np.cumsum(gaps[1:])])
        levels = rng.uniform(p.num("amp_low"), p.num("amp_high"), n) * (-1.0) ** np.arange(n)
        jumps = DiracStream(tuple(taus), tuple(np.diff(np.concatenate([[0.0], levels]))))
        signal = PiecewiseConstant(jumps)
        amp_min = float(np.min(np.abs(jumps.amps)))
        bound = piecewise_bound(k, amp_min)
        ct = _threshold(p, bound)
        window = (0.0, taus[-1] + k.length + 1.0)
        sig = FilteredInput(jumps, k)
        sigma = p.num("sigma")
        if sigma == 0:
            tr = encode_if(sig, IntegrateFireConfig(ct), window)
            est = decode_piecewise_constant(tr, k, expected=n)
            row = score_row(jumps, est, tol=1e-8)
            plot = _plot(jumps, [tr], est, [sig], window)
        else:
            step, nstep = p.num("grid_step"), p.num("noise_step")
            grid = np.arange(window[0], window[1], step)
            noise = rng.normal(0.0, sigma, int(np.ceil((window[1] - window[0]) / nstep)) + 1)
            seen = noise_filtered(noise, ctx["noise_kernel"], nstep)
            f = sig(grid) + np.interp(grid, window[0] + nstep * np.arange(len(seen)), seen)
            tr = encode_if_sampled(grid, f, IntegrateFireConfig(ct))
            est = decode_piecewise_constant(tr, k, clean=False, resync=True,
                                            min_amp=p.num("min_amp_ratio") * amp_min)
            row = score_row(jumps, est)
            row.update(snr_db=float(10 * np.log10(signal_power(signal(grid)) / sigma ** 2)))
            plot = _plot(jumps, [tr], est, [(grid, f)], window, step)
        row.update(n_spikes=len(tr), threshold=ct,
                   precondition="" if ct < bound else f"C_T {ct:.6g} >= bound {bound:.6g}")
        return row, plot
    return setup, trial


@scenario("arbitrary", kernel="bspline:P=3", w0="pi/8", channels="2", per_channel="4",
          K="2", spread="0.2", threshold="0.01", amp_low="1", amp_high="2",
          cadzow_iters="20", noise="0")
def _arbitrary():
    def setup(p):
        k = parse_kernel(p.text("kernel"))
        bank = ChannelBank(p.num("w0"), p.int("channels"), k.length, p.int("per_channel"))
        return {"p": p, "kernel": k, "bank": bank}

    def trial(ctx, rng):
        p, k, bank = ctx["p"], ctx["kernel"], ctx["bank"]
        bs = random_bursts(rng, 1, p.int("K"), k.length, p.num("spread"), start=1.0,
                           amp_low=p.num("amp_low"), amp_high=p.num("amp_high"))
        x = bs.stream()
        window = (0.0, x.taus[-1] + k.length + 1.0)
        sig = FilteredInput(x, k)
        tr = encode_if(sig, IntegrateFireConfig(p.num("threshold")), window)
        if p.num("noise") > 0:
            tr.values = tr.values + rng.normal(0.0, p.num("noise"), len(tr))
        trains = [tr] * bank.channels
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            est = decode_arbitrary_kernel(trains, [k] * bank.channels, bank, p.int("K"),
                                          cadzow_iters=p.int("cadzow_iters"), expected=1)
        row = score_row(x, est)
        repro = est.bursts[0]["diagnostics"]["reproduction_error"] if est.bursts else ""
        row.update(n_spikes=len(tr), repro_mse=repro, threshold=p.num("threshold"),
                   precondition="")
        return row, _plot(x, [tr], est, [sig], window)
    return setup, trial


@scenario("noisy_piecewise", required=0.9, kernel="espline:P=4,w0=pi/3,L=4", threshold="0.001",
          amp_low="1", amp_high="2", count="2", sigma="0.01", grid_step="1e-4",
          noise_step="1e-4", min_amp_ratio="0.3")
def _noisy_piecewise():
    return SCENARIOS["piecewise"].setup, SCENARIOS["piecewise"].trial


@scenario("noise_stream", required=0.9, kernel="espline:P=2,w0=pi/3,L=2", threshold="0.025",
          amp_low="0.25", amp_high="0.5", random_sign="0", count="3", sigma="0",
          snr_db="20", noise_step="0.01", min_amp_ratio="0.5")
def _noise_stream():
    return SCENARIOS["stream_if"].setup, SCENARIOS["stream_if"].trial


@scenario("opposite_signs", required=0.9, w0="pi/3", L="2", delta="0.05", threshold="0.01",
          success_tol="1e-6")
def _opposite_signs():
    def setup(p):
        bank = ChannelBank(p.num("w0"), 2, p.num("L"))
        return {"p": p, "bank": bank, "kernels": bank.kernels()}

    def trial(ctx, rng):
        p, bank = ctx["p"], ctx["bank"]
        delta, L = p.num("delta"), p.num("L")
        x = DiracStream((1.0, 1.0 + delta), tuple(rng.normal(0.0, 1.0, 2)))
        window = (0.0, x.taus[-1] + L + 0.5)
        sigs = [FilteredInput(x, k) for k in ctx["kernels"]]
        trains = [encode_if(s, IntegrateFireConfig(p.num("threshold")), window) for s in sigs]
        for m, tr in enumerate(trains):
            tr.channel = m
        est = decode_opposite_sign_burst(trains, bank)
        row = score_row(x, est, tol=p.num("success_tol"))
        path = est.bursts[0]["diagnostics"]["path"] if est.bursts else ""
        row.update(n_spikes=sum(len(t) for t in trains), path=path, precondition="")
        return row, _plot(x, trains, est, sigs, window)
    return setup, trial


@scenario("density", K="2", L="2", delta="0.2", S="2", fs="1.25", channels="2")
def _density():
    def setup(p):
        return {"p": p}

    def trial(ctx, rng):
        raise ConfigError("density has no trials; use run_experiment or the density command")
    return setup, trial


# density analysis

def density_report(K, L, delta, S, fs=None, channels=None):
    """Samples per burst period for uniform sampling against integrate-and-fire timing.

    Uniform sampling needs ``2K`` samples in ``L - delta`` after a burst, so
    ``2K (L + S) / (L - delta)`` samples per period ``L + S``; the timing
    decoder keeps ``4K``. The timing count is lower whenever
    ``S >= L - 2 delta``. With ``fs`` the crossing densities ``2 fs`` (one
    channel) and ``2 M fs`` (``M`` channels) are added.
    """
    if not 0 <= delta < L / 2:
        raise ConfigError("density needs 0 <= delta < L/2")
    if S <= 0:
        raise ConfigError("density needs S > 0")
    uniform = 2 * K * (L + S) / (L - delta)
    timing = 4 * K
    threshold = L - 2 * delta
    report = {"K": K, "L": L, "delta": delta, "S": S,
              "uniform_samples": uniform, "timing_samples": timing,
              "crossover_S": threshold, "crossover_holds": bool(S >= threshold),
              "timing_fewer": bool(uniform > timing),
              "statement": (f"timing needs fewer samples ({timing} < {uniform:.4g})"
                            if uniform > timing else
                            f"timing not superior ({timing} >= {uniform:.4g})")}
    if fs is not None:
        report["crossing_density_single"] = 2 * fs
        if channels:
            report["crossing_density_multi"] = 2 * channels * fs
    return report


# running

@dataclass
class RunReport:
    """Per-trial rows, aggregates, timing and the resolved configuration."""

    config: dict
    rows: list
    aggregates: dict
    timing: dict
    exit_code: int = 0
    extra: dict = field(default_factory=dict)

    def to_json(self):
        return {"config": self.config, "aggregates": self.aggregates, "timing": self.timing,
                "exit_code": self.exit_code, **self.extra, "rows": self.rows}


def trial_rng(seed, trial):
    """Independent stream for one trial, the same in serial and parallel runs."""
    return np.random.default_rng([int(seed), int(trial)])


def run_experiment(cfg, write=True, keep_plot=True):
    """Forward-simulate, encode, decode and score every trial of a scenario.

    Parameters
    ----------
    cfg : ExperimentConfig
    write : bool
        Write ``report.json``, ``trials.csv`` and ``plotdata/*.csv`` under
        ``cfg.out`` (when set).

    Returns
    -------
    RunReport
    """
    spec = SCENARIOS[cfg.scenario]
    p = Params(cfg.params, spec.defaults)
    config = {**cfg.echo(), **p.resolved()}
    start = time.perf_counter()
    if cfg.scenario == "density":
        fs = p.maybe("fs")
        table = density_report(p.num("K"), p.num("L"), p.num("delta"), p.num("S"), fs,
                               p.int("channels"))
        report = RunReport(config, [], {}, {"seconds": time.perf_counter() - start},
                           0, {"density": table})
        if write and cfg.out:
            _write(report, cfg.out, None)
        return report
    ctx = spec.setup(p)
    rows, plot = [], None
    for i in range(cfg.trials):
        try:
            row, trial_plot = spec.trial(ctx, trial_rng(cfg.seed, i))
        except Exception as err:  # a failed trial is reported, the run continues
            row, trial_plot = {"ok": 0, "n_spikes": 0, "decode_error": repr(err),
                               "precondition": ""}, None
        row = {"trial": i, **row}
        rows.append(row)
        if i == 0 and keep_plot:
            plot = trial_plot
    agg = aggregate(rows)
    required = p.num("required")
    code = 0 if agg["precondition_failures"] == 0 and agg["success_rate"] >= required else 1
    report = RunReport(config, rows, agg, {"seconds": time.perf_counter() - start,
                                           "per_trial": (time.perf_counter() - start)
                                           / cfg.trials}, code)
    if write and cfg.out:
        _write(report, cfg.out, plot)
    return report


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return value


def rows_csv(rows):
    """CSV text of the per-trial rows (columns in first-seen order)."""
    columns = []
    for r in rows:
        columns += [k for k in r if k not in columns]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, columns, lineterminator="\n", restval="")
    writer.writeheader()
    writer.writerows({k: _fmt(v) for k, v in r.items()} for r in rows)
    return buf.getvalue()


def plot_tables(plot, max_points=20000):
    """CSV texts for the waveform, spikes and true/estimated parameters of one trial."""
    out = {}
    lo, hi = plot["window"]
    columns = []
    for s in plot["signals"]:
        if isinstance(s, tuple):
            grid, values = s
            stride = max(1, len(grid) // max_points)
            columns.append((grid[::stride], values[::stride]))
        else:
            t = np.linspace(lo, hi, min(max_points, 4001))
            columns.append((t, s(t)))
    buf = io.StringIO()
    buf.write("channel,t,f\n")
    for m, (t, v) in enumerate(columns):
        for a, b in zip(t, v):
            buf.write(f"{m},{a!r},{float(b)!r}\n")
    out["waveform"] = buf.getvalue()
    buf = io.StringIO()
    buf.write("channel,t,y,polarity\n")
    for m, tr in enumerate(plot["trains"]):
        for a, b, c in zip(tr.times, tr.values, tr.polarity):
            buf.write(f"{m},{float(a)!r},{float(b)!r},{int(c)}\n")
    out["spikes"] = buf.getvalue()
    buf = io.StringIO()
    buf.write("kind,tau,amp\n")
    for a, b in zip(plot["truth"].taus, plot["truth"].amps):
        buf.write(f"true,{a!r},{b!r}\n")
    for a, b in zip(plot["estimate"].taus, plot["estimate"].amps):
        buf.write(f"estimate,{float(a)!r},{float(b)!r}\n")
    out["parameters"] = buf.getvalue()
    return out


def _write(report, out, plot):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report.to_json(), indent=2, default=float))
    (out / "trials.csv").write_text(rows_csv(report.rows))
    if plot is not None:
        (out / "plotdata").mkdir(exist_ok=True)
        name = report.config["scenario"]
        for key, text in plot_tables(plot).items():
            (out / "plotdata" / f"{name}_{key}.csv").write_text(text)


# reference checks

REFERENCE_CHECKS = [
    # name, scenario keys, aggregate, low, high
    ("two-channel burst samples per burst", {"scenario": "burst_if", "trials": 100},
     "mean_samples_per_burst", 44.8 * 0.9, 44.8 * 1.1),
    ("single-channel burst samples per burst", {"scenario": "burst_1ch", "trials": 100,
                                          "threshold": "max"},
     "mean_samples_per_burst", 202.24 * 0.9, 202.24 * 1.1),
    ("noise sigma=0.01 eps_t", {"scenario": "noisy_piecewise", "sigma": "0.01"},
     "eps_t", 1.3e-4, 5.2e-4),
    ("noise sigma=0.1 eps_t", {"scenario": "noisy_piecewise", "sigma": "0.1"},
     "eps_t", 2.1e-3, 8.4e-3),
    ("noisy stream amplitude MSE", {"scenario": "noise_stream"}, "amp_mse",
     1.17e-3 / 2, 1.17e-3 * 2),
    ("noisy stream location MSE", {"scenario": "noise_stream"}, "loc_mse",
     2.5e-3 / 2, 2.5e-3 * 2),
    ("opposite signs delta=0.05", {"scenario": "opposite_signs", "delta": "0.05",
                                   "threshold": "0.01"}, "success_rate", 0.92, 0.98),
    ("opposite signs delta=1.5", {"scenario": "opposite_signs", "delta": "1.5",
                                  "threshold": "0.001"}, "success_rate", 0.948, 1.008),
    ("B-spline reproduction MSE", {"scenario": "arbitrary", "trials": 20},
     "max_repro_mse", 0.0, 1e-11),
    ("B-spline location MSE", {"scenario": "arbitrary", "trials": 20}, "loc_mse", 0.0, 1e-3),
]


def reproduction_curves(points=200):
    """CSV of ``(t, target, reproduced)`` for local reproduction by two shifted kernels.

    Shifts 2 and 2.625 leave the knot-free intervals (0.625, 1) and
    (1, 1.625). A linear B-spline reproduces 1 and t there, a second-order
    E-spline with frequency 2 pi / 5 reproduces the real part of its
    exponential; the coefficients differ between the two intervals.
    """
    shifts = (2.0, 2.625)
    w = 2 * np.pi / 5
    cases = [("bspline1", make_bspline(1), {"degrees": (0, 1)}, ("constant", "linear")),
             ("espline2", make_espline([1j * w, -1j * w], 2), {"exponents": (1j * w, -1j * w)},
              ("cos", None))]
    buf = io.StringIO()
    buf.write("case,interval,t,target,reproduced\n")
    for name, k, kwargs, labels in cases:
        kernels = tuple(k.shifted(s) for s in shifts)
        for lo, hi in ((0.625, 1.0), (1.0, 1.625)):
            res = exact_coefficients(KnotFreeInterval(lo, hi, kernels), **kwargs)
            t = res.interval.probes(points)
            targets = np.vstack([t ** d for d in kwargs["degrees"]]) if "degrees" in kwargs \
                else np.exp(np.multiply.outer(np.asarray(kwargs["exponents"]), t))
            reproduced = res.reproduce(t)
            for label, target, got in zip(labels, targets, reproduced):
                if label is None:
                    continue
                for a, b, c in zip(t.tolist(), target.real.tolist(), got.real.tolist()):
                    buf.write(f"{name}_{label},{lo!r}-{hi!r},{a!r},{b!r},{c!r}\n")
    return buf.getvalue()


def repro_check(trials=200, out="", names=None):
    """Run the reference checks and return ``(name, value, low, high, passed)`` tuples."""
    results = []
    for name, keys, metric, low, high in REFERENCE_CHECKS:
        if names and not any(n in name for n in names):
            continue
        keys = dict(keys)
        keys.setdefault("trials", trials)
        cfg = ExperimentConfig.from_dict({**keys, "seed": 1})
        report = run_experiment(cfg, write=False, keep_plot=False)
        value = report.aggregates.get(metric, float("nan"))
        results.append((name, value, low, high, bool(low <= value <= high)))
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        Path(out, "repro_check.json").write_text(json.dumps(
            [dict(zip(("name", "value", "low", "high", "passed"), r)) for r in results],
            indent=2))
        Path(out, "reproduction_curves.csv").write_text(reproduction_curves())
    return results


# command line

def _density_args(sub):
    d = sub.add_parser("density", help="uniform against timing sample counts per burst")
    d.add_argument("--K", type=int, default=2)
    d.add_argument("--L", type=float, default=2.0)
    d.add_argument("--delta", type=float, default=0.2)
    d.add_argument("--S", type=float, default=2.0)
    d.add_argument("--fs", type=float, default=None)
    d.add_argument("--channels", type=int, default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="temfri", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario described by a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--trials", type=int, help="override the trial count")
    r.add_argument("--out", help="override the output directory")
    r.add_argument("--full", action="store_true",
                   help="ten times the configured trials (full scale)")
    c = sub.add_parser("repro-check", help="compare desk-scale runs with reference values")
    c.add_argument("--trials", type=int, default=200)
    c.add_argument("--out", default="",
                   help="directory for repro_check.json and reproduction_curves.csv")
    c.add_argument("--only", nargs="*", help="substrings selecting checks")
    _density_args(sub)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = ExperimentConfig.from_file(args.config)
            if args.trials:
                cfg.trials = args.trials
            if args.full:
                cfg.trials *= 10
            if args.out:
                cfg.out = args.out
            report = run_experiment(cfg)
            payload = {"aggregates": report.aggregates, **report.extra}
            print(json.dumps(payload, indent=2, default=float))
            return report.exit_code
        if args.command == "repro-check":
            results = repro_check(args.trials, args.out, args.only)
            for name, value, low, high, passed in results:
                print(f"{'PASS' if passed else 'FAIL'}  {name}: {value:.6g} "
                      f"(expected [{low:.6g}, {high:.6g}])")
            return 0 if all(r[-1] for r in results) else 1
        report = density_report(args.K, args.L, args.delta, args.S, args.fs, args.channels)
        print(json.dumps(report, indent=2))
        return 0
    except (ConfigError, OSError) as err:
        print(f"temfri: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
