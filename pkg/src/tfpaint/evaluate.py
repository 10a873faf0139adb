"""Objective metrics, synthetic test signals, and evaluation harnesses."""

import dataclasses
import math
import time
from dataclasses import dataclass

import numpy as np

from .pipeline import apply_mask, find_gaps, inpaint_spectrogram
from .solver import SolverConfig, default_window
from .stft import StftConfig, analyze, synthesize


@dataclass(frozen=True)
class EvalRecord:
    """One evaluation result row.

    lambda is a reserved word, so the field is lambda_; file emission uses
    the plain name.  runtime_s is wall-clock and therefore the one field
    that is not reproducible bit-for-bit.
    """

    method: str
    mask_gap_cols: int
    signal_id: str
    snr_db: float
    runtime_s: float
    lambda_: float
    iters_inner: int
    iters_outer_used: int


def snr(x_ref, x_test):
    """10 log10 of reference energy over error energy, in dB.

    Identical inputs return +inf.  Scaling both inputs by the same nonzero
    constant leaves the value unchanged.
    """
    x_ref = np.asarray(x_ref, dtype=float)
    x_test = np.asarray(x_test, dtype=float)
    if x_ref.shape != x_test.shape:
        raise ValueError("signals must have equal length")
    ref = float(np.sum(x_ref * x_ref))
    if ref == 0.0:
        raise ValueError("reference signal is identically zero")
    diff = x_ref - x_test
    err = float(np.sum(diff * diff))
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(ref / err)


def _sweep(phase):
    return 0.9 * np.sin(2.0 * np.pi * phase)


def make_test_signal(kind, duration_s=5.0, sample_rate=16000, *, f=440.0,
                     delta_bins=0.0, k=3, f0=440.0, f1=880.0, seed=0,
                     channels=2048):
    """Deterministic synthetic signal of one of four kinds.

    tone       sinusoid placed delta_bins away from the nearest analysis bin
               of an M=channels transform (delta 0 = exact bin center)
    multitone  k random tones, seeded amplitudes/frequencies/phases
    chirp      linear frequency ramp f0 -> f1 (f0 = f1 reduces to a tone)
    noise      seeded white noise

    All kinds peak at 0.9 or just below.
    """
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    n = int(round(duration_s * sample_rate))
    if n < 1:
        raise ValueError("no samples in the requested duration")
    t = np.arange(n) / float(sample_rate)

    if kind == "tone":
        bin_idx = round(f * channels / sample_rate)
        f_exact = (bin_idx + delta_bins) * sample_rate / channels
        if not 0.0 < f_exact < sample_rate / 2.0:
            raise ValueError("tone frequency must lie below Nyquist")
        return _sweep(f_exact * t)
    if kind == "chirp":
        if not (0.0 < f0 < sample_rate / 2.0 and 0.0 < f1 < sample_rate / 2.0):
            raise ValueError("chirp endpoints must lie below Nyquist")
        rate = (f1 - f0) / (2.0 * duration_s)
        return _sweep(f0 * t + rate * t * t)
    if kind == "multitone":
        if k < 1:
            raise ValueError("need at least one tone")
        rng = np.random.default_rng(seed)
        freqs = rng.uniform(200.0, 3000.0, k)
        amps = rng.uniform(0.5, 1.0, k)
        phases = rng.uniform(0.0, 2.0 * np.pi, k)
        x = sum(a * np.sin(2.0 * np.pi * fq * t + p)
                for a, fq, p in zip(amps, freqs, phases))
        return 0.9 * (x / np.max(np.abs(x)))
    if kind == "noise":
        x = np.random.default_rng(seed).standard_normal(n)
        return 0.9 * (x / np.max(np.abs(x)))
    raise ValueError(f"unknown signal kind {kind!r}")


def synthetic_suite(duration_s=5.0, sample_rate=16000, seed=0,
                    kinds=("multitone", "chirp", "tone")):
    """The fixed evaluation corpus: 10 multitones, 10 chirps, 4 tones.

    Returns [(signal_id, samples)].  Multitones are the stationary regime
    the variation prior models exactly; chirps move and exercise the
    frequency re-estimation; tones cover exact- and fractional-bin offsets.
    """
    out = []
    if "multitone" in kinds:
        for i in range(10):
            out.append((f"multitone-{i:02d}",
                        make_test_signal("multitone", duration_s, sample_rate,
                                         k=3, seed=seed + i)))
    if "chirp" in kinds:
        rng = np.random.default_rng(seed + 100)
        for i in range(10):
            a = float(rng.uniform(300.0, 1500.0))
            b = float(rng.uniform(1800.0, 3500.0))
            out.append((f"chirp-{i:02d}",
                        make_test_signal("chirp", duration_s, sample_rate,
                                         f0=a, f1=b)))
    if "tone" in kinds:
        for i, (fq, d) in enumerate(
            [(440.0, 0.0), (554.37, 0.25), (880.0, -0.4), (1244.5, 0.5)]
        ):
            out.append((f"tone-{i:02d}",
                        make_test_signal("tone", duration_s, sample_rate,
                                         f=fq, delta_bins=d)))
    return out


DEFAULT_LAMBDA_GRID = tuple(np.logspace(-7, 2, 10))


def _with_lambda(scfg, lam):
    th = dataclasses.replace(scfg.thresholder, lam=lam)
    return dataclasses.replace(scfg, lam=lam, thresholder=th)


def _run_one(x, mask, method, scfg, window_len, hop, channels, x_true_needed):
    n = mask.n_cols * hop
    if len(x) < n:
        raise ValueError("signal shorter than the mask span")
    x = np.asarray(x, dtype=float)[:n]
    cfg = StftConfig(window_len=window_len, hop=hop, channels=channels,
                     signal_len=n)
    X = analyze(x, default_window(cfg), cfg)
    Xc = apply_mask(X, mask)
    t0 = time.perf_counter()
    rec, info = inpaint_spectrogram(
        Xc, mask, method=method, scfg=scfg,
        x_true=x if x_true_needed else None, return_info=True,
    )
    dt = time.perf_counter() - t0
    x_hat = synthesize(rec, default_window(cfg), cfg)
    outers = info["outer_iters_used"]
    mean_outer = int(round(np.mean(outers))) if outers else 0
    return snr(x, x_hat), dt, mean_outer


def _gap_len(mask):
    gaps = find_gaps(mask)
    return len(gaps[0]) if gaps else 0


def sweep_lambda(signals, mask, lambda_grid=DEFAULT_LAMBDA_GRID, scfg=None,
                 method="uphain", window_len=2048, hop=512, channels=2048):
    """Mean reconstruction SNR per regularization weight.

    signals is [(signal_id, samples)].  One record per grid value: snr_db
    and runtime_s are means over the signals, iters_outer_used the rounded
    mean of per-gap outer counts.
    """
    lambda_grid = list(lambda_grid)
    if not lambda_grid:
        raise ValueError("empty lambda grid")
    if scfg is None:
        scfg = SolverConfig()
    gl = _gap_len(mask)
    records = []
    for lam in lambda_grid:
        cfg_l = _with_lambda(scfg, float(lam))
        snrs, times, outers = [], [], []
        for _, x in signals:
            s, dt, mo = _run_one(x, mask, method, cfg_l, window_len, hop,
                                 channels, x_true_needed=False)
            snrs.append(s)
            times.append(dt)
            outers.append(mo)
        records.append(EvalRecord(
            method=method,
            mask_gap_cols=gl,
            signal_id=f"mean({len(signals)})",
            snr_db=float(np.mean(snrs)),
            runtime_s=float(np.mean(times)),
            lambda_=float(lam),
            iters_inner=scfg.inner_iters,
            iters_outer_used=int(round(np.mean(outers))) if outers else 0,
        ))
    return records


def sweep_iterations(signals, mask, inner_grid, scfg=None, method="uphain",
                     window_len=2048, hop=512, channels=2048):
    """Mean reconstruction SNR per inner-iteration budget."""
    inner_grid = [int(i) for i in inner_grid]
    if not inner_grid:
        raise ValueError("empty iteration grid")
    if scfg is None:
        scfg = SolverConfig()
    gl = _gap_len(mask)
    records = []
    for inner in inner_grid:
        cfg_i = dataclasses.replace(scfg, inner_iters=inner)
        snrs, times, outers = [], [], []
        for _, x in signals:
            s, dt, mo = _run_one(x, mask, method, cfg_i, window_len, hop,
                                 channels, x_true_needed=False)
            snrs.append(s)
            times.append(dt)
            outers.append(mo)
        records.append(EvalRecord(
            method=method,
            mask_gap_cols=gl,
            signal_id=f"mean({len(signals)})",
            snr_db=float(np.mean(snrs)),
            runtime_s=float(np.mean(times)),
            lambda_=cfg_i.lam,
            iters_inner=inner,
            iters_outer_used=int(round(np.mean(outers))) if outers else 0,
        ))
    return records


def compare_methods(signals, masks, methods, scfg=None, window_len=2048,
                    hop=512, channels=2048):
    """Every method on every (signal, mask); returns (records, summary).

    records has one EvalRecord per run.  summary has one dict per
    (method, gap length) with the mean SNR over the signals — the table
    the ordering claims are judged on.
    """
    if scfg is None:
        scfg = SolverConfig()
    records = []
    summary = []
    for method in methods:
        needs_truth = method == "bphain_oracle"
        for mask in masks:
            gl = _gap_len(mask)
            snrs = []
            for sid, x in signals:
                s, dt, mo = _run_one(x, mask, method, scfg, window_len, hop,
                                     channels, x_true_needed=needs_truth)
                records.append(EvalRecord(
                    method=method,
                    mask_gap_cols=gl,
                    signal_id=sid,
                    snr_db=s,
                    runtime_s=dt,
                    lambda_=scfg.lam,
                    iters_inner=scfg.inner_iters,
                    iters_outer_used=mo,
                ))
                snrs.append(s)
            summary.append({
                "method": method,
                "gap_cols": gl,
                "mean_snr_db": float(np.mean(snrs)),
                "signals": len(signals),
            })
    return records, summary
