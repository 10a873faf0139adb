"""Command-line front end: file formats, argument parsing, dispatch."""

import argparse
import csv
import json
import math
import os
import sys

import numpy as np
from scipy.io import wavfile

from .evaluate import (
    DEFAULT_LAMBDA_GRID,
    compare_methods,
    snr,
    sweep_lambda,
    synthetic_suite,
)
from .pipeline import METHODS, ColumnMask, apply_mask, find_gaps, inpaint_spectrogram, make_mask
from .prox import Thresholder
from .solver import DivergenceError, SolverConfig, default_window
from .stft import Spectrogram, StftConfig, analyze, symmetry_residual, synthesize

SPGM_MAGIC = b"SPGM1"
CSV_HEADER = ["method", "gap_cols", "signal", "snr_db", "runtime_s", "lambda"]
THRESHOLDS = {
    "soft": "soft",
    "pshrink": "p_shrinkage",
    "smoothhard": "smooth_hard",
    "l2": "l2_block",
    "l2sq": "l2_squared",
}


# ------------------------------------------------------------- file formats


def _ensure_writable(path, force):
    if os.path.exists(path) and not force:
        raise ValueError(f"{path} exists; pass --force to overwrite")


def read_wav(path):
    """16-bit PCM mono -> (rate, float samples in [-1, 1))."""
    rate, data = wavfile.read(path)
    if data.ndim != 1:
        raise ValueError(f"{path}: mono audio required")
    if data.dtype != np.int16:
        raise ValueError(f"{path}: 16-bit PCM required, got {data.dtype}")
    if rate != 16000:
        print(f"warning: {path}: {rate} Hz (presets assume 16 kHz)",
              file=sys.stderr)
    return int(rate), data.astype(float) / 32768.0


def write_wav(path, rate, x, force=False):
    _ensure_writable(path, force)
    q = np.clip(np.round(np.asarray(x) * 32768.0), -32768, 32767)
    wavfile.write(path, rate, q.astype(np.int16))


def read_mask(path):
    with open(path) as fh:
        d = json.load(fh)
    try:
        n_cols = int(d["n_cols"])
        hop = int(d["hop"])
        zeros = [int(c) for c in d["zero_cols"]]
    except (KeyError, TypeError) as e:
        raise ValueError(f"{path}: malformed mask file ({e})")
    if hop < 1:
        raise ValueError(f"{path}: hop must be positive")
    return ColumnMask(n_cols, np.array(zeros, dtype=int)), hop


def write_mask(path, mask, hop, force=False):
    _ensure_writable(path, force)
    payload = {
        "n_cols": int(mask.n_cols),
        "hop": int(hop),
        "zero_cols": [int(c) for c in mask.zero_cols],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def write_spectrogram(path, X, force=False):
    """magic, u32 LE M N hop window_len, then M*N little-endian c16 values."""
    _ensure_writable(path, force)
    M, N = X.data.shape
    with open(path, "wb") as fh:
        fh.write(SPGM_MAGIC)
        fh.write(np.array([M, N, X.config.hop, X.config.window_len],
                          dtype="<u4").tobytes())
        fh.write(np.ascontiguousarray(X.data.astype("<c16", copy=False)).tobytes())


def read_spectrogram(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(SPGM_MAGIC)] != SPGM_MAGIC:
        raise ValueError(f"{path}: not a spectrogram file")
    head = np.frombuffer(blob[5:21], dtype="<u4")
    if head.size != 4:
        raise ValueError(f"{path}: truncated header")
    M, N, hop, window_len = (int(v) for v in head)
    data = np.frombuffer(blob[21:], dtype="<c16")
    if data.size != M * N:
        raise ValueError(f"{path}: expected {M * N} coefficients, found {data.size}")
    X = Spectrogram(data.reshape(M, N).copy(),
                    StftConfig(window_len, hop, M, N * hop))
    if symmetry_residual(X) > 1e-6:
        print(f"warning: {path}: coefficients are not conjugate-symmetric; "
              "this did not come from real audio", file=sys.stderr)
    return X


def record_row(r):
    return {
        "method": r.method,
        "gap_cols": r.mask_gap_cols,
        "signal": r.signal_id,
        "snr_db": r.snr_db,
        "runtime_s": r.runtime_s,
        "lambda": r.lambda_,
    }


def write_results(csv_path, json_path, records, summary=None, force=False):
    rows = [record_row(r) for r in records]
    if csv_path:
        _ensure_writable(csv_path, force)
        with open(csv_path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_HEADER)
            w.writeheader()
            w.writerows(rows)
    if json_path:
        _ensure_writable(json_path, force)
        payload = {"records": rows}
        if summary is not None:
            payload["summary"] = summary
        with open(json_path, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")


# ----------------------------------------------------------------- helpers


def solver_config(args):
    th = Thresholder(THRESHOLDS[args.threshold], lam=args.lam, p=args.p,
                     alpha=args.alpha)
    return SolverConfig(lam=args.lam, inner_iters=args.inner,
                        outer_iters=args.outer, epsilon=args.eps,
                        thresholder=th)


def _default_jobs():
    try:
        return max(1, int(os.environ.get("TFPAINT_JOBS", "1")))
    except ValueError:
        return 1


def _analyzed(x, mask, hop, window, channels, path):
    n = mask.n_cols * hop
    if len(x) < n:
        raise ValueError(f"{path}: audio shorter than the mask span "
                         f"({len(x)} < {n} samples)")
    if len(x) > n:
        print(f"warning: {path}: truncating to {n} samples to match the mask",
              file=sys.stderr)
    cfg = StftConfig(window, hop, channels, n)
    return analyze(x[:n], default_window(cfg), cfg)


# ---------------------------------------------------------------- commands


def cmd_make_mask(args):
    mask = make_mask(args.seconds, args.sr, args.hop, args.gap_cols,
                     placement=args.placement, seed=args.seed, pad=args.pad)
    write_mask(args.out, mask, args.hop, args.force)
    print(f"{mask.n_cols} columns, {len(mask.zero_cols)} zeroed -> {args.out}")
    return 0


def cmd_corrupt(args):
    mask, hop = read_mask(args.mask)
    rate, x = read_wav(args.infile)
    X = _analyzed(x, mask, hop, args.window, args.channels, args.infile)
    Xc = apply_mask(X, mask)
    write_wav(args.out, rate, synthesize(Xc, default_window(Xc.config), Xc.config),
              args.force)
    if args.spec_out:
        write_spectrogram(args.spec_out, Xc, args.force)
    print(f"zeroed {len(mask.zero_cols)} columns -> {args.out}")
    return 0


def cmd_inpaint(args):
    mask, hop = read_mask(args.mask)
    if args.infile.endswith(".wav"):
        rate, x = read_wav(args.infile)
        # analysis of corrupted audio leaks into the gap columns; the mask
        # re-zeroes them so the solver treats them as missing
        Xc = apply_mask(_analyzed(x, mask, hop, args.window, args.channels,
                                  args.infile), mask)
    else:
        rate = args.sr
        Xc = read_spectrogram(args.infile)
        if Xc.data.shape[1] != mask.n_cols:
            raise ValueError("mask column count does not match the spectrogram")
        if Xc.config.hop != hop:
            raise ValueError("mask hop does not match the spectrogram hop")
        Xc = apply_mask(Xc, mask)

    method = args.method.replace("-", "_")
    x_true = None
    if method == "bphain_oracle":
        if not args.truth:
            raise ValueError("--truth is required for method bphain-oracle")
        _, xt = read_wav(args.truth)
        n = Xc.config.signal_len
        if len(xt) < n:
            raise ValueError("--truth audio shorter than the working span")
        x_true = xt[:n]

    rows = []
    trace = None
    if args.trace:
        def trace(gap, i, obj, feas):
            rows.append((gap.start, i, obj, feas))

    out = inpaint_spectrogram(Xc, mask, method=method, scfg=solver_config(args),
                              pad=args.pad, x_true=x_true, jobs=args.jobs,
                              trace=trace)
    write_wav(args.out, rate,
              synthesize(out, default_window(out.config), out.config), args.force)
    if args.spec_out:
        write_spectrogram(args.spec_out, out, args.force)
    if args.trace:
        _ensure_writable(args.trace, args.force)
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["gap_start", "iteration", "objective", "feasibility"])
            w.writerows(sorted(rows))
    print(f"restored {len(find_gaps(mask))} gap(s) -> {args.out}")
    return 0


def cmd_snr(args):
    rate_a, ref = read_wav(args.ref)
    rate_b, test = read_wav(args.test)
    if rate_a != rate_b:
        print(f"warning: sample rates differ ({rate_a} vs {rate_b})",
              file=sys.stderr)
    if ref.size != test.size:
        # corrupt/inpaint truncate to the mask length, so a clean original
        # is routinely a few hundred samples longer than the restoration
        n = min(ref.size, test.size)
        print(f"warning: lengths differ ({ref.size} vs {test.size} samples); "
              f"comparing the first {n}", file=sys.stderr)
        ref, test = ref[:n], test[:n]
    value = snr(ref, test)
    print("inf" if math.isinf(value) else f"{value:.4f}")
    return 0


def _suite(args):
    kinds = tuple(k.strip() for k in args.kinds.split(",") if k.strip())
    suite = synthetic_suite(args.seconds, args.sr, seed=args.seed, kinds=kinds)
    if not suite:
        raise ValueError(f"no signals for kinds {args.kinds!r}")
    return suite


def cmd_sweep(args):
    suite = _suite(args)
    mask = make_mask(args.seconds, args.sr, args.hop, args.gap_cols,
                     placement=args.placement, seed=args.seed)
    if args.lambdas == "default":
        grid = DEFAULT_LAMBDA_GRID
    else:
        grid = [float(v) for v in args.lambdas.split(",")]
    records = sweep_lambda(suite, mask, grid, scfg=solver_config(args),
                           method=args.method.replace("-", "_"),
                           window_len=args.window, hop=args.hop,
                           channels=args.channels)
    write_results(args.out, args.json, records, force=args.force)
    best = max(records, key=lambda r: r.snr_db)
    print(f"best lambda {best.lambda_:g} with mean SNR {best.snr_db:.2f} dB "
          f"over {len(suite)} signal(s)")
    return 0


def cmd_compare(args):
    suite = _suite(args)
    methods = [m.strip().replace("-", "_") for m in args.methods.split(",")]
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    gap_lengths = [int(g) for g in args.gap_cols.split(",")]
    masks = [make_mask(args.seconds, args.sr, args.hop, g,
                       placement=args.placement, seed=args.seed)
             for g in gap_lengths]
    records, summary = compare_methods(suite, masks, methods,
                                       scfg=solver_config(args),
                                       window_len=args.window, hop=args.hop,
                                       channels=args.channels)
    write_results(args.out, args.json, records, summary=summary,
                  force=args.force)
    for row in summary:
        print(f"{row['method']:>14}  gap {row['gap_cols']}: "
              f"{row['mean_snr_db']:8.2f} dB mean over {row['signals']} signal(s)")
    return 0


# ------------------------------------------------------------------ parser


def build_parser():
    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--lambda", dest="lam", type=float, default=0.01,
                        help="regularization weight (default 0.01)")
    solver.add_argument("--inner", type=int, default=500,
                        help="inner iterations per frequency estimate (default 500)")
    solver.add_argument("--outer", type=int, default=10,
                        help="outer re-estimation rounds (default 10)")
    solver.add_argument("--eps", type=float, default=0.001,
                        help="outer-loop stopping threshold (default 0.001)")
    solver.add_argument("--threshold", choices=sorted(THRESHOLDS),
                        default="soft", help="thresholding rule (default soft)")
    solver.add_argument("--p", type=float, default=0.9,
                        help="p-shrinkage exponent (default 0.9)")
    solver.add_argument("--alpha", type=float, default=1e-2,
                        help="smooth-hard sharpness (default 0.01)")

    frame = argparse.ArgumentParser(add_help=False)
    frame.add_argument("--window", type=int, default=2048,
                       help="analysis window length (default 2048)")
    frame.add_argument("--channels", type=int, default=2048,
                       help="frequency channels (default 2048)")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--seconds", type=float, default=5.0)
    grid.add_argument("--sr", type=int, default=16000)
    grid.add_argument("--hop", type=int, default=512)
    grid.add_argument("--seed", type=int, default=0)
    grid.add_argument("--kinds", default="multitone,chirp,tone",
                      help="comma list of signal kinds for the suite")
    grid.add_argument("--placement", choices=["per-second-center", "seeded-random"],
                      default="per-second-center")
    grid.add_argument("--out", required=True, help="CSV output path")
    grid.add_argument("--json", default=None, help="optional JSON mirror path")
    grid.add_argument("--force", action="store_true",
                      help="overwrite existing outputs")

    p = argparse.ArgumentParser(prog="tfpaint",
                                description="Reconstruct missing spectrogram "
                                            "columns of audio recordings.")
    sub = p.add_subparsers(dest="command", required=True)

    mm = sub.add_parser("make-mask", help="write a gap mask as JSON")
    mm.add_argument("--seconds", type=float, required=True)
    mm.add_argument("--gap-cols", type=int, required=True,
                    help="gap width in spectrogram columns (1..6)")
    mm.add_argument("--sr", type=int, default=16000)
    mm.add_argument("--hop", type=int, default=512)
    mm.add_argument("--placement", choices=["per-second-center", "seeded-random"],
                    default="per-second-center")
    mm.add_argument("--seed", type=int, default=None)
    mm.add_argument("--pad", type=int, default=4)
    mm.add_argument("--out", required=True)
    mm.add_argument("--force", action="store_true")
    mm.set_defaults(func=cmd_make_mask)

    co = sub.add_parser("corrupt", parents=[frame],
                        help="zero masked columns of a recording")
    co.add_argument("--in", dest="infile", required=True, help="clean WAV")
    co.add_argument("--mask", required=True)
    co.add_argument("--out", required=True, help="corrupted WAV")
    co.add_argument("--spec-out", default=None,
                    help="also write the corrupted spectrogram (exact)")
    co.add_argument("--force", action="store_true")
    co.set_defaults(func=cmd_corrupt)

    ip = sub.add_parser("inpaint", parents=[solver, frame],
                        help="reconstruct masked columns")
    ip.add_argument("--in", dest="infile", required=True,
                    help="corrupted WAV or spectrogram file")
    ip.add_argument("--mask", required=True)
    ip.add_argument("--out", required=True, help="restored WAV")
    ip.add_argument("--spec-out", default=None,
                    help="also write the restored spectrogram")
    ip.add_argument("--method", choices=["uphain", "bphain", "bphain-oracle",
                                         "tf-only"], default="uphain")
    ip.add_argument("--pad", type=int, default=4,
                    help="context columns each side of a gap (default 4)")
    ip.add_argument("--truth", default=None,
                    help="clean WAV (required for bphain-oracle)")
    ip.add_argument("--trace", default=None,
                    help="write per-iteration objective/feasibility CSV here")
    ip.add_argument("--jobs", type=int, default=_default_jobs(),
                    help="parallel gap workers (env TFPAINT_JOBS)")
    ip.add_argument("--sr", type=int, default=16000,
                    help="output rate when the input is a spectrogram file")
    ip.add_argument("--force", action="store_true")
    ip.set_defaults(func=cmd_inpaint)

    sn = sub.add_parser("snr", help="SNR of a test WAV against a reference")
    sn.add_argument("--ref", required=True)
    sn.add_argument("--test", required=True)
    sn.set_defaults(func=cmd_snr)

    sw = sub.add_parser("sweep", parents=[solver, frame, grid],
                        help="mean SNR across a lambda grid")
    sw.add_argument("--gap-cols", type=int, default=3)
    sw.add_argument("--lambdas", default="default",
                    help='comma list of values, or "default" for the 10-point grid')
    sw.add_argument("--method", choices=["uphain", "bphain", "tf-only"],
                    default="uphain")
    sw.set_defaults(func=cmd_sweep)

    cp = sub.add_parser("compare", parents=[solver, frame, grid],
                        help="method-versus-method SNR table")
    cp.add_argument("--gap-cols", default="1,3,6",
                    help="comma list of gap widths (default 1,3,6)")
    cp.add_argument("--methods", default="uphain,bphain,bphain-oracle,tf-only")
    cp.set_defaults(func=cmd_compare)

    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as e:
        print(f"error: solver diverged at iteration {e.iteration}; "
              "loosen the step sizes", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
