"""Discrete Gabor / short-time Fourier transform on circularly extended signals.

Conventions (these matter; everything downstream relies on them):

* Frequency-invariant phase: the analysis coefficient is

      X[m, n] = sum_l x[l] * g[l - a*n] * exp(-i*2*pi*m*l / M)

  with the *absolute* signal index l in the exponential, so a stationary
  sinusoid's phase advances linearly across frames at a bin-dependent rate.
* The window is compactly supported (length ``window_len``) and placed
  circularly over the signal, making the frame operator exactly diagonal.
* ``synthesize`` is the exact real adjoint of ``analyze``:
  <analyze(x), Y>_Re == <x, synthesize(Y)> for arbitrary complex Y.  With the
  canonical tight window the pair satisfies syn(ana(x)) == x and Parseval
  ||ana(x)||_F == ||x||_2.

Exactness of the frame algebra additionally requires ``channels`` to divide
``signal_len`` (alias spacing must be a multiple of the FFT length); the
config validates this.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class StftConfig:
    """Frame geometry: window length, hop a, FFT channels M, signal length L."""

    window_len: int = 2048
    hop: int = 512
    channels: int = 2048
    signal_len: int = 0

    def __post_init__(self):
        if self.window_len < 2:
            raise ValueError("window_len must be >= 2")
        if self.hop < 1 or self.hop > self.window_len:
            raise ValueError("hop must satisfy 1 <= hop <= window_len")
        if self.channels < self.window_len:
            raise ValueError("channels must be >= window_len (painless case)")
        if self.signal_len < self.window_len:
            raise ValueError("signal_len must be >= window_len")
        if self.signal_len % self.hop != 0:
            raise ValueError("hop must divide signal_len")
        if self.signal_len % self.channels != 0:
            raise ValueError(
                "channels must divide signal_len (required for exact "
                "reconstruction with the circular frame)"
            )

    @property
    def n_frames(self):
        return self.signal_len // self.hop


@dataclass(frozen=True)
class Window:
    """Real window samples plus a tag for how they were built."""

    samples: np.ndarray
    kind: str = "custom"  # {hann, hann_derivative, custom}

    def __len__(self):
        return len(self.samples)


@dataclass
class Spectrogram:
    """Complex coefficient matrix, M frequency rows by N time columns."""

    data: np.ndarray
    config: StftConfig

    @property
    def shape(self):
        return self.data.shape


def make_hann(window_len):
    """Periodic (DFT-even) Hann window, w[k] = 0.5*(1 - cos(2 pi k / W))."""
    if window_len < 2:
        raise ValueError("window_len must be >= 2")
    k = np.arange(window_len)
    w = 0.5 * (1.0 - np.cos(2.0 * np.pi * k / window_len))
    return Window(w, kind="hann")


def make_hann_derivative(window_len):
    """Analytic derivative of the continuous periodic Hann, sampled.

    w'[k] = (pi / W) * sin(2 pi k / W), in units of per-sample.  Used for
    instantaneous-frequency estimation.
    """
    if window_len < 2:
        raise ValueError("window_len must be >= 2")
    k = np.arange(window_len)
    w = (np.pi / window_len) * np.sin(2.0 * np.pi * k / window_len)
    return Window(w, kind="hann_derivative")


def tight_window(g, cfg):
    """Canonical tight window: g[k] / sqrt(M * sum_j g[k - j*a]^2).

    The hop-shift sum runs over all shifts covering index k under circular
    placement; analyze/synthesize built on the result satisfy
    syn(ana(x)) == x with operator norm exactly 1.
    """
    w = np.asarray(g.samples if isinstance(g, Window) else g, dtype=float)
    if len(w) != cfg.window_len:
        raise ValueError("window length does not match config")
    a = cfg.hop
    # Overlap energy per hop residue; every signal position with residue r
    # sees exactly the window samples r, r+a, r+2a, ...
    s = np.zeros(a)
    for r in range(a):
        s[r] = np.sum(w[r::a] ** 2)
    if np.min(s) <= 0.0:
        raise ValueError("degenerate window: zero frame-operator diagonal")
    gt = w / np.sqrt(cfg.channels * s[np.arange(len(w)) % a])
    return Window(gt, kind="custom")


@lru_cache(maxsize=64)
def _frame_plan(cfg):
    """Precomputed index grid and phase ramp for one frame geometry.

    Returns (idx, ramp) where idx[k, n] = (a*n + k) mod L gathers windowed
    frames and ramp[m, n] = exp(-i*2*pi*m*a*n / M) converts frame-local FFT
    phase to the frequency-invariant convention.
    """
    L, W, a, M = cfg.signal_len, cfg.window_len, cfg.hop, cfg.channels
    N = cfg.n_frames
    idx = (np.arange(W)[:, None] + a * np.arange(N)[None, :]) % L
    m = np.arange(M)[:, None]
    shift = (a * np.arange(N)[None, :]) % M
    ramp = np.exp(-2j * np.pi * m * shift / M)
    return idx, ramp


def _analyze(x, w, cfg):
    idx, ramp = _frame_plan(cfg)
    buf = np.zeros((cfg.channels, cfg.n_frames), dtype=complex)
    buf[: cfg.window_len] = x[idx] * w[:, None]
    return np.fft.fft(buf, axis=0) * ramp


def _overlap_add(contrib, cfg):
    """Circular overlap-add of per-frame contributions (W x N) into a signal."""
    W, a, L, N = cfg.window_len, cfg.hop, cfg.signal_len, cfg.n_frames
    if W % a == 0:
        # Fast path: split frames into hop-sized chunks; chunk j of frame n
        # lands on signal block (n + j) mod N.  Accumulate into a buffer
        # extended by the overhang, then fold the tail back to the front --
        # contiguous adds beat modular fancy indexing.
        q = W // a
        piece = contrib.reshape(q, a, N)
        ext = np.zeros((N + q - 1, a))
        for j in range(q):
            ext[j : j + N] += piece[j].T
        if q > 1:
            ext[: q - 1] += ext[N:]
        return ext[:N].ravel()
    x = np.zeros(L)
    idx, _ = _frame_plan(cfg)
    for n in range(N):
        np.add.at(x, idx[:, n], contrib[:, n])
    return x


def _synthesize(X, w, cfg):
    _, ramp = _frame_plan(cfg)
    # Adjoint of _analyze: conjugate ramp, scaled inverse FFT, window, then
    # circular overlap-add of the first W rows.
    d = np.fft.ifft(X * np.conj(ramp), axis=0) * cfg.channels
    contrib = d[: cfg.window_len].real * w[:, None]
    return _overlap_add(contrib, cfg)


def analyze(x, g, cfg):
    """STFT of a real signal; returns a Spectrogram (M x N complex)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (cfg.signal_len,):
        raise ValueError("signal length does not match config")
    w = np.asarray(g.samples if isinstance(g, Window) else g, dtype=float)
    if len(w) != cfg.window_len:
        raise ValueError("window length does not match config")
    return Spectrogram(_analyze(x, w, cfg), cfg)


def synthesize(X, g, cfg):
    """Real adjoint of analyze (the inverse STFT for a tight window).

    Accepts a Spectrogram or a bare complex matrix.  The imaginary part of
    the complex synthesis sum is discarded; for conjugate-symmetric input it
    is below round-off, and dropping it is exactly what makes this the
    adjoint with respect to the real inner product.
    """
    data = X.data if isinstance(X, Spectrogram) else np.asarray(X)
    if data.shape != (cfg.channels, cfg.n_frames):
        raise ValueError("spectrogram shape does not match config")
    w = np.asarray(g.samples if isinstance(g, Window) else g, dtype=float)
    if len(w) != cfg.window_len:
        raise ValueError("window length does not match config")
    return _synthesize(np.asarray(data, dtype=complex), w, cfg)


def symmetry_residual(X):
    """Max deviation from conjugate symmetry X[M-m, n] == conj(X[m, n]).

    Zero (to round-off) for any spectrogram of a real signal; large values
    flag coefficient matrices that cannot come from real audio.
    """
    data = X.data if isinstance(X, Spectrogram) else np.asarray(X)
    M = data.shape[0]
    mirrored = np.conj(data[(-np.arange(M)) % M])
    scale = np.max(np.abs(data))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(data - mirrored)) / scale)
