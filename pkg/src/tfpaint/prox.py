"""Proximal, projection and thresholding operators.

All functions act entrywise (or on the whole matrix for the l2 variants) on
complex arrays and return new arrays.  The convex ones (soft, l2_block,
l2_squared) are genuine proximal operators; p_shrinkage (p < 1) and
smooth_hard are non-convex thresholders used as drop-in replacements inside
the solver's dual update.
"""

from dataclasses import dataclass

import numpy as np


def _sgn(X, mag):
    # z/|z| with sgn(0) = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(mag > 0, X / np.where(mag > 0, mag, 1.0), 0.0)
    return s


def soft_threshold(X, lam):
    """sgn(X) * max(|X| - lam, 0), the prox of lam*||.||_1."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    X = np.asarray(X)
    mag = np.abs(X)
    return _sgn(X, mag) * np.maximum(mag - lam, 0.0)


def p_shrinkage(X, lam, p):
    """sgn(X) * max(|X| - lam^(2-p) * |X|^(p-1), 0); p = 1 is soft."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if p <= -1 or p > 1:
        raise ValueError("p must lie in (-1, 1]")
    X = np.asarray(X)
    mag = np.abs(X)
    with np.errstate(divide="ignore", invalid="ignore"):
        shrink = lam ** (2.0 - p) * mag ** (p - 1.0)
    out = _sgn(X, mag) * np.maximum(mag - shrink, 0.0)
    return np.where(mag > 0, out, 0.0)


def smooth_hard(X, lam, alpha):
    """X * exp(-alpha / (e^(|X|-lam) - 1)^2) for |X| > lam, else 0.

    Continuous from below at |X| = lam (the factor tends to 0), so the
    boundary itself maps to 0.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    X = np.asarray(X)
    mag = np.abs(X)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        den = np.square(np.expm1(mag - lam))
        factor = np.exp(-alpha / den)
    return np.where(mag > lam, X * np.where(np.isfinite(factor), factor, 1.0), 0.0)


def prox_l2_block(X, lam):
    """Prox of lam * ||.||_F over the whole matrix: block soft thresholding."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    X = np.asarray(X)
    nrm = np.linalg.norm(X)
    if nrm <= lam:
        return np.zeros_like(X)
    return (1.0 - lam / nrm) * X


def prox_l2_squared(X, lam):
    """Prox of lam * ||.||_F^2: pure scaling by 1/(1 + 2*lam)."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    return np.asarray(X) / (1.0 + 2.0 * lam)


def prox_conjugate(base, eta, X):
    """Moreau identity: prox of the scaled conjugate function.

    base(V, s) must return prox_{s*f}(V); the result is
    prox_{eta*f'}(X) = X - eta * prox_{f/eta}(X/eta) where f' is the convex
    conjugate of f.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    X = np.asarray(X)
    return X - eta * base(X / eta, 1.0 / eta)


def project_feasible(X, mask, X_corrupted):
    """Overwrite reliable columns with the observation, keep the rest.

    mask lists the unreliable (zeroed) columns; every other column of the
    output is copied from X_corrupted bit-exactly.
    """
    X = np.asarray(X)
    Xc = np.asarray(X_corrupted)
    if X.shape != Xc.shape:
        raise ValueError("spectrogram shapes differ")
    zero_cols = np.asarray(mask.zero_cols if hasattr(mask, "zero_cols") else mask, dtype=int)
    out = Xc.astype(X.dtype, copy=True)
    if zero_cols.size:
        out[:, zero_cols] = X[:, zero_cols]
    return out


_KINDS = ("soft", "p_shrinkage", "smooth_hard", "l2_block", "l2_squared")

# reference tuning per kind: (lambda, p, alpha)
_KIND_DEFAULTS = {
    "soft": (0.01, 0.9, 1e-2),
    "p_shrinkage": (0.01, 0.9, 1e-2),
    "smooth_hard": (1e-3, 0.9, 1e-2),
    "l2_block": (1.0, 0.9, 1e-2),
    "l2_squared": (0.2, 0.9, 1e-2),
}


def default_thresholder(kind, lam=None, p=None, alpha=None):
    """Thresholder with the reference tuning for its kind, fields overridable."""
    if kind not in _KINDS:
        raise ValueError(f"unknown thresholder kind {kind!r}")
    dl, dp, da = _KIND_DEFAULTS[kind]
    return Thresholder(
        kind=kind,
        lam=dl if lam is None else lam,
        p=dp if p is None else p,
        alpha=da if alpha is None else alpha,
    )


@dataclass(frozen=True)
class Thresholder:
    """Configured thresholding operator for the solver's dual update.

    Defaults per kind follow the reference tuning: p_shrinkage uses
    p = 0.9 with lambda = 0.01, smooth_hard alpha = 1e-2 with lambda = 1e-3,
    l2_block lambda = 1, l2_squared lambda = 0.2.
    """

    kind: str = "soft"
    lam: float = 0.01
    p: float = 0.9
    alpha: float = 1e-2

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown thresholder kind {self.kind!r}")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.kind == "p_shrinkage" and (self.p <= -1 or self.p > 1):
            raise ValueError("p must lie in (-1, 1]")
        if self.kind == "smooth_hard" and self.alpha <= 0:
            raise ValueError("alpha must be positive")

    def __call__(self, X):
        if self.kind == "soft":
            return soft_threshold(X, self.lam)
        if self.kind == "p_shrinkage":
            return p_shrinkage(X, self.lam, self.p)
        if self.kind == "smooth_hard":
            return smooth_hard(X, self.lam, self.alpha)
        if self.kind == "l2_block":
            return prox_l2_block(X, self.lam)
        return prox_l2_squared(X, self.lam)
