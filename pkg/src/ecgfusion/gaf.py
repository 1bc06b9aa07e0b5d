"""Gramian Angular (summation) Field encoding of normalized beats."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadResolution, DomainError

_TOL = 1e-12


@dataclass(frozen=True)
class PolarSeries:
    angles: np.ndarray
    radii: np.ndarray
    span: float


def _check_domain(x: np.ndarray, value_range: tuple[float, float]) -> np.ndarray:
    lo, hi = value_range
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise DomainError("empty series")
    if np.any(~np.isfinite(x)) or x.min() < lo - _TOL or x.max() > hi + _TOL:
        raise DomainError(f"values must lie in [{lo}, {hi}]; got [{x.min()}, {x.max()}]")
    return np.clip(x, lo, hi)


def to_polar(x: np.ndarray, value_range: tuple[float, float] = (0.0, 1.0)) -> PolarSeries:
    """Angles arccos(x_i) and radii i/t with t = len(x), for i = 1..t."""
    x = _check_domain(x, value_range)
    t = x.shape[-1]
    return PolarSeries(np.arccos(x), np.arange(1, t + 1) / t, float(t))


def gaf_encode(x: np.ndarray, value_range: tuple[float, float] = (0.0, 1.0)) -> np.ndarray:
    """GAF[i, j] = cos(phi_i + phi_j) for a normalized series."""
    phi = to_polar(x, value_range).angles
    return _symmetric(np.cos(phi[:, None] + phi[None, :]))


def _symmetric(g: np.ndarray) -> np.ndarray:
    # mirror the upper triangle so symmetry is exact, not just up to rounding
    return np.triu(g) + np.triu(g, 1).T


def _area_matrix(n: int, res: int) -> np.ndarray:
    """res x n matrix averaging input cells by their overlap with each output cell."""
    edges = np.arange(res + 1) * (n / res)
    lo, hi = edges[:-1, None], edges[1:, None]
    j = np.arange(n)[None, :]
    overlap = np.clip(np.minimum(hi, j + 1) - np.maximum(lo, j), 0.0, None)
    return overlap / overlap.sum(axis=1, keepdims=True)


def _bilinear_matrix(n: int, res: int) -> np.ndarray:
    # align-corners linear interpolation
    pos = np.linspace(0.0, n - 1, res)
    left = np.clip(np.floor(pos).astype(int), 0, max(n - 2, 0))
    frac = pos - left
    A = np.zeros((res, n))
    rows = np.arange(res)
    if n == 1:
        A[:, 0] = 1.0
        return A
    A[rows, left] = 1.0 - frac
    A[rows, left + 1] += frac
    return A


def resample_matrix(n: int, res: int) -> np.ndarray:
    if res < 1:
        raise BadResolution(f"resolution must be >= 1, got {res}")
    return _area_matrix(n, res) if res <= n else _bilinear_matrix(n, res)


def downsample(g: np.ndarray, res: int) -> np.ndarray:
    """Area-average a square matrix to res x res (bilinear when res > n).

    Applies the same row operator on both sides, so symmetry, the value range and
    the global mean (for area averaging) carry over.
    """
    g = np.asarray(g, dtype=np.float64)
    n = g.shape[0]
    if g.ndim != 2 or g.shape[1] != n:
        raise BadResolution(f"expected a square matrix, got shape {g.shape}")
    if res == n:
        return g.copy()
    A = resample_matrix(n, res)
    return _symmetric(A @ g @ A.T)


def gaf_images(X: np.ndarray, res: int = 16, value_range: tuple[float, float] = (0.0, 1.0)) -> np.ndarray:
    """Downsampled GAF of every row of X, flattened to shape (n_beats, res * res)."""
    X = np.atleast_2d(X)
    A = resample_matrix(X.shape[1], res) if res != X.shape[1] else None
    out = np.empty((X.shape[0], res * res))
    for i, x in enumerate(X):
        g = gaf_encode(x, value_range)
        out[i] = (g if A is None else _symmetric(A @ g @ A.T)).ravel()
    return out


def to_pixels(g: np.ndarray) -> np.ndarray:
    return np.floor((np.clip(g, -1.0, 1.0) + 1.0) / 2.0 * 255.0 + 0.5).astype(np.uint8)


def export_pgm(g: np.ndarray, path: str | Path) -> None:
    """Write a binary (P5) 8-bit PGM; -1 maps to 0 and +1 to 255."""
    px = to_pixels(np.asarray(g))
    h, w = px.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(px.tobytes(order="C"))


def export_csv(g: np.ndarray, path: str | Path) -> None:
    np.savetxt(path, np.asarray(g), fmt="%.9g", delimiter=",")
