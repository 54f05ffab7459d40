"""Transmission-aware latent image restoration.

Per channel, each relaxation pass minimizes

    t(x)^2 (L - L0(x))^2 + lam_l * sum_y m(x, y) |L - L_prev(y)|

at every pixel, with weights m computed once from t and the direct
inversion L0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.ndimage import uniform_filter

from . import _kernels
from .image import as_image, as_map
from .scatter import DEFAULT_EPS, as_airlight, invert
from .transmission import window_offsets

DEGENERATE_WEIGHT = 1e-12


@dataclass(frozen=True)
class LatentParams:
    lam_l: float = 0.02
    window_radius: int = 5
    patch_radius: int = 3
    sigma_t: float = 0.1
    sigma_p: float = 0.1
    iterations: int = 3
    t_floor: float = DEFAULT_EPS

    def __post_init__(self):
        if not self.lam_l >= 0:
            raise ValueError("lambda_l must be >= 0")
        if self.window_radius < 1 or self.patch_radius < 1:
            raise ValueError("latent window and patch radii must be >= 1")
        if not (self.sigma_t > 0 and self.sigma_p > 0):
            raise ValueError("latent sigmas must be > 0")
        if self.iterations < 1:
            raise ValueError("latent iterations must be >= 1")
        if not self.t_floor > 0:
            raise ValueError("t_floor must be > 0")


@dataclass(frozen=True)
class LatentWeights:
    offsets: np.ndarray  # (K, 2) int (drow, dcol)
    weights: np.ndarray  # (H, W, K) normalized, 0 for out-of-bounds neighbors
    degenerate: np.ndarray  # (H, W) bool, window had no usable weight


def patch_distance(L0, x, y, patch_radius: int) -> float:
    """RMS difference between the patches around `x` and `y`.

    Only offsets where both patch pixels are inside the image count.
    """
    L0 = as_image(L0)
    h, w = L0.shape[:2]
    acc = 0.0
    count = 0
    for dr in range(-patch_radius, patch_radius + 1):
        for dc in range(-patch_radius, patch_radius + 1):
            xr, xc = x[0] + dr, x[1] + dc
            yr, yc = y[0] + dr, y[1] + dc
            if 0 <= xr < h and 0 <= xc < w and 0 <= yr < h and 0 <= yc < w:
                acc += float(np.sum((L0[xr, xc] - L0[yr, yc]) ** 2))
                count += L0.shape[2]
    return float(np.sqrt(acc / count)) if count else 0.0


def _shift_pair(h, w, dy, dx):
    """Slices (src, dst) so that dst pixel q pairs with src pixel q + (dy, dx)."""
    q_rows = slice(max(0, -dy), min(h, h - dy))
    q_cols = slice(max(0, -dx), min(w, w - dx))
    o_rows = slice(q_rows.start + dy, q_rows.stop + dy)
    o_cols = slice(q_cols.start + dx, q_cols.stop + dx)
    return (q_rows, q_cols), (o_rows, o_cols)


def _patch_rms_map(L0, dy, dx, patch_radius):
    """RMS patch distance between every x and x + (dy, dx), NaN if out of range."""
    h, w, _ = L0.shape
    q, o = _shift_pair(h, w, dy, dx)
    d2 = np.zeros((h, w))
    valid = np.zeros((h, w))
    d2[q] = np.mean((L0[q] - L0[o]) ** 2, axis=2)
    valid[q] = 1.0
    size = 2 * patch_radius + 1
    # window means over zero-padded maps; the ratio cancels the window area
    num = uniform_filter(d2, size=size, mode="constant")
    den = uniform_filter(valid, size=size, mode="constant")
    rms = np.full((h, w), np.nan)
    ok = valid > 0
    rms[ok] = np.sqrt(np.clip(num[ok], 0.0, None) / den[ok])
    return rms


def latent_weights(t, L0, p: LatentParams = LatentParams(), normalize: bool = True) -> LatentWeights:
    L0 = as_image(L0, "L0")
    t = as_map(t, L0.shape[:2], "transmission")
    h, w = t.shape
    offsets = window_offsets(p.window_radius)
    m = np.zeros((h, w, len(offsets)))
    inv2t = 1.0 / (2.0 * p.sigma_t**2)
    inv2p = 1.0 / (2.0 * p.sigma_p**2)
    for k, (dy, dx) in enumerate(offsets):
        rms = _patch_rms_map(L0, int(dy), int(dx), p.patch_radius)
        q, o = _shift_pair(h, w, int(dy), int(dx))
        dt = np.zeros((h, w))
        dt[q] = t[q] - t[o]
        mk = np.exp(-(dt**2) * inv2t - np.nan_to_num(rms) ** 2 * inv2p)
        mk[np.isnan(rms)] = 0.0
        m[:, :, k] = mk
    degenerate = np.all(m < DEGENERATE_WEIGHT, axis=2)
    if normalize:
        total = m.sum(axis=2, keepdims=True)
        m = np.where(degenerate[:, :, None], 0.0, m / np.where(total > 0, total, 1.0))
    return LatentWeights(offsets=offsets, weights=m, degenerate=degenerate)


def solve_pixel_L(l0: float, t_val: float, nb_values, nb_weights, lam_l: float,
                  t_floor: float = DEFAULT_EPS) -> float:
    """Exact minimizer of one latent subproblem, clamped to [0, 1]."""
    vals = np.asarray(nb_values, dtype=np.float64)
    wts = np.asarray(nb_weights, dtype=np.float64)
    if vals.shape != wts.shape:
        raise ValueError("neighbor values and weights differ in length")
    if np.any(wts < 0):
        raise ValueError("neighbor weights must be non-negative")
    order = np.argsort(vals, kind="mergesort")
    vals, wts = np.ascontiguousarray(vals[order]), np.ascontiguousarray(wts[order])
    tt = max(t_val, t_floor)
    res = _kernels.median_candidates(vals, wts, vals.size, float(l0), lam_l / (2.0 * tt * tt))
    return float(min(max(res, 0.0), 1.0))


def latent_subproblem_energy(value, l0, t_val, nb_values, nb_weights, lam_l, t_floor=DEFAULT_EPS) -> float:
    tt = max(t_val, t_floor)
    vals = np.asarray(nb_values, dtype=np.float64)
    wts = np.asarray(nb_weights, dtype=np.float64)
    return float(tt * tt * (value - l0) ** 2 + lam_l * np.sum(wts * np.abs(value - vals)))


def iterate_L(L_prev, L0, t, lw: LatentWeights, p: LatentParams) -> np.ndarray:
    L_prev = as_image(L_prev, "L")
    L0 = as_image(L0, "L0")
    t_eff = np.maximum(as_map(t, L0.shape[:2], "transmission"), p.t_floor)
    if L_prev.shape != L0.shape or lw.weights.shape[:2] != L0.shape[:2]:
        raise ValueError("iterate_L: dimensions disagree")
    out = np.empty_like(L0)
    _kernels.iterate_l_pass(
        np.ascontiguousarray(L_prev), np.ascontiguousarray(L0), np.ascontiguousarray(t_eff),
        np.ascontiguousarray(lw.weights), np.ascontiguousarray(lw.offsets.astype(np.int64)),
        np.ascontiguousarray(lw.degenerate), float(p.lam_l), out,
    )
    return out


def estimate_latent(I, t, B, p: LatentParams = LatentParams(),
                    on_iteration: Callable | None = None) -> np.ndarray:
    I = as_image(I)
    t = as_map(t, I.shape[:2], "transmission")
    B = as_airlight(B, I.shape[2])
    L0 = invert(I, t, B, t_floor=p.t_floor)
    if p.lam_l == 0:
        return L0
    lw = latent_weights(t, L0, p)
    L = L0
    for k in range(p.iterations):
        L = iterate_L(L, L0, t, lw, p)
        if on_iteration is not None:
            on_iteration(k + 1, L)
    return L
