"""Transmission estimation in the log domain (D = ln t).

Minimizes, per pixel and per relaxation pass,

    sum_c (D - (i_bar^c - l_bar^c))^2 + lam * sum_y w(x, y) |D - D_prev(y)|

where neighbors y with D_prev(y) below the pixel's lower bound v(x) get zero
weight. Each subproblem is solved exactly as the median of the sorted
neighbor values and the shifted data targets r_h.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels
from .image import as_image, as_map
from .scatter import DEFAULT_EPS, as_airlight, invert, log_magnitude, transmission_lower_bound


@dataclass(frozen=True)
class TransmissionParams:
    lam: float = 15.0
    window_radius: int = 5
    sigma_s: float = 0.03
    eps: float = DEFAULT_EPS
    iterations: int = 3

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("lambda must be >= 0")
        if self.window_radius < 1:
            raise ValueError("window radius must be >= 1")
        if not self.sigma_s > 0:
            raise ValueError("sigma_s must be > 0")
        if not 0 < self.eps < 1:
            raise ValueError("eps must be in (0, 1)")
        if self.iterations < 1:
            raise ValueError("transmission iterations must be >= 1")


@dataclass(frozen=True)
class LogObservation:
    i_bar: np.ndarray  # (H, W, C) ln|B - I|
    l_bar: np.ndarray  # (H, W, C) ln|B - L|

    @property
    def data_targets(self) -> np.ndarray:
        """Per-channel targets a^c = i_bar^c - l_bar^c."""
        return self.i_bar - self.l_bar

    @property
    def mean_target(self) -> np.ndarray:
        return self.data_targets.mean(axis=2)


def build_observation(I, B, L) -> LogObservation:
    I = as_image(I)
    L = as_image(L, "latent")
    B = as_airlight(B, I.shape[2])
    return LogObservation(i_bar=log_magnitude(B, I), l_bar=log_magnitude(B, L))


def window_offsets(radius: int) -> np.ndarray:
    """(K, 2) array of (drow, dcol) offsets in a square window, center excluded."""
    r = np.arange(-radius, radius + 1)
    dy, dx = np.meshgrid(r, r, indexing="ij")
    keep = (dy != 0) | (dx != 0)
    return np.stack([dy[keep], dx[keep]], axis=1)


def _window(shape, x, radius):
    row, col = x
    h, w = shape
    offs = window_offsets(radius)
    ys = row + offs[:, 0]
    xs = col + offs[:, 1]
    inside = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
    return offs[inside], ys[inside], xs[inside]


def guided_weights(S, x, window_radius: int, sigma_s: float):
    """Guided weights from pixel `x` = (row, col) to its clipped window.

    Returns ``(offsets, weights)``; the weight uses the channel mean of the
    squared structure-map differences.
    """
    S = as_image(S, "structure")
    row, col = x
    if not (0 <= row < S.shape[0] and 0 <= col < S.shape[1]):
        raise IndexError(f"pixel {x} outside image")
    offs, ys, xs = _window(S.shape[:2], x, window_radius)
    d2 = np.mean((S[ys, xs] - S[row, col]) ** 2, axis=1)
    return offs, np.exp(-d2 / (2.0 * sigma_s**2))


def selective_weights(weights, offsets, D_prev, v, x) -> np.ndarray:
    """Zero the weight of every neighbor whose current D lies below v(x)."""
    row, col = x
    weights = np.asarray(weights, dtype=np.float64)
    offsets = np.asarray(offsets)
    nb = D_prev[row + offsets[:, 0], col + offsets[:, 1]]
    return np.where(nb < v[row, col], 0.0, weights)


def subproblem_energy(value, data_targets, nb_values, nb_weights, lam) -> float:
    a = np.atleast_1d(np.asarray(data_targets, dtype=np.float64))
    vals = np.asarray(nb_values, dtype=np.float64)
    wts = np.asarray(nb_weights, dtype=np.float64)
    return float(np.sum((value - a) ** 2) + lam * np.sum(wts * np.abs(value - vals)))


def solve_pixel_D(data_targets, nb_values, nb_weights, lam: float) -> float:
    """Exact minimizer of one D subproblem.

    `data_targets` holds one a^c per channel. Neighbors are sorted here if
    they are not already.
    """
    a = np.atleast_1d(np.asarray(data_targets, dtype=np.float64))
    vals = np.asarray(nb_values, dtype=np.float64)
    wts = np.asarray(nb_weights, dtype=np.float64)
    if vals.shape != wts.shape:
        raise ValueError("neighbor values and weights differ in length")
    if np.any(wts < 0):
        raise ValueError("neighbor weights must be non-negative")
    order = np.argsort(vals, kind="mergesort")
    vals, wts = np.ascontiguousarray(vals[order]), np.ascontiguousarray(wts[order])
    half = lam / (2.0 * a.size)
    return float(_kernels.median_candidates(vals, wts, vals.size, float(a.mean()), half))


def iterate_D(D_prev, obs: LogObservation, S, v, p: TransmissionParams,
              data_channels: int | None = None, return_raw: bool = False):
    """One relaxation pass over every pixel; neighbors are read from `D_prev` only.

    `data_channels` overrides the channel count C in the data term (it
    defaults to the observation's channel count). With ``return_raw`` the
    pre-clamp subproblem minimizers are returned as a second array.
    """
    D_prev = as_map(D_prev, name="D")
    shape = D_prev.shape
    v = as_map(v, shape, "lower bound")
    S = as_image(S, "structure")
    if S.shape[:2] != shape or obs.i_bar.shape[:2] != shape:
        raise ValueError("iterate_D: map dimensions disagree")
    n_ch = obs.i_bar.shape[2] if data_channels is None else int(data_channels)
    out = np.empty(shape)
    raw = np.empty(shape)
    _kernels.iterate_d_pass(
        np.ascontiguousarray(D_prev), np.ascontiguousarray(obs.mean_target),
        np.ascontiguousarray(v), np.ascontiguousarray(S), p.window_radius,
        1.0 / (2.0 * p.sigma_s**2), float(p.lam), float(n_ch), out, raw,
    )
    if return_raw:
        return out, raw
    return out


def provisional_latent(I, v, B, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Direct inversion at the lower-bound transmission e^v."""
    return invert(I, np.exp(v), B, t_floor=eps)


def estimate_transmission(
    I, B, S, p: TransmissionParams = TransmissionParams(),
    latent=None, data_channels: int | None = None,
    on_iteration: Callable | None = None,
):
    """Run the relaxation from D = v and return ``(D, t)``.

    The log-latent term comes from `latent` when given, otherwise from the
    provisional inversion at t = e^v. `on_iteration(k, D, raw)` is called
    after each pass with the clamped map and the pre-clamp minimizers.
    """
    I = as_image(I)
    B = as_airlight(B, I.shape[2])
    v = transmission_lower_bound(I, B, p.eps)
    L = provisional_latent(I, v, B, p.eps) if latent is None else latent
    obs = build_observation(I, B, L)
    D = v.copy()
    for k in range(p.iterations):
        D, raw = iterate_D(D, obs, S, v, p, data_channels=data_channels, return_raw=True)
        if on_iteration is not None:
            on_iteration(k + 1, D, raw)
    return D, np.exp(D)
