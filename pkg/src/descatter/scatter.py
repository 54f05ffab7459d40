"""Blending model I = t*L + (1 - t)*B, its inversion, and the transmission lower bound."""

from __future__ import annotations

import numpy as np

from .image import as_image, as_map

DEFAULT_EPS = 0.01
# floor on |B - I| before any logarithm
MAG_FLOOR = 1e-6


def as_airlight(b, channels: int | None = None) -> np.ndarray:
    """Validate an airlight color; a scalar is broadcast to `channels`."""
    arr = np.atleast_1d(np.asarray(b, dtype=np.float64)).ravel()
    if channels is not None:
        if arr.size == 1 and channels > 1:
            arr = np.full(channels, arr[0])
        elif arr.size != channels:
            raise ValueError(f"airlight has {arr.size} components, image has {channels} channels")
    if not np.all(np.isfinite(arr)):
        raise ValueError("airlight must be finite")
    if np.any(arr <= 0):
        raise ValueError(f"every airlight component must be > 0, got {arr.tolist()}")
    return arr


def _check_t(t, shape, name="transmission"):
    t = as_map(t, shape, name)
    if np.any(t <= 0) or np.any(t > 1):
        raise ValueError(f"{name} values must lie in (0, 1]")
    return t


def synthesize(L, t, B) -> np.ndarray:
    L = as_image(L, "latent")
    t = _check_t(t, L.shape[:2])
    B = as_airlight(B, L.shape[2])
    tt = t[:, :, None]
    return tt * L + (1.0 - tt) * B


def invert(I, t, B, t_floor: float = DEFAULT_EPS) -> np.ndarray:
    """Direct inversion L0 = B - (B - I)/max(t, t_floor), clamped to [0, 1]."""
    if not t_floor > 0:
        raise ValueError("t_floor must be > 0")
    I = as_image(I)
    t = as_map(t, I.shape[:2], "transmission")
    B = as_airlight(B, I.shape[2])
    tt = np.maximum(t, t_floor)[:, :, None]
    return np.clip(B - (B - I) / tt, 0.0, 1.0)


def transmission_lower_bound(I, B, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Per-pixel lower bound v = ln(max(1 - min_c I^c/B^c, eps)) on D = ln t."""
    if not 0 < eps < 1:
        raise ValueError("eps must be in (0, 1)")
    I = as_image(I)
    B = as_airlight(B, I.shape[2])
    ratio = np.min(I / B, axis=2)
    return np.log(np.maximum(1.0 - ratio, eps))


def predict_transmission_error(B: float, I: float, t: float, dt: float) -> float:
    """Magnitude of the latent error caused by a transmission error `dt`."""
    if t + dt == 0:
        raise ValueError("t + dt must be non-zero")
    return abs((B - I) / t * (dt / (t + dt)))


def predict_noise_gain(n: float, t: float) -> float:
    """Magnitude of inversion noise for input noise `n` at transmission `t`."""
    if t == 0:
        raise ValueError("t must be non-zero")
    return abs(n / t)


def log_magnitude(B, X) -> np.ndarray:
    """ln|B - X| per channel with the magnitude floored at 1e-6."""
    return np.log(np.maximum(np.abs(B - X), MAG_FLOOR))
