"""Airlight (backscattered light color) estimation."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .image import as_image
from .scatter import as_airlight

DEFAULT_QUANTILE = 0.001


def estimate_airlight_auto(I, quantile: float = DEFAULT_QUANTILE, rank: str = "min") -> np.ndarray:
    """Mean color of the most haze-opaque pixels.

    Pixels are ranked by their minimum channel (``rank="min"``) or by raw
    intensity (``rank="intensity"``); ties fall back to channel sum and then
    scan order, so the result is deterministic.
    """
    if not 0 < quantile <= 0.5:
        raise ValueError("quantile must be in (0, 0.5]")
    I = as_image(I)
    flat = I.reshape(-1, I.shape[2])
    total = flat.sum(axis=1)
    if rank == "min":
        primary = flat.min(axis=1)
    elif rank == "intensity":
        primary = total
    else:
        raise ValueError(f"unknown ranking {rank!r}")
    n = max(1, int(np.floor(quantile * flat.shape[0])))
    # lexsort: last key is primary; index key keeps scan order for full ties
    order = np.lexsort((np.arange(flat.shape[0]), -total, -primary))
    B = flat[order[:n]].mean(axis=0)
    if np.any(B <= 0):
        raise ValueError("airlight estimate has a zero component (image too dark)")
    return as_airlight(B)


def estimate_airlight_scribble(I, mask) -> np.ndarray:
    """Mean color over the pixels selected by a boolean scribble mask."""
    I = as_image(I)
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim == 3:
        mask = mask.any(axis=2)
    if mask.shape != I.shape[:2]:
        raise ValueError(f"scribble mask shape {mask.shape} does not match image {I.shape[:2]}")
    if not mask.any():
        raise ValueError("scribble mask selects no pixels")
    B = I[mask].mean(axis=0)
    if np.any(B <= 0):
        raise ValueError("scribble airlight has a zero component")
    return as_airlight(B)


def read_scribble(path) -> np.ndarray:
    """Load a scribble mask image; any nonzero pixel counts as selected."""
    with Image.open(Path(path)) as im:
        arr = np.asarray(im)
    if arr.ndim == 3:
        arr = arr[..., :3].max(axis=2) if arr.shape[2] >= 3 else arr.max(axis=2)
    return arr != 0
