"""Structure map extraction: iterated edge-preserving smoothing.

The map only feeds the guided weights of the transmission solver, so any
extractor that flattens fine texture while keeping large edges will do.
This one runs a few rounds of bilateral filtering where each round's range
weights come from the previous round's output.
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .image import as_image

DEFAULT_SPATIAL_SIGMA = 3.0
DEFAULT_RANGE_SIGMA = 0.1
DEFAULT_ITERATIONS = 3


def extract_structure(
    I,
    spatial_sigma: float = DEFAULT_SPATIAL_SIGMA,
    range_sigma: float = DEFAULT_RANGE_SIGMA,
    iterations: int = DEFAULT_ITERATIONS,
) -> np.ndarray:
    if spatial_sigma <= 0 or range_sigma <= 0:
        raise ValueError("structure sigmas must be > 0")
    if iterations < 0:
        raise ValueError("structure iterations must be >= 0")
    src = as_image(I).copy()
    if iterations == 0:
        return src
    radius = int(math.ceil(2.0 * spatial_sigma))
    inv2ss = 1.0 / (2.0 * spatial_sigma**2)
    inv2sr = 1.0 / (2.0 * range_sigma**2)
    out = np.empty_like(src)
    for _ in range(iterations):
        _kernels.bilateral_round(src, out, radius, inv2ss, inv2sr)
        src, out = out, src
    return np.clip(src, 0.0, 1.0)


def total_variation(img) -> float:
    """Sum of absolute horizontal and vertical neighbor differences."""
    arr = as_image(img)
    return float(np.abs(np.diff(arr, axis=0)).sum() + np.abs(np.diff(arr, axis=1)).sum())
