"""Image arrays, gamma transforms, intensity/chroma split, PSNR and file I/O.

Images are float64 numpy arrays of shape (height, width, channels) with
channels in {1, 3}. Numpy's C order gives the row-major (x, y, channel)
layout every module relies on. Single-channel maps (transmission, D, v)
are plain (height, width) arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

INTENSITY_EPS = 1e-6
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def as_image(img, name: str = "image") -> np.ndarray:
    """Validate and return `img` as a float64 (H, W, C) array.

    2-D input is promoted to a single channel. Raises ValueError on bad
    shape or non-finite values.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ValueError(f"{name}: expected (H, W, 1|3) array, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name}: empty image")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: contains non-finite values")
    return arr


def as_map(m, shape: tuple[int, int] | None = None, name: str = "map") -> np.ndarray:
    """Validate a single-channel per-pixel map, optionally against `shape`."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise ValueError(f"{name}: expected (H, W) array, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"{name}: shape {arr.shape} does not match image {tuple(shape)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: contains non-finite values")
    return arr


@dataclass(frozen=True)
class GammaSpec:
    exponent: float = 2.2

    def __post_init__(self):
        if not (self.exponent > 0 and math.isfinite(self.exponent)):
            raise ValueError(f"gamma exponent must be > 0, got {self.exponent}")


def to_linear(img, g: GammaSpec = GammaSpec()) -> np.ndarray:
    arr = as_image(img)
    if g.exponent == 1.0:
        return arr.copy()
    return np.power(np.clip(arr, 0.0, None), g.exponent)


def to_display(img, g: GammaSpec = GammaSpec()) -> np.ndarray:
    arr = np.clip(as_image(img), 0.0, 1.0)
    if g.exponent == 1.0:
        return arr
    return np.power(arr, 1.0 / g.exponent)


def psnr(a, b, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; ``math.inf`` when the images match."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"psnr: shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


@dataclass(frozen=True)
class IntensityChroma:
    intensity: np.ndarray  # (H, W, 1)
    chroma: np.ndarray  # (H, W, 3), per-channel ratio to intensity


def intensity_of(img, luma: bool = False) -> np.ndarray:
    arr = as_image(img)
    if arr.shape[2] != 3:
        raise ValueError("intensity split needs a 3-channel image")
    if luma:
        return (arr @ LUMA_WEIGHTS)[:, :, None]
    return arr.mean(axis=2, keepdims=True)


def split_intensity(img, luma: bool = False) -> IntensityChroma:
    arr = as_image(img)
    inten = intensity_of(arr, luma=luma)
    dark = inten < INTENSITY_EPS
    safe = np.where(dark, 1.0, inten)
    chroma = np.where(dark, 1.0, arr / safe)
    return IntensityChroma(intensity=inten, chroma=chroma)


def merge_intensity(ic: IntensityChroma, intensity=None) -> np.ndarray:
    """Rebuild a color image from (possibly modified) intensity and stored ratios."""
    inten = ic.intensity if intensity is None else as_image(intensity, "intensity")
    if inten.shape[2] != 1 or ic.chroma.shape[2] != 3:
        raise ValueError("merge_intensity: need 1-channel intensity and 3-channel chroma")
    if inten.shape[:2] != ic.chroma.shape[:2]:
        raise ValueError("merge_intensity: intensity/chroma size mismatch")
    return np.clip(inten * ic.chroma, 0.0, 1.0)


# --- file formats -----------------------------------------------------------

def read_image(path) -> np.ndarray:
    """Read PNG/PPM (8-bit, scaled by 1/255) or PFM (float) into an image array."""
    path = Path(path)
    if path.suffix.lower() == ".pfm":
        return as_image(read_pfm(path), str(path))
    with Image.open(path) as im:
        if im.mode in ("I;16", "I"):
            raise ValueError(f"{path}: only 8-bit images are supported")
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.float64) / 255.0
    return as_image(arr, str(path))


def _to_u8(img) -> np.ndarray:
    arr = np.clip(as_image(img), 0.0, 1.0)
    return np.round(arr * 255.0).astype(np.uint8)


def write_image(path, img) -> None:
    """Write PNG, PPM (binary P6/P5) or PFM depending on the file suffix."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".pfm":
        write_pfm(path, img)
        return
    u8 = _to_u8(img)
    if suffix in (".ppm", ".pgm", ".pnm"):
        h, w, c = u8.shape
        magic = b"P6" if c == 3 else b"P5"
        with open(path, "wb") as f:
            f.write(magic + b"\n%d %d\n255\n" % (w, h))
            f.write(u8.tobytes())
        return
    mode = "L" if u8.shape[2] == 1 else "RGB"
    data = u8[:, :, 0] if mode == "L" else u8
    # fixed options so identical pixels give identical bytes
    Image.fromarray(data, mode=mode).save(path, format="PNG", optimize=False, compress_level=6)


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        header = f.readline().strip()
        if header == b"PF":
            channels = 3
        elif header == b"Pf":
            channels = 1
        else:
            raise ValueError(f"{path}: not a PFM file")
        dims = f.readline().split()
        while not dims:
            dims = f.readline().split()
        w, h = int(dims[0]), int(dims[1])
        scale = float(f.readline().strip())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(f.read(w * h * channels * 4), dtype=dtype)
    if data.size != w * h * channels:
        raise ValueError(f"{path}: truncated PFM data")
    # PFM stores rows bottom-to-top
    arr = data.reshape(h, w, channels)[::-1].astype(np.float64)
    return arr


def write_pfm(path, img) -> None:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    h, w, c = arr.shape
    if c not in (1, 3):
        raise ValueError("PFM supports 1 or 3 channels")
    header = b"PF\n" if c == 3 else b"Pf\n"
    with open(path, "wb") as f:
        f.write(header + b"%d %d\n-1.0\n" % (w, h))
        f.write(np.ascontiguousarray(arr[::-1], dtype="<f4").tobytes())
