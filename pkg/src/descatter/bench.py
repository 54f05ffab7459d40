"""Synthetic fog benchmark: foggy/noisy inputs from RGB + depth, PSNR tables."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .image import GammaSpec, as_image, as_map, psnr, read_image, read_pfm, to_display, to_linear
from .pipeline import AirlightSpec, PipelineConfig, naive_restore, restore
from .scatter import as_airlight, synthesize

log = logging.getLogger(__name__)

CSV_HEADER = ["scene", "eta", "method", "psnr_db", "runtime_s"]
METHODS = ("ours", "ours-auto", "naive-inversion", "gt-inversion")


@dataclass(frozen=True)
class FogScene:
    name: str
    latent: np.ndarray  # display domain, (H, W, 3)
    depth: np.ndarray  # (H, W), >= 0

    def __post_init__(self):
        lat = as_image(self.latent, f"{self.name} latent")
        dep = as_map(self.depth, lat.shape[:2], f"{self.name} depth")
        if np.any(dep < 0):
            raise ValueError(f"{self.name}: depth must be >= 0")
        object.__setattr__(self, "latent", lat)
        object.__setattr__(self, "depth", dep)


@dataclass(frozen=True)
class FogParams:
    eta: float = 1.0
    noise_sigma: float = 10.0  # on the 0-255 display scale
    airlight: tuple[float, ...] = (1.0, 1.0, 1.0)
    seed: int = 0
    noise_domain: str = "display"  # display | linear
    gamma: float = 2.2

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be >= 0")
        if self.noise_domain not in ("display", "linear"):
            raise ValueError(f"unknown noise domain {self.noise_domain!r}")
        as_airlight(self.airlight)


@dataclass(frozen=True)
class MetricsRow:
    scene: str
    eta: float
    method: str
    psnr_db: float
    runtime_s: float
    note: str = ""


def fog_transmission(scene: FogScene, eta: float) -> np.ndarray:
    return np.exp(-eta * scene.depth)


def make_foggy(scene: FogScene, fp: FogParams, rng: np.random.Generator | None = None) -> np.ndarray:
    """Blend the scene with airlight at t = exp(-eta d) and add Gaussian noise."""
    g = GammaSpec(fp.gamma)
    t = fog_transmission(scene, fp.eta)
    I_lin = synthesize(to_linear(scene.latent, g), t, fp.airlight)
    if rng is None:
        rng = np.random.default_rng(fp.seed)
    sigma = fp.noise_sigma / 255.0
    if fp.noise_domain == "linear":
        if sigma > 0:
            I_lin = I_lin + rng.normal(0.0, sigma, I_lin.shape)
        return to_display(np.clip(I_lin, 0.0, 1.0), g)
    I_disp = to_display(I_lin, g)
    if sigma > 0:
        I_disp = I_disp + rng.normal(0.0, sigma, I_disp.shape)
    return np.clip(I_disp, 0.0, 1.0)


# --- synthetic scenes -------------------------------------------------------

def _smooth_field(rng, h, w, sigma):
    f = gaussian_filter(rng.normal(size=(h, w)), sigma, mode="reflect")
    f -= f.min()
    peak = f.max()
    return f / peak if peak > 0 else f


def _saturated_colors(rng, n):
    """Random colors with one channel near zero."""
    cols = rng.uniform(0.25, 0.95, size=(n, 3))
    dark = rng.integers(0, 3, size=n)
    cols[np.arange(n), dark] = rng.uniform(0.0, 0.03, size=n)
    return cols


def _latent_checker(rng, h, w):
    """Two superimposed checkerboards indexing a saturated palette."""
    yy, xx = np.mgrid[0:h, 0:w]
    s1, s2 = rng.choice([4, 8, 16, 32], size=2, replace=False)
    idx = ((yy // s1 + xx // s1) % 2) * 2 + ((yy // s2 + xx // s2) % 2)
    return _saturated_colors(rng, 4)[idx]


def _latent_smooth(rng, h, w):
    """Smooth color field with the dark channel pulled to ~0 over most of the frame."""
    out = np.stack([_smooth_field(rng, h, w, max(h, w) / 10) for _ in range(3)], axis=2)
    out = 0.1 + 0.85 * out
    region = _smooth_field(rng, h, w, max(h, w) / 6) > 0.2
    dark = out.min(axis=2, keepdims=True)
    return np.where(region[:, :, None], out - 0.97 * dark, out)


def _latent_gradient(rng, h, w):
    """Color ramps in two channels over fine texture; third channel stays dark."""
    yy, xx = np.mgrid[0:h, 0:w]
    ramp = (xx if rng.random() < 0.5 else yy) / max(max(h, w) - 1, 1)
    out = np.empty((h, w, 3))
    dark = int(rng.integers(0, 3))
    lit = [c for c in range(3) if c != dark]
    lo, hi = rng.uniform(0.2, 0.9, size=(2, 2))
    for k, c in enumerate(lit):
        out[:, :, c] = lo[k] + (hi[k] - lo[k]) * ramp
    out[:, :, dark] = 0.02 * _smooth_field(rng, h, w, 8)
    scale = int(rng.choice([2, 6, 12]))
    tex = (yy // scale + xx // scale) % 2
    return out * (0.7 + 0.3 * tex[:, :, None])


def _depth_plane(rng, h, w):
    yy, xx = np.mgrid[0:h, 0:w] / max(h - 1, 1)
    a, b = rng.uniform(0.3, 1.0, size=2)
    d = a * yy + b * xx
    return 0.2 + 1.8 * (d - d.min()) / max(np.ptp(d), 1e-12)


def _depth_step(rng, h, w):
    d1, d2 = np.sort(rng.uniform(0.2, 2.0, size=2))
    if d2 - d1 < 0.5:
        d1, d2 = 0.4, 1.6
    split = int(rng.integers(w // 3, 2 * w // 3))
    d = np.full((h, w), d1)
    d[:, split:] = d2
    return d


def _depth_radial(rng, h, w):
    yy, xx = np.mgrid[0:h, 0:w]
    cy, cx = rng.uniform(0.3, 0.7, size=2) * (h, w)
    r = np.hypot(yy - cy, xx - cx)
    return 2.0 - 1.8 * r / r.max()


_LATENTS = (_latent_checker, _latent_smooth, _latent_gradient)
_DEPTHS = (_depth_plane, _depth_step, _depth_radial)


def make_synthetic_scenes(count: int, size: int = 256, seed: int = 0) -> list[FogScene]:
    """Deterministic textured scenes with depth in [0.2, 2.0]."""
    if count < 1:
        raise ValueError("count must be >= 1")
    scenes = []
    for i in range(count):
        rng = np.random.default_rng([seed, i])
        lk = _LATENTS[i % 3]
        dk = _DEPTHS[(i + i // 3) % 3]
        latent = np.clip(lk(rng, size, size), 0.0, 1.0)
        depth = dk(rng, size, size)
        scenes.append(FogScene(f"syn{i:02d}-{lk.__name__[8:]}-{dk.__name__[7:]}", latent, depth))
    return scenes


def load_scene_dir(path) -> list[FogScene]:
    """Load `<name>.png` + `<name>.depth.pfm` pairs from a directory."""
    path = Path(path)
    scenes = []
    for depth_file in sorted(path.glob("*.depth.pfm")):
        name = depth_file.name[: -len(".depth.pfm")]
        img_file = path / f"{name}.png"
        if not img_file.exists():
            log.warning("no image for depth map %s", depth_file)
            continue
        latent = read_image(img_file)
        if latent.shape[2] == 1:
            latent = np.repeat(latent, 3, axis=2)
        scenes.append(FogScene(name, latent, read_pfm(depth_file)[:, :, 0]))
    if not scenes:
        raise ValueError(f"no scenes found in {path}")
    return scenes


# --- benchmark --------------------------------------------------------------

def _run_method(method, scene, foggy, fp, cfg):
    B = fp.airlight
    if method == "ours":
        return restore(foggy, replace(cfg, airlight=AirlightSpec("fixed", value=tuple(B)))).latent
    if method == "ours-auto":
        return restore(foggy, replace(cfg, airlight=AirlightSpec("auto"))).latent
    if method == "naive-inversion":
        return naive_restore(foggy, B, cfg)
    if method == "gt-inversion":
        return naive_restore(foggy, B, cfg, t=fog_transmission(scene, fp.eta))
    raise ValueError(f"unknown method {method!r}")


def run_benchmark(
    scenes: list[FogScene],
    etas,
    fp_base: FogParams = FogParams(),
    methods=("ours", "naive-inversion"),
    cfg: PipelineConfig | None = None,
    psnr_domain: str = "display",
) -> list[MetricsRow]:
    """Score every (scene, eta, method) cell; a failing method yields a NaN row."""
    if not scenes or not list(etas) or not methods:
        raise ValueError("need at least one scene, eta and method")
    if psnr_domain not in ("display", "linear"):
        raise ValueError(f"unknown PSNR domain {psnr_domain!r}")
    cfg = cfg or PipelineConfig()
    cfg = replace(cfg, linear_out=psnr_domain == "linear")
    rows = []
    for si, scene in enumerate(scenes):
        truth = scene.latent if psnr_domain == "display" else to_linear(scene.latent, cfg.gamma)
        for ei, eta in enumerate(etas):
            fp = replace(fp_base, eta=float(eta))
            # one noise draw per (scene, eta), shared by all methods
            rng = np.random.default_rng([fp_base.seed, si, ei])
            foggy = make_foggy(scene, fp, rng)
            for method in methods:
                start = time.perf_counter()
                try:
                    out = _run_method(method, scene, foggy, fp, cfg)
                    score, note = psnr(out, truth), ""
                except Exception as exc:  # recorded, run continues
                    log.error("%s eta=%g %s failed: %s", scene.name, eta, method, exc)
                    score, note = math.nan, str(exc)
                rows.append(MetricsRow(scene.name, float(eta), method, score,
                                       time.perf_counter() - start, note))
    rows.sort(key=lambda r: (r.scene, r.eta, r.method))
    return rows


def rows_to_csv(rows, timings: bool = False) -> str:
    """CSV text; runtimes are left blank unless `timings` so output is reproducible."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in sorted(rows, key=lambda r: (r.scene, r.eta, r.method)):
        writer.writerow([r.scene, f"{r.eta:g}", r.method, f"{r.psnr_db:.4f}",
                         f"{r.runtime_s:.3f}" if timings else ""])
    return buf.getvalue()


def mean_psnr(rows, method: str, eta: float) -> float:
    vals = [r.psnr_db for r in rows if r.method == method and r.eta == eta]
    return float(np.mean(vals)) if vals else math.nan
