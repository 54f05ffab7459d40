"""End-to-end restoration: gamma, airlight, structure map, transmission, latent."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .airlight import DEFAULT_QUANTILE, estimate_airlight_auto, estimate_airlight_scribble, read_scribble
from .image import (
    GammaSpec,
    as_image,
    merge_intensity,
    split_intensity,
    to_display,
    to_linear,
)
from .latent import LatentParams, estimate_latent
from .scatter import as_airlight, invert, transmission_lower_bound
from .structure import DEFAULT_ITERATIONS, DEFAULT_RANGE_SIGMA, DEFAULT_SPATIAL_SIGMA, extract_structure
from .transmission import TransmissionParams, estimate_transmission


class RestorationError(RuntimeError):
    """A pipeline stage failed; `stage` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class NumericError(RestorationError):
    pass


@dataclass(frozen=True)
class AirlightSpec:
    mode: str = "auto"  # auto | scribble | fixed
    quantile: float = DEFAULT_QUANTILE
    mask_path: str | None = None
    value: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.mode not in ("auto", "scribble", "fixed"):
            raise ValueError(f"unknown airlight mode {self.mode!r}")
        if self.mode == "auto" and not 0 < self.quantile <= 0.5:
            raise ValueError("airlight quantile must be in (0, 0.5]")
        if self.mode == "scribble" and not self.mask_path:
            raise ValueError("scribble airlight needs a mask path")
        if self.mode == "fixed":
            if not self.value:
                raise ValueError("fixed airlight needs a value")
            as_airlight(self.value)

    @classmethod
    def parse(cls, text: str) -> "AirlightSpec":
        """Parse ``auto[:q]``, ``scribble:<mask.png>`` or ``fixed:r,g,b``."""
        mode, _, arg = text.partition(":")
        if mode == "auto":
            return cls("auto", quantile=float(arg) if arg else DEFAULT_QUANTILE)
        if mode == "scribble":
            return cls("scribble", mask_path=arg)
        if mode == "fixed":
            try:
                value = tuple(float(s) for s in arg.split(","))
            except ValueError:
                raise ValueError(f"bad fixed airlight {arg!r}") from None
            return cls("fixed", value=value)
        raise ValueError(f"unknown airlight mode {text!r}")


@dataclass(frozen=True)
class StructureParams:
    spatial_sigma: float = DEFAULT_SPATIAL_SIGMA
    range_sigma: float = DEFAULT_RANGE_SIGMA
    iterations: int = DEFAULT_ITERATIONS


@dataclass(frozen=True)
class PipelineConfig:
    gamma: GammaSpec = GammaSpec()
    airlight: AirlightSpec = AirlightSpec()
    structure: StructureParams | None = StructureParams()
    transmission: TransmissionParams = TransmissionParams()
    latent: LatentParams = LatentParams()
    underwater: bool = False
    luma_intensity: bool = False
    alternate: bool = False
    linear_out: bool = False
    # image the transmission stage observes: the structure map or the raw input
    transmission_source: str = "structure"
    seed: int = 0

    def __post_init__(self):
        if self.transmission_source not in ("structure", "input"):
            raise ValueError(f"unknown transmission source {self.transmission_source!r}")


@dataclass
class RestorationResult:
    latent: np.ndarray  # display domain unless cfg.linear_out
    transmission: np.ndarray
    depth_log: np.ndarray
    airlight: np.ndarray
    lower_bound: np.ndarray
    structure: np.ndarray
    direct: np.ndarray  # direct inversion L0, same domain as `latent`
    timings: dict = field(default_factory=dict)


def _resolve_airlight(I_lin, spec: AirlightSpec, channels: int, luma: bool) -> np.ndarray:
    if spec.mode == "fixed":
        b = np.asarray(spec.value, dtype=np.float64)
        if channels == 1 and b.size == 3:
            b = np.array([b @ np.array([0.299, 0.587, 0.114]) if luma else b.mean()])
        return as_airlight(b, channels)
    if spec.mode == "scribble":
        return estimate_airlight_scribble(I_lin, read_scribble(spec.mask_path))
    return estimate_airlight_auto(I_lin, spec.quantile)


def _structure_of(I_lin, cfg: PipelineConfig) -> np.ndarray:
    if cfg.structure is None:
        return I_lin
    sp = cfg.structure
    # filter the gamma-encoded image: noise there is roughly uniform and dark
    # colors stay separated; the solvers get the map back in linear units
    S = extract_structure(to_display(I_lin, cfg.gamma), sp.spatial_sigma, sp.range_sigma, sp.iterations)
    return to_linear(S, cfg.gamma)


def _run_stage(stage, timings, fn, *args, **kwargs):
    start = time.perf_counter()
    try:
        out = fn(*args, **kwargs)
    except RestorationError:
        raise
    except (ValueError, OSError, IndexError) as exc:
        raise RestorationError(stage, str(exc)) from exc
    timings[stage] = time.perf_counter() - start
    for arr in out if isinstance(out, tuple) else (out,):
        if isinstance(arr, np.ndarray) and not np.all(np.isfinite(arr)):
            raise NumericError(stage, "non-finite values produced")
    return out


def _restore_linear(I_lin, cfg: PipelineConfig, timings: dict, data_channels=None):
    """Both solver stages on a linear image; returns linear-domain maps."""
    B = _run_stage("airlight", timings, _resolve_airlight, I_lin, cfg.airlight,
                   I_lin.shape[2], cfg.luma_intensity)
    S = _run_stage("structure", timings, _structure_of, I_lin, cfg)
    tp = cfg.transmission
    I_t = S if cfg.transmission_source == "structure" else I_lin
    v = transmission_lower_bound(I_t, B, tp.eps)
    D, t = _run_stage("transmission", timings, estimate_transmission, I_t, B, S, tp,
                      data_channels=data_channels)
    if cfg.alternate:
        L_mid = _run_stage("latent", timings, estimate_latent, I_lin, t, B, cfg.latent)
        D, t = _run_stage("transmission-refine", timings, estimate_transmission, I_t, B, S, tp,
                          latent=L_mid, data_channels=data_channels)
    L = _run_stage("latent", timings, estimate_latent, I_lin, t, B, cfg.latent)
    L0 = invert(I_lin, t, B, t_floor=cfg.latent.t_floor)
    return L, L0, D, t, B, v, S


def _finish(img, cfg):
    return img if cfg.linear_out else to_display(img, cfg.gamma)


def restore(I_display, cfg: PipelineConfig = PipelineConfig()) -> RestorationResult:
    """Restore a display-domain image; dispatches to the intensity-only path when
    ``cfg.underwater`` is set."""
    if cfg.underwater:
        return restore_underwater(I_display, cfg)
    try:
        I = as_image(I_display, "input")
    except ValueError as exc:
        raise RestorationError("input", str(exc)) from exc
    timings: dict = {}
    I_lin = _run_stage("linearize", timings, to_linear, I, cfg.gamma)
    L, L0, D, t, B, v, S = _restore_linear(I_lin, cfg, timings)
    return RestorationResult(
        latent=_finish(L, cfg), transmission=t, depth_log=D, airlight=B,
        lower_bound=v, structure=S, direct=_finish(L0, cfg), timings=timings,
    )


def restore_underwater(I_display, cfg: PipelineConfig = PipelineConfig()) -> RestorationResult:
    """Run both solvers on the intensity channel only and re-apply the input's chroma."""
    try:
        I = as_image(I_display, "input")
    except ValueError as exc:
        raise RestorationError("input", str(exc)) from exc
    if I.shape[2] != 3:
        raise RestorationError("input", "intensity-only mode needs a 3-channel image")
    timings: dict = {}
    I_lin = _run_stage("linearize", timings, to_linear, I, cfg.gamma)
    ic = split_intensity(I_lin, luma=cfg.luma_intensity)
    # weight the single channel like the three it summarizes
    L, L0, D, t, B, v, S = _restore_linear(ic.intensity, cfg, timings, data_channels=3)
    return RestorationResult(
        latent=_finish(merge_intensity(ic, L), cfg), transmission=t, depth_log=D,
        airlight=B, lower_bound=v, structure=S,
        direct=_finish(merge_intensity(ic, L0), cfg), timings=timings,
    )


def naive_restore(I_display, B, cfg: PipelineConfig = PipelineConfig(), t=None) -> np.ndarray:
    """Baseline: transmission (estimated, or `t` if given) then direct inversion."""
    I_lin = to_linear(I_display, cfg.gamma)
    B = as_airlight(B, I_lin.shape[2])
    if t is None:
        S = _structure_of(I_lin, cfg)
        I_t = S if cfg.transmission_source == "structure" else I_lin
        _, t = estimate_transmission(I_t, B, S, cfg.transmission)
    return _finish(invert(I_lin, t, B, t_floor=cfg.latent.t_floor), cfg)
