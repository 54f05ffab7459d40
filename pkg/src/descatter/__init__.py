"""Single-image scattering-layer removal (fog, haze, sandstorm, underwater).

Two relaxation stages: a log-transmission map regularized by non-local
total variation with a selective-neighbor lower bound, then a
transmission-aware non-local restoration of the latent image.
"""

from .airlight import estimate_airlight_auto, estimate_airlight_scribble
from .image import GammaSpec, psnr, read_image, to_display, to_linear, write_image
from .latent import LatentParams, estimate_latent
from .pipeline import AirlightSpec, PipelineConfig, RestorationError, restore, restore_underwater
from .scatter import invert, synthesize, transmission_lower_bound
from .structure import extract_structure
from .transmission import TransmissionParams, estimate_transmission

__version__ = "0.1.0"

__all__ = [
    "AirlightSpec",
    "GammaSpec",
    "LatentParams",
    "PipelineConfig",
    "RestorationError",
    "TransmissionParams",
    "estimate_airlight_auto",
    "estimate_airlight_scribble",
    "estimate_latent",
    "estimate_transmission",
    "extract_structure",
    "invert",
    "psnr",
    "read_image",
    "restore",
    "restore_underwater",
    "synthesize",
    "to_display",
    "to_linear",
    "transmission_lower_bound",
    "write_image",
]
