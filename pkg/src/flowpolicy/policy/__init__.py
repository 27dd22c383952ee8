from .losses import ddpm_forward_sample, ddpm_loss, fm_loss, interpolate
from .model import PolicyModel, build_policy
from .normalizer import MinMaxNormalizer, UnfittedError
from .observation import Observation, ObservationLayout
from .samplers import ddim_sample, ddpm_sample, fm_sample, strided_indices
from .schedule import NoiseSchedule
from .unet import ArchConfig, ConditionalUnet1D, build_unet, time_embedding

__all__ = [
    "Observation",
    "ObservationLayout",
    "MinMaxNormalizer",
    "UnfittedError",
    "NoiseSchedule",
    "ArchConfig",
    "ConditionalUnet1D",
    "build_unet",
    "time_embedding",
    "PolicyModel",
    "build_policy",
    "interpolate",
    "fm_loss",
    "ddpm_loss",
    "ddpm_forward_sample",
    "fm_sample",
    "ddpm_sample",
    "ddim_sample",
    "strided_indices",
]
