"""Generative action-policy engine: flow-matching, DDPM and DDIM samplers
over a conditional temporal U-Net, with desk-scale benchmark environments."""

from .rng import RngStream, gaussian

__version__ = "0.1.0"

__all__ = ["RngStream", "gaussian", "__version__"]
