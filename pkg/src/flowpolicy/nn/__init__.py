from . import ops
from .modules import Conv1d, Conv2d, Dense, GroupNorm, LayerSpec, Module, ModuleList
from .optim import MissingGradError, ParamStore, adamw_step
from .tensor import NonFiniteError, Parameter, ShapeError, Tensor, no_grad

__all__ = [
    "ops",
    "Tensor",
    "Parameter",
    "ShapeError",
    "NonFiniteError",
    "no_grad",
    "Module",
    "ModuleList",
    "Dense",
    "Conv1d",
    "Conv2d",
    "GroupNorm",
    "LayerSpec",
    "ParamStore",
    "MissingGradError",
    "adamw_step",
]
