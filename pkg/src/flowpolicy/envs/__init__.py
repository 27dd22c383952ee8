from .affordance import AffordanceScene, gen_affordance, gen_affordance_scene, zero_affordance
from .bimodal import BimodalReachTask, gen_bimodal, mode_prototypes
from .dataset import DatasetFormatError, DemoDataset
from .pusht import (
    PlanarPushState,
    PushTConfig,
    PushTEnv,
    coverage,
    gen_pusht,
    push_step,
    scripted_push_expert,
)

__all__ = [
    "DemoDataset",
    "DatasetFormatError",
    "BimodalReachTask",
    "gen_bimodal",
    "mode_prototypes",
    "PushTConfig",
    "PushTEnv",
    "PlanarPushState",
    "push_step",
    "coverage",
    "gen_pusht",
    "scripted_push_expert",
    "AffordanceScene",
    "gen_affordance_scene",
    "gen_affordance",
    "zero_affordance",
]
