"""Part-affordance-guided trajectory optimization: losses, optimizer,
point-map alignment, and the scene/file formats they consume."""

from .align import SimilarityTransform, align_point_maps
from .data import (
    FrameObservation,
    HumanMotionSequence,
    LossWeights,
    ObservationBundle,
    Scene,
)
from .losses import LossBreakdown, LossEvaluator, TrajectoryParams
from .optimize import OptimizeConfig, OptimizeResult, RestartResult, TraceRow, optimize

__all__ = [
    "FrameObservation",
    "HumanMotionSequence",
    "LossBreakdown",
    "LossEvaluator",
    "LossWeights",
    "ObservationBundle",
    "OptimizeConfig",
    "OptimizeResult",
    "RestartResult",
    "Scene",
    "SimilarityTransform",
    "TraceRow",
    "TrajectoryParams",
    "align_point_maps",
    "optimize",
]
