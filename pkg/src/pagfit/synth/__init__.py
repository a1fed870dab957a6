"""Synthetic ground-truth scenes and brute-force oracles."""

from .human import build_human, idle_pelvis_track
from .oracle import (
    oracle_losses,
    oracle_motion_diversity,
    oracle_plausibility,
    oracle_temporal_smoothness,
)
from .primitives import ObjectModel, PartPrimitive, briefcase_model, table_model
from .scenario import (
    FAMILIES,
    FAMILY_FLAGS,
    NoiseModel,
    ObjectScenario,
    ScenarioSpec,
    SynthScene,
    family_trajectory,
    generate_scene,
    standard_spec,
)

__all__ = [
    "FAMILIES",
    "FAMILY_FLAGS",
    "NoiseModel",
    "ObjectModel",
    "ObjectScenario",
    "PartPrimitive",
    "ScenarioSpec",
    "SynthScene",
    "briefcase_model",
    "build_human",
    "family_trajectory",
    "generate_scene",
    "idle_pelvis_track",
    "oracle_losses",
    "oracle_motion_diversity",
    "oracle_plausibility",
    "oracle_temporal_smoothness",
    "standard_spec",
    "table_model",
]
