"""Restarted first-order optimization of per-object pose trajectories.

Each restart seeds the rotations with a different yaw about the up axis
(0/90/180/270 degrees by default), initializes translations from the
per-frame observed object centroids, and runs Adam with cosine-decayed
step sizes over the total loss. The restart with the lowest exact-mode
total wins. Runs are deterministic for a fixed seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from ..errors import NonFiniteLossError
from ..geom import PoseTrajectory, axis_angle_to_matrix
from .data import LossWeights, Scene
from .losses import DEFAULT_SOFTMIN_TEMP, LossBreakdown, LossEvaluator, TrajectoryParams


@dataclass(frozen=True)
class OptimizeConfig:
    steps: int = 600
    restarts: int = 4
    seed: int = 0
    learning_rate: float = 1e-2
    lr_floor_ratio: float = 0.01      # cosine decay target as a fraction of lr
    subsample: int | None = 4096
    softmin_temp: float = DEFAULT_SOFTMIN_TEMP
    up_axis: tuple[float, float, float] = (0.0, 1.0, 0.0)
    random_yaw: bool = False          # sample restart yaws instead of uniform
    trace_every: int = 10
    weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


@dataclass
class TraceRow:
    restart: int
    step: int
    total: float
    fit: float
    contact: float
    penetration: float
    smooth: float


@dataclass
class RestartResult:
    index: int
    yaw: float
    final_total: float            # exact-mode weighted total
    breakdown: LossBreakdown
    trajectories: dict[str, PoseTrajectory]
    failed: bool = False


@dataclass
class OptimizeResult:
    trajectories: dict[str, PoseTrajectory]
    breakdown: LossBreakdown
    total: float
    chosen_restart: int
    restarts: list[RestartResult]
    trace: list[TraceRow]


def _initial_params(scene: Scene, yaw: float, up_axis) -> dict[str, TrajectoryParams]:
    """Identity-times-yaw rotations; translations from observed centroids.

    The per-frame translation maps the canonical centroid onto the
    observed object centroid; frames without observations reuse the
    previous frame's value (or the first available one).
    """
    t = scene.graph.frame_count
    base_rot = axis_angle_to_matrix(np.asarray(up_axis, dtype=np.float64), yaw)
    params = {}
    for oid in scene.object_ids():
        canon_centroid = scene.objects[oid].centroid()
        offset = base_rot @ canon_centroid
        trans = np.zeros((t, 3))
        filled = np.zeros(t, dtype=bool)
        for i, frame in enumerate(scene.observations[oid].frames):
            if frame.object_points is not None and len(frame.object_points) > 0:
                trans[i] = frame.object_points.mean(axis=0) - offset
                filled[i] = True
        if filled.any():
            last = None
            for i in range(t):
                if filled[i]:
                    last = trans[i].copy()
                elif last is not None:
                    trans[i] = last
            first = int(np.argmax(filled))
            trans[:first] = trans[first]
        traj = PoseTrajectory(np.tile(base_rot, (t, 1, 1)), trans)
        params[oid] = TrajectoryParams.from_trajectory(traj)
    return params


def _restart_yaws(config: OptimizeConfig) -> list[float]:
    if config.random_yaw:
        rng = np.random.default_rng([config.seed, 0xA11])
        return [float(a) for a in rng.uniform(0.0, 2.0 * math.pi, config.restarts)]
    return [2.0 * math.pi * r / config.restarts for r in range(config.restarts)]


def optimize(scene: Scene, config: OptimizeConfig = OptimizeConfig()) -> OptimizeResult:
    """Fit per-object pose trajectories to the scene's observations.

    Restarts that hit a non-finite loss are abandoned; the call fails with
    :class:`NonFiniteLossError` only when every restart does.
    """
    scene.validate()
    weights = config.weights
    trace: list[TraceRow] = []
    results: list[RestartResult] = []

    for r, yaw in enumerate(_restart_yaws(config)):
        rng = np.random.default_rng([config.seed, r])
        evaluator = LossEvaluator(scene, softmin_temp=config.softmin_temp,
                                  subsample=config.subsample, rng=rng)
        params = _initial_params(scene, yaw, config.up_axis)
        tensors = [t for p in params.values() for t in p.tensors()]
        opt = torch.optim.Adam(tensors, lr=config.learning_rate)
        sched = torch.optim.lr_scheduler.CosineAnnealingLR(
            opt, T_max=config.steps,
            eta_min=config.learning_rate * config.lr_floor_ratio)
        failed = False
        for step in range(config.steps):
            opt.zero_grad(set_to_none=True)
            total, terms = evaluator.evaluate(params, weights, exact=False)
            if not torch.isfinite(total):
                failed = True
                break
            total.backward()
            opt.step()
            sched.step()
            if step % config.trace_every == 0 or step == config.steps - 1:
                with torch.no_grad():
                    trace.append(TraceRow(
                        restart=r, step=step, total=float(total.detach()),
                        fit=float(terms["fit_object_3d"] + terms["fit_part_3d"]
                                  + terms["fit_object_2d"] + terms["fit_part_2d"]),
                        contact=float(terms["contact_continuity"]
                                      + terms["contact_dynamics"]),
                        penetration=float(terms["penetration"]),
                        smooth=float(terms["smooth_rotation"]
                                     + terms["smooth_translation"]),
                    ))
        if failed:
            results.append(RestartResult(r, yaw, float("inf"), LossBreakdown(),
                                         {}, failed=True))
            continue
        breakdown = evaluator.breakdown(params, exact=True)
        results.append(RestartResult(
            r, yaw, breakdown.total(weights), breakdown,
            {oid: params[oid].to_trajectory() for oid in scene.object_ids()},
        ))

    viable = [res for res in results if not res.failed]
    if not viable:
        raise NonFiniteLossError("every restart produced a non-finite loss")
    best = min(viable, key=lambda res: (res.final_total, res.index))
    return OptimizeResult(
        trajectories=best.trajectories,
        breakdown=best.breakdown,
        total=best.final_total,
        chosen_restart=best.index,
        restarts=results,
        trace=trace,
    )
