import numpy as np
import pytest
import torch

from pagfit import geom
from pagfit.errors import FrameCountMismatchError, TooFewFramesError
from pagfit.hoiopt.data import LossWeights
from pagfit.hoiopt.losses import (
    LossEvaluator,
    TrajectoryParams,
    smooth_rotation_term,
    smooth_translation_term,
)
from pagfit.hoiopt.torchgeom import rot6d_to_matrix

from conftest import build_tiny_scene

STATIC_EDGE = ({"first": "box.handle", "second": "person.rh",
                "continuous": True, "static_contact": True},)


def params_for(traj):
    return {"box": TrajectoryParams.from_trajectory(traj)}


def test_self_consistent_observations_give_zero_fit():
    scene, traj = build_tiny_scene(frame_count=5)
    ev = LossEvaluator(scene)
    terms = ev.fit_terms(params_for(traj), exact=True)
    for name, value in terms.items():
        assert float(value) <= 1e-6, name


def test_offset_targets_hand_oracle():
    # singleton object cloud; every per-frame target shifted by (0.1, 0, 0)
    # => object-level 3D chamfer contributes exactly 0.1 per frame
    from pagfit.hoiopt.data import (
        FrameObservation, ObservationBundle, Scene)
    import json
    from pagfit import pag

    t = 6
    doc = {
        "version": 1, "frame_count": t,
        "virtual_nodes": [{"id": "box", "kind": "object",
                           "rotates": True, "translates": True}],
        "part_nodes": [{"id": "box.body", "kind": "object_part",
                        "owner": "box", "label": "body"}],
        "edges": [],
    }
    graph = pag.parse_pag(json.dumps(doc))
    cloud = geom.PointCloud([[0.0, 0.0, 0.0]], labels=[0])
    traj = geom.PoseTrajectory(np.tile(np.eye(3), (t, 1, 1)),
                               np.tile([0.0, 0.0, 2.0], (t, 1)))
    k = geom.CameraIntrinsics(100.0, 100.0, 64.0, 64.0, 128, 128)
    frames = [FrameObservation(
        object_points=traj.transform_frame(i, cloud.points) + [0.1, 0.0, 0.0])
        for i in range(t)]
    scene = Scene(graph=graph, objects={"box": cloud}, sdfs={},
                  observations={"box": ObservationBundle(frames, k)},
                  humans={}, intrinsics=k)
    ev = LossEvaluator(scene)
    terms = ev.fit_terms(params_for(traj), exact=True)
    assert float(terms["fit_object_3d"]) == pytest.approx(0.1 * t, abs=1e-9)
    assert float(terms["fit_part_3d"]) == 0.0


def test_missing_part_frame_is_skipped():
    scene, traj = build_tiny_scene(frame_count=5)
    full_ev = LossEvaluator(scene)
    full = full_ev.fit_terms(params_for(traj), exact=True)
    # drop one frame's part observation; the totals must match a bundle
    # that never had it
    scene.observations["box"].frames[2].part_points.pop("box.handle")
    ev = LossEvaluator(scene)
    dropped = ev.fit_terms(params_for(traj), exact=True)
    assert float(dropped["fit_part_3d"]) == pytest.approx(
        float(full["fit_part_3d"]), abs=1e-12)


def test_fit_invariant_under_target_permutation():
    scene, traj = build_tiny_scene(frame_count=4)
    ev = LossEvaluator(scene)
    base = {k: float(v) for k, v in
            ev.fit_terms(params_for(traj), exact=True).items()}
    rng = np.random.default_rng(0)
    for f in scene.observations["box"].frames:
        perm = rng.permutation(len(f.object_points))
        f.object_points = f.object_points[perm]
        f.object_pixels = f.object_pixels[perm]
    ev2 = LossEvaluator(scene)
    shuffled = ev2.fit_terms(params_for(traj), exact=True)
    for k, v in shuffled.items():
        assert float(v) == pytest.approx(base[k], abs=1e-9)


def test_frame_count_mismatch_raises():
    scene, traj = build_tiny_scene(frame_count=4)
    short = geom.PoseTrajectory(traj.rotations[:3], traj.translations[:3])
    ev = LossEvaluator(scene)
    with pytest.raises(FrameCountMismatchError):
        ev.fit_terms(params_for(short))


# ---------------------------------------------------------------------------
# contact

def test_touching_static_contact_is_zero():
    scene, traj = build_tiny_scene(frame_count=5, edges=STATIC_EDGE)
    ev = LossEvaluator(scene)
    terms = ev.contact_terms(params_for(traj), exact=True)
    assert float(terms["contact_continuity"]) == pytest.approx(0.0, abs=1e-12)
    assert float(terms["contact_dynamics"]) == pytest.approx(0.0, abs=1e-9)


def test_constant_gap_hand_oracle():
    # single hand point 5 cm above the topmost handle point: every other
    # handle point is lower, so its distance exceeds 5 cm regardless of the
    # lateral offset, and the min pair distance is exactly 0.05 per frame
    scene, traj = build_tiny_scene(frame_count=7, edges=STATIC_EDGE)
    human = scene.humans["person"]
    handle = scene.objects["box"].part(1).points
    top = handle[np.argmax(handle[:, 1])]
    hand = traj.transform_all(np.array([top + [0.0, 0.05, 0.0]]))
    scene.humans["person"] = type(human)(joints=human.joints,
                                         parts={"right_hand": hand},
                                         body_vertices=human.body_vertices)
    ev = LossEvaluator(scene)
    terms = ev.contact_terms(params_for(traj), exact=True)
    assert float(terms["contact_continuity"]) == pytest.approx(0.05, abs=1e-9)


def test_non_continuous_edge_uses_min_over_frames():
    edges = ({"first": "box.handle", "second": "person.rh",
              "continuous": False, "static_contact": True},)
    scene, traj = build_tiny_scene(frame_count=6, edges=edges)
    human = scene.humans["person"]
    # touch exactly at frame 3, 5 cm away elsewhere
    hand = human.parts["right_hand"].copy()
    for f in range(6):
        if f != 3:
            hand[f] += [0.05, 0.0, 0.0]
    scene.humans["person"] = type(human)(joints=human.joints,
                                         parts={"right_hand": hand},
                                         body_vertices=human.body_vertices)
    ev = LossEvaluator(scene)
    terms = ev.contact_terms(params_for(traj), exact=True)
    assert float(terms["contact_continuity"]) == pytest.approx(0.0, abs=1e-12)


def test_dynamic_contact_needs_three_frames():
    edges = ({"first": "box.handle", "second": "person.rh",
              "continuous": True, "static_contact": False},)
    scene, traj = build_tiny_scene(frame_count=2, edges=edges)
    ev = LossEvaluator(scene)
    with pytest.raises(TooFewFramesError):
        ev.contact_terms(params_for(traj), exact=True)


def test_contact_monotone_in_edges():
    scene1, traj = build_tiny_scene(frame_count=5, edges=STATIC_EDGE)
    ev1 = LossEvaluator(scene1)
    one = float(ev1.contact_terms(params_for(traj), exact=True)["contact_continuity"])
    edges2 = STATIC_EDGE + ({"first": "box.body", "second": "person.rh",
                             "continuous": True, "static_contact": False},)
    scene2, _ = build_tiny_scene(frame_count=5, edges=edges2)
    ev2 = LossEvaluator(scene2)
    two = float(ev2.contact_terms(params_for(traj), exact=True)["contact_continuity"])
    assert two >= one - 1e-12
    scene0, _ = build_tiny_scene(frame_count=5, edges=())
    ev0 = LossEvaluator(scene0)
    assert float(ev0.contact_terms(params_for(traj),
                                   exact=True)["contact_continuity"]) == 0.0


def test_object_object_contact_edge_matches_oracle():
    # two objects with a contact edge between their parts exercises the
    # second-node-is-an-object canonicalization path
    import json

    from pagfit import pag, synth
    from pagfit.hoiopt.data import FrameObservation, ObservationBundle, Scene

    t = 4
    doc = {
        "version": 1, "frame_count": t,
        "virtual_nodes": [
            {"id": "a", "kind": "object", "rotates": False, "translates": False},
            {"id": "b", "kind": "object", "rotates": True, "translates": True},
        ],
        "part_nodes": [
            {"id": "a.top", "kind": "object_part", "owner": "a", "label": "top"},
            {"id": "b.base", "kind": "object_part", "owner": "b", "label": "base"},
        ],
        "edges": [{"first": "a.top", "second": "b.base",
                   "continuous": True, "static_contact": False}],
    }
    graph = pag.parse_pag(json.dumps(doc))
    rng = np.random.default_rng(3)
    cloud_a = geom.PointCloud(rng.normal(size=(20, 3)) * 0.2, labels=[0] * 20)
    cloud_b = geom.PointCloud(rng.normal(size=(15, 3)) * 0.1, labels=[1] * 15)
    traj_a = geom.PoseTrajectory.identity(t)
    rots = np.stack([geom.axis_angle_to_matrix([0, 1, 0], 0.1 * f)
                     for f in range(t)])
    traj_b = geom.PoseTrajectory(rots, np.outer(np.arange(t), [0.05, 0.0, 0.01]))
    k = geom.CameraIntrinsics(100.0, 100.0, 64.0, 64.0, 128, 128)
    empty = ObservationBundle([FrameObservation() for _ in range(t)], k)
    scene = Scene(graph=graph, objects={"a": cloud_a, "b": cloud_b}, sdfs={},
                  observations={"a": empty, "b": ObservationBundle(
                      [FrameObservation() for _ in range(t)], k)},
                  humans={}, intrinsics=k)
    scene.validate()
    ev = LossEvaluator(scene)
    params = {"a": TrajectoryParams.from_trajectory(traj_a),
              "b": TrajectoryParams.from_trajectory(traj_b)}
    impl = ev.breakdown(params, exact=True)
    orc = synth.oracle_losses(scene, {"a": traj_a, "b": traj_b})
    assert impl.contact_continuity == pytest.approx(orc.contact_continuity,
                                                    rel=1e-9, abs=1e-12)
    assert impl.contact_dynamics == pytest.approx(orc.contact_dynamics,
                                                  rel=1e-9, abs=1e-12)
    assert impl.contact_continuity > 0  # clouds do not touch


# ---------------------------------------------------------------------------
# penetration

def _sphere_scene_with_vertex_at(offset, frame_count=4):
    scene, traj = build_tiny_scene(frame_count=frame_count)
    human = scene.humans["person"]
    # single body vertex placed at `offset` in the object's canonical frame
    verts = traj.transform_all(np.array([offset]))
    scene.humans["person"] = type(human)(joints=human.joints,
                                         parts=human.parts,
                                         body_vertices=verts)
    return scene, traj


def test_penetration_zero_outside():
    scene, traj = _sphere_scene_with_vertex_at([0.0, 2.0, 0.0])
    ev = LossEvaluator(scene)
    assert float(ev.penetration_term(params_for(traj), exact=True)) == 0.0


def test_penetration_at_sphere_center():
    # canonical SDF is a sphere of radius 0.3; a vertex at its center is
    # 0.3 deep at every frame
    scene, traj = _sphere_scene_with_vertex_at([0.0, 0.0, 0.0])
    ev = LossEvaluator(scene)
    got = float(ev.penetration_term(params_for(traj), exact=True))
    assert got == pytest.approx(0.3, abs=2 * scene.sdfs["box"].cell_size)


def test_penetration_depth_scales_linearly():
    scene1, traj = _sphere_scene_with_vertex_at([0.0, 0.0, 0.24])  # 0.06 deep
    scene2, _ = _sphere_scene_with_vertex_at([0.0, 0.0, 0.18])     # 0.12 deep
    p1 = float(LossEvaluator(scene1).penetration_term(params_for(traj), exact=True))
    p2 = float(LossEvaluator(scene2).penetration_term(params_for(traj), exact=True))
    assert p2 == pytest.approx(2 * p1, rel=0.1)


# ---------------------------------------------------------------------------
# smoothness

def _const_rotations(t):
    return torch.eye(3, dtype=torch.float64).expand(t, 3, 3)


def test_constant_pose_smoothness_zero():
    rot = _const_rotations(6)
    tra = torch.zeros(6, 3, dtype=torch.float64)
    assert float(smooth_rotation_term(rot, False, exact=True)) == \
        pytest.approx(0.0, abs=1e-12)
    assert float(smooth_translation_term(tra, False, exact=True)) == 0.0


def test_linear_translation_midpoint_zero():
    tra = torch.tensor(np.outer(np.arange(8), [0.1, -0.05, 0.02]))
    assert float(smooth_translation_term(tra, True, exact=True)) == \
        pytest.approx(0.0, abs=1e-12)
    # consecutive-difference mode is NOT zero for moving objects
    assert float(smooth_translation_term(tra, False, exact=True)) > 0.01


def test_constant_angular_velocity_slerp_exact():
    angles = np.linspace(0.0, 1.2, 9)
    rot = torch.tensor(np.stack(
        [geom.axis_angle_to_matrix([0.3, 0.9, 0.1], a) for a in angles]))
    assert float(smooth_rotation_term(rot, True, exact=True)) <= 1e-9


def test_antipodal_neighbors_fall_back():
    # R0 and R2 are a half turn apart; the frame-1 term must use the
    # consecutive difference instead of the undefined midpoint
    rot = torch.tensor(np.stack([
        np.eye(3),
        geom.axis_angle_to_matrix([0, 0, 1], np.pi / 2),
        geom.axis_angle_to_matrix([0, 0, 1], np.pi),
    ]))
    got = float(smooth_rotation_term(rot, True, exact=True))
    assert got == pytest.approx(np.pi / 2, abs=1e-9)


def test_too_few_frames():
    with pytest.raises(TooFewFramesError):
        smooth_rotation_term(_const_rotations(2), True, exact=True)
    with pytest.raises(TooFewFramesError):
        smooth_translation_term(torch.zeros(1, 3, dtype=torch.float64), False,
                                exact=True)


# ---------------------------------------------------------------------------
# totals

def test_total_weighted_combination():
    scene, traj = build_tiny_scene(frame_count=5, edges=STATIC_EDGE)
    ev = LossEvaluator(scene)
    params = params_for(traj)
    fit_only, _ = ev.evaluate(params, LossWeights(1.0, 0.0, 0.0, 1e-12),
                              exact=True)
    terms = ev.fit_terms(params, exact=True)
    fit_sum = sum(float(v) for v in terms.values())
    assert float(fit_only) == pytest.approx(fit_sum, abs=1e-9)

    b = ev.breakdown(params, exact=True)
    w = LossWeights(1.0, 1.0, 1.0, 1.0)
    assert b.total(w) == pytest.approx(
        b.fit + b.contact + b.penetration + b.smooth, abs=1e-12)


def test_zero_components_give_zero_total():
    scene, traj = build_tiny_scene(frame_count=5, edges=STATIC_EDGE,
                                   rotates=False, translates=False)
    # stationary trajectory: constant pose, exact observations
    t = 5
    const = geom.PoseTrajectory(np.tile(np.eye(3), (t, 1, 1)),
                                np.tile([0.0, 0.0, 2.0], (t, 1)))
    scene, _ = build_tiny_scene(frame_count=t, edges=STATIC_EDGE,
                                rotates=False, translates=False,
                                trajectory=const)
    ev = LossEvaluator(scene)
    b = ev.breakdown(params_for(const), exact=True)
    for w in (LossWeights(1, 1, 1, 1), LossWeights(3, 0.5, 7, 0.01)):
        assert b.total(w) == pytest.approx(0.0, abs=1e-6)


def test_subsampled_evaluator_is_deterministic():
    scene, traj = build_tiny_scene(frame_count=4)
    rng1 = np.random.default_rng([7, 0])
    rng2 = np.random.default_rng([7, 0])
    ev1 = LossEvaluator(scene, subsample=16, rng=rng1)
    ev2 = LossEvaluator(scene, subsample=16, rng=rng2)
    t1, _ = ev1.evaluate(params_for(traj), LossWeights(), exact=True)
    t2, _ = ev2.evaluate(params_for(traj), LossWeights(), exact=True)
    assert float(t1) == float(t2)


def test_rot6d_decode_always_valid():
    rng = np.random.default_rng(0)
    v = torch.tensor(rng.normal(size=(50, 6)))
    r = rot6d_to_matrix(v)
    eye = torch.eye(3, dtype=torch.float64)
    err = (r.transpose(-1, -2) @ r - eye).norm(dim=(-2, -1))
    assert float(err.max()) < 1e-9
    det = torch.linalg.det(r)
    assert float((det - 1).abs().max()) < 1e-9
