"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to watch the lines appear;
the recovery criteria dominate the runtime (several optimization runs at
49 frames, 600 steps, 4 restarts).
"""
import dataclasses
import time
from functools import lru_cache

import numpy as np
import torch

from pagfit import evalmetrics, geom, pag, synth
from pagfit.cli import main as cli_main
from pagfit.hoiopt.align import align_point_maps
from pagfit.hoiopt.data import HumanMotionSequence, LossWeights
from pagfit.hoiopt.losses import LossEvaluator, TrajectoryParams
from pagfit.hoiopt.optimize import OptimizeConfig, optimize

RECOVERY_SEED = 11
RECOVERY_STEPS = 600
RECOVERY_RESTARTS = 4
ROTATION_LIMIT_DEG = 5.0
TRANSLATION_LIMIT_FRACTION = 0.02
REL_TOL = 1e-6
ABS_FLOOR = 1e-9  # absolute floor for near-zero loss components


def _report(criterion: int, ok: bool, detail: str):
    print(f"\nACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}",
          flush=True)
    assert ok, f"criterion {criterion}: {detail}"


def _perturbed(trajectories, rng, rot_scale=0.4, trans_scale=0.06):
    out = {}
    for oid, tr in trajectories.items():
        rots = np.stack([
            tr.rotations[t] @ geom.axis_angle_to_matrix(
                rng.normal(size=3), rng.uniform(0.05, rot_scale))
            for t in range(tr.frame_count)])
        out[oid] = geom.PoseTrajectory(
            rots, tr.translations + rng.normal(size=(tr.frame_count, 3)) * trans_scale)
    return out


def _params(trajectories):
    return {oid: TrajectoryParams.from_trajectory(tr)
            for oid, tr in trajectories.items()}


# ---------------------------------------------------------------------------
# 1. loss-oracle equivalence

def _random_fixture(index: int):
    rng = np.random.default_rng([1000, index])
    family = synth.FAMILIES[index % 4]
    spec = synth.standard_spec(
        family,
        frame_count=int(rng.integers(3, 11)),
        seed=index,
        points_per_part=int(rng.integers(20, 51)),
        noise=synth.NoiseModel(sigma=float(rng.choice([0.0, 0.003, 0.01])),
                               dropout=float(rng.choice([0.0, 0.2]))),
    )
    if family == "hand_follow":
        # rotate through all four (continuous, static) attribute combos
        combo = [(True, True), (True, False), (False, True), (False, False)]
        cont, stat = combo[(index // 4) % 4]
        g = spec.graph
        edges = tuple(pag.ContactEdge(e.first, e.second, cont, stat)
                      for e in g.edges)
        graph = pag.PartAffordanceGraph(g.virtual_nodes, g.part_nodes, edges,
                                        g.frame_count)
        spec = dataclasses.replace(spec, graph=graph)
    return synth.generate_scene(spec), rng


def test_acceptance_1_loss_oracle_equivalence():
    t0 = time.time()
    n_fixtures = 20
    worst = 0.0  # |a - b| as a multiple of the allowed tolerance
    worst_key = ""
    for i in range(n_fixtures):
        ss, rng = _random_fixture(i)
        assert len(ss.scene.objects["case"]) <= 500
        trajs = _perturbed(ss.ground_truth, rng) if i % 2 else ss.ground_truth
        ev = LossEvaluator(ss.scene, subsample=None)
        impl = ev.breakdown(_params(trajs), exact=True).to_dict()
        orc = synth.oracle_losses(ss.scene, trajs).to_dict()
        for key, b in orc.items():
            a = impl[key]
            # relative tolerance with an absolute floor that absorbs the
            # documented ~1e-12 gradient-guard bias on exact-zero terms
            allowed = max(REL_TOL * max(abs(a), abs(b)), ABS_FLOOR)
            excess = abs(a - b) / allowed
            if excess > worst:
                worst, worst_key = excess, f"fixture {i}/{key}"
    elapsed = time.time() - t0
    _report(1, worst <= 1.0 and elapsed < 60.0,
            f"{n_fixtures} fixtures, worst err {worst:.2e}x tolerance "
            f"({worst_key}), {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 2. gradient correctness

def test_acceptance_2_gradient_correctness():
    t0 = time.time()
    h = 1e-5
    worst = 0.0
    checked = excluded = 0
    pen_active = 0
    for seed in range(10):
        rng = np.random.default_rng([2000, seed])
        family = synth.FAMILIES[seed % 4]
        spec = synth.standard_spec(family, frame_count=3, seed=seed,
                                   points_per_part=5,
                                   noise=synth.NoiseModel(sigma=0.004))
        spec = dataclasses.replace(spec, human_points_per_part=3,
                                   sdf_resolution=24)
        ss = synth.generate_scene(spec)
        assert len(ss.scene.objects["case"]) <= 50
        params = _params(_perturbed(ss.ground_truth, rng,
                                    rot_scale=0.3, trans_scale=0.04))
        ev = LossEvaluator(ss.scene, precise_argmin=True)
        weights = LossWeights()
        total, terms = ev.evaluate(params, weights, exact=False)
        if float(terms["penetration"].detach()) > 0:
            pen_active += 1
        total.backward()
        p = params["case"]
        grads = {"rot6": p.rot6.grad.numpy().ravel().copy(),
                 "trans": p.trans.grad.numpy().ravel().copy()}

        def loss_with(name, flat):
            t_new = torch.tensor(flat.reshape(getattr(p, name).shape))
            p2 = TrajectoryParams(t_new, p.trans) if name == "rot6" \
                else TrajectoryParams(p.rot6, t_new)
            val, _ = ev.evaluate({"case": p2}, weights, exact=False)
            return float(val.detach())

        for name in ("rot6", "trans"):
            base = getattr(p, name).detach().numpy().ravel()
            for i in range(len(base)):
                def fd(step):
                    hi, lo = base.copy(), base.copy()
                    hi[i] += step
                    lo[i] -= step
                    return (loss_with(name, hi) - loss_with(name, lo)) / (2 * step)
                f1, f2 = fd(h), fd(h / 2)
                # unstable finite differences flag a nearby assignment switch
                if abs(f1 - f2) > 1e-3 * max(abs(f1), abs(f2), 1e-2):
                    excluded += 1
                    continue
                checked += 1
                rel = abs(grads[name][i] - f2) / max(abs(grads[name][i]),
                                                     abs(f2), 1e-5)
                worst = max(worst, rel)
    elapsed = time.time() - t0
    ok = (worst <= 1e-3 and checked > 200 and excluded <= 0.1 * (checked + excluded)
          and pen_active >= 1 and elapsed < 120.0)
    _report(2, ok, f"checked {checked} params (excluded {excluded} near "
                   f"switches), worst rel err {worst:.2e}, penetration active "
                   f"in {pen_active} scenes, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 3./4. synthetic pose recovery and constraint satisfaction

@lru_cache(maxsize=None)
def _recovery_run(family: str, sigma: float):
    spec = synth.standard_spec(family, frame_count=49, seed=RECOVERY_SEED,
                               noise=synth.NoiseModel(sigma=sigma),
                               points_per_part=96)
    ss = synth.generate_scene(spec)
    cfg = OptimizeConfig(steps=RECOVERY_STEPS, restarts=RECOVERY_RESTARTS,
                         seed=0, subsample=96)
    t0 = time.time()
    result = optimize(ss.scene, cfg)
    return ss, result, time.time() - t0


def test_acceptance_3_pose_recovery():
    lines = []
    ok = True
    for family in synth.FAMILIES:
        for sigma in (0.0, 0.005):
            ss, result, elapsed = _recovery_run(family, sigma)
            gt = ss.ground_truth["case"]
            fit = result.trajectories["case"]
            rot = float(np.degrees(np.mean([
                geom.geodesic_distance(fit.rotations[t], gt.rotations[t])
                for t in range(49)])))
            tra = float(np.mean(np.linalg.norm(
                fit.translations - gt.translations, axis=1)))
            limit = TRANSLATION_LIMIT_FRACTION * ss.spec.objects[0].model.diameter()
            good = (rot <= ROTATION_LIMIT_DEG and tra <= limit
                    and elapsed < 300.0)
            ok = ok and good
            lines.append(f"{family}/s={sigma}: {rot:.2f}deg "
                         f"{tra * 100:.2f}cm (lim {limit * 100:.2f}) {elapsed:.0f}s")
    _report(3, ok, "; ".join(lines))


@lru_cache(maxsize=None)
def _stationary_smooth_run(sigma: float):
    """Stationary fixture optimized with a large smoothness weight, so the
    stillness bounds are meaningful under observation noise."""
    spec = synth.standard_spec("stationary", frame_count=49,
                               seed=RECOVERY_SEED,
                               noise=synth.NoiseModel(sigma=sigma),
                               points_per_part=96)
    ss = synth.generate_scene(spec)
    cfg = OptimizeConfig(steps=RECOVERY_STEPS, restarts=RECOVERY_RESTARTS,
                         seed=0, subsample=96,
                         weights=LossWeights(smooth=20.0))
    return ss, optimize(ss.scene, cfg)


def _pose_variation(fit):
    rot_var = max(geom.geodesic_distance(fit.rotations[t], fit.rotations[t + 1])
                  for t in range(fit.frame_count - 1))
    tr_var = float(np.max(np.linalg.norm(
        np.diff(fit.translations, axis=0), axis=1)))
    return float(np.degrees(rot_var)), tr_var


def test_acceptance_4_constraint_satisfaction():
    details = []
    ok = True
    for sigma in (0.0, 0.005):
        ss, result, _ = _recovery_run("hand_follow", sigma)
        fit = result.trajectories["case"]
        handle = ss.scene.objects["case"].part(1).points
        hand = ss.scene.humans["person"].parts["right_hand"]
        md = max(
            geom.min_pair_distance(
                geom.PointCloud(fit.transform_frame(t, handle)),
                geom.PointCloud(hand[t]))
            for t in range(49))
        sample = evalmetrics.InteractionSample(
            humans=tuple(ss.scene.humans.values()),
            trajectories=result.trajectories, objects=ss.scene.objects)
        contact = evalmetrics.physical_plausibility(
            sample, ss.scene.sdfs)["contact"]
        good = md <= 0.01 and contact == 1.0
        ok = ok and good
        details.append(f"hand_follow/s={sigma}: max MD {md * 100:.2f}cm "
                       f"contact {contact:.2f}")
    # noiseless: still under default weights; noisy: large smoothness weight
    _, result, _ = _recovery_run("stationary", 0.0)
    rot_deg, tr_var = _pose_variation(result.trajectories["case"])
    ok = ok and rot_deg <= 0.5 and tr_var <= 1e-3
    details.append(f"stationary/s=0.0: var {rot_deg:.3f}deg {tr_var * 1000:.3f}mm")
    _, result = _stationary_smooth_run(0.005)
    rot_deg, tr_var = _pose_variation(result.trajectories["case"])
    ok = ok and rot_deg <= 0.5 and tr_var <= 1e-3
    details.append(f"stationary/s=0.005+smooth: var {rot_deg:.3f}deg "
                   f"{tr_var * 1000:.3f}mm")
    _report(4, ok, "; ".join(details))


# ---------------------------------------------------------------------------
# 5. voting segmentation

def test_acceptance_5_voting_segmentation():
    from test_partseg import (K, four_part_cube, render_views, sphere_views,
                              two_part_cube)
    from pagfit import partseg

    details = []
    ok = True
    for make, name in ((two_part_cube, "two-part"), (four_part_cube, "four-part")):
        cloud, parts = make()
        poses = sphere_views(8)
        views = render_views(cloud, poses, parts)
        out = partseg.vote_labels(geom.PointCloud(cloud.points), views, parts)
        visible_any = np.zeros(len(cloud), dtype=bool)
        for pose in poses:
            view = partseg.ViewObservation(K, pose, {})
            visible_any |= partseg.visibility_mask(cloud, view)
        acc = float((np.asarray(out.labels)[visible_any]
                     == np.asarray(cloud.labels)[visible_any]).mean())
        ok = ok and acc >= 0.95
        details.append(f"{name}: {acc * 100:.1f}%")
    _report(5, ok, "8 views, visible-point accuracy " + "; ".join(details))


# ---------------------------------------------------------------------------
# 6. metrics oracles

def test_acceptance_6_metrics_oracles():
    rng = np.random.default_rng(6)
    t, v = 10, 500
    verts = rng.normal(size=(t, v, 3)) * 0.5
    joints = rng.normal(size=(t, 8, 3))
    human = HumanMotionSequence(joints=joints, parts={"torso": verts[:, :3]},
                                body_vertices=verts)
    tra = np.cumsum(rng.normal(size=(t, 3)) * 0.03, axis=0)
    traj = geom.PoseTrajectory(np.tile(np.eye(3), (t, 1, 1)), tra)
    cloud = geom.PointCloud(rng.normal(size=(40, 3)) * 0.3)

    def grid():
        return geom.SdfGrid.from_function(
            lambda p: np.linalg.norm(p, axis=1) - 0.3,
            origin=[-0.6] * 3, cell_size=0.02, dims=(60, 60, 60))

    sample = evalmetrics.InteractionSample(humans=(human,),
                                           trajectories={"o": traj},
                                           objects={"o": cloud})
    sdfs = {"o": grid()}
    errs = []
    smooth = evalmetrics.temporal_smoothness(sample)
    errs.append(abs(smooth["human"] - synth.oracle_temporal_smoothness(joints)))
    corner_track = traj.transform_all(evalmetrics.box_corners(cloud))
    errs.append(abs(smooth["object"]
                    - synth.oracle_temporal_smoothness(corner_track)))
    other = evalmetrics.InteractionSample(
        humans=(HumanMotionSequence(joints=joints + 0.1,
                                    parts={"torso": verts[:, :3]},
                                    body_vertices=verts),),
        trajectories={"o": traj}, objects={"o": cloud})
    div = evalmetrics.motion_diversity([sample, other])
    errs.append(abs(div["human"]
                    - synth.oracle_motion_diversity([joints, joints + 0.1])))
    plaus = evalmetrics.physical_plausibility(sample, sdfs)
    nc, ct = synth.oracle_plausibility(verts, {"o": traj}, sdfs,
                                       evalmetrics.COLLISION_TOLERANCE)
    errs.append(abs(plaus["non_collision"] - nc))
    errs.append(abs(plaus["contact"] - ct))
    oracle_err = max(errs)

    # closed forms, exact
    const_joints = np.stack([np.array([[0.1 * f, 0.0, 0.0]]) for f in range(5)])
    const_sample = evalmetrics.InteractionSample(
        humans=(HumanMotionSequence(joints=const_joints,
                                    parts={"torso": const_joints},
                                    body_vertices=const_joints),),
        trajectories={"o": geom.PoseTrajectory.identity(5)},
        objects={"o": cloud})
    sm = evalmetrics.temporal_smoothness(const_sample)["human"]
    dv = evalmetrics.motion_diversity([const_sample, const_sample])["human"]
    far = evalmetrics.InteractionSample(
        humans=(HumanMotionSequence(joints=const_joints + 5.0,
                                    parts={"torso": const_joints + 5.0},
                                    body_vertices=const_joints + 5.0),),
        trajectories={"o": geom.PoseTrajectory.identity(5)},
        objects={"o": cloud})
    pl = evalmetrics.physical_plausibility(far, sdfs)
    closed = (sm == 0.0 and dv == 0.0 and pl["non_collision"] == 1.0
              and pl["contact"] == 0.0)
    _report(6, oracle_err <= 1e-9 and closed,
            f"T={t} V={v}: max |impl - oracle| = {oracle_err:.2e}; "
            f"closed forms exact = {closed}")


# ---------------------------------------------------------------------------
# 7. point-map alignment

def test_acceptance_7_point_map_alignment():
    t0 = time.time()
    t = 49
    rng = np.random.default_rng(7)
    base = rng.normal(size=(150, 3)) * [0.3, 0.8, 0.2]
    track = np.stack([base + [0.01 * f, 0.0, 2.2] for f in range(t)])
    motion = HumanMotionSequence(joints=track[:, :5],
                                 parts={"torso": track[:, :20]},
                                 body_vertices=track)
    k = geom.CameraIntrinsics(220.0, 220.0, 128.0, 128.0, 256, 256)
    maps, pixels, truth = [], [], []
    for f in range(t):
        s = float(rng.uniform(0.5, 2.0))
        shift = rng.uniform(-0.5, 0.5, size=3)
        maps.append(track[f] * s + shift)
        pixels.append(geom.project_points(track[f], k))
        truth.append((1.0 / s, -shift / s))
    out = align_point_maps(maps, pixels, motion, k, steps=300)
    scale_err = max(abs(tr.scale - s_inv) / s_inv
                    for tr, (s_inv, _) in zip(out, truth))
    trans_err = max(float(np.linalg.norm(tr.translation - t_inv))
                    for tr, (_, t_inv) in zip(out, truth))
    elapsed = time.time() - t0
    ok = scale_err <= 0.01 and trans_err <= 0.01 and elapsed < 60.0
    _report(7, ok, f"T=49, 300 steps: scale err {scale_err * 100:.2f}%, "
                   f"translation err {trans_err * 100:.2f}cm, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 8. determinism

def test_acceptance_8_determinism(tmp_path):
    spec = synth.standard_spec("hand_follow", frame_count=5, seed=5,
                               points_per_part=24,
                               noise=synth.NoiseModel(sigma=0.003))
    (tmp_path / "spec.json").write_text(spec.to_json())
    outs = []
    for run in ("a", "b"):
        scene_dir = tmp_path / f"scene_{run}"
        assert cli_main(["synth", "--spec", str(tmp_path / "spec.json"),
                         "--out", str(scene_dir)]) == 0
        fit_dir = tmp_path / f"fit_{run}"
        assert cli_main(["optimize", "--scene", str(scene_dir / "scene.json"),
                         "--out", str(fit_dir), "--steps", "15",
                         "--restarts", "2", "--seed", "7",
                         "--subsample", "30"]) == 0
        outs.append((scene_dir, fit_dir))
    identical = []
    for rel in ("objects/case.ply", "objects/case.sdf", "humans/person.json",
                "ground_truth.json", "obs/case/frame_000/points.ply",
                "obs/case/frame_000/mask.png"):
        identical.append((outs[0][0] / rel).read_bytes()
                         == (outs[1][0] / rel).read_bytes())
    for rel in ("trajectories.json", "loss_trace.csv", "report.json"):
        identical.append((outs[0][1] / rel).read_bytes()
                         == (outs[1][1] / rel).read_bytes())
    _report(8, all(identical),
            f"{sum(identical)}/{len(identical)} artifacts byte-identical "
            f"across repeated runs")


# ---------------------------------------------------------------------------
# 9. ablation direction

def test_acceptance_9_contact_ablation_direction():
    spec = synth.standard_spec("hand_follow", frame_count=49, seed=21,
                               noise=synth.NoiseModel(sigma=0.004, dropout=0.8),
                               points_per_part=96)
    obj = dataclasses.replace(spec.objects[0], swing_amplitude=0.35,
                              bob_amplitude=0.12, velocity=(0.6, 0.0, 0.15))
    spec = dataclasses.replace(spec, objects=(obj,))
    ss = synth.generate_scene(spec)

    def contact_with(weights):
        cfg = OptimizeConfig(steps=600, restarts=2, seed=0, subsample=96,
                             weights=weights)
        result = optimize(ss.scene, cfg)
        sample = evalmetrics.InteractionSample(
            humans=tuple(ss.scene.humans.values()),
            trajectories=result.trajectories, objects=ss.scene.objects)
        return evalmetrics.physical_plausibility(sample, ss.scene.sdfs)["contact"]

    full = contact_with(LossWeights())
    ablated = contact_with(LossWeights(contact=0.0))
    ok = ablated < full and (full - ablated) >= 0.1
    _report(9, ok, f"contact with full loss {full:.3f} vs without part-level "
                   f"contact {ablated:.3f} (sparse noisy hand-follow fixture)")
