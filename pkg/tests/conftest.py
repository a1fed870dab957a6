import json

import numpy as np
import pytest

from pagfit import geom, pag
from pagfit.hoiopt.data import (
    FrameObservation,
    HumanMotionSequence,
    ObservationBundle,
    Scene,
)

IRON_BOARD_PAG = {
    "version": 1,
    "frame_count": 49,
    "virtual_nodes": [
        {"id": "iron", "kind": "object", "rotates": True, "translates": True},
        {"id": "board", "kind": "object", "rotates": False, "translates": False},
        {"id": "person", "kind": "human"},
    ],
    "part_nodes": [
        {"id": "iron.grip", "kind": "object_part", "owner": "iron",
         "label": "hand grip"},
        {"id": "iron.soleplate", "kind": "object_part", "owner": "iron",
         "label": "soleplate"},
        {"id": "board.panel", "kind": "object_part", "owner": "board",
         "label": "top flat panel"},
        {"id": "person.rh", "kind": "human_part", "owner": "person",
         "label": "right_hand"},
    ],
    "edges": [
        {"first": "iron.grip", "second": "person.rh",
         "continuous": True, "static_contact": True},
        {"first": "board.panel", "second": "iron.soleplate",
         "continuous": True, "static_contact": False},
    ],
}


@pytest.fixture
def iron_board_doc():
    return json.loads(json.dumps(IRON_BOARD_PAG))


@pytest.fixture
def iron_board_graph(iron_board_doc):
    return pag.parse_pag(json.dumps(iron_board_doc))


def tiny_graph_doc(frame_count=4, edges=(), rotates=True, translates=True):
    """One object (body + handle parts), one human with a right hand."""
    return {
        "version": 1,
        "frame_count": frame_count,
        "virtual_nodes": [
            {"id": "box", "kind": "object", "rotates": rotates,
             "translates": translates},
            {"id": "person", "kind": "human"},
        ],
        "part_nodes": [
            {"id": "box.body", "kind": "object_part", "owner": "box",
             "label": "body"},
            {"id": "box.handle", "kind": "object_part", "owner": "box",
             "label": "handle"},
            {"id": "person.rh", "kind": "human_part", "owner": "person",
             "label": "right_hand"},
        ],
        "edges": list(edges),
    }


def build_tiny_scene(frame_count=4, edges=(), seed=0, rotates=True,
                     translates=True, trajectory=None):
    """Hand-built scene with exact observations of a known trajectory."""
    rng = np.random.default_rng(seed)
    graph = pag.parse_pag(json.dumps(
        tiny_graph_doc(frame_count, edges, rotates, translates)))
    pts = np.vstack([
        rng.normal(size=(30, 3)) * 0.1,
        rng.normal(size=(12, 3)) * 0.04 + [0.0, 0.22, 0.0],
    ])
    labels = np.array([0] * 30 + [1] * 12)
    cloud = geom.PointCloud(pts, labels)
    if trajectory is None:
        rots = np.tile(np.eye(3), (frame_count, 1, 1))
        trs = np.stack([[0.08 * t, 0.0, 2.0] for t in range(frame_count)])
        trajectory = geom.PoseTrajectory(rots, trs)
    k = geom.CameraIntrinsics(100.0, 100.0, 64.0, 64.0, 128, 128)
    frames = []
    for t in range(frame_count):
        posed = trajectory.transform_frame(t, pts)
        frames.append(FrameObservation(
            object_points=posed.copy(),
            part_points={"box.handle": posed[30:].copy()},
            object_pixels=geom.project_points(posed, k),
            part_pixels={"box.handle": geom.project_points(posed[30:], k)},
        ))
    hand = trajectory.transform_all(pts[30:35])
    human = HumanMotionSequence(
        joints=np.tile(np.array([[0.0, 1.0, 2.0]]), (frame_count, 3, 1)),
        parts={"right_hand": hand},
        body_vertices=hand + np.array([0.0, 0.6, 0.0]),
    )

    def sphere_sdf(p):
        return np.linalg.norm(p, axis=1) - 0.3

    grid = geom.SdfGrid.from_function(sphere_sdf, origin=[-0.6, -0.6, -0.6],
                                      cell_size=0.05, dims=(25, 25, 25))
    scene = Scene(graph=graph, objects={"box": cloud}, sdfs={"box": grid},
                  observations={"box": ObservationBundle(frames, k)},
                  humans={"person": human}, intrinsics=k)
    return scene, trajectory
