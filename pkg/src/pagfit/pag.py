"""Part affordance graphs: parsing, validation, and constraint resolution.

A graph holds virtual nodes (one per object or human), part nodes owned by
them, and contact edges between parts. Object virtual nodes carry motion
flags (rotates/translates); edges carry continuity and static-contact
flags. Edges are stored object-part-first; parsing normalizes the order
when only the second endpoint is an object part.

Wire format (JSON, schema version 1)::

    {
      "version": 1,
      "frame_count": 49,
      "virtual_nodes": [
        {"id": "iron", "kind": "object", "rotates": true, "translates": true},
        {"id": "person", "kind": "human"}
      ],
      "part_nodes": [
        {"id": "iron.grip", "kind": "object_part", "owner": "iron", "label": "hand grip"},
        {"id": "person.rh", "kind": "human_part", "owner": "person", "label": "right_hand"}
      ],
      "edges": [
        {"first": "iron.grip", "second": "person.rh",
         "continuous": true, "static_contact": true}
      ]
    }

All types are immutable after construction and safe to share across
threads; every operation here is a pure function.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import BindingError, GraphReferenceError, SchemaError

SCHEMA_VERSION = 1

# Fixed body-part vocabulary for human part labels. Kept as a module-level
# constant so an external rig mapping can swap it without code changes.
BODY_PART_VOCABULARY = (
    "head",
    "torso",
    "back",
    "hips",
    "left_upper_arm",
    "right_upper_arm",
    "left_hand",
    "right_hand",
    "left_leg",
    "right_leg",
    "left_foot",
    "right_foot",
)

VIRTUAL_KINDS = ("object", "human")
PART_KINDS = ("object_part", "human_part")


@dataclass(frozen=True)
class VirtualNode:
    id: str
    kind: str  # "object" | "human"
    rotates: bool | None = None     # motion flags, object nodes only
    translates: bool | None = None


@dataclass(frozen=True)
class PartNode:
    id: str
    kind: str  # "object_part" | "human_part"
    owner: str  # id of the parent virtual node
    label: str


@dataclass(frozen=True)
class ContactEdge:
    first: str   # always an object part after normalization
    second: str  # object part or human part
    continuous: bool      # contact holds across all frames
    static_contact: bool  # contact is relatively static

    def pair(self) -> frozenset:
        return frozenset((self.first, self.second))


@dataclass(frozen=True)
class PartAffordanceGraph:
    virtual_nodes: tuple[VirtualNode, ...]
    part_nodes: tuple[PartNode, ...]
    edges: tuple[ContactEdge, ...]
    frame_count: int

    def __post_init__(self):
        object.__setattr__(self, "virtual_nodes", tuple(self.virtual_nodes))
        object.__setattr__(self, "part_nodes", tuple(self.part_nodes))
        object.__setattr__(self, "edges", tuple(self.edges))

    def virtual(self, node_id: str) -> VirtualNode:
        for v in self.virtual_nodes:
            if v.id == node_id:
                return v
        raise GraphReferenceError(f"no virtual node {node_id!r}")

    def part(self, node_id: str) -> PartNode:
        for p in self.part_nodes:
            if p.id == node_id:
                return p
        raise GraphReferenceError(f"no part node {node_id!r}")

    def object_virtuals(self) -> tuple[VirtualNode, ...]:
        return tuple(v for v in self.virtual_nodes if v.kind == "object")

    def human_virtuals(self) -> tuple[VirtualNode, ...]:
        return tuple(v for v in self.virtual_nodes if v.kind == "human")

    def parts_of(self, owner_id: str) -> tuple[PartNode, ...]:
        return tuple(p for p in self.part_nodes if p.owner == owner_id)


# ---------------------------------------------------------------------------
# parsing / serialization

def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise SchemaError(f"{where}: missing field {key!r}")
    return obj[key]


def _require_bool(obj: dict, key: str, where: str) -> bool:
    v = _require(obj, key, where)
    if not isinstance(v, bool):
        raise SchemaError(f"{where}: field {key!r} must be a boolean")
    return v


def parse_pag(text: str) -> PartAffordanceGraph:
    """Parse a PAG JSON document.

    Raises ``json.JSONDecodeError`` for malformed JSON, ``SchemaError`` for
    missing fields or unknown enum values, and ``GraphReferenceError`` for
    dangling identifiers. Semantic invariants beyond structure (duplicate
    ids, vocabulary membership, ...) are reported by :func:`validate_pag`,
    not raised here.
    """
    doc = json.loads(text)
    if not isinstance(doc, dict):
        raise SchemaError("top level must be a JSON object")
    version = _require(doc, "version", "document")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema version {version!r}")
    frame_count = _require(doc, "frame_count", "document")
    if not isinstance(frame_count, int) or frame_count < 1:
        raise SchemaError("frame_count must be a positive integer")

    virtuals = []
    for i, node in enumerate(_require(doc, "virtual_nodes", "document")):
        where = f"virtual_nodes[{i}]"
        kind = _require(node, "kind", where)
        if kind not in VIRTUAL_KINDS:
            raise SchemaError(f"{where}: unknown kind {kind!r}")
        if kind == "object":
            rotates = _require_bool(node, "rotates", where)
            translates = _require_bool(node, "translates", where)
        else:
            if "rotates" in node or "translates" in node:
                raise SchemaError(f"{where}: motion flags are object-only")
            rotates = translates = None
        virtuals.append(VirtualNode(str(_require(node, "id", where)), kind,
                                    rotates, translates))
    virtual_ids = {v.id: v for v in virtuals}

    parts = []
    for i, node in enumerate(_require(doc, "part_nodes", "document")):
        where = f"part_nodes[{i}]"
        kind = _require(node, "kind", where)
        if kind not in PART_KINDS:
            raise SchemaError(f"{where}: unknown kind {kind!r}")
        owner = str(_require(node, "owner", where))
        if owner not in virtual_ids:
            raise GraphReferenceError(f"{where}: owner {owner!r} does not exist")
        parts.append(PartNode(str(_require(node, "id", where)), kind, owner,
                              str(_require(node, "label", where))))
    part_ids = {p.id: p for p in parts}

    edges = []
    for i, e in enumerate(_require(doc, "edges", "document")):
        where = f"edges[{i}]"
        first = str(_require(e, "first", where))
        second = str(_require(e, "second", where))
        for endpoint in (first, second):
            if endpoint not in part_ids:
                raise GraphReferenceError(f"{where}: endpoint {endpoint!r} does not exist")
        continuous = _require_bool(e, "continuous", where)
        static = _require_bool(e, "static_contact", where)
        # normalize orientation: an object part always comes first
        if part_ids[first].kind != "object_part":
            if part_ids[second].kind != "object_part":
                raise GraphReferenceError(
                    f"{where}: neither endpoint is an object part"
                )
            first, second = second, first
        edges.append(ContactEdge(first, second, continuous, static))

    return PartAffordanceGraph(tuple(virtuals), tuple(parts), tuple(edges),
                               frame_count)


def serialize_pag(g: PartAffordanceGraph) -> str:
    """JSON document for a graph; inverse of :func:`parse_pag`."""
    doc = {
        "version": SCHEMA_VERSION,
        "frame_count": g.frame_count,
        "virtual_nodes": [
            {"id": v.id, "kind": v.kind, "rotates": v.rotates, "translates": v.translates}
            if v.kind == "object" else {"id": v.id, "kind": v.kind}
            for v in g.virtual_nodes
        ],
        "part_nodes": [
            {"id": p.id, "kind": p.kind, "owner": p.owner, "label": p.label}
            for p in g.part_nodes
        ],
        "edges": [
            {"first": e.first, "second": e.second,
             "continuous": e.continuous, "static_contact": e.static_contact}
            for e in g.edges
        ],
    }
    return json.dumps(doc, indent=2)


def load_pag(path) -> PartAffordanceGraph:
    with open(path, "r") as fh:
        return parse_pag(fh.read())


# ---------------------------------------------------------------------------
# validation

@dataclass(frozen=True)
class Violation:
    code: str     # stable machine-readable identifier
    subject: str  # offending node/edge id
    message: str


ValidationReport = tuple  # of Violation


def validate_pag(g: PartAffordanceGraph,
                 vocabulary=BODY_PART_VOCABULARY) -> tuple[Violation, ...]:
    """All invariant violations in ``g``; empty means valid.

    Violations are data, not failures: programmatically constructed graphs
    can break invariants that :func:`parse_pag` never produces. Ordering is
    deterministic (sorted by code, then subject).
    """
    out: list[Violation] = []

    seen: set[str] = set()
    for node in list(g.virtual_nodes) + list(g.part_nodes):
        if node.id in seen:
            out.append(Violation("duplicate_id", node.id,
                                 f"id {node.id!r} is not unique"))
        seen.add(node.id)

    virtual_by_id = {v.id: v for v in g.virtual_nodes}
    for v in g.virtual_nodes:
        if v.kind not in VIRTUAL_KINDS:
            out.append(Violation("bad_kind", v.id, f"unknown virtual kind {v.kind!r}"))
        if v.kind == "object" and (v.rotates is None or v.translates is None):
            out.append(Violation("missing_motion_flags", v.id,
                                 "object virtual node lacks rotates/translates"))
        if v.kind == "human" and (v.rotates is not None or v.translates is not None):
            out.append(Violation("unexpected_motion_flags", v.id,
                                 "human virtual node carries motion flags"))

    part_by_id = {p.id: p for p in g.part_nodes}
    for p in g.part_nodes:
        if p.kind not in PART_KINDS:
            out.append(Violation("bad_kind", p.id, f"unknown part kind {p.kind!r}"))
            continue
        owner = virtual_by_id.get(p.owner)
        if owner is None:
            out.append(Violation("dangling_owner", p.id,
                                 f"owner {p.owner!r} does not exist"))
        else:
            expected = "object" if p.kind == "object_part" else "human"
            if owner.kind != expected:
                out.append(Violation("owner_kind_mismatch", p.id,
                                     f"{p.kind} owned by {owner.kind} node {owner.id!r}"))
        if p.kind == "human_part" and p.label not in vocabulary:
            out.append(Violation("unknown_body_part", p.id,
                                 f"label {p.label!r} not in the body-part vocabulary"))

    seen_pairs: set[frozenset] = set()
    for i, e in enumerate(g.edges):
        subject = f"{e.first}<->{e.second}"
        f_node = part_by_id.get(e.first)
        s_node = part_by_id.get(e.second)
        if f_node is None or s_node is None:
            out.append(Violation("dangling_edge", subject,
                                 "edge endpoint does not exist"))
            continue
        if f_node.kind != "object_part":
            out.append(Violation("edge_not_object_first", subject,
                                 f"first endpoint {e.first!r} is not an object part"))
        if e.first == e.second:
            out.append(Violation("self_edge", subject, "edge connects a node to itself"))
        if e.pair() in seen_pairs:
            out.append(Violation("duplicate_edge", subject,
                                 "duplicate unordered part pair"))
        seen_pairs.add(e.pair())

    if not any(v.kind == "object" for v in g.virtual_nodes):
        out.append(Violation("no_object", "<graph>",
                             "graph has no object virtual node"))
    if g.frame_count < 1:
        out.append(Violation("bad_frame_count", "<graph>",
                             f"frame_count {g.frame_count} is not positive"))

    return tuple(sorted(out, key=lambda v: (v.code, v.subject)))


# ---------------------------------------------------------------------------
# constraint resolution

@dataclass(frozen=True)
class GeometrySource:
    """Where a part node's points come from at evaluation time."""
    part_id: str
    owner_id: str
    owner_kind: str  # "object" | "human"
    label: str       # object part label or body-part name


@dataclass(frozen=True)
class ContactConstraint:
    first: GeometrySource   # always object geometry
    second: GeometrySource
    continuous: bool
    static_contact: bool


@dataclass(frozen=True)
class MotionState:
    object_id: str
    rotates: bool
    translates: bool


@dataclass(frozen=True)
class ConstraintSet:
    contacts: tuple[ContactConstraint, ...]
    motion_states: tuple[MotionState, ...]

    def motion_state(self, object_id: str) -> MotionState:
        for m in self.motion_states:
            if m.object_id == object_id:
                return m
        raise KeyError(object_id)


@dataclass(frozen=True)
class SceneBinding:
    """Concrete geometry labels available for each virtual node.

    ``object_parts`` maps an object virtual id to the set of part labels
    present in its segmented cloud; ``human_parts`` maps a human virtual id
    to the set of body-part names its motion sequence provides.
    """
    object_parts: dict[str, frozenset]
    human_parts: dict[str, frozenset]


def resolve_constraints(g: PartAffordanceGraph,
                        scene: SceneBinding) -> ConstraintSet:
    """Bind every edge of ``g`` to concrete geometry references.

    Raises :class:`BindingError` when a part named in the graph has no
    bound geometry in the scene.
    """
    part_by_id = {p.id: p for p in g.part_nodes}

    def source_for(part_id: str) -> GeometrySource:
        p = part_by_id[part_id]
        if p.kind == "object_part":
            available = scene.object_parts.get(p.owner)
            if available is None:
                raise BindingError(f"object {p.owner!r} has no bound geometry")
            if p.label not in available:
                raise BindingError(
                    f"part {p.label!r} of object {p.owner!r} is missing from "
                    f"the segmented geometry"
                )
            return GeometrySource(p.id, p.owner, "object", p.label)
        available = scene.human_parts.get(p.owner)
        if available is None:
            raise BindingError(f"human {p.owner!r} has no bound motion")
        if p.label not in available:
            raise BindingError(
                f"body part {p.label!r} of human {p.owner!r} is missing"
            )
        return GeometrySource(p.id, p.owner, "human", p.label)

    contacts = tuple(
        ContactConstraint(source_for(e.first), source_for(e.second),
                          e.continuous, e.static_contact)
        for e in g.edges
    )
    motion_states = tuple(
        MotionState(v.id, bool(v.rotates), bool(v.translates))
        for v in g.object_virtuals()
    )
    return ConstraintSet(contacts, motion_states)
