"""Plane bar structures: joints, bars, and their JSON document form.

A structure is a planar graph of joints connected by straight bars.  A
joint is either a hinge (incident bars may rotate relative to each other)
or rigid (incident bars are locked into one body).  Supports, foundations
and loads are deliberately absent from the model: stability is treated as
a property of the bare geometry.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence


class StructureError(ValueError):
    """A structure or structure document violates an invariant."""


class JointKind(str, Enum):
    HINGE = "hinge"
    RIGID = "rigid"


@dataclass(frozen=True)
class Joint:
    id: int
    x: float
    y: float
    kind: JointKind = JointKind.HINGE


@dataclass(frozen=True)
class Bar:
    id: int
    j1: int
    j2: int


@dataclass(frozen=True)
class Structure:
    """Immutable bar structure; validated on construction."""

    name: str
    joints: tuple[Joint, ...]
    bars: tuple[Bar, ...]

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "bars", tuple(self.bars))
        _validate(self)

    def joint(self, joint_id: int) -> Joint:
        for j in self.joints:
            if j.id == joint_id:
                return j
        raise StructureError(f"structure {self.name!r} has no joint id {joint_id}")

    def coords(self) -> dict[int, tuple[float, float]]:
        return {j.id: (j.x, j.y) for j in self.joints}

    def bounds(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) over all joints."""
        xs = [j.x for j in self.joints]
        ys = [j.y for j in self.joints]
        return min(xs), min(ys), max(xs), max(ys)

    def incident_bars(self, joint_id: int) -> tuple[Bar, ...]:
        return tuple(b for b in self.bars if joint_id in (b.j1, b.j2))


def _validate(s: Structure) -> None:
    if not s.bars:
        raise StructureError(f"structure {s.name!r} has no bars")
    seen_joints: dict[int, Joint] = {}
    for i, j in enumerate(s.joints):
        if j.id in seen_joints:
            raise StructureError(f"duplicate joint id {j.id}")
        if not (math.isfinite(j.x) and math.isfinite(j.y)):
            raise StructureError(f"joint {j.id} has non-finite coordinates")
        if not isinstance(j.kind, JointKind):
            raise StructureError(f"joint {j.id} has invalid kind {j.kind!r}")
        seen_joints[j.id] = j
    seen_bars: set[int] = set()
    seen_pairs: set[tuple[int, int]] = set()
    used_joints: set[int] = set()
    for b in s.bars:
        if b.id in seen_bars:
            raise StructureError(f"duplicate bar id {b.id}")
        seen_bars.add(b.id)
        if b.j1 == b.j2:
            raise StructureError(f"bar {b.id} connects joint {b.j1} to itself")
        for jid in (b.j1, b.j2):
            if jid not in seen_joints:
                raise StructureError(f"bar {b.id} references missing joint id {jid}")
        pair = (min(b.j1, b.j2), max(b.j1, b.j2))
        if pair in seen_pairs:
            raise StructureError(f"duplicate bar between joints {pair[0]} and {pair[1]}")
        seen_pairs.add(pair)
        a, c = seen_joints[b.j1], seen_joints[b.j2]
        if math.hypot(c.x - a.x, c.y - a.y) <= 0.0:
            raise StructureError(f"bar {b.id} has zero length")
        used_joints.update(pair)
    orphans = sorted(set(seen_joints) - used_joints)
    if orphans:
        raise StructureError(f"joints {orphans} are not on any bar")


def single_bar_joints(s: Structure) -> tuple[int, ...]:
    """Joints incident to exactly one bar (legal, but worth flagging)."""
    count: dict[int, int] = {j.id: 0 for j in s.joints}
    for b in s.bars:
        count[b.j1] += 1
        count[b.j2] += 1
    return tuple(sorted(jid for jid, n in count.items() if n == 1))


# ---------------------------------------------------------------------------
# Document form.  UTF-8 JSON with exactly these fields:
#   {"name": str,
#    "joints": [{"id": int, "x": num, "y": num, "kind": "hinge"|"rigid"}],
#    "bars":   [{"id": int, "j1": int, "j2": int}]}
# Unknown fields are rejected so typos never pass silently.
# ---------------------------------------------------------------------------

def _expect_keys(obj: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise StructureError(f"{where}: unknown field(s) {unknown}")
    missing = sorted(allowed - set(obj))
    if missing:
        raise StructureError(f"{where}: missing field(s) {missing}")


def _as_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise StructureError(f"{where}: expected an integer, got {value!r}")
    return value


def _as_num(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise StructureError(f"{where}: expected a number, got {value!r}")
    v = float(value)
    if not math.isfinite(v):
        raise StructureError(f"{where}: non-finite number")
    return v


def parse_structure(document: str) -> Structure:
    """Parse a structure document; every error names its location."""
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as exc:
        raise StructureError(f"malformed document: {exc}") from exc
    if not isinstance(raw, dict):
        raise StructureError("malformed document: top level must be an object")
    _expect_keys(raw, {"name", "joints", "bars"}, "document")
    if not isinstance(raw["name"], str):
        raise StructureError("name: expected a string")
    if not isinstance(raw["joints"], list) or not isinstance(raw["bars"], list):
        raise StructureError("joints and bars must be arrays")

    joints = []
    for i, obj in enumerate(raw["joints"]):
        where = f"joints[{i}]"
        if not isinstance(obj, dict):
            raise StructureError(f"{where}: expected an object")
        _expect_keys(obj, {"id", "x", "y", "kind"}, where)
        kind = obj["kind"]
        if kind not in (JointKind.HINGE.value, JointKind.RIGID.value):
            raise StructureError(f"{where}.kind: expected \"hinge\" or \"rigid\", got {kind!r}")
        joints.append(Joint(
            id=_as_int(obj["id"], f"{where}.id"),
            x=_as_num(obj["x"], f"{where}.x"),
            y=_as_num(obj["y"], f"{where}.y"),
            kind=JointKind(kind),
        ))
    bars = []
    for i, obj in enumerate(raw["bars"]):
        where = f"bars[{i}]"
        if not isinstance(obj, dict):
            raise StructureError(f"{where}: expected an object")
        _expect_keys(obj, {"id", "j1", "j2"}, where)
        bars.append(Bar(
            id=_as_int(obj["id"], f"{where}.id"),
            j1=_as_int(obj["j1"], f"{where}.j1"),
            j2=_as_int(obj["j2"], f"{where}.j2"),
        ))
    return Structure(name=raw["name"], joints=tuple(joints), bars=tuple(bars))


def serialize_structure(s: Structure) -> str:
    doc = {
        "name": s.name,
        "joints": [{"id": j.id, "x": j.x, "y": j.y, "kind": j.kind.value}
                   for j in s.joints],
        "bars": [{"id": b.id, "j1": b.j1, "j2": b.j2} for b in s.bars],
    }
    return json.dumps(doc, indent=2) + "\n"


# Rejection threshold for a new joint placed (nearly) on the line through
# its two attachment joints: |cross| < 1e-9 * |j_b - j_a|^2.
COLLINEARITY_REL_TOL = 1e-9


def add_binary_unit(s: Structure, j_a: int, j_b: int, p: tuple[float, float],
                    kind: JointKind = JointKind.HINGE) -> Structure:
    """Attach two new bars from joints ``j_a`` and ``j_b`` to a new joint at ``p``.

    The attachment point must not lie on the line through the two base
    joints: such a placement has no first-order resistance perpendicular
    to that line and would silently degrade the structure.
    """
    if j_a == j_b:
        raise StructureError("binary unit needs two distinct base joints")
    a, b = s.joint(j_a), s.joint(j_b)
    px, py = float(p[0]), float(p[1])
    if not (math.isfinite(px) and math.isfinite(py)):
        raise StructureError("binary unit point has non-finite coordinates")
    for j in s.joints:
        if math.hypot(j.x - px, j.y - py) < 1e-12:
            raise StructureError(f"binary unit point coincides with joint {j.id}")
    ab = (b.x - a.x, b.y - a.y)
    ap = (px - a.x, py - a.y)
    cross = ab[0] * ap[1] - ab[1] * ap[0]
    if abs(cross) < COLLINEARITY_REL_TOL * (ab[0] ** 2 + ab[1] ** 2):
        raise StructureError(
            f"binary unit point {p} is collinear with joints {j_a} and {j_b}")
    new_joint = Joint(id=max(j.id for j in s.joints) + 1, x=px, y=py, kind=kind)
    next_bar = max(b_.id for b_ in s.bars) + 1
    return Structure(
        name=s.name,
        joints=s.joints + (new_joint,),
        bars=s.bars + (Bar(next_bar, j_a, new_joint.id),
                       Bar(next_bar + 1, j_b, new_joint.id)),
    )
