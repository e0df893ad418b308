"""First-order stability analysis of plane bar structures.

The model: every maximal set of bars welded together through rigid joints
forms one rigid body with three planar degrees of freedom (u, v, omega).
Hinge joints pin bodies together at a point.  Writing the pin constraints
as linear equations on body velocities gives a constraint Jacobian with
2 rows per pin pair and 3 columns per body.  The null space of that
matrix is the space of first-order motions; a connected structure is
stable exactly when the space contains nothing beyond the three rigid
motions of the whole assembly (nullity == 3).

A structure can be stable for generic geometry yet gain a motion at a
special coordinate placement (collinear chains and the like).  Those
cases are separated out by re-running the rank test on randomly
perturbed coordinates: if the perturbed structure is stable but the
given one is not, the given one is only instantaneously unstable.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .structures import JointKind, Structure

# Relative singular value cutoff for numerical rank, scaled by the larger
# matrix dimension like LAPACK's rank heuristics.
RANK_REL_TOL = 1e-9

# Generic-position probe: 5 independent draws, per-coordinate uniform noise
# of 1e-3 times the bounding box diagonal, majority vote over nullities.
N_PERTURBATIONS = 5
PERTURBATION_SCALE = 1e-3


class Classification(str, Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    INSTANTANEOUSLY_UNSTABLE = "InstantaneouslyUnstable"


@dataclass(frozen=True)
class RigidBodySet:
    """Partition of bars into rigid bodies.

    body_of_bar maps bar id -> body index; reference_points[b] is the
    coordinate of body b's first joint (lowest joint id in the body).
    """
    body_of_bar: dict[int, int]
    body_count: int
    reference_points: np.ndarray  # (B, 2) float64


@dataclass(frozen=True)
class ConstraintSystem:
    """Pin-constraint Jacobian plus row bookkeeping.

    jacobian has 2 rows per pin pair, 3 columns per body (u, v, omega).
    constraint_origin[k] = (hinge joint id, (body_a, body_b)) for the
    row pair (2k, 2k+1).
    """
    jacobian: np.ndarray
    constraint_origin: tuple[tuple[int, tuple[int, int]], ...]


@dataclass(frozen=True)
class Verdict:
    name: str
    classification: Classification
    nullity_given: int
    nullity_generic: int
    mechanism_dof: int
    connected: bool
    body_count: int
    pin_pair_count: int


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


def _body_joints(s: Structure, body_bars: set[int]) -> list[int]:
    return sorted({jid for b in s.bars if b.id in body_bars
                   for jid in (b.j1, b.j2)})


def merge_rigid_bodies(s: Structure,
                       coords: dict[int, tuple[float, float]] | None = None,
                       ) -> RigidBodySet:
    """Group bars into rigid bodies: bars sharing a rigid joint merge.

    Bodies are indexed in a canonical order (by smallest member bar id).
    """
    if coords is None:
        coords = s.coords()
    uf = _UnionFind([b.id for b in s.bars])
    for j in s.joints:
        if j.kind is not JointKind.RIGID:
            continue
        incident = [b.id for b in s.bars if j.id in (b.j1, b.j2)]
        for other in incident[1:]:
            uf.union(incident[0], other)
    groups: dict[int, set[int]] = {}
    for b in s.bars:
        groups.setdefault(uf.find(b.id), set()).add(b.id)
    ordered = sorted(groups.values(), key=min)
    body_of_bar = {bid: i for i, g in enumerate(ordered) for bid in g}
    refs = np.zeros((len(ordered), 2))
    for i, g in enumerate(ordered):
        first = _body_joints(s, g)[0]
        refs[i] = coords[first]
    return RigidBodySet(body_of_bar=body_of_bar, body_count=len(ordered),
                        reference_points=refs)


def is_connected(s: Structure) -> bool:
    """Connectivity of the joint graph under bars."""
    adj: dict[int, set[int]] = {j.id: set() for j in s.joints}
    for b in s.bars:
        adj[b.j1].add(b.j2)
        adj[b.j2].add(b.j1)
    start = s.joints[0].id
    seen = {start}
    stack = [start]
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return len(seen) == len(s.joints)


def build_constraint_system(s: Structure, bodies: RigidBodySet,
                            coords: dict[int, tuple[float, float]] | None = None,
                            ) -> ConstraintSystem:
    """Assemble the pin-constraint Jacobian.

    The first-order velocity of body b at a point p, with body reference
    point c, is
        vx = u_b - omega_b * (p_y - c_y)
        vy = v_b + omega_b * (p_x - c_x)
    A hinge joint at p incident to bodies b1..bk (ordered by body index)
    pins b1 to each of b2..bk: 2(k-1) rows per joint.
    """
    if coords is None:
        coords = s.coords()
    refs = bodies.reference_points
    B = bodies.body_count
    rows = []
    origin = []
    for j in s.joints:
        incident = sorted({bodies.body_of_bar[b.id] for b in s.bars
                           if j.id in (b.j1, b.j2)})
        if len(incident) < 2:
            continue
        px, py = coords[j.id]
        a = incident[0]
        for b in incident[1:]:
            rx = np.zeros(3 * B)
            ry = np.zeros(3 * B)
            rx[3 * a + 0] = 1.0
            rx[3 * a + 2] = -(py - refs[a, 1])
            rx[3 * b + 0] = -1.0
            rx[3 * b + 2] = py - refs[b, 1]
            ry[3 * a + 1] = 1.0
            ry[3 * a + 2] = px - refs[a, 0]
            ry[3 * b + 1] = -1.0
            ry[3 * b + 2] = -(px - refs[b, 0])
            rows.append(rx)
            rows.append(ry)
            origin.append((j.id, (a, b)))
    if rows:
        J = np.array(rows, dtype=np.float64)
    else:
        J = np.zeros((0, 3 * B), dtype=np.float64)
    return ConstraintSystem(jacobian=J, constraint_origin=tuple(origin))


def nullity(m: np.ndarray) -> int:
    """cols - numerical rank; rank counts singular values above
    RANK_REL_TOL * sigma_max * max(rows, cols).  A 0-row matrix has
    nullity equal to its column count."""
    n = m.shape[1]
    if m.shape[0] == 0:
        return n
    sigma = np.linalg.svd(m, compute_uv=False)
    if sigma[0] == 0.0:
        return n
    cutoff = RANK_REL_TOL * sigma[0] * max(m.shape)
    rank = int(np.sum(sigma > cutoff))
    return n - rank


def motion_space(s: Structure,
                 coords: dict[int, tuple[float, float]] | None = None,
                 ) -> tuple[np.ndarray, RigidBodySet]:
    """Orthonormal basis of the first-order motion space (null space of
    the constraint Jacobian), as rows; plus the body set it refers to."""
    bodies = merge_rigid_bodies(s, coords)
    cs = build_constraint_system(s, bodies, coords)
    J = cs.jacobian
    n = J.shape[1]
    if J.shape[0] == 0:
        return np.eye(n), bodies
    u, sigma, vh = np.linalg.svd(J)
    cutoff = RANK_REL_TOL * sigma[0] * max(J.shape) if sigma[0] > 0 else 0.0
    rank = int(np.sum(sigma > cutoff))
    return vh[rank:], bodies


def rigid_motion_basis(bodies: RigidBodySet) -> np.ndarray:
    """The three global rigid motions in body coordinates, as rows:
    translate-x, translate-y, rotate about the origin."""
    B = bodies.body_count
    basis = np.zeros((3, 3 * B))
    for b in range(B):
        cx, cy = bodies.reference_points[b]
        basis[0, 3 * b + 0] = 1.0
        basis[1, 3 * b + 1] = 1.0
        basis[2, 3 * b + 0] = -cy
        basis[2, 3 * b + 1] = cx
        basis[2, 3 * b + 2] = 1.0
    return basis


def _nullity_at(s: Structure, coords: dict[int, tuple[float, float]]) -> int:
    bodies = merge_rigid_bodies(s, coords)
    cs = build_constraint_system(s, bodies, coords)
    return nullity(cs.jacobian)


def classify_stability(s: Structure, seed: int = 0) -> Verdict:
    """Full stability verdict.  Deterministic for a (structure, seed) pair."""
    connected = is_connected(s)
    bodies = merge_rigid_bodies(s)
    cs = build_constraint_system(s, bodies)
    nullity_given = nullity(cs.jacobian)

    xmin, ymin, xmax, ymax = s.bounds()
    diag = float(np.hypot(xmax - xmin, ymax - ymin))
    rng = np.random.default_rng(seed)
    generic = []
    for _ in range(N_PERTURBATIONS):
        noise = rng.uniform(-PERTURBATION_SCALE * diag,
                            PERTURBATION_SCALE * diag,
                            size=(len(s.joints), 2))
        coords = {j.id: (j.x + noise[i, 0], j.y + noise[i, 1])
                  for i, j in enumerate(s.joints)}
        generic.append(_nullity_at(s, coords))
    # nullities are always >= 3, so the median equals 3 exactly when a
    # majority of draws report 3
    nullity_generic = int(np.median(generic))

    if connected and nullity_given == 3:
        classification = Classification.STABLE
    elif connected and nullity_generic == 3:
        classification = Classification.INSTANTANEOUSLY_UNSTABLE
    else:
        classification = Classification.UNSTABLE

    return Verdict(
        name=s.name,
        classification=classification,
        nullity_given=nullity_given,
        nullity_generic=nullity_generic,
        mechanism_dof=nullity_given - 3,
        connected=connected,
        body_count=bodies.body_count,
        pin_pair_count=len(cs.constraint_origin),
    )


def binary_label(v: Verdict) -> int:
    """0 for stable, 1 for anything that moves (the hazard class)."""
    return 0 if v.classification is Classification.STABLE else 1


def label_structure(s: Structure, seed: int = 0) -> int:
    return binary_label(classify_stability(s, seed=seed))
