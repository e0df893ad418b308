"""Built-in structure catalog: 24 training + 10 holdout examples.

Every entry is authored by family (triangulated trusses, hinged polygon
mechanisms, welded rings, pendulum attachments, mixed frames) and its
label is certified by the stability oracle in the test suite, never by
eye.  Holdout structures are deliberately not graph-isomorphic to any
training structure, so a model that memorizes training connectivity
gains nothing on the holdout set.

Coordinates live in a [0, 10] x [0, 10] box; the renderer normalizes, so
only shape matters.  Stability is invariant under similarity transforms,
which the oracle property tests confirm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .structures import Bar, Joint, JointKind, Structure

STABLE, UNSTABLE = 0, 1

_H = JointKind.HINGE
_R = JointKind.RIGID


def _make(name: str, joints, bars) -> Structure:
    """joints: [(x, y) or (x, y, kind)], bars: [(j1, j2)]; ids are indices."""
    js = []
    for i, spec in enumerate(joints):
        if len(spec) == 3:
            x, y, kind = spec
        else:
            (x, y), kind = spec, _H
        js.append(Joint(id=i, x=float(x), y=float(y), kind=kind))
    bs = [Bar(id=i, j1=a, j2=b) for i, (a, b) in enumerate(bars)]
    return Structure(name=name, joints=tuple(js), bars=tuple(bs))


def _ring(n: int) -> list[tuple[int, int]]:
    return [(i, (i + 1) % n) for i in range(n)]


def _regular(n: int, radius: float = 4.5, center=(5.0, 5.0),
             phase_deg: float = 90.0) -> list[tuple[float, float]]:
    """Vertices of a regular n-gon, rounded to 3 decimals (keeps the
    serialized catalog tidy; rounding is far below any rank tolerance)."""
    cx, cy = center
    pts = []
    for k in range(n):
        a = math.radians(phase_deg + 360.0 * k / n)
        pts.append((round(cx + radius * math.cos(a), 3),
                    round(cy + radius * math.sin(a), 3)))
    return pts


@dataclass(frozen=True)
class Catalog:
    training_examples: tuple[Structure, ...]   # 12 stable then 12 unstable
    holdout_examples: tuple[Structure, ...]    # 5 stable then 5 unstable
    intended_labels: dict[str, int]            # name -> 0 stable / 1 unstable

    def by_name(self, name: str) -> Structure:
        for s in self.training_examples + self.holdout_examples:
            if s.name == name:
                return s
        raise KeyError(name)

    @property
    def all_examples(self) -> tuple[Structure, ...]:
        return self.training_examples + self.holdout_examples


def _training_stable() -> list[Structure]:
    hexa = _regular(6, phase_deg=0.0)
    out = []
    out.append(_make("hinged-triangle",
                     [(0, 0), (8, 0), (4, 6)],
                     _ring(3)))
    out.append(_make("braced-quad",
                     [(0, 0), (8, 0), (8, 8), (0, 8)],
                     _ring(4) + [(0, 2)]))
    out.append(_make("warren-2panel",
                     [(0, 0), (5, 0), (10, 0), (2.5, 4), (7.5, 4)],
                     [(0, 1), (1, 2), (3, 4), (0, 3), (3, 1), (1, 4), (4, 2)]))
    out.append(_make("cross-braced-quad",
                     [(0, 0), (8, 0), (8, 8), (0, 8)],
                     _ring(4) + [(0, 2), (1, 3)]))
    # three triangulations of a hexagon: fan, inner triangle, zigzag
    out.append(_make("fan-hexagon", hexa,
                     _ring(6) + [(0, 2), (0, 3), (0, 4)]))
    out.append(_make("triforce-hexagon", hexa,
                     _ring(6) + [(1, 3), (3, 5), (5, 1)]))
    out.append(_make("snake-hexagon", hexa,
                     _ring(6) + [(1, 5), (2, 5), (2, 4)]))
    out.append(_make("welded-square",
                     [(1, 1, _R), (9, 1, _R), (9, 9, _R), (1, 9, _R)],
                     _ring(4)))
    out.append(_make("rigid-star",
                     [(5, 5, _R), (5, 9.5), (1.1, 2.75), (8.9, 2.75)],
                     [(0, 1), (0, 2), (0, 3)]))
    out.append(_make("square-one-weld",
                     [(0, 0, _R), (8, 0), (8, 8), (0, 8)],
                     _ring(4)))
    out.append(_make("wheel-pentagon",
                     _regular(5) + [(5, 5)],
                     _ring(5) + [(5, k) for k in range(5)]))
    out.append(_make("alternating-ring-hexagon",
                     [(x, y, _R if k % 2 == 0 else _H)
                      for k, (x, y) in enumerate(hexa)],
                     _ring(6)))
    return out


def _training_unstable() -> list[Structure]:
    hexa = _regular(6, phase_deg=0.0)
    out = []
    out.append(_make("hinged-quadrilateral",
                     [(0, 0), (8, 0), (8, 8), (0, 8)],
                     _ring(4)))
    out.append(_make("hinged-pentagon", _regular(5), _ring(5)))
    out.append(_make("hinged-hexagon", hexa, _ring(6)))
    out.append(_make("domino",
                     [(0, 1), (5, 1), (10, 1), (10, 6), (5, 6), (0, 6)],
                     _ring(6) + [(1, 4)]))
    out.append(_make("triangle-pinned-square",
                     [(0, 0), (4, 0), (2, 3), (6, 3), (6, 7), (2, 7)],
                     [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 2)]))
    out.append(_make("two-bar-chain",
                     [(0, 2), (5, 7), (10, 2)],
                     [(0, 1), (1, 2)]))
    out.append(_make("half-braced-tower",
                     [(2, 0), (8, 0), (2, 5), (8, 5), (2, 10), (8, 10)],
                     [(0, 1), (0, 2), (1, 3), (2, 3), (2, 4), (3, 5), (4, 5),
                      (0, 3)]))
    out.append(_make("hexagon-one-chord", hexa, _ring(6) + [(0, 2)]))
    out.append(_make("hinged-octagon", _regular(8, phase_deg=22.5), _ring(8)))
    out.append(_make("welded-square-pendulum",
                     [(0, 2), (6, 2, _R), (6, 8, _R), (0, 8, _R), (4, 0)],
                     _ring(4) + [(0, 4)]))
    out.append(_make("braced-quad-tail",
                     [(0, 3), (6, 3), (6, 9), (0, 9), (8, 1.5), (10, 0)],
                     _ring(4) + [(0, 2), (1, 3), (1, 4), (4, 5)]))
    out.append(_make("pentagon-one-chord", _regular(5), _ring(5) + [(0, 2)]))
    return out


def _holdout_stable() -> list[Structure]:
    x1, x2 = 10 / 3, 20 / 3
    out = []
    out.append(_make("warren-3panel",
                     [(0, 0), (round(x1, 3), 0), (round(x2, 3), 0), (10, 0),
                      (round(x1 / 2, 3), 3.8), (5, 3.8),
                      (round(10 - x1 / 2, 3), 3.8)],
                     [(0, 1), (1, 2), (2, 3), (4, 5), (5, 6),
                      (0, 4), (4, 1), (1, 5), (5, 2), (2, 6), (6, 3)]))
    out.append(_make("wheel-hexagon",
                     _regular(6, phase_deg=0.0) + [(5, 5)],
                     _ring(6) + [(6, k) for k in range(6)]))
    out.append(_make("welded-octagon",
                     [(x, y, _R) for x, y in _regular(8, phase_deg=22.5)],
                     _ring(8)))
    out.append(_make("fan-heptagon", _regular(7),
                     _ring(7) + [(0, 2), (0, 3), (0, 4), (0, 5)]))
    out.append(_make("star-braced-square",
                     [(1, 1), (9, 1), (9, 9), (1, 9), (5, 5)],
                     _ring(4) + [(k, 4) for k in range(4)]))
    return out


def _holdout_unstable() -> list[Structure]:
    y0, y1 = 1.5, round(1.5 + 10 / 3, 3)
    x1, x2 = round(10 / 3, 3), round(20 / 3, 3)
    out = []
    out.append(_make("hinged-heptagon", _regular(7), _ring(7)))
    out.append(_make("triple-domino",
                     [(0, y0), (x1, y0), (x2, y0), (10, y0),
                      (10, y1), (x2, y1), (x1, y1), (0, y1)],
                     _ring(8) + [(1, 6), (2, 5)]))
    out.append(_make("broken-brace-quad",
                     [(0, 0), (8, 0), (8, 8), (0, 8), (3.5, 3.2)],
                     _ring(4) + [(0, 4)]))
    out.append(_make("bowtie",
                     [(0, 1.5), (0, 8.5), (4.5, 5), (9, 8.5), (9, 1.5)],
                     [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 2)]))
    out.append(_make("welded-triangle-pendulum",
                     [(1, 3, _R), (7, 3, _R), (4, 8), (8.5, 9.5)],
                     [(0, 1), (1, 2), (2, 0), (2, 3)]))
    return out


def builtin_catalog() -> Catalog:
    stable_t = _training_stable()
    unstable_t = _training_unstable()
    stable_h = _holdout_stable()
    unstable_h = _holdout_unstable()
    labels: dict[str, int] = {}
    for s in stable_t + stable_h:
        labels[s.name] = STABLE
    for s in unstable_t + unstable_h:
        labels[s.name] = UNSTABLE
    return Catalog(
        training_examples=tuple(stable_t + unstable_t),
        holdout_examples=tuple(stable_h + unstable_h),
        intended_labels=labels,
    )
