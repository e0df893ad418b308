"""Rasterize structures to 256x256 RGB images.

Drawing convention: bars are anti-aliased black segments; hinge joints
carry a filled red disk drawn on top; rigid joints get no marker, the
bars simply meet.  Background is white.

Anti-aliasing is coverage-based: a pixel's ink is the clipped signed
distance between the pixel center and the shape boundary, which for a
width-w segment means alpha = clip(w/2 + 0.5 - d, 0, 1) with d the
distance to the segment's axis.  Everything is computed in float64 with
a fixed operation order and rounded once at the end, so output bytes are
identical across runs and platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .structures import JointKind, Structure

IMAGE_SIZE = 256


class RenderError(ValueError):
    pass


@dataclass(frozen=True)
class RenderStyle:
    bar_color: tuple[int, int, int] = (0, 0, 0)
    bar_width: float = 3.0
    hinge_color: tuple[int, int, int] = (255, 0, 0)
    hinge_radius: float = 5.0
    margin_fraction: float = 0.12

    def __post_init__(self):
        if self.bar_width < 1.0:
            raise RenderError(f"bar_width {self.bar_width} < 1")
        if self.hinge_radius <= self.bar_width / 2.0:
            raise RenderError("hinge_radius must exceed bar_width/2 so the "
                              "disk reads over the line")
        if not 0.0 <= self.margin_fraction < 0.5:
            raise RenderError(f"margin_fraction {self.margin_fraction} outside [0, 0.5)")


DEFAULT_STYLE = RenderStyle()


@dataclass(frozen=True)
class WorldTransform:
    """Isotropic world->image map with the y axis flipped.

    image_x = image_center + k * (x - world_center_x)
    image_y = image_center - k * (y - world_center_y)
    """
    k: float
    world_center: tuple[float, float]
    image_center: float = (IMAGE_SIZE - 1) / 2.0

    def apply(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        out = np.empty_like(pts)
        out[..., 0] = self.image_center + self.k * (pts[..., 0] - self.world_center[0])
        out[..., 1] = self.image_center - self.k * (pts[..., 1] - self.world_center[1])
        return out


def world_to_image_transform(s: Structure, scale: float,
                             style: RenderStyle = DEFAULT_STYLE) -> WorldTransform:
    """Fit the structure bbox into the frame, leaving margin_fraction of
    the frame on each side at scale=1; smaller scales shrink uniformly
    about the center (a stand-in for moving the camera away)."""
    if not 0.0 < scale <= 1.0:
        raise RenderError(f"scale {scale} outside (0, 1]")
    xmin, ymin, xmax, ymax = s.bounds()
    extent = max(xmax - xmin, ymax - ymin)
    if extent <= 0.0:
        raise RenderError("degenerate structure: bounding box is a single point")
    usable = IMAGE_SIZE * (1.0 - 2.0 * style.margin_fraction)
    k = scale * usable / extent
    return WorldTransform(k=k, world_center=((xmin + xmax) / 2.0,
                                             (ymin + ymax) / 2.0))


def _paint_segment(ink: np.ndarray, p: np.ndarray, q: np.ndarray,
                   half_width: float) -> None:
    """Accumulate coverage of a width-2*half_width segment into ink (max)."""
    lo_x = max(int(np.floor(min(p[0], q[0]) - half_width - 1.0)), 0)
    hi_x = min(int(np.ceil(max(p[0], q[0]) + half_width + 1.0)), IMAGE_SIZE - 1)
    lo_y = max(int(np.floor(min(p[1], q[1]) - half_width - 1.0)), 0)
    hi_y = min(int(np.ceil(max(p[1], q[1]) + half_width + 1.0)), IMAGE_SIZE - 1)
    if lo_x > hi_x or lo_y > hi_y:
        return
    xs = np.arange(lo_x, hi_x + 1, dtype=np.float64)
    ys = np.arange(lo_y, hi_y + 1, dtype=np.float64)
    gx, gy = np.meshgrid(xs, ys)
    d = q - p
    len2 = float(d @ d)
    t = ((gx - p[0]) * d[0] + (gy - p[1]) * d[1]) / len2
    t = np.clip(t, 0.0, 1.0)
    dist = np.hypot(gx - (p[0] + t * d[0]), gy - (p[1] + t * d[1]))
    alpha = np.clip(half_width + 0.5 - dist, 0.0, 1.0)
    region = ink[lo_y:hi_y + 1, lo_x:hi_x + 1]
    np.maximum(region, alpha, out=region)


def _disk_alpha(center: np.ndarray, radius: float):
    lo_x = max(int(np.floor(center[0] - radius - 1.0)), 0)
    hi_x = min(int(np.ceil(center[0] + radius + 1.0)), IMAGE_SIZE - 1)
    lo_y = max(int(np.floor(center[1] - radius - 1.0)), 0)
    hi_y = min(int(np.ceil(center[1] + radius + 1.0)), IMAGE_SIZE - 1)
    if lo_x > hi_x or lo_y > hi_y:
        return None
    xs = np.arange(lo_x, hi_x + 1, dtype=np.float64)
    ys = np.arange(lo_y, hi_y + 1, dtype=np.float64)
    gx, gy = np.meshgrid(xs, ys)
    dist = np.hypot(gx - center[0], gy - center[1])
    alpha = np.clip(radius + 0.5 - dist, 0.0, 1.0)
    return (slice(lo_y, hi_y + 1), slice(lo_x, hi_x + 1)), alpha


def render(s: Structure, scale: float = 1.0,
           style: RenderStyle = DEFAULT_STYLE) -> np.ndarray:
    """Render to a (256, 256, 3) uint8 array."""
    tr = world_to_image_transform(s, scale, style)
    pos = {j.id: tr.apply(np.array([j.x, j.y])) for j in s.joints}

    # bar coverage: union (max) of per-segment coverage, then composite
    # black over white once
    ink = np.zeros((IMAGE_SIZE, IMAGE_SIZE), dtype=np.float64)
    for b in s.bars:
        _paint_segment(ink, pos[b.j1], pos[b.j2], style.bar_width / 2.0)
    bar = np.asarray(style.bar_color, dtype=np.float64)
    img = (1.0 - ink)[:, :, None] * 255.0 + ink[:, :, None] * bar[None, None, :]

    # hinge disks drawn last so the marker reads over the bars
    hinge = np.asarray(style.hinge_color, dtype=np.float64)
    for j in s.joints:
        if j.kind is not JointKind.HINGE:
            continue
        hit = _disk_alpha(pos[j.id], style.hinge_radius)
        if hit is None:
            continue
        sl, alpha = hit
        img[sl] = (1.0 - alpha)[:, :, None] * img[sl] + alpha[:, :, None] * hinge
    return np.rint(np.clip(img, 0.0, 255.0)).astype(np.uint8)
