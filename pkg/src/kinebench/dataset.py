"""Dataset pipeline: grid augmentation, manifests, streaming batches.

Each structure expands into 9 scales x 9 rotations x 9 translations =
729 images.  Scale happens at render time (camera dolly stand-in), then
the raster is rotated about the image center (bilinear, white fill) and
finally translated by whole pixels.  That order matters and is fixed.

Labels come from the stability oracle at build time, never from file
names or catalog intent alone; a disagreement between oracle and
intended label aborts the build.

Split policy is by-image: the shuffled sample list is cut 50/25/25 into
Train/Val/Test, so every structure appears in every split (the same
structure at different augmentations).  Holdout builds put everything in
the Holdout split.  An optional by-structure split is available for
honest generalization measurement.
"""

from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import png_io
from .oracle import binary_label, classify_stability
from .raster import DEFAULT_STYLE, IMAGE_SIZE, RenderStyle, render
from .structures import Structure


class DatasetError(ValueError):
    pass


ROTATIONS_DEG = (0, 40, 80, 120, 160, 200, 240, 280, 320)
# (0,0) first so the identity augmentation sits at index triple (0,0,0)
TRANSLATIONS_PX = ((0, 0), (-10, -10), (-10, 0), (-10, 10), (0, -10),
                   (0, 10), (10, -10), (10, 0), (10, 10))
# nine camera steps, near to far: 1.00 down to 0.52 in steps of 0.06
SCALES = tuple(round(1.0 - 0.06 * k, 2) for k in range(9))


@dataclass(frozen=True)
class AugmentationGrid:
    scales: tuple[float, ...] = SCALES
    rotations_deg: tuple[int, ...] = ROTATIONS_DEG
    translations_px: tuple[tuple[int, int], ...] = TRANSLATIONS_PX

    def __post_init__(self):
        if len(self.scales) != 9 or any(not 0 < f <= 1 for f in self.scales):
            raise DatasetError("grid needs exactly 9 scale factors in (0, 1]")
        if tuple(self.rotations_deg) != ROTATIONS_DEG:
            raise DatasetError(f"rotation grid must be {ROTATIONS_DEG}")
        if (len(self.translations_px) != 9
                or set(self.translations_px) != set(TRANSLATIONS_PX)):
            raise DatasetError("translation grid must cover {-10,0,+10}^2")


DEFAULT_GRID = AugmentationGrid()


class Split(str, Enum):
    TRAIN = "Train"
    VAL = "Val"
    TEST = "Test"
    HOLDOUT = "Holdout"


@dataclass(frozen=True)
class ImageSample:
    structure_name: str
    label: int
    scale_idx: int
    rot_idx: int
    trans_idx: int
    split: Split
    path: str  # relative to the dataset root, posix separators


@dataclass(frozen=True)
class Manifest:
    samples: tuple[ImageSample, ...]
    seed: int
    grid: AugmentationGrid
    style: RenderStyle
    root: Path

    def of_split(self, split: Split) -> tuple[ImageSample, ...]:
        return tuple(s for s in self.samples if s.split is split)

    def split_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for s in self.samples:
            counts[s.split.value] = counts.get(s.split.value, 0) + 1
        return counts


# ---------------------------------------------------------------------------
# Raster-space augmentation
# ---------------------------------------------------------------------------

def rotate_image(img: np.ndarray, angle_deg: float) -> np.ndarray:
    """Rotate counterclockwise about the image center, bilinear sampling,
    white fill.  angle 0 is byte-exact identity."""
    if angle_deg % 360 == 0:
        return img.copy()
    h, w = img.shape[:2]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    theta = math.radians(angle_deg)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    # inverse map: rotate output coordinates by -theta (y axis points down,
    # so the screen-space sense of "counterclockwise" flips the usual sign)
    dx, dy = xs - cx, ys - cy
    src_x = cx + cos_t * dx - sin_t * dy
    src_y = cy + sin_t * dx + cos_t * dy

    x0 = np.floor(src_x).astype(np.int64)
    y0 = np.floor(src_y).astype(np.int64)
    fx = src_x - x0
    fy = src_y - y0

    pix = img.astype(np.float64)
    if pix.ndim == 2:
        pix = pix[:, :, None]
    out = np.zeros((h, w, pix.shape[2]), dtype=np.float64)
    for oy, ox, wgt in ((0, 0, (1 - fx) * (1 - fy)), (0, 1, fx * (1 - fy)),
                        (1, 0, (1 - fx) * fy), (1, 1, fx * fy)):
        xi = x0 + ox
        yi = y0 + oy
        valid = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        vals = np.full((h, w, pix.shape[2]), 255.0)
        vals[valid] = pix[yi[valid], xi[valid]]
        out += wgt[:, :, None] * vals
    out = np.rint(np.clip(out, 0.0, 255.0)).astype(np.uint8)
    return out[:, :, 0] if img.ndim == 2 else out


def translate_image(img: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Shift content by whole pixels: dx > 0 moves it right, dy > 0 moves
    it down; vacated pixels are white."""
    h, w = img.shape[:2]
    out = np.full_like(img, 255)
    src_x = slice(max(0, -dx), min(w, w - dx))
    src_y = slice(max(0, -dy), min(h, h - dy))
    dst_x = slice(max(0, dx), min(w, w + dx))
    dst_y = slice(max(0, dy), min(h, h + dy))
    if src_x.start < src_x.stop and src_y.start < src_y.stop:
        out[dst_y, dst_x] = img[src_y, src_x]
    return out


def augment(base: np.ndarray, rot_deg: float, dx: int, dy: int) -> np.ndarray:
    """Rotate, then translate (matching the build order)."""
    if base.shape[:2] != (IMAGE_SIZE, IMAGE_SIZE):
        raise DatasetError(f"expected {IMAGE_SIZE}x{IMAGE_SIZE} base image, "
                           f"got {base.shape}")
    return translate_image(rotate_image(base, rot_deg), dx, dy)


# ---------------------------------------------------------------------------
# Build
# ---------------------------------------------------------------------------

def _check_indices(name: str, idx: Sequence[int] | None) -> tuple[int, ...]:
    if idx is None:
        return tuple(range(9))
    out = tuple(int(i) for i in idx)
    if not out or len(set(out)) != len(out) or any(not 0 <= i <= 8 for i in out):
        raise DatasetError(f"{name} must be distinct indices in 0..8, got {idx}")
    return out


def _assign_splits(n: int, seed: int) -> list[Split]:
    """Shuffled by-image 50/25/25 split."""
    order = np.random.default_rng(seed).permutation(n)
    n_train = n // 2
    n_val = (n - n_train) // 2
    splits = [Split.TEST] * n
    for pos, sample_idx in enumerate(order):
        if pos < n_train:
            splits[sample_idx] = Split.TRAIN
        elif pos < n_train + n_val:
            splits[sample_idx] = Split.VAL
    return splits


def _assign_splits_by_structure(names: list[str], seed: int) -> list[Split]:
    """Optional honest mode: whole structures go to one split, 50/25/25
    by structure count."""
    uniq = sorted(set(names))
    order = np.random.default_rng(seed).permutation(len(uniq))
    n_train = len(uniq) // 2
    n_val = (len(uniq) - n_train) // 2
    split_of: dict[str, Split] = {}
    for pos, i in enumerate(order):
        if pos < n_train:
            split_of[uniq[i]] = Split.TRAIN
        elif pos < n_train + n_val:
            split_of[uniq[i]] = Split.VAL
        else:
            split_of[uniq[i]] = Split.TEST
    return [split_of[n] for n in names]


def _render_structure_images(args) -> list[ImageSample]:
    """Render and write every sample of one structure.

    Module-level so a worker pool can pickle it; the per-structure work
    units are fully independent, which is what makes the parallel build
    byte-identical to the serial one.
    """
    (s, label, scale_idx, rot_idx, trans_idx, grid, style, out_root,
     split_of) = args
    out_root = Path(out_root)
    samples = []
    for si in scale_idx:
        base = render(s, grid.scales[si], style)
        for ri in rot_idx:
            rotated = rotate_image(base, grid.rotations_deg[ri])
            for ti in trans_idx:
                dx, dy = grid.translations_px[ti]
                img = translate_image(rotated, dx, dy)
                split = split_of[(si, ri, ti)]
                rel = f"{split.value}/{s.name}/{si}_{ri}_{ti}.png"
                target = out_root / rel
                target.parent.mkdir(parents=True, exist_ok=True)
                png_io.write_png(target, img)
                samples.append(ImageSample(
                    structure_name=s.name, label=label,
                    scale_idx=si, rot_idx=ri, trans_idx=ti,
                    split=split, path=rel))
    return samples


def build_dataset(structures: Sequence[Structure],
                  intended_labels: dict[str, int],
                  out_dir,
                  grid: AugmentationGrid = DEFAULT_GRID,
                  style: RenderStyle = DEFAULT_STYLE,
                  seed: int = 0,
                  holdout: bool = False,
                  split_by_structure: bool = False,
                  scale_indices: Sequence[int] | None = None,
                  rot_indices: Sequence[int] | None = None,
                  trans_indices: Sequence[int] | None = None,
                  jobs: int = 1,
                  ) -> Manifest:
    """Render, augment, label and split; returns the written manifest.

    scale/rot/trans_indices subsample the grid (desk-scale runs); indices
    recorded in the manifest always refer to the full 0..8 grid.  jobs > 1
    renders structures in parallel worker processes; the written bytes and
    manifest are identical for any job count.
    """
    out_dir = Path(out_dir)
    scale_idx = _check_indices("scale_indices", scale_indices)
    rot_idx = _check_indices("rot_indices", rot_indices)
    trans_idx = _check_indices("trans_indices", trans_indices)
    if jobs < 1:
        raise DatasetError(f"jobs must be >= 1, got {jobs}")

    labels: dict[str, int] = {}
    seen = set()
    for s in structures:
        if s.name in seen:
            raise DatasetError(f"duplicate structure name {s.name!r}")
        seen.add(s.name)
        lab = binary_label(classify_stability(s))
        if s.name in intended_labels and intended_labels[s.name] != lab:
            raise DatasetError(
                f"label mismatch for {s.name!r}: oracle says {lab}, "
                f"catalog intends {intended_labels[s.name]}")
        labels[s.name] = lab

    keys = [(s.name, si, ri, ti)
            for s in structures
            for si in scale_idx for ri in rot_idx for ti in trans_idx]
    if holdout:
        splits = [Split.HOLDOUT] * len(keys)
    elif split_by_structure:
        splits = _assign_splits_by_structure([k[0] for k in keys], seed)
    else:
        splits = _assign_splits(len(keys), seed)
    split_of = dict(zip(keys, splits))

    work = [(s, labels[s.name], scale_idx, rot_idx, trans_idx, grid, style,
             str(out_dir),
             {(si, ri, ti): split_of[(s.name, si, ri, ti)]
              for si in scale_idx for ri in rot_idx for ti in trans_idx})
            for s in structures]
    if jobs == 1 or len(work) <= 1:
        per_structure = [_render_structure_images(w) for w in work]
    else:
        with multiprocessing.get_context("fork").Pool(
                min(jobs, len(work))) as pool:
            per_structure = pool.map(_render_structure_images, work)
    samples = [sample for chunk in per_structure for sample in chunk]
    manifest = Manifest(samples=tuple(samples), seed=seed, grid=grid,
                        style=style, root=out_dir)
    save_manifest(manifest, out_dir / "manifest.csv")
    return manifest


# ---------------------------------------------------------------------------
# Manifest file: '#' header block, then one CSV record per line
# ---------------------------------------------------------------------------

def save_manifest(manifest: Manifest, path) -> None:
    g, st = manifest.grid, manifest.style
    lines = [
        "# structure image dataset manifest",
        f"# seed={manifest.seed}",
        "# label_polarity=stable:0,unstable:1",
        "# scales=" + ",".join(repr(f) for f in g.scales),
        "# rotations_deg=" + ",".join(str(r) for r in g.rotations_deg),
        "# translations_px=" + ",".join(f"{dx}:{dy}" for dx, dy in g.translations_px),
        (f"# style=bar_color:{st.bar_color[0]}/{st.bar_color[1]}/{st.bar_color[2]}"
         f",bar_width:{st.bar_width!r}"
         f",hinge_color:{st.hinge_color[0]}/{st.hinge_color[1]}/{st.hinge_color[2]}"
         f",hinge_radius:{st.hinge_radius!r}"
         f",margin_fraction:{st.margin_fraction!r}"),
        "# columns=path,label,structure_name,scale_idx,rot_idx,trans_idx,split",
    ]
    for s in manifest.samples:
        lines.append(f"{s.path},{s.label},{s.structure_name},"
                     f"{s.scale_idx},{s.rot_idx},{s.trans_idx},{s.split.value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_header(headers: dict[str, str]) -> tuple[int, AugmentationGrid, RenderStyle]:
    seed = int(headers["seed"])
    scales = tuple(float(v) for v in headers["scales"].split(","))
    rotations = tuple(int(v) for v in headers["rotations_deg"].split(","))
    translations = tuple(tuple(int(c) for c in pair.split(":"))
                         for pair in headers["translations_px"].split(","))
    grid = AugmentationGrid(scales=scales, rotations_deg=rotations,
                            translations_px=translations)
    fields: dict[str, str] = {}
    for item in headers["style"].split(","):
        key, val = item.split(":", 1)
        fields[key] = val
    style = RenderStyle(
        bar_color=tuple(int(v) for v in fields["bar_color"].split("/")),
        bar_width=float(fields["bar_width"]),
        hinge_color=tuple(int(v) for v in fields["hinge_color"].split("/")),
        hinge_radius=float(fields["hinge_radius"]),
        margin_fraction=float(fields["margin_fraction"]),
    )
    return seed, grid, style


def load_manifest(path) -> Manifest:
    path = Path(path)
    headers: dict[str, str] = {}
    samples = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, val = body.split("=", 1)
                headers[key.strip()] = val.strip()
            continue
        parts = line.split(",")
        if len(parts) != 7:
            raise DatasetError(f"{path}:{lineno}: expected 7 fields, got {len(parts)}")
        rel, label, name, si, ri, ti, split = parts
        samples.append(ImageSample(
            structure_name=name, label=int(label), scale_idx=int(si),
            rot_idx=int(ri), trans_idx=int(ti), split=Split(split), path=rel))
    try:
        seed, grid, style = _parse_header(headers)
    except KeyError as exc:
        raise DatasetError(f"{path}: manifest header missing {exc}") from exc
    return Manifest(samples=tuple(samples), seed=seed, grid=grid, style=style,
                    root=path.parent)


# ---------------------------------------------------------------------------
# Streaming
# ---------------------------------------------------------------------------

def load_image_unit(manifest: Manifest, sample: ImageSample) -> np.ndarray:
    """One sample as float32 (256, 256, 3) in [0, 1]."""
    full = manifest.root / sample.path
    try:
        img = png_io.read_png(full)
    except (OSError, png_io.PngError) as exc:
        raise DatasetError(f"failed to read {full}: {exc}") from exc
    if img.ndim != 3 or img.shape[2] != 3:
        raise DatasetError(f"{full}: expected RGB image, got shape {img.shape}")
    return img.astype(np.float32) / 255.0


def stream_batches(manifest: Manifest, split: Split, batch_size: int,
                   epoch_seed: int | tuple | None,
                   include_samples: bool = False) -> Iterator[tuple]:
    """Yield (x, y) batches covering the split exactly once.

    x: float32 (N, 256, 256, 3) in [0,1]; y: float32 (N,).  Order is the
    epoch_seed shuffle of the split's manifest order (epoch_seed None
    means manifest order, used for evaluation).  Only one batch of
    images is resident at a time.
    """
    if batch_size < 1:
        raise DatasetError(f"batch_size must be >= 1, got {batch_size}")
    chosen = manifest.of_split(split)
    order = np.arange(len(chosen))
    if epoch_seed is not None:
        order = np.random.default_rng(epoch_seed).permutation(len(chosen))
    for start in range(0, len(chosen), batch_size):
        batch = [chosen[i] for i in order[start:start + batch_size]]
        x = np.stack([load_image_unit(manifest, s) for s in batch])
        y = np.array([s.label for s in batch], dtype=np.float32)
        if include_samples:
            yield x, y, batch
        else:
            yield x, y
