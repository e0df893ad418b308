"""Visual explanations: activation sheets, filter gradient ascent, and
class-activation heatmaps.

All three operate on a trained model in infer mode (dropout off) and
are pure read-only functions of (model, image/seed), deterministic
byte-for-byte.

The filter-ascent objective is the mean pre-activation response of the
chosen filter, not the post-ReLU map: a freshly initialized filter can
start with its whole map in the ReLU dead zone, where the post-ReLU
gradient is identically zero and ascent could never move.  The
pre-activation response is the same quantity the ReLU rectifies, so
"what excites this filter" is unchanged while the ascent always has a
slope to climb.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn.model import Table1Model
from .nn.layers import relu

ASCENT_STEPS = 30
ASCENT_STEP_SIZE = 10.0 / 255.0
ASCENT_INIT_NOISE = 10.0 / 255.0
OVERLAY_ALPHA = 0.4


class InterpretError(ValueError):
    pass


@dataclass(frozen=True)
class ActivationSheet:
    layer_index: int
    channels: tuple[np.ndarray, ...]  # each (H, W) uint8
    sheet: np.ndarray                 # (H, C*W + C-1) uint8


@dataclass(frozen=True)
class FilterPattern:
    layer_index: int
    filter_index: int
    image: np.ndarray                 # (256, 256, 3) uint8, deprocessed
    scores: tuple[float, ...]         # per-iteration, scores[0] = initial
    dead: bool

    @property
    def initial_score(self) -> float:
        return self.scores[0]

    @property
    def score(self) -> float:
        return self.scores[-1]


@dataclass(frozen=True)
class Heatmap:
    grid: np.ndarray                  # (G, G) float64 in [0, 1]
    upsampled: np.ndarray             # (256, 256) float64 in [0, 1]
    overlay: np.ndarray               # (256, 256, 3) uint8
    predicted_class: int
    logit: float
    probability: float
    channel_weights: np.ndarray       # (C,) float64, d(score)/dA_c spatial mean


def _to_unit_batch(image: np.ndarray, model: Table1Model) -> np.ndarray:
    """(H,W,3) uint8 or float [0,1] -> (1,H,W,3) float32 in [0,1]."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != model.input_channels:
        raise InterpretError(f"expected (H,W,{model.input_channels}) image, "
                             f"got {img.shape}")
    if img.shape[0] != model.input_size or img.shape[1] != model.input_size:
        raise InterpretError(f"expected {model.input_size}x{model.input_size} "
                             f"image, got {img.shape}")
    if img.dtype == np.uint8:
        img = img.astype(np.float32) / 255.0
    return img.astype(np.float32)[None]


def _check_conv_index(model: Table1Model, layer_idx: int) -> None:
    if not 0 <= layer_idx < len(model.convs):
        raise InterpretError(
            f"layer index {layer_idx} is not a conv layer (0.."
            f"{len(model.convs) - 1})")


# ---------------------------------------------------------------------------
# intermediate activations
# ---------------------------------------------------------------------------

def intermediate_activations(model: Table1Model, image: np.ndarray,
                             layer_idx: int) -> ActivationSheet:
    """Post-ReLU feature maps of one conv layer, each channel min-max
    stretched to 8 bits (constant channels map to mid-gray 128), stitched
    horizontally with a 1-px black separator."""
    _check_conv_index(model, layer_idx)
    h = _to_unit_batch(image, model)
    for j in range(layer_idx):
        h = model.pools[j].forward(model.convs[j].forward(h))
    act = model.convs[layer_idx].forward(h)[0]  # (H, W, C)

    channels = []
    for c in range(act.shape[2]):
        ch = act[:, :, c].astype(np.float64)
        lo, hi = float(ch.min()), float(ch.max())
        if hi - lo <= 0.0:
            panel = np.full(ch.shape, 128, dtype=np.uint8)
        else:
            panel = np.rint((ch - lo) / (hi - lo) * 255.0).astype(np.uint8)
        channels.append(panel)
    height, width = channels[0].shape
    sheet = np.zeros((height, len(channels) * width + len(channels) - 1),
                     dtype=np.uint8)
    for c, panel in enumerate(channels):
        x0 = c * (width + 1)
        sheet[:, x0:x0 + width] = panel
    return ActivationSheet(layer_index=layer_idx, channels=tuple(channels),
                           sheet=sheet)


# ---------------------------------------------------------------------------
# filter visualization by gradient ascent
# ---------------------------------------------------------------------------

def _filter_response_and_grad(model: Table1Model, x: np.ndarray,
                              layer_idx: int, filter_idx: int
                              ) -> tuple[float, np.ndarray]:
    """Mean pre-activation of one filter and its input-space gradient."""
    h = x.astype(np.float32)
    for j in range(layer_idx):
        h = model.convs[j].forward(h, train=True)
        h = model.pools[j].forward(h, train=True)
    conv = model.convs[layer_idx]
    saved = conv.activation
    try:
        conv.activation = None
        z = conv.forward(h, train=True)
        _, hh, ww, _ = z.shape
        score = float(z[0, :, :, filter_idx].astype(np.float64).mean())
        dz = np.zeros_like(z, dtype=np.float64)
        dz[0, :, :, filter_idx] = 1.0 / (hh * ww)
        dh, _ = conv.backward(dz)
    finally:
        conv.activation = saved
    for j in reversed(range(layer_idx)):
        dh, _ = model.pools[j].backward(dh)
        dh, _ = model.convs[j].backward(dh)
    return score, dh[0].astype(np.float64)


def deprocess(x: np.ndarray) -> np.ndarray:
    """Standard displayable form: center, scale std to 0.15, shift to 0.5,
    clip, 8-bit."""
    x = x.astype(np.float64)
    x = x - x.mean()
    x = x / (x.std() + 1e-5)
    x = x * 0.15 + 0.5
    return np.rint(np.clip(x, 0.0, 1.0) * 255.0).astype(np.uint8)


def maximize_filter(model: Table1Model, layer_idx: int, filter_idx: int,
                    steps: int = ASCENT_STEPS,
                    step_size: float = ASCENT_STEP_SIZE,
                    seed: int = 0) -> FilterPattern:
    """Gradient ascent in input space on the filter's mean response.

    Start from mid-gray plus small uniform noise; each step adds
    step_size times the RMS-normalized input gradient.  A filter whose
    kernel is entirely zero has a constant response; it is reported as
    dead and the initial image is returned unchanged.
    """
    _check_conv_index(model, layer_idx)
    conv = model.convs[layer_idx]
    if not 0 <= filter_idx < conv.filters:
        raise InterpretError(f"filter index {filter_idx} out of range "
                             f"(layer has {conv.filters})")
    rng = np.random.default_rng(seed)
    size = model.input_size
    img = (128.0 / 255.0
           + rng.uniform(-ASCENT_INIT_NOISE, ASCENT_INIT_NOISE,
                         size=(1, size, size, model.input_channels)))

    dead = not np.any(conv.w[:, :, :, filter_idx])
    score, grad = _filter_response_and_grad(model, img, layer_idx, filter_idx)
    scores = [score]
    if not dead:
        for _ in range(steps):
            rms = np.sqrt(np.mean(np.square(grad)))
            img = img + step_size * (grad / (rms + 1e-5))
            score, grad = _filter_response_and_grad(model, img, layer_idx,
                                                    filter_idx)
            scores.append(score)
    return FilterPattern(layer_index=layer_idx, filter_index=filter_idx,
                         image=deprocess(img[0]), scores=tuple(scores),
                         dead=dead)


# ---------------------------------------------------------------------------
# class-activation heatmap
# ---------------------------------------------------------------------------

def bilinear_resize(grid: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Half-pixel-convention bilinear resize of a 2D float array."""
    g = np.asarray(grid, dtype=np.float64)
    h, w = g.shape
    ys = np.clip((np.arange(out_h) + 0.5) * h / out_h - 0.5, 0.0, h - 1.0)
    xs = np.clip((np.arange(out_w) + 0.5) * w / out_w - 0.5, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    return (g[np.ix_(y0, x0)] * (1 - fy) * (1 - fx)
            + g[np.ix_(y0, x1)] * (1 - fy) * fx
            + g[np.ix_(y1, x0)] * fy * (1 - fx)
            + g[np.ix_(y1, x1)] * fy * fx)


def head_logit_from_features(model: Table1Model, feats: np.ndarray,
                             pre_pool: bool = True) -> float:
    """Logit as a pure float64 function of the last conv feature map
    (pre- or post-pool).  Used by the heatmap's gradient cross-check."""
    a = np.asarray(feats, dtype=np.float64)
    if pre_pool:
        hh, ww, cc = a.shape
        a = a.reshape(hh // 2, 2, ww // 2, 2, cc).max(axis=(1, 3))
    flat = a.reshape(1, -1)
    h = relu(flat @ model.fc1.w.astype(np.float64)
             + model.fc1.b.astype(np.float64))
    z = h @ model.fc2.w.astype(np.float64) + model.fc2.b.astype(np.float64)
    return float(z[0, 0])


def class_activation_heatmap(model: Table1Model, image: np.ndarray,
                             pre_pool: bool = True) -> Heatmap:
    """Gradient-weighted class activation map from the last conv layer.

    The class score is the pre-sigmoid logit for the predicted class
    (negated for class 0, where a smaller logit means more confidence).
    Channel weights are the spatial means of d(score)/d(feature map);
    the heatmap is the rectified weighted channel sum, normalized so
    its maximum is 1, then bilinearly upsampled (and renormalized, since
    half-pixel bilinear sampling between grid points shaves the peak).
    """
    x = _to_unit_batch(image, model)
    h = x
    for j in range(len(model.convs) - 1):
        h = model.convs[j].forward(h, train=True)
        h = model.pools[j].forward(h, train=True)
    last = len(model.convs) - 1
    a_pre = model.convs[last].forward(h, train=True)     # (1, 8, 8, 16)
    a_post = model.pools[last].forward(a_pre, train=True)  # (1, 4, 4, 16)
    feats = a_pre if pre_pool else a_post

    flat = model.flatten.forward(a_post, train=True)
    h1 = model.fc1.forward(flat, train=True)
    saved = model.fc2.activation
    try:
        model.fc2.activation = None
        z = float(model.fc2.forward(h1, train=True)[0, 0])
        prob = (1.0 / (1.0 + np.exp(-z)) if z >= 0
                else np.exp(z) / (1.0 + np.exp(z)))
        predicted = 1 if prob >= 0.5 else 0
        sign = 1.0 if predicted == 1 else -1.0
        dy = np.full((1, 1), sign, dtype=np.float64)
        dy, _ = model.fc2.backward(dy)
    finally:
        model.fc2.activation = saved
    dy, _ = model.fc1.backward(dy)
    dy, _ = model.flatten.backward(dy)
    if pre_pool:
        dy, _ = model.pools[last].backward(dy)
    d_feats = dy[0].astype(np.float64)                   # (G, G, C)

    weights = d_feats.mean(axis=(0, 1))                  # (C,)
    grid = relu(np.tensordot(feats[0].astype(np.float64), weights,
                             axes=([2], [0])))
    peak = float(grid.max())
    if peak > 0.0:
        grid = grid / peak
    up = bilinear_resize(grid, model.input_size, model.input_size)
    up_peak = float(up.max())
    if up_peak > 0.0:
        up = up / up_peak

    img_u8 = (np.rint(x[0] * 255.0).astype(np.uint8)
              if image.dtype != np.uint8 else image)
    return Heatmap(grid=grid, upsampled=up,
                   overlay=overlay(img_u8, up),
                   predicted_class=predicted, logit=z,
                   probability=float(prob), channel_weights=weights)


def heat_colormap(h: np.ndarray) -> np.ndarray:
    """[0,1] -> blue (0) through green (0.5) to red (1), float64 RGB."""
    h = np.asarray(h, dtype=np.float64)
    lo = np.clip(2.0 * h, 0.0, 1.0)
    hi = np.clip(2.0 * (h - 0.5), 0.0, 1.0)
    r = hi
    g = np.where(h < 0.5, lo, 1.0 - hi)
    b = np.clip(1.0 - lo, 0.0, 1.0)
    return np.stack([r, g, b], axis=-1) * 255.0


def overlay(image: np.ndarray, heat: np.ndarray) -> np.ndarray:
    """Alpha-blend the colormapped heat over the image; the per-pixel
    blend weight is OVERLAY_ALPHA * heat, so zero heat keeps the original
    pixel untouched."""
    img = np.asarray(image)
    if img.dtype != np.uint8:
        img = np.rint(np.clip(np.asarray(image, np.float64), 0, 1) * 255
                      ).astype(np.uint8)
    if img.shape[:2] != heat.shape:
        raise InterpretError(f"image {img.shape[:2]} vs heatmap {heat.shape}")
    alpha = (OVERLAY_ALPHA * np.asarray(heat, np.float64))[:, :, None]
    colored = heat_colormap(heat)
    out = (1.0 - alpha) * img.astype(np.float64) + alpha * colored
    return np.rint(np.clip(out, 0.0, 255.0)).astype(np.uint8)
