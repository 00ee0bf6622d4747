"""Procedural artwork and room textures.

Every render is a pure function of (size, seed): layered color gradients,
brush strokes, and geometric motifs for artworks; flat walls with a floor
band for backgrounds. Non-planar pieces get a ring of canonical views derived
from the base texture by cylindrical shift, horizontal foreshortening, and
view-dependent shading.
"""

from __future__ import annotations

import numpy as np

from .warp import _to_uint8, resize_bilinear

N_CANONICAL_VIEWS = 8
# view i faces the camera when seen from i*45 degrees around the piece; 0 = frontal
VIEW_ANGLES = tuple(float(a) for a in np.arange(N_CANONICAL_VIEWS) * 45.0)


def _coord_grids(size: int) -> tuple[np.ndarray, np.ndarray]:
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float32)
    return xs / (size - 1), ys / (size - 1)


def _gradient_field(size: int, rng: np.random.Generator) -> np.ndarray:
    xs, ys = _coord_grids(size)
    c0 = rng.uniform(30, 225, 3).astype(np.float32)
    c1 = rng.uniform(30, 225, 3).astype(np.float32)
    c2 = rng.uniform(30, 225, 3).astype(np.float32)
    wx = rng.uniform(0.3, 1.0)
    wy = rng.uniform(0.3, 1.0)
    mix = (wx * xs + wy * ys) / (wx + wy)
    base = c0[None, None] * (1 - mix[..., None]) + c1[None, None] * mix[..., None]
    cx, cy = rng.uniform(0.2, 0.8, 2)
    r = np.sqrt((xs - cx) ** 2 + (ys - cy) ** 2)
    radial = np.exp(-(r / rng.uniform(0.3, 0.8)) ** 2)[..., None]
    return base * (1 - 0.5 * radial) + c2[None, None] * 0.5 * radial


def _draw_stroke(canvas: np.ndarray, rng: np.random.Generator) -> None:
    size = canvas.shape[0]
    xs, ys = _coord_grids(size)
    x0, y0, x1, y1 = rng.uniform(0.05, 0.95, 4)
    width = rng.uniform(0.01, 0.05)
    color = rng.uniform(0, 255, 3).astype(np.float32)
    dx, dy = x1 - x0, y1 - y0
    seg_len2 = dx * dx + dy * dy + 1e-9
    t = np.clip(((xs - x0) * dx + (ys - y0) * dy) / seg_len2, 0, 1)
    dist = np.sqrt((xs - (x0 + t * dx)) ** 2 + (ys - (y0 + t * dy)) ** 2)
    mask = (dist < width)[..., None]
    alpha = rng.uniform(0.6, 1.0)
    np.copyto(canvas, canvas * (1 - alpha) + color[None, None] * alpha, where=mask)


def _draw_motif(canvas: np.ndarray, rng: np.random.Generator) -> None:
    size = canvas.shape[0]
    xs, ys = _coord_grids(size)
    color = rng.uniform(0, 255, 3).astype(np.float32)
    kind = rng.integers(0, 4)
    cx, cy = rng.uniform(0.15, 0.85, 2)
    s = rng.uniform(0.08, 0.3)
    if kind == 0:          # disk
        mask = (xs - cx) ** 2 + (ys - cy) ** 2 < s ** 2
    elif kind == 1:        # ring
        r = np.sqrt((xs - cx) ** 2 + (ys - cy) ** 2)
        mask = (r > s * 0.6) & (r < s)
    elif kind == 2:        # rectangle
        w, h = rng.uniform(0.06, 0.3, 2)
        mask = (np.abs(xs - cx) < w) & (np.abs(ys - cy) < h)
    else:                  # triangle (upper-left half of a box)
        w = rng.uniform(0.1, 0.3)
        mask = (np.abs(xs - cx) < w) & (np.abs(ys - cy) < w) & (xs - cx + ys - cy < 0)
    np.copyto(canvas, color[None, None], where=mask[..., None])


def render_artwork_texture(size: int, seed: int) -> np.ndarray:
    """Base (frontal) render of one artwork: gradient + strokes + motifs + frame."""
    rng = np.random.default_rng(seed)
    canvas = _gradient_field(size, rng)
    for _ in range(int(rng.integers(4, 10))):
        _draw_stroke(canvas, rng)
    for _ in range(int(rng.integers(2, 6))):
        _draw_motif(canvas, rng)
    canvas += rng.normal(0, 3.0, canvas.shape).astype(np.float32)
    img = _to_uint8(canvas)
    border = max(2, size // 24)
    frame_color = np.uint8(rng.integers(20, 70))
    img[:border], img[-border:] = frame_color, frame_color
    img[:, :border], img[:, -border:] = frame_color, frame_color
    return img


def render_background(size: int, seed: int) -> np.ndarray:
    """Empty wall/room render: wall tone, baseboard, floor band, light noise."""
    rng = np.random.default_rng(seed)
    wall = rng.uniform(140, 215, 3).astype(np.float32)
    floor = wall * rng.uniform(0.45, 0.7)
    canvas = np.empty((size, size, 3), dtype=np.float32)
    canvas[:] = wall[None, None]
    _, ys = _coord_grids(size)
    shade = 1.0 - 0.15 * ys[..., None]
    canvas *= shade
    floor_y = int(size * rng.uniform(0.78, 0.9))
    canvas[floor_y:] = floor[None, None]
    canvas[floor_y - max(1, size // 48):floor_y] = wall[None, None] * 0.5
    canvas += rng.normal(0, 2.0, canvas.shape).astype(np.float32)
    return _to_uint8(canvas)


def render_wall_backdrop(length_px: int, height_px: int, seed: int) -> np.ndarray:
    """One long wall strip the visit compositor crops its background from."""
    rng = np.random.default_rng(seed)
    wall = rng.uniform(140, 215, 3).astype(np.float32)
    floor = wall * rng.uniform(0.45, 0.7)
    canvas = np.empty((height_px, length_px, 3), dtype=np.float32)
    canvas[:] = wall[None, None]
    ys = (np.arange(height_px, dtype=np.float32) / (height_px - 1))[:, None, None]
    canvas *= 1.0 - 0.15 * ys
    floor_y = int(height_px * 0.84)
    canvas[floor_y:] = floor[None, None]
    canvas[floor_y - max(1, height_px // 48):floor_y] = wall[None, None] * 0.5
    canvas += rng.normal(0, 2.0, canvas.shape).astype(np.float32)
    return _to_uint8(canvas)


def render_description_plaque(size: int, seed: int) -> np.ndarray:
    """Wall label: light card with text-like line pattern on a wall tone."""
    rng = np.random.default_rng(seed)
    img = render_background(size, seed).astype(np.float32)
    x0, y0 = int(size * 0.2), int(size * 0.25)
    x1, y1 = int(size * 0.8), int(size * 0.7)
    card = rng.uniform(215, 245)
    img[y0:y1, x0:x1] = card
    line_h = max(1, size // 40)
    y = y0 + 3 * line_h
    while y + line_h < y1 - 2 * line_h:
        x_end = x0 + int((x1 - x0 - 4 * line_h) * rng.uniform(0.5, 1.0))
        img[y:y + line_h, x0 + 2 * line_h:x_end] = rng.uniform(40, 90)
        y += 2 * line_h
    return _to_uint8(img)


def render_canonical_view(base: np.ndarray, view: int) -> np.ndarray:
    """View `view` (0..7) of a non-planar piece modeled as a textured cylinder.

    View 0 is the frontal face and returns the base render unchanged; other
    views shift the texture cylindrically, foreshorten it horizontally and
    darken it with the cosine of the view angle.
    """
    if not 0 <= view < N_CANONICAL_VIEWS:
        raise ValueError(f"view must be 0..{N_CANONICAL_VIEWS - 1}, got {view}")
    if view == 0:
        return base.copy()
    size = base.shape[0]
    angle = VIEW_ANGLES[view]
    shifted = np.roll(base, int(round(size * angle / 360.0)), axis=1)
    cos_a = abs(np.cos(np.deg2rad(angle)))
    squeeze = 0.55 + 0.45 * cos_a
    w_sq = max(2, int(round(size * squeeze)))
    squeezed = resize_bilinear(shifted, (size, w_sq))
    out = np.empty_like(base)
    pad = (size - w_sq) // 2
    out[:] = (base.astype(np.float32) * 0.25).astype(np.uint8)  # dark side fill
    out[:, pad:pad + w_sq] = squeezed
    shade = 0.55 + 0.45 * cos_a
    return _to_uint8(out.astype(np.float32) * shade)
