"""Bilinear image warps on numpy arrays: homographies, rotation, resize.

All warps inverse-map output pixels to source coordinates and sample
bilinearly. Out-of-bounds samples clamp to the edge; `warp_homography` also
returns the validity mask so compositors can paste only true source pixels.
Images are [H,W,3] uint8 (or float32 mid-pipeline).
"""

from __future__ import annotations

import numpy as np


def _sample_bilinear(img: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample img at float coords (xs, ys), clamping to the edge."""
    if img.ndim == 2:
        return _sample_bilinear(img[..., None], xs, ys)[..., 0]
    h, w = img.shape[:2]
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0).astype(np.float32)[..., None]
    fy = (ys - y0).astype(np.float32)[..., None]
    p00 = img[y0, x0].astype(np.float32)
    p01 = img[y0, x1].astype(np.float32)
    p10 = img[y1, x0].astype(np.float32)
    p11 = img[y1, x1].astype(np.float32)
    top = p00 * (1 - fx) + p01 * fx
    bot = p10 * (1 - fx) + p11 * fx
    return top * (1 - fy) + bot * fy


def _to_uint8(x: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(x), 0, 255).astype(np.uint8)


def homography_from_points(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """3x3 matrix H with H @ [x_src, y_src, 1] ~ [x_dst, y_dst, 1] for 4 point pairs."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i in range(4):
        x, y = src[i]
        u, v = dst[i]
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        b[2 * i] = u
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        b[2 * i + 1] = v
    h = np.linalg.solve(a, b)
    return np.append(h, 1.0).reshape(3, 3)


def warp_homography(img: np.ndarray, matrix: np.ndarray,
                    out_hw: tuple[int, int] | None = None
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Warp img by `matrix` (maps source -> output coords).

    Returns (warped uint8 image, bool mask of pixels whose source coordinate
    landed inside the image). Outside pixels hold edge-clamped samples, so the
    caller chooses between clamp fill (augmentation) and masked paste
    (compositing).
    """
    h, w = img.shape[:2]
    oh, ow = out_hw if out_hw is not None else (h, w)
    inv = np.linalg.inv(matrix)
    xs, ys = np.meshgrid(np.arange(ow, dtype=np.float64), np.arange(oh, dtype=np.float64))
    denom = inv[2, 0] * xs + inv[2, 1] * ys + inv[2, 2]
    sx = (inv[0, 0] * xs + inv[0, 1] * ys + inv[0, 2]) / denom
    sy = (inv[1, 0] * xs + inv[1, 1] * ys + inv[1, 2]) / denom
    valid = (sx >= -0.5) & (sx <= w - 0.5) & (sy >= -0.5) & (sy <= h - 0.5)
    return _to_uint8(_sample_bilinear(img, sx, sy)), valid


def rotate_image(img: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate about the image center, bilinear, edge-clamp fill. 0 deg is exact."""
    if degrees == 0.0:
        return img.copy()
    h, w = img.shape[:2]
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    theta = np.deg2rad(degrees)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    dx, dy = xs - cx, ys - cy
    sx = cos_t * dx + sin_t * dy + cx
    sy = -sin_t * dx + cos_t * dy + cy
    return _to_uint8(_sample_bilinear(img, sx, sy))


def resize_bilinear(img: np.ndarray, out_hw: tuple[int, int]) -> np.ndarray:
    """Bilinear resize with half-pixel-center alignment. Same-size is exact."""
    h, w = img.shape[:2]
    oh, ow = out_hw
    if (oh, ow) == (h, w):
        return img.copy()
    sx = (np.arange(ow, dtype=np.float64) + 0.5) * (w / ow) - 0.5
    sy = (np.arange(oh, dtype=np.float64) + 0.5) * (h / oh) - 0.5
    xs, ys = np.meshgrid(sx, sy)
    return _to_uint8(_sample_bilinear(img, xs, ys))
