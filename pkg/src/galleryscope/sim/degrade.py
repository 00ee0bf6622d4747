"""Wearable-capture degradations: perspective jitter, truncation, clutter,
occluders, glare, motion blur, low light, and salt-and-pepper noise.

Effects apply in that fixed order; each one that fires is appended to the
returned log together with its sampled parameters, so the log alone
reconstructs what happened to the frame. A config with every effect disabled
returns the input bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .texture import render_artwork_texture
from .warp import _to_uint8, homography_from_points, resize_bilinear, warp_homography

EFFECT_ORDER = ("perspective", "truncation", "clutter", "occluder", "glare",
                "motion_blur", "low_light", "salt_pepper")


@dataclass(frozen=True)
class DegradationConfig:
    perspective_jitter: float = 0.0    # max relative corner displacement, 0..0.5
    truncation_prob: float = 0.0
    truncation_max_frac: float = 0.4   # largest fraction of the frame shifted out
    occluder_prob: float = 0.0
    occluder_max_area: float = 0.4     # fraction of frame area, <= 0.4
    glare_prob: float = 0.0
    glare_intensity: float = 200.0     # additive peak, clamps at 255
    motionblur_len: int = 0            # pixels; 0 or 1 means off
    sp_noise_density: float = 0.0
    lowlight_gain: float = 1.0         # multiplicative, (0, 1]
    clutter: int = 0                   # extra background-artwork patches

    def __post_init__(self):
        checks = [
            ("perspective_jitter", self.perspective_jitter, 0.0, 0.5),
            ("truncation_prob", self.truncation_prob, 0.0, 1.0),
            ("truncation_max_frac", self.truncation_max_frac, 0.0, 0.9),
            ("occluder_prob", self.occluder_prob, 0.0, 1.0),
            ("occluder_max_area", self.occluder_max_area, 0.0, 0.4),
            ("glare_prob", self.glare_prob, 0.0, 1.0),
            ("sp_noise_density", self.sp_noise_density, 0.0, 1.0),
        ]
        for name, value, lo, hi in checks:
            if not lo <= value <= hi:
                raise ValueError(f"{name} must be in [{lo}, {hi}], got {value}")
        if not 0.0 < self.lowlight_gain <= 1.0:
            raise ValueError(f"lowlight_gain must be in (0, 1], got {self.lowlight_gain}")
        if self.motionblur_len < 0:
            raise ValueError(f"motionblur_len must be >= 0, got {self.motionblur_len}")
        if self.glare_intensity < 0:
            raise ValueError(f"glare_intensity must be >= 0, got {self.glare_intensity}")
        if self.clutter < 0:
            raise ValueError(f"clutter must be >= 0, got {self.clutter}")

    def to_json(self) -> dict:
        return {
            "perspective_jitter": self.perspective_jitter,
            "truncation_prob": self.truncation_prob,
            "truncation_max_frac": self.truncation_max_frac,
            "occluder_prob": self.occluder_prob,
            "occluder_max_area": self.occluder_max_area,
            "glare_prob": self.glare_prob,
            "glare_intensity": self.glare_intensity,
            "motionblur_len": self.motionblur_len,
            "sp_noise_density": self.sp_noise_density,
            "lowlight_gain": self.lowlight_gain,
            "clutter": self.clutter,
        }

    @staticmethod
    def from_json(d: dict) -> "DegradationConfig":
        return DegradationConfig(**d)


def _perspective(img, jitter, rng, log):
    h, w = img.shape[:2]
    corners = np.array([[0, 0], [w - 1, 0], [w - 1, h - 1], [0, h - 1]], dtype=np.float64)
    disp = rng.uniform(-jitter, jitter, (4, 2)) * np.array([w, h])
    matrix = homography_from_points(corners, corners + disp)
    out, _ = warp_homography(img, matrix)
    log.append({"effect": "perspective", "corner_displacements": disp.round(3).tolist()})
    return out


def _truncate(img, max_frac, rng, log):
    h, w = img.shape[:2]
    side = ("left", "right", "top", "bottom")[int(rng.integers(0, 4))]
    frac = float(rng.uniform(0.15, max_frac))
    out = np.empty_like(img)
    if side in ("left", "right"):
        n = max(1, int(round(frac * w)))
        if side == "left":
            out[:, n:] = img[:, :w - n]
            out[:, :n] = img[:, :1]
        else:
            out[:, :w - n] = img[:, n:]
            out[:, w - n:] = img[:, -1:]
    else:
        n = max(1, int(round(frac * h)))
        if side == "top":
            out[n:] = img[:h - n]
            out[:n] = img[:1]
        else:
            out[:h - n] = img[n:]
            out[h - n:] = img[-1:]
    log.append({"effect": "truncation", "side": side, "fraction": round(frac, 4)})
    return out


def _clutter(img, count, rng, log):
    h, w = img.shape[:2]
    out = img.copy()
    placed = []
    for _ in range(count):
        seed = int(rng.integers(0, 2 ** 31))
        side_px = int(rng.uniform(0.18, 0.32) * min(h, w))
        patch = resize_bilinear(render_artwork_texture(max(24, side_px), seed),
                                (side_px, side_px))
        edge = int(rng.integers(0, 2))  # stick to left or right margin
        x = int(rng.uniform(0, 0.12 * w)) if edge == 0 else int(w - side_px - rng.uniform(0, 0.12 * w))
        y = int(rng.uniform(0.1, 0.6) * (h - side_px))
        x = max(0, min(x, w - side_px))
        out[y:y + side_px, x:x + side_px] = patch
        placed.append({"x": x, "y": y, "size": side_px, "seed": seed})
    log.append({"effect": "clutter", "patches": placed})
    return out


def _occlude(img, max_area, rng, log):
    h, w = img.shape[:2]
    area_frac = float(rng.uniform(0.05, max_area))
    # dark ellipse: a person/hand stand-in
    rx = np.sqrt(area_frac * w * h / np.pi) * float(rng.uniform(0.7, 1.4))
    ry = area_frac * w * h / (np.pi * rx)
    cx = float(rng.uniform(0.15, 0.85) * w)
    cy = float(rng.uniform(0.3, 1.0) * h)
    shade = int(rng.integers(10, 60))
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float32), np.arange(h, dtype=np.float32))
    mask = ((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2 < 1.0
    out = img.copy()
    out[mask] = shade
    log.append({"effect": "occluder", "center": [round(cx, 1), round(cy, 1)],
                "radii": [round(float(rx), 1), round(float(ry), 1)], "shade": shade,
                "area_fraction": round(area_frac, 4)})
    return out


def _glare(img, intensity, rng, log):
    h, w = img.shape[:2]
    cx = float(rng.uniform(0.2, 0.8) * w)
    cy = float(rng.uniform(0.2, 0.8) * h)
    sigma = float(rng.uniform(0.08, 0.22) * min(h, w))
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float32), np.arange(h, dtype=np.float32))
    blob = np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * sigma ** 2))
    out = _to_uint8(img.astype(np.float32) + intensity * blob[..., None])
    log.append({"effect": "glare", "center": [round(cx, 1), round(cy, 1)],
                "sigma": round(sigma, 2), "intensity": intensity})
    return out


def _motion_blur(img, length, rng, log):
    h, w = img.shape[:2]
    angle = float(rng.uniform(0, np.pi))
    acc = np.zeros(img.shape, dtype=np.float32)
    offsets = []
    for i in range(length):
        t = i - (length - 1) / 2.0
        dx = int(round(t * np.cos(angle)))
        dy = int(round(t * np.sin(angle)))
        offsets.append((dx, dy))
        shifted = np.roll(np.roll(img, dy, axis=0), dx, axis=1)
        # edge clamp the rolled-in stripes
        if dy > 0:
            shifted[:dy] = shifted[dy:dy + 1]
        elif dy < 0:
            shifted[dy:] = shifted[dy - 1:dy]
        if dx > 0:
            shifted[:, :dx] = shifted[:, dx:dx + 1]
        elif dx < 0:
            shifted[:, dx:] = shifted[:, dx - 1:dx]
        acc += shifted
    out = _to_uint8(acc / length)
    log.append({"effect": "motion_blur", "length": length,
                "angle_deg": round(np.rad2deg(angle), 1)})
    return out


def _salt_pepper(img, density, rng, log):
    h, w = img.shape[:2]
    corrupt = rng.random((h, w)) < density
    salt = rng.random((h, w)) < 0.5
    out = img.copy()
    out[corrupt & salt] = 255
    out[corrupt & ~salt] = 0
    n = int(corrupt.sum())
    log.append({"effect": "salt_pepper", "density": density, "pixels": n})
    return out


def apply_degradations(img: np.ndarray, config: DegradationConfig,
                       rng: np.random.Generator | int) -> tuple[np.ndarray, list[dict]]:
    """Degrade one frame. Returns (image, log of effects that fired, in order)."""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    log: list[dict] = []
    out = img

    if config.perspective_jitter > 0:
        out = _perspective(out, config.perspective_jitter, rng, log)
    if config.truncation_prob > 0 and rng.random() < config.truncation_prob:
        out = _truncate(out, config.truncation_max_frac, rng, log)
    if config.clutter > 0:
        out = _clutter(out, config.clutter, rng, log)
    if config.occluder_prob > 0 and rng.random() < config.occluder_prob:
        out = _occlude(out, config.occluder_max_area, rng, log)
    if config.glare_prob > 0 and rng.random() < config.glare_prob:
        out = _glare(out, config.glare_intensity, rng, log)
    if config.motionblur_len > 1:
        out = _motion_blur(out, config.motionblur_len, rng, log)
    if config.lowlight_gain < 1.0:
        out = _to_uint8(out.astype(np.float32) * config.lowlight_gain)
        log.append({"effect": "low_light", "gain": config.lowlight_gain})
    if config.sp_noise_density > 0:
        out = _salt_pepper(out, config.sp_noise_density, rng, log)

    if out is img:
        out = img.copy()
    return out, log
