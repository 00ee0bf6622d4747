"""Training-set augmentation: multi-position crops, left-right flips, a fixed
grid of rotations, and midpoint contrast changes.

One source image expands into |crops| x (2 if hflip) x |rotations| x
|contrasts| variants, every one resized to the network's input geometry and
carrying the source label unchanged. Grid policies make the expansion fully
deterministic; the seed parameter is reserved for stochastic policies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import GalleryManifest
from .imageio import load_png
from .sim.warp import _to_uint8, resize_bilinear, rotate_image

CROP_POSITIONS = ("left", "right", "top", "bottom", "center")


@dataclass(frozen=True)
class AugmentPolicy:
    crop_fraction: float = 0.875
    crops: tuple[str, ...] = ("center",)
    hflip: bool = True
    rotation_degrees: tuple[float, ...] = (-15.0, 0.0, 15.0)
    contrast_factors: tuple[float, ...] = (0.8, 1.0, 1.2)

    def __post_init__(self):
        if not 0.0 < self.crop_fraction <= 1.0:
            raise ValueError(f"crop_fraction must be in (0,1], got {self.crop_fraction}")
        if not self.crops:
            raise ValueError("crops must not be empty")
        for c in self.crops:
            if c not in CROP_POSITIONS:
                raise ValueError(f"unknown crop position {c!r}; choose from {CROP_POSITIONS}")
        if not self.rotation_degrees:
            raise ValueError("rotation_degrees must not be empty")
        if not self.contrast_factors:
            raise ValueError("contrast_factors must not be empty")
        if any(f <= 0 for f in self.contrast_factors):
            raise ValueError(f"contrast factors must be > 0, got {self.contrast_factors}")

    @property
    def variants(self) -> int:
        return (len(self.crops) * (2 if self.hflip else 1)
                * len(self.rotation_degrees) * len(self.contrast_factors))

    def to_json(self) -> dict:
        return {
            "crop_fraction": self.crop_fraction,
            "crops": list(self.crops),
            "hflip": self.hflip,
            "rotation_degrees": list(self.rotation_degrees),
            "contrast_factors": list(self.contrast_factors),
        }

    @staticmethod
    def from_json(d: dict) -> "AugmentPolicy":
        return AugmentPolicy(
            crop_fraction=d.get("crop_fraction", 0.875),
            crops=tuple(d.get("crops", ("center",))),
            hflip=bool(d.get("hflip", True)),
            rotation_degrees=tuple(d.get("rotation_degrees", (-15.0, 0.0, 15.0))),
            contrast_factors=tuple(d.get("contrast_factors", (0.8, 1.0, 1.2))),
        )


IDENTITY_POLICY = AugmentPolicy(crop_fraction=1.0, crops=("center",), hflip=False,
                                rotation_degrees=(0.0,), contrast_factors=(1.0,))


def crop_window(hw: tuple[int, int], position: str, fraction: float
                ) -> tuple[int, int, int, int]:
    """(y0, x0, ch, cw) of the crop at `position` covering `fraction` per axis."""
    h, w = hw
    ch = max(1, int(round(fraction * h)))
    cw = max(1, int(round(fraction * w)))
    cy, cx = (h - ch) // 2, (w - cw) // 2
    y0, x0 = cy, cx
    if position == "left":
        x0 = 0
    elif position == "right":
        x0 = w - cw
    elif position == "top":
        y0 = 0
    elif position == "bottom":
        y0 = h - ch
    return y0, x0, ch, cw


def adjust_contrast(img: np.ndarray, factor: float) -> np.ndarray:
    """pixel' = clamp(128 + factor * (pixel - 128)); factor 1.0 is exact."""
    if factor == 1.0:
        return img.copy()
    out = 128.0 + np.float32(factor) * (img.astype(np.float32) - 128.0)
    return _to_uint8(out)


def hflip(img: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(img[:, ::-1])


def augment_image(image: np.ndarray, policy: AugmentPolicy, seed: int = 0,
                  out_hw: tuple[int, int] | None = None) -> list[np.ndarray]:
    """Expand one image into the policy's full variant grid.

    out_hw: the network input geometry every variant is resized to; None keeps
    the source size. The identity policy returns [image] bit-exactly.
    """
    if image.ndim != 3 or image.shape[0] < 2 or image.shape[1] < 2:
        raise ValueError(f"image must be at least 2x2 RGB, got shape {image.shape}")
    h, w = image.shape[:2]
    target = out_hw if out_hw is not None else (h, w)

    out: list[np.ndarray] = []
    for pos in policy.crops:
        y0, x0, ch, cw = crop_window((h, w), pos, policy.crop_fraction)
        if ch < 2 or cw < 2:
            raise ValueError(
                f"crop fraction {policy.crop_fraction} on {h}x{w} image leaves a "
                f"degenerate {ch}x{cw} region")
        cropped = image[y0:y0 + ch, x0:x0 + cw]
        flips = (False, True) if policy.hflip else (False,)
        for do_flip in flips:
            flipped = hflip(cropped) if do_flip else cropped
            for angle in policy.rotation_degrees:
                rotated = rotate_image(flipped, angle)
                for factor in policy.contrast_factors:
                    img = adjust_contrast(rotated, factor)
                    out.append(resize_bilinear(img, target))
    return out


@dataclass(frozen=True)
class Sample:
    image: np.ndarray
    label: str
    source_path: str

    def __iter__(self):
        return iter((self.image, self.label))


def expand_training_set(manifest: GalleryManifest, policy: AugmentPolicy, seed: int = 0,
                        out_hw: tuple[int, int] = (64, 64),
                        images: dict[str, np.ndarray] | None = None) -> list[Sample]:
    """Augment every manifest training image; deterministic given the seed.

    Images load from manifest.root unless an in-memory {path: array} mapping is
    supplied. Load failures propagate with the offending path in the message.
    """
    samples: list[Sample] = []
    root = manifest.root or Path(".")
    for t in manifest.training_images:
        if images is not None and t.path in images:
            img = images[t.path]
        else:
            img = load_png(root / t.path)
        for variant in augment_image(img, policy, seed=seed, out_hw=out_hw):
            samples.append(Sample(variant, t.label, t.path))
    return samples
