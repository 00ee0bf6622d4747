"""PNG round-tripping for 8-bit RGB images (numpy [H,W,3] uint8)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


class ImageLoadError(IOError):
    """Raised when a referenced image cannot be read; the message names the path."""


def save_png(img: np.ndarray, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if img.dtype != np.uint8 or img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected [H,W,3] uint8 image, got {img.dtype} {img.shape}")
    Image.fromarray(img, mode="RGB").save(path, format="PNG")


def load_png(path: str | Path) -> np.ndarray:
    path = Path(path)
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (OSError, ValueError) as e:
        raise ImageLoadError(f"failed to load image {path}: {e}") from e
