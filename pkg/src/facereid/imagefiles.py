"""Shared helpers for frame directories of raster image files."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np
from PIL import Image

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".webp", ".tif", ".tiff"}

_DIGITS = re.compile(r"(\d+)")


def _natural_key(path: Path) -> tuple:
    # 0001.png and 10.png sort numerically, not lexically
    parts = _DIGITS.split(path.name)
    return tuple(int(p) if p.isdigit() else p for p in parts)


def list_image_files(directory: str | Path) -> list[Path]:
    """Image files in the directory, in numeric filename order."""
    directory = Path(directory)
    files = [
        p for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
    ]
    files.sort(key=_natural_key)
    return files


def load_image(path: str | Path) -> np.ndarray:
    """Load one image as an RGB uint8 array; raises OSError when unreadable."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))
