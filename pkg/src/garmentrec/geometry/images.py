"""Scalar images (masks, depth buffers) and their PGM / PNG encodings."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


@dataclass
class ScalarImage:
    width: int
    height: int
    data: np.ndarray  # (height, width)

    def __post_init__(self):
        self.data = np.asarray(self.data).reshape(self.height, self.width)

    @classmethod
    def mask(cls, data: np.ndarray) -> "ScalarImage":
        data = np.asarray(data)
        if not np.all((data == 0) | (data == 1)):
            raise ValueError("mask images contain only 0 or 1")
        return cls(data.shape[1], data.shape[0], data.astype(np.uint8))

    def is_mask(self) -> bool:
        return bool(np.all((self.data == 0) | (self.data == 1)))


def save_mask_png(img: ScalarImage, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray((np.asarray(img.data) > 0).astype(np.uint8) * 255, mode="L").save(path)


def load_mask_png(path: str | Path) -> ScalarImage:
    arr = np.asarray(Image.open(path).convert("L"))
    return ScalarImage.mask((arr > 127).astype(np.uint8))


def save_depth_pgm(img: ScalarImage, path: str | Path, max_depth: float | None = None) -> float:
    """Binary 16-bit PGM; depths scaled to [0, 65534], far (inf) written as 65535.

    Returns the scale (scene units per count) so the caller can record it.
    """
    d = np.asarray(img.data, dtype=np.float64)
    finite = np.isfinite(d)
    if max_depth is None:
        max_depth = float(d[finite].max()) if finite.any() else 1.0
    scale = max(max_depth, 1e-12) / 65534.0
    q = np.full(d.shape, 65535, dtype=">u2")
    q[finite] = np.clip(np.round(d[finite] / scale), 0, 65534).astype(">u2")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = f"P5\n# scale {scale!r}\n{img.width} {img.height}\n65535\n".encode()
    path.write_bytes(header + q.tobytes())
    return scale


def load_depth_pgm(path: str | Path) -> ScalarImage:
    raw = Path(path).read_bytes()
    tokens, pos, scale = [], 0, 1.0
    while len(tokens) < 4:
        end = raw.index(b"\n", pos)
        line = raw[pos:end].decode()
        pos = end + 1
        if line.startswith("#"):
            if line.startswith("# scale"):
                scale = float(line.split()[2])
            continue
        tokens += line.split()
    if tokens[0] != "P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    q = np.frombuffer(raw[pos:pos + 2 * w * h], dtype=">u2").reshape(h, w)
    d = q.astype(np.float64) * scale
    d[q == maxval] = np.inf
    return ScalarImage(w, h, d)
