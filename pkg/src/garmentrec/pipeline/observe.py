"""Curve observations parsed from mask boundaries, for data without ground-truth curves."""
from __future__ import annotations

import logging

import numpy as np
from scipy import ndimage
from skimage import measure

from ..geometry.curves import PolyCurve2
from ..geometry.images import ScalarImage

log = logging.getLogger(__name__)


def _arc_param(points: np.ndarray, prior: np.ndarray, closed: bool) -> tuple[np.ndarray, np.ndarray]:
    """Distance to the prior polyline and arc-length parameter of the closest point on it."""
    a = prior
    b = np.roll(prior, -1, axis=0) if closed else prior[1:]
    a = a[: len(b)]
    seg = b - a
    ln2 = np.maximum(np.einsum("sd,sd->s", seg, seg), 1e-300)
    start = np.concatenate([[0.0], np.cumsum(np.sqrt(ln2))[:-1]])
    rel = points[:, None, :] - a[None]
    u = np.clip(np.einsum("nsd,sd->ns", rel, seg) / ln2, 0.0, 1.0)
    d = np.linalg.norm(rel - u[..., None] * seg[None], axis=2)
    j = np.argmin(d, axis=1)
    rows = np.arange(len(points))
    return d[rows, j], start[j] + u[rows, j] * np.sqrt(ln2[j])


def extract_visible_curves_from_mask(mask: ScalarImage, prior, label: str, gate: float = 5.0,
                                     closed: bool = True) -> PolyCurve2:
    """Outer mask boundary points within ``gate`` pixels of ``prior``, ordered along it.

    ``prior`` is the projected curve in pixel coordinates (x, y). Holes in the
    mask are filled first so only the outer boundary can be selected.
    """
    m = np.asarray(mask.data) > 0.5
    if not m.any():
        raise ValueError("empty mask")
    prior = np.asarray(prior.points if hasattr(prior, "points") else prior, float).reshape(-1, 2)
    if len(prior) < 2:
        raise ValueError("prior needs at least 2 points")
    filled = np.pad(ndimage.binary_fill_holes(m), 1).astype(float)
    contours = measure.find_contours(filled, 0.5)
    pts = np.concatenate([c[:, ::-1] - 1.0 for c in contours])  # (row, col) -> (x, y)
    d, s = _arc_param(pts, prior, closed)
    keep = d <= gate
    if not keep.any():
        log.warning("no mask boundary within %.1f px of the prior for %s", gate, label)
        return PolyCurve2(np.zeros((0, 2)), label)
    order = np.argsort(s[keep], kind="stable")
    return PolyCurve2(pts[keep][order], label)
