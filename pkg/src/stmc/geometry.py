"""Image-plane and ground-plane geometry helpers."""

from __future__ import annotations

import numpy as np

# Homogeneous scale below this magnitude means the point maps to infinity.
_DEGENERATE_EPS = 1e-9


class ProjectionError(ValueError):
    """The homography sent a point to (or past) the plane at infinity."""


def anchor_point(bbox: np.ndarray, alpha: float) -> np.ndarray:
    """Reference pixel of an ``[left, top, width, height]`` box.

    Horizontally centered; vertically a fraction ``alpha`` of the height
    below the top edge, so ``alpha=1`` is the bottom center (the visual
    ground contact) and ``alpha=0`` the top center.
    """
    left, top, width, height = np.asarray(bbox, dtype=float)
    return np.array([left + width / 2.0, top + alpha * height])


def apply_homography(homography: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Map points (..., 2) through a 3x3 homography.

    Raises ProjectionError when any point lands within _DEGENERATE_EPS of
    the plane at infinity.
    """
    h = np.asarray(homography, dtype=float).reshape(3, 3)
    pts = np.asarray(points, dtype=float)
    squeeze = pts.ndim == 1
    pts = np.atleast_2d(pts)
    homo = np.concatenate([pts, np.ones((pts.shape[0], 1))], axis=1)
    mapped = homo @ h.T
    scale = mapped[:, 2]
    if np.any(np.abs(scale) < _DEGENERATE_EPS):
        raise ProjectionError("point maps to infinity under the homography")
    out = mapped[:, :2] / scale[:, None]
    return out[0] if squeeze else out


def project_to_ground(bbox: np.ndarray, homography: np.ndarray, alpha: float) -> np.ndarray:
    """Ground-plane position of a detection box via its anchor point."""
    return apply_homography(homography, anchor_point(bbox, alpha))


def iou(box_a: np.ndarray, box_b: np.ndarray) -> float:
    """Intersection over union of two ``[left, top, width, height]`` boxes."""
    la, ta, wa, ha = np.asarray(box_a, dtype=float)
    lb, tb, wb, hb = np.asarray(box_b, dtype=float)
    inter_w = min(la + wa, lb + wb) - max(la, lb)
    inter_h = min(ta + ha, tb + hb) - max(ta, tb)
    if inter_w <= 0.0 or inter_h <= 0.0:
        return 0.0
    inter = inter_w * inter_h
    union = wa * ha + wb * hb - inter
    if union <= 0.0:
        return 0.0
    return float(inter / union)


def shift_bbox(bbox: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Translate a box by a 2D pixel displacement, keeping its size."""
    out = np.asarray(bbox, dtype=float).copy()
    out[:2] += np.asarray(delta, dtype=float)
    return out


def predict_linear(value: np.ndarray, velocity: np.ndarray) -> np.ndarray:
    """One step of the constant-velocity model.

    A 2-vector advances componentwise; a 4-vector box advances its corner
    and keeps its size.
    """
    value = np.asarray(value, dtype=float)
    if value.shape[-1] == 4:
        return shift_bbox(value, velocity)
    return value + np.asarray(velocity, dtype=float)


def update_velocity(old: np.ndarray, observed: np.ndarray, gamma: float) -> np.ndarray:
    """Exponential moving average of displacement observations."""
    return gamma * np.asarray(old, dtype=float) + (1.0 - gamma) * np.asarray(observed, dtype=float)
