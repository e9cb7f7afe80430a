"""Core data model: detections, cross-camera slot arrays, and track lifecycle."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

_ZERO_EPS = 1e-12


@dataclass
class Detection:
    """A single-camera observation of one object in one frame."""

    camera_id: int
    frame: int
    bbox: np.ndarray              # [left, top, width, height] pixels
    confidence: float
    embedding: np.ndarray         # unit-norm appearance vector
    position: np.ndarray | None = None  # ground-plane point, set by the tracker


def normalize_rows(rows: np.ndarray) -> np.ndarray:
    """Scale each row to unit length; rows with (near) zero norm pass through."""
    rows = np.asarray(rows, dtype=float)
    norms = np.linalg.norm(rows, axis=-1, keepdims=True)
    safe = np.where(norms < _ZERO_EPS, 1.0, norms)
    return rows / safe


def fill_rows(rows: np.ndarray, present: np.ndarray, renormalize: bool) -> np.ndarray:
    """Replace absent rows with the mean of present rows.

    With ``renormalize`` the substitute (and only it) is rescaled to unit
    length, keeping measured rows bit-identical. No present rows means
    nothing to average, so the input is returned unchanged.
    """
    rows = np.asarray(rows, dtype=float).copy()
    present = np.asarray(present, dtype=bool)
    if not present.any() or present.all():
        return rows
    mean = rows[present].mean(axis=0)
    if renormalize:
        mean = normalize_rows(mean)
    rows[~present] = mean
    return rows


@dataclass
class SuperBox:
    """One object's state across all cameras: a slot per camera.

    Feature rows and ground positions exist for every slot; slots without a
    backing measurement hold filled substitutes. Image boxes stay None until
    the camera has actually seen the object.
    """

    features: np.ndarray          # (M, D), rows unit-norm
    positions: np.ndarray         # (M, 2) ground-plane points
    present: np.ndarray           # (M,) bool, slots backed by a measurement
    boxes: list[np.ndarray | None]
    frame: int = 0

    @property
    def num_cameras(self) -> int:
        return int(self.present.shape[0])

    @property
    def center(self) -> np.ndarray:
        """Mean ground position over measured slots (all slots if none measured)."""
        if self.present.any():
            return self.positions[self.present].mean(axis=0)
        return self.positions.mean(axis=0)

    @classmethod
    def from_detections(cls, detections: list[Detection], num_cameras: int) -> SuperBox:
        """Assemble a slot array from at most one detection per camera."""
        if not detections:
            raise ValueError("a slot array needs at least one detection")
        dim = detections[0].embedding.shape[0]
        features = np.zeros((num_cameras, dim))
        positions = np.zeros((num_cameras, 2))
        present = np.zeros(num_cameras, dtype=bool)
        boxes: list[np.ndarray | None] = [None] * num_cameras
        for det in detections:
            cam = det.camera_id
            if present[cam]:
                raise ValueError(f"two detections for camera {cam} in one slot array")
            if det.position is None:
                raise ValueError("detection lacks a ground-plane position")
            features[cam] = det.embedding
            positions[cam] = det.position
            present[cam] = True
            boxes[cam] = np.asarray(det.bbox, dtype=float).copy()
        features = fill_rows(features, present, renormalize=True)
        positions = fill_rows(positions, present, renormalize=False)
        return cls(
            features=features,
            positions=positions,
            present=present,
            boxes=boxes,
            frame=detections[0].frame,
        )

    def copy(self) -> SuperBox:
        return SuperBox(
            features=self.features.copy(),
            positions=self.positions.copy(),
            present=self.present.copy(),
            boxes=[None if b is None else b.copy() for b in self.boxes],
            frame=self.frame,
        )


def ema_merge(old: SuperBox, new: SuperBox, gamma: float) -> SuperBox:
    """Blend a track aggregate with a fresh slot array.

    Features keep ``gamma`` of the old direction and are renormalized;
    positions blend linearly. Image boxes blend only where both sides have
    one, otherwise whichever exists is carried.
    """
    features = normalize_rows(gamma * old.features + (1.0 - gamma) * new.features)
    positions = gamma * old.positions + (1.0 - gamma) * new.positions
    present = old.present | new.present
    boxes: list[np.ndarray | None] = []
    for old_box, new_box in zip(old.boxes, new.boxes):
        if old_box is not None and new_box is not None:
            boxes.append(gamma * old_box + (1.0 - gamma) * new_box)
        elif new_box is not None:
            boxes.append(new_box.copy())
        elif old_box is not None:
            boxes.append(old_box.copy())
        else:
            boxes.append(None)
    return SuperBox(
        features=features, positions=positions, present=present, boxes=boxes, frame=new.frame
    )


class TrackState(Enum):
    ACTIVE = "active"
    INACTIVE = "inactive"
    LOST = "lost"


@dataclass
class Track:
    """A tracked identity: aggregated slot array plus lifecycle bookkeeping."""

    identity: int
    box: SuperBox
    last_seen: int
    state: TrackState = TrackState.ACTIVE
    inactive_for: int = 0
    lost_for: int = 0
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))
    cam_velocities: dict[int, np.ndarray] = field(default_factory=dict)
    cam_last_seen: dict[int, int] = field(default_factory=dict)
    evidence: dict[int, set[int]] = field(default_factory=dict)
    # Raw (unsmoothed) last observations, the reference points for velocity
    # estimation; aggregate positions drift under EMA and prediction.
    last_center: np.ndarray | None = None
    last_boxes: dict[int, tuple[int, np.ndarray]] = field(default_factory=dict)

    def record_evidence(self, camera_id: int, frame: int) -> None:
        self.evidence.setdefault(camera_id, set()).add(frame)
        self.cam_last_seen[camera_id] = max(frame, self.cam_last_seen.get(camera_id, frame))

    def prune_evidence(self, before_frame: int) -> None:
        """Forget per-camera evidence older than ``before_frame``."""
        for cam in list(self.evidence):
            kept = {f for f in self.evidence[cam] if f >= before_frame}
            if kept:
                self.evidence[cam] = kept
            else:
                del self.evidence[cam]

    def mark_matched(self, frame: int) -> None:
        self.state = TrackState.ACTIVE
        self.inactive_for = 0
        self.lost_for = 0
        self.last_seen = frame

    def mark_missed(self, patience: int, memory: int) -> bool:
        """Advance the lifecycle one unmatched frame; False means discard."""
        if self.state is TrackState.LOST:
            self.lost_for += 1
            return self.lost_for <= memory
        self.inactive_for += 1
        self.state = TrackState.INACTIVE
        if self.inactive_for > patience:
            self.state = TrackState.LOST
            self.inactive_for = 0
            self.lost_for = 1
            return self.lost_for <= memory
        return True

    def observe_velocity(self, observed: np.ndarray, gamma: float) -> None:
        self.velocity = gamma * self.velocity + (1.0 - gamma) * np.asarray(observed, float)

    def observe_cam_velocity(self, camera_id: int, observed: np.ndarray, gamma: float) -> None:
        prior = self.cam_velocities.get(camera_id)
        obs = np.asarray(observed, dtype=float)
        if prior is None:
            self.cam_velocities[camera_id] = obs.copy()
        else:
            self.cam_velocities[camera_id] = gamma * prior + (1.0 - gamma) * obs

    def predict(self) -> None:
        """Advance every slot one frame along the current motion estimates."""
        self.box.positions = self.box.positions + self.velocity
        for cam, vel in self.cam_velocities.items():
            box = self.box.boxes[cam]
            if box is not None:
                shifted = box.copy()
                shifted[:2] += vel
                self.box.boxes[cam] = shifted
