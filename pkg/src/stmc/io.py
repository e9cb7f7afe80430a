"""File formats and stream plumbing: detections in, track files out.

Formats:
  calibration  JSON array of {"camera_id": str, "homography": [9 numbers]}
  detections   JSON Lines, one record per detection, sorted by frame
  tracks       per camera ``cam_<id>.txt`` with MOT-style rows
               ``frame,id,l,t,w,h,conf,x,y,-1``, plus ``ground.txt`` rows
               ``frame,id,x,y`` and ``events.jsonl`` lifecycle events
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .config import TrackerConfig
from .core import Detection
from .metrics import Trajectories
from .tracker import FrameResult, Tracker

log = logging.getLogger("stmc.io")

_DET_NORM_TOL = 1e-3


class FormatError(ValueError):
    """An input file does not match its documented format."""


# -- calibration -------------------------------------------------------


def read_calibrations(path: str | Path) -> tuple[list[str], list[np.ndarray]]:
    """Camera ids (file order defines the dense index) and 3x3 homographies."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, list) or not data:
        raise FormatError(f"{path}: expected a non-empty JSON array of cameras")
    ids: list[str] = []
    matrices: list[np.ndarray] = []
    for entry in data:
        try:
            camera_id = str(entry["camera_id"])
            values = entry["homography"]
        except (TypeError, KeyError) as exc:
            raise FormatError(f"{path}: camera entry missing {exc}") from None
        if camera_id in ids:
            raise FormatError(f"{path}: duplicate camera_id {camera_id!r}")
        matrix = np.asarray(values, dtype=float)
        if matrix.size != 9:
            raise FormatError(f"{path}: homography for {camera_id!r} needs 9 numbers")
        matrix = matrix.reshape(3, 3)
        if abs(np.linalg.det(matrix)) <= 1e-12:
            raise FormatError(f"{path}: homography for {camera_id!r} is singular")
        ids.append(camera_id)
        matrices.append(matrix)
    return ids, matrices


def write_calibrations(path: str | Path, ids: list[str], matrices: list[np.ndarray]) -> None:
    entries = [
        {"camera_id": cid, "homography": [float(x) for x in np.asarray(m).reshape(-1)]}
        for cid, m in zip(ids, matrices)
    ]
    Path(path).write_text(json.dumps(entries, indent=2) + "\n", encoding="utf-8")


# -- detections --------------------------------------------------------


def write_detections(path: str | Path, detections: Iterable[Detection], ids: list[str]) -> None:
    """One JSON object per line; camera indices map back to their ids."""
    with open(path, "w", encoding="utf-8") as handle:
        for det in detections:
            record = {
                "camera_id": ids[det.camera_id],
                "frame": int(det.frame),
                "bbox": [float(x) for x in det.bbox],
                "confidence": float(det.confidence),
                "embedding": [float(x) for x in det.embedding],
            }
            handle.write(json.dumps(record, separators=(",", ":")) + "\n")


def _parse_detection_line(line: str, lineno: int, path, cam_index: dict[str, int]) -> Detection:
    try:
        record = json.loads(line)
        camera_id = str(record["camera_id"])
        frame = int(record["frame"])
        bbox = np.asarray(record["bbox"], dtype=float)
        confidence = float(record["confidence"])
        embedding = np.asarray(record["embedding"], dtype=float)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}:{lineno}: malformed detection record ({exc})") from None
    if camera_id not in cam_index:
        raise FormatError(f"{path}:{lineno}: unknown camera_id {camera_id!r}")
    if bbox.shape != (4,):
        raise FormatError(f"{path}:{lineno}: bbox must have 4 entries")
    return Detection(
        camera_id=cam_index[camera_id],
        frame=frame,
        bbox=bbox,
        confidence=confidence,
        embedding=embedding,
    )


def _iter_records(path: str | Path, ids: list[str]) -> Iterator[Detection]:
    cam_index = {cid: i for i, cid in enumerate(ids)}
    embed_dim: int | None = None
    warned_norm = False
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            det = _parse_detection_line(line, lineno, path, cam_index)
            if embed_dim is None:
                embed_dim = det.embedding.shape[0]
            elif det.embedding.shape[0] != embed_dim:
                raise FormatError(
                    f"{path}:{lineno}: embedding dimension {det.embedding.shape[0]} "
                    f"differs from {embed_dim}"
                )
            norm = float(np.linalg.norm(det.embedding))
            if norm <= 0.0:
                raise FormatError(f"{path}:{lineno}: embedding has zero norm")
            if abs(norm - 1.0) > _DET_NORM_TOL and not warned_norm:
                log.warning("%s: embeddings deviate from unit norm; renormalizing", path)
                warned_norm = True
            det.embedding = det.embedding / norm
            yield det


def read_detections(path: str | Path, ids: list[str]) -> Iterator[tuple[int, list[Detection]]]:
    """Yield (frame, batch) in ascending frame order.

    Streams when the file is already frame-sorted; an out-of-order record
    triggers one warning and an in-memory sorted re-read.
    """
    batch: list[Detection] = []
    frame: int | None = None
    for det in _iter_records(path, ids):
        if frame is None or det.frame == frame:
            frame = det.frame
            batch.append(det)
        elif det.frame > frame:
            yield frame, batch
            frame, batch = det.frame, [det]
        else:
            log.warning("%s: detections not sorted by frame; buffering in memory", path)
            yield from _read_sorted(path, ids)
            return
    if batch:
        yield frame, batch


def _read_sorted(path: str | Path, ids: list[str]) -> Iterator[tuple[int, list[Detection]]]:
    records = sorted(_iter_records(path, ids), key=lambda det: det.frame)
    batch: list[Detection] = []
    frame: int | None = None
    for det in records:
        if frame is not None and det.frame != frame:
            yield frame, batch
            batch = []
        frame = det.frame
        batch.append(det)
    if batch:
        yield frame, batch


# -- track output ------------------------------------------------------


class TrackWriter:
    """Streams FrameResults into the per-camera, ground, and event files."""

    def __init__(self, out_dir: str | Path, ids: list[str]) -> None:
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.ids = ids
        self._cam_files = [open(self.out_dir / f"cam_{cid}.txt", "w", encoding="utf-8") for cid in ids]
        self._ground = open(self.out_dir / "ground.txt", "w", encoding="utf-8")
        self._events = open(self.out_dir / "events.jsonl", "w", encoding="utf-8")

    def __enter__(self) -> TrackWriter:
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def write(self, result: FrameResult) -> None:
        for out in result.outputs:
            x, y = float(out.ground[0]), float(out.ground[1])
            self._ground.write(f"{result.frame},{out.identity},{x:.6f},{y:.6f}\n")
            for cam, bbox, conf in out.boxes:
                left, top, width, height = (float(v) for v in bbox)
                self._cam_files[cam].write(
                    f"{result.frame},{out.identity},{left:.6f},{top:.6f},"
                    f"{width:.6f},{height:.6f},{conf:.6f},{x:.6f},{y:.6f},-1\n"
                )
        for identity in result.born:
            self._event({"born": identity, "frame": result.frame})
        for identity in result.lost:
            self._event({"lost": identity, "frame": result.frame})
        for identity in result.killed:
            self._event({"killed": identity, "frame": result.frame})
        for retired, pivot in result.merged:
            self._event({"merged": [retired, pivot], "frame": result.frame})

    def _event(self, payload: dict) -> None:
        self._events.write(json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n")

    def close(self) -> None:
        for handle in [*self._cam_files, self._ground, self._events]:
            handle.close()


def run_tracking(
    detections_path: str | Path,
    calibration_path: str | Path,
    config: TrackerConfig,
    out_dir: str | Path,
) -> dict[str, int]:
    """Drive the tracker over a detection file, writing outputs as it goes.

    Holds one frame batch plus tracker state; frames with no detections
    between batches still advance the tracker.
    """
    ids, matrices = read_calibrations(calibration_path)
    tracker = Tracker(config, matrices)
    frames = 0
    detections = 0
    with TrackWriter(out_dir, ids) as writer:
        for frame, batch in read_detections(detections_path, ids):
            if tracker.frame is None:
                tracker.frame = frame
            while tracker.frame < frame:
                writer.write(tracker.step([]))
                frames += 1
            writer.write(tracker.step(batch))
            frames += 1
            detections += len(batch)
    return {"frames": frames, "detections": detections, "identities": tracker.next_identity - 1}


# -- track/gt re-ingestion for evaluation ------------------------------


def read_track_files(directory: str | Path, ids: list[str]) -> tuple[Trajectories, Trajectories]:
    """Load (image-plane, ground-plane) trajectories written by TrackWriter."""
    directory = Path(directory)
    image: Trajectories = {}
    ground: Trajectories = {}
    for cam, cid in enumerate(ids):
        path = directory / f"cam_{cid}.txt"
        if not path.exists():
            continue
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) < 6:
                raise FormatError(f"{path}:{lineno}: expected at least 6 comma-separated fields")
            frame, identity = int(parts[0]), int(parts[1])
            bbox = np.array([float(v) for v in parts[2:6]])
            image.setdefault(identity, {})[(cam, frame)] = bbox
    path = directory / "ground.txt"
    if path.exists():
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise FormatError(f"{path}:{lineno}: expected frame,id,x,y")
            frame, identity = int(parts[0]), int(parts[1])
            ground.setdefault(identity, {})[frame] = np.array([float(parts[2]), float(parts[3])])
    return image, ground


def write_ground_truth(out_dir: str | Path, gt_image: Trajectories, gt_ground: Trajectories, ids: list[str]) -> None:
    """Write ground truth in the track-file format (confidence 1, BEV point)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    handles = [open(out / f"cam_{cid}.txt", "w", encoding="utf-8") for cid in ids]
    try:
        rows: list[tuple[int, int, int, np.ndarray]] = []
        for identity, entries in gt_image.items():
            for (cam, frame), bbox in entries.items():
                rows.append((frame, identity, cam, bbox))
        for frame, identity, cam, bbox in sorted(rows, key=lambda r: (r[0], r[1], r[2])):
            point = gt_ground.get(identity, {}).get(frame)
            x, y = (float(point[0]), float(point[1])) if point is not None else (0.0, 0.0)
            left, top, width, height = (float(v) for v in bbox)
            handles[cam].write(
                f"{frame},{identity},{left:.6f},{top:.6f},{width:.6f},{height:.6f},"
                f"1.000000,{x:.6f},{y:.6f},-1\n"
            )
    finally:
        for handle in handles:
            handle.close()
    with open(out / "ground.txt", "w", encoding="utf-8") as handle:
        rows2 = [
            (frame, identity, point)
            for identity, entries in gt_ground.items()
            for frame, point in entries.items()
        ]
        for frame, identity, point in sorted(rows2, key=lambda r: (r[0], r[1])):
            handle.write(f"{frame},{identity},{float(point[0]):.6f},{float(point[1]):.6f}\n")
