"""Rectangular linear assignment and the per-camera IoU pre-matching step."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import Detection, Track
from .geometry import iou


def solve_lap_max(values: np.ndarray, min_value: float = 0.0) -> list[tuple[int, int]]:
    """One-to-one matching maximizing total value.

    Handles empty and rectangular inputs; pairs whose value is at or below
    ``min_value`` are dropped from the result.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return []
    rows, cols = linear_sum_assignment(values, maximize=True)
    return [(int(r), int(c)) for r, c in zip(rows, cols) if values[r, c] > min_value]


def prematch_bias(
    tracks: list[Track],
    detections: list[Detection],
    num_cameras: int,
    prune: bool,
) -> tuple[set[tuple[int, int]], set[tuple[int, int]]]:
    """Per-camera Hungarian matching on IoU of predicted boxes vs detections.

    Returns index pairs (track position, detection position): first the
    matched pairs that earn the additive bias, then the pairs to prune.
    Pruning clears every other same-camera edge incident to a matched track
    or matched detection; cross-camera edges are never touched because box
    overlap is meaningful only within one image plane.
    """
    matched: set[tuple[int, int]] = set()
    pruned: set[tuple[int, int]] = set()
    for cam in range(num_cameras):
        row_tracks = [
            (ti, track.box.boxes[cam])
            for ti, track in enumerate(tracks)
            if track.box.boxes[cam] is not None
        ]
        col_dets = [(di, det.bbox) for di, det in enumerate(detections) if det.camera_id == cam]
        if not row_tracks or not col_dets:
            continue
        overlap = np.array(
            [[iou(tbox, dbox) for _, dbox in col_dets] for _, tbox in row_tracks]
        )
        pairs = solve_lap_max(overlap, min_value=0.0)
        if not pairs:
            continue
        cam_matches = {(row_tracks[r][0], col_dets[c][0]) for r, c in pairs}
        matched |= cam_matches
        if prune:
            matched_rows = {row_tracks[r][0] for r, _ in pairs}
            matched_cols = {col_dets[c][0] for _, c in pairs}
            for ti, _ in row_tracks:
                for di, _ in col_dets:
                    pair = (ti, di)
                    if pair in cam_matches:
                        continue
                    if ti in matched_rows or di in matched_cols:
                        pruned.add(pair)
    return matched, pruned
