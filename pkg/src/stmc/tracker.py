"""The online per-frame engine: graph assembly, clustering, identity bookkeeping."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .assign import prematch_bias
from .config import TrackerConfig
from .core import Detection, SuperBox, Track, TrackState, ema_merge
from .geometry import ProjectionError, project_to_ground
from .multicut import WeightedGraph, clusters_of, solve_heuristic
from .weights import GraphNode, weight_matrix

log = logging.getLogger("stmc.tracker")

# Retention for velocity estimates. Deliberately faster than the appearance
# and position aggregates: predictions must re-converge within a few frames
# after a direction change, or the distance gate severs the track.
_VELOCITY_RETENTION = 0.5


@dataclass
class TrackOutput:
    """One identity's emission for one frame."""

    identity: int
    ground: np.ndarray                            # (2,) BEV point
    boxes: list[tuple[int, np.ndarray, float]]    # (camera_id, bbox, confidence)


@dataclass
class FrameResult:
    """Everything the tracker decided in one step."""

    frame: int
    assignments: list[int | None] = field(default_factory=list)  # per input detection
    outputs: list[TrackOutput] = field(default_factory=list)
    born: list[int] = field(default_factory=list)
    updated: list[int] = field(default_factory=list)
    deactivated: list[int] = field(default_factory=list)
    lost: list[int] = field(default_factory=list)
    killed: list[int] = field(default_factory=list)
    merged: list[tuple[int, int]] = field(default_factory=list)


class Tracker:
    """Clusters detections and live tracks jointly, one solver run per frame.

    Strictly online: a step reads nothing newer than its own frame, and
    identical input streams reproduce bit-identical results.
    """

    def __init__(
        self,
        config: TrackerConfig,
        calibrations: list[np.ndarray],
        start_frame: int | None = None,
    ) -> None:
        config.validate()
        if len(calibrations) < 1:
            raise ValueError("at least one camera calibration is required")
        self.config = config
        self.calibrations = [np.asarray(h, dtype=float).reshape(3, 3) for h in calibrations]
        self.num_cameras = len(self.calibrations)
        self.tracks: dict[int, Track] = {}
        self.next_identity = 1
        self.frame: int | None = start_frame

    # -- graph assembly -------------------------------------------------

    def _prepare_detections(
        self, detections: list[Detection]
    ) -> tuple[list[Detection], list[int]]:
        """Gate by confidence, project to the ground plane, drop degenerates."""
        kept: list[Detection] = []
        kept_input_index: list[int] = []
        for index, det in enumerate(detections):
            if det.frame != self.frame:
                raise ValueError(f"detection frame {det.frame} does not match step frame {self.frame}")
            if not (0 <= det.camera_id < self.num_cameras):
                raise ValueError(f"camera index {det.camera_id} out of range")
            if det.confidence < self.config.min_confidence:
                continue
            try:
                det.position = project_to_ground(
                    det.bbox, self.calibrations[det.camera_id], self.config.alpha_proj
                )
            except ProjectionError:
                log.warning(
                    "frame %d camera %d: dropping detection with degenerate projection",
                    self.frame,
                    det.camera_id,
                )
                continue
            kept.append(det)
            kept_input_index.append(index)
        return kept, kept_input_index

    def _build_nodes(
        self, tracks: list[Track], detections: list[Detection], frame: int
    ) -> list[GraphNode]:
        nodes = [
            GraphNode(
                box=track.box,
                position=track.box.center,
                evidence=track.evidence,
                is_track=True,
                is_lost=track.state is TrackState.LOST,
                lost_for=track.lost_for,
                identity=track.identity,
            )
            for track in tracks
        ]
        for di, det in enumerate(detections):
            sb = SuperBox.from_detections([det], self.num_cameras)
            nodes.append(
                GraphNode(
                    box=sb,
                    position=np.asarray(det.position, dtype=float),
                    evidence={det.camera_id: {frame}},
                    detection_indices=[di],
                )
            )
        return nodes

    def _check_penalty_separation(
        self, weights: np.ndarray, labels: list[int], nodes: list[GraphNode]
    ) -> None:
        """Infeasible pairs must end up separated while the penalty dominates."""
        positive_incident = np.sum(np.maximum(weights, 0.0), axis=1)
        rho = self.config.rho
        n = len(nodes)
        for i in range(n):
            for j in range(i + 1, n):
                if (
                    weights[i, j] == rho
                    and labels[i] == labels[j]
                    and positive_incident[i] < -rho
                    and positive_incident[j] < -rho
                ):
                    raise RuntimeError(
                        f"solver clustered an infeasible pair ({i}, {j}) despite penalty dominance"
                    )

    # -- cluster to identity --------------------------------------------

    def _aggregate_cluster(self, detections: list[Detection]) -> SuperBox:
        return SuperBox.from_detections(detections, self.num_cameras)

    def _observe_motion(self, track: Track, new_sb: SuperBox, detections: list[Detection]) -> None:
        """Update velocity EMAs from raw observation deltas before merging."""
        frame = new_sb.frame
        center = new_sb.center
        if track.last_center is not None and frame > track.last_seen:
            gap = frame - track.last_seen
            track.observe_velocity((center - track.last_center) / gap, _VELOCITY_RETENTION)
        track.last_center = center
        for det in detections:
            prior = track.last_boxes.get(det.camera_id)
            bbox = np.asarray(det.bbox, dtype=float)
            if prior is not None and frame > prior[0]:
                seen_frame, seen_box = prior
                delta = (bbox[:2] - seen_box[:2]) / (frame - seen_frame)
                track.observe_cam_velocity(det.camera_id, delta, _VELOCITY_RETENTION)
            track.last_boxes[det.camera_id] = (frame, bbox.copy())

    def _new_track(self, detections: list[Detection], frame: int) -> Track:
        sb = self._aggregate_cluster(detections)
        track = Track(identity=self.next_identity, box=sb, last_seen=frame)
        self.next_identity += 1
        track.last_center = sb.center
        for det in detections:
            track.record_evidence(det.camera_id, frame)
            track.last_boxes[det.camera_id] = (frame, np.asarray(det.bbox, dtype=float).copy())
        self.tracks[track.identity] = track
        return track

    def _emit(self, identity: int, detections: list[Detection]) -> TrackOutput:
        """Raw per-camera boxes plus the mean of their ground points."""
        boxes = sorted(
            ((det.camera_id, np.asarray(det.bbox, dtype=float), det.confidence) for det in detections),
            key=lambda item: item[0],
        )
        ground = np.mean([det.position for det in detections], axis=0)
        return TrackOutput(identity=identity, ground=ground, boxes=boxes)

    def _assign_clusters(
        self,
        clusters: list[set[int]],
        nodes: list[GraphNode],
        detections: list[Detection],
        result: FrameResult,
    ) -> set[int]:
        frame = result.frame
        matched: set[int] = set()
        for cluster in clusters:
            track_ids = sorted(
                nodes[i].identity for i in cluster if nodes[i].is_track
            )
            det_indices = sorted(
                di for i in cluster for di in nodes[i].detection_indices
            )
            cluster_dets = [detections[di] for di in det_indices]
            if not track_ids and not cluster_dets:
                continue
            if not track_ids:
                track = self._new_track(cluster_dets, frame)
                result.born.append(track.identity)
                matched.add(track.identity)
                identity = track.identity
                result.outputs.append(self._emit(identity, cluster_dets))
            else:
                pivot_id = min(
                    track_ids, key=lambda tid: (-self.tracks[tid].last_seen, tid)
                )
                pivot = self.tracks[pivot_id]
                for tid in track_ids:
                    if tid == pivot_id:
                        continue
                    absorbed = self.tracks.pop(tid)
                    for cam, frames in absorbed.evidence.items():
                        pivot.evidence.setdefault(cam, set()).update(frames)
                    for cam, seen in absorbed.cam_last_seen.items():
                        pivot.cam_last_seen[cam] = max(pivot.cam_last_seen.get(cam, seen), seen)
                    result.merged.append((tid, pivot_id))
                identity = pivot_id
                if cluster_dets:
                    new_sb = self._aggregate_cluster(cluster_dets)
                    self._observe_motion(pivot, new_sb, cluster_dets)
                    pivot.box = ema_merge(pivot.box, new_sb, self.config.ema_gamma)
                    pivot.mark_matched(frame)
                    for det in cluster_dets:
                        pivot.record_evidence(det.camera_id, frame)
                    matched.add(pivot_id)
                    result.updated.append(pivot_id)
                    result.outputs.append(self._emit(identity, cluster_dets))
            for di in det_indices:
                result.assignments[di] = identity
        return matched

    def _advance_lifecycles(self, matched: set[int], result: FrameResult) -> None:
        for identity in sorted(self.tracks):
            track = self.tracks[identity]
            if identity in matched:
                continue
            was = track.state
            keep = track.mark_missed(self.config.patience, self.config.memory)
            if not keep:
                del self.tracks[identity]
                result.killed.append(identity)
            elif track.state is TrackState.LOST and was is not TrackState.LOST:
                result.lost.append(identity)
            elif track.state is TrackState.INACTIVE and was is TrackState.ACTIVE:
                result.deactivated.append(identity)

    # -- the step --------------------------------------------------------

    def step(self, detections: list[Detection]) -> FrameResult:
        """Run one frame: cluster, assign identities, age tracks, predict."""
        if self.frame is None:
            self.frame = detections[0].frame if detections else 0
        frame = self.frame
        kept, kept_input_index = self._prepare_detections(detections)

        result = FrameResult(frame=frame, assignments=[None] * len(detections))
        live_tracks = [self.tracks[i] for i in sorted(self.tracks)]
        nodes = self._build_nodes(live_tracks, kept, frame)

        matched: set[int] = set()
        if nodes:
            bias_pairs: set[tuple[int, int]] = set()
            prune_pairs: set[tuple[int, int]] = set()
            if self.config.enable_prematch and live_tracks and kept:
                pairs, pruned = prematch_bias(
                    live_tracks, kept, self.num_cameras, prune=self.config.enable_prune
                )
                offset = len(live_tracks)
                bias_pairs = {(ti, offset + di) for ti, di in pairs}
                prune_pairs = {(ti, offset + di) for ti, di in pruned}
            weights = weight_matrix(nodes, self.config, bias_pairs, prune_pairs)
            if not np.all(np.isfinite(weights)):
                raise RuntimeError(f"non-finite edge weight at frame {frame}")
            labels = solve_heuristic(WeightedGraph.from_matrix(weights))
            self._check_penalty_separation(weights, labels, nodes)
            kept_assign: list[int | None] = [None] * len(kept)
            inner = FrameResult(frame=frame, assignments=kept_assign)
            matched = self._assign_clusters(clusters_of(labels), nodes, kept, inner)
            for di, identity in enumerate(kept_assign):
                result.assignments[kept_input_index[di]] = identity
            result.outputs = sorted(inner.outputs, key=lambda out: out.identity)
            result.born = sorted(inner.born)
            result.updated = sorted(inner.updated)
            result.merged = sorted(inner.merged)

        self._advance_lifecycles(matched, result)

        horizon = frame - (self.config.memory + self.config.patience)
        for track in self.tracks.values():
            track.prune_evidence(horizon)
            track.predict()

        self.frame = frame + 1
        return result
