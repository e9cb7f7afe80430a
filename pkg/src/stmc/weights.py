"""Edge weights between graph nodes: similarity terms, constraints, penalties."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import TrackerConfig
from .core import SuperBox


@dataclass
class GraphNode:
    """What weight computation needs to know about a node.

    Detections and tracks both reduce to this: a slot array, a single
    reference ground point (motion-predicted for tracks), per-camera
    evidence frames, and lost-state bookkeeping.
    """

    box: SuperBox
    position: np.ndarray
    evidence: dict[int, set[int]] = field(default_factory=dict)
    is_track: bool = False
    is_lost: bool = False
    lost_for: int = 0
    identity: int | None = None
    detection_indices: list[int] = field(default_factory=list)


@dataclass
class EdgeWeight:
    value: float
    infeasible: bool = False


def raw_feature_similarity(box_i: SuperBox, box_j: SuperBox) -> float:
    """Mean over cameras of the per-slot cosine between filled feature rows."""
    return float(np.mean(np.sum(box_i.features * box_j.features, axis=1)))


def rescale_similarity(raw: float | np.ndarray, theta: float):
    """Map cosine range onto [-1, 1] with a zero exactly at ``theta``.

    Above the threshold the span [theta, 1] stretches to [0, 1]; below it
    [-1, theta] stretches to [-1, 0]. Monotone and continuous.
    """
    raw = np.asarray(raw, dtype=float)
    scaled = np.where(raw >= theta, (raw - theta) / (1.0 - theta), (raw - theta) / (1.0 + theta))
    return float(scaled) if scaled.ndim == 0 else scaled


def scaled_feature_similarity(box_i: SuperBox, box_j: SuperBox, theta_feat: float) -> float:
    return rescale_similarity(raw_feature_similarity(box_i, box_j), theta_feat)


def positional_similarity(p_i: np.ndarray, p_j: np.ndarray, theta_pos: float) -> float:
    """1 at coincident points, 0 at distance theta_pos, floored at -1."""
    dist = float(np.linalg.norm(np.asarray(p_i, float) - np.asarray(p_j, float)))
    return max(-1.0, 1.0 - dist / theta_pos)


def combine(feat_sim: float, pos_sim: float, lam: float) -> float:
    return lam * feat_sim + (1.0 - lam) * pos_sim


def decay_similarity(raw_sim: float, lost_for: int, beta: float) -> float:
    """Shrink a similarity by beta per frame a track has been lost."""
    return beta**lost_for * raw_sim


def mark_infeasible(node_i: GraphNode, node_j: GraphNode, config: TrackerConfig) -> bool:
    """True when the pair may never share a cluster.

    Either both nodes have evidence in one camera at the same frame, or
    their reference points are farther apart than the distance gate; the
    gate is waived as soon as one endpoint is a lost track.
    """
    for cam, frames_i in node_i.evidence.items():
        frames_j = node_j.evidence.get(cam)
        if frames_j and not frames_i.isdisjoint(frames_j):
            return True
    if node_i.is_lost or node_j.is_lost:
        return False
    dist = float(np.linalg.norm(node_i.position - node_j.position))
    return dist > config.gate_distance


def finalize_weight(value: float, infeasible: bool, config: TrackerConfig) -> EdgeWeight:
    """Apply the infeasibility penalty; feasible values pass through."""
    if infeasible:
        return EdgeWeight(value=config.rho, infeasible=True)
    return EdgeWeight(value=float(value), infeasible=False)


def edge_weight(node_i: GraphNode, node_j: GraphNode, config: TrackerConfig) -> EdgeWeight:
    """Full scalar pipeline for one unordered pair (reference path).

    The tracker uses the vectorized weight_matrix below; this function
    exists for tests and keeps the order of operations explicit.
    """
    feat = scaled_feature_similarity(node_i.box, node_j.box, config.theta_feat)
    if config.enable_decay:
        for node in (node_i, node_j):
            if node.is_lost:
                feat = decay_similarity(feat, node.lost_for, config.beta_decay)
    either_lost = node_i.is_lost or node_j.is_lost
    if either_lost and not config.lost_use_position:
        value = feat
    else:
        pos = positional_similarity(node_i.position, node_j.position, config.theta_pos)
        value = combine(feat, pos, config.lambda_)
    return finalize_weight(value, mark_infeasible(node_i, node_j, config), config)


def weight_matrix(
    nodes: list[GraphNode],
    config: TrackerConfig,
    bias_pairs: set[tuple[int, int]] | None = None,
    prune_pairs: set[tuple[int, int]] | None = None,
) -> np.ndarray:
    """Symmetric matrix of finalized edge weights for all unordered pairs.

    Order of operations: similarity terms and their combination, then edge
    pruning (weights forced to zero), then the pre-match bias, then the
    infeasibility penalty, which overrides everything. Bit-exact symmetry
    comes from computing the upper triangle once and mirroring. The diagonal
    is zero and never read by the solvers.
    """
    n = len(nodes)
    if n == 0:
        return np.zeros((0, 0))
    flat = np.stack([node.box.features.reshape(-1) for node in nodes])
    num_cams = nodes[0].box.num_cameras
    raw = flat @ flat.T / num_cams
    feat = np.asarray(rescale_similarity(raw, config.theta_feat))

    if config.enable_decay:
        factors = np.array(
            [config.beta_decay**node.lost_for if node.is_lost else 1.0 for node in nodes]
        )
        feat = feat * np.outer(factors, factors)

    points = np.stack([node.position for node in nodes])
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    pos = np.maximum(-1.0, 1.0 - dist / config.theta_pos)

    values = combine(feat, pos, config.lambda_)
    if not config.lost_use_position:
        lost = np.array([node.is_lost for node in nodes])
        lost_pair = lost[:, None] | lost[None, :]
        values = np.where(lost_pair, feat, values)

    for i, j in prune_pairs or ():
        values[i, j] = 0.0
        values[j, i] = 0.0
    for i, j in bias_pairs or ():
        values[i, j] += config.iou_bias
        values[j, i] += config.iou_bias

    for i in range(n):
        for j in range(i + 1, n):
            if mark_infeasible(nodes[i], nodes[j], config):
                values[i, j] = config.rho

    upper = np.triu(values, k=1)
    return upper + upper.T
