"""Identity-based tracking metrics (IDF1 family) and CLEAR MOTA.

Trajectories are plain mappings: identity -> {slot key: position}, where a
slot key is (camera, frame) for image-plane evaluation or a frame for
ground-plane evaluation. Positions are boxes or points accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Hashable

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import iou

Trajectories = dict[int, dict[Hashable, np.ndarray]]
Matcher = Callable[[np.ndarray, np.ndarray], bool]


def iou_matcher(threshold: float = 0.5) -> Matcher:
    """Boxes correspond when their IoU reaches the threshold."""
    def match(a: np.ndarray, b: np.ndarray) -> bool:
        return iou(a, b) >= threshold
    return match


def radius_matcher(radius: float = 1.0) -> Matcher:
    """Points correspond when they lie within a fixed radius."""
    def match(a: np.ndarray, b: np.ndarray) -> bool:
        return float(np.linalg.norm(np.asarray(a, float) - np.asarray(b, float))) <= radius
    return match


@dataclass
class IdMetrics:
    idf1: float
    idp: float
    idr: float
    idtp: int
    idfp: int
    idfn: int


def _overlap_count(a: dict[Hashable, np.ndarray], b: dict[Hashable, np.ndarray], matcher: Matcher) -> int:
    if len(b) < len(a):
        a, b = b, a
    return sum(1 for key, pos in a.items() if key in b and matcher(pos, b[key]))


def id_metrics(gt: Trajectories, pred: Trajectories, matcher: Matcher) -> IdMetrics:
    """Globally optimal one-to-one identity correspondence, then count slots.

    Each ground-truth identity is assigned to at most one predicted identity
    by a minimum-cost matching whose cost counts every slot the pairing
    fails to cover. Slots matched under that assignment are IDTP; leftover
    predicted slots are IDFP, leftover ground-truth slots IDFN.
    """
    gt_ids = sorted(gt)
    pred_ids = sorted(pred)
    total_gt = sum(len(gt[g]) for g in gt_ids)
    total_pred = sum(len(pred[p]) for p in pred_ids)
    if total_gt == 0 and total_pred == 0:
        return IdMetrics(1.0, 1.0, 1.0, 0, 0, 0)
    if total_gt == 0 or total_pred == 0:
        return IdMetrics(0.0, 0.0, 0.0, 0, total_pred, total_gt)

    overlap = np.zeros((len(gt_ids), len(pred_ids)), dtype=float)
    for gi, g in enumerate(gt_ids):
        for pi, p in enumerate(pred_ids):
            overlap[gi, pi] = _overlap_count(gt[g], pred[p], matcher)

    gt_sizes = np.array([len(gt[g]) for g in gt_ids], dtype=float)
    pred_sizes = np.array([len(pred[p]) for p in pred_ids], dtype=float)
    big = float(total_gt + total_pred + 1)
    size = len(gt_ids) + len(pred_ids)
    cost = np.full((size, size), big)
    # real pairs: slots not covered by the pairing
    cost[: len(gt_ids), : len(pred_ids)] = gt_sizes[:, None] + pred_sizes[None, :] - 2.0 * overlap
    # leaving an identity unmatched costs all of its slots
    for gi in range(len(gt_ids)):
        cost[gi, len(pred_ids) + gi] = gt_sizes[gi]
    for pi in range(len(pred_ids)):
        cost[len(gt_ids) + pi, pi] = pred_sizes[pi]
    cost[len(gt_ids):, len(pred_ids):] = 0.0

    rows, cols = linear_sum_assignment(cost)
    idtp = 0
    for r, c in zip(rows, cols):
        if r < len(gt_ids) and c < len(pred_ids):
            idtp += int(overlap[r, c])
    idfp = total_pred - idtp
    idfn = total_gt - idtp
    idp = idtp / total_pred
    idr = idtp / total_gt
    idf1 = 2.0 * idtp / (total_gt + total_pred)
    return IdMetrics(idf1=idf1, idp=idp, idr=idr, idtp=idtp, idfp=idfp, idfn=idfn)


def _score(a: np.ndarray, b: np.ndarray) -> float:
    """Match quality: IoU for boxes, negated distance for points."""
    a = np.asarray(a, dtype=float)
    if a.shape[-1] == 4:
        return iou(a, b)
    return -float(np.linalg.norm(a - np.asarray(b, float)))


@dataclass
class MotaMetrics:
    mota: float
    fn: int
    fp: int
    idsw: int
    gt_total: int


def clear_mota(gt: Trajectories, pred: Trajectories, matcher: Matcher) -> MotaMetrics:
    """Frame-by-frame greedy matching with persistent correspondences.

    A ground-truth object keeps its previous predicted identity while the
    pair still satisfies the matcher; remaining objects match greedily by
    quality. Changing an object's predicted identity counts one switch.
    """
    gt_by_slot: dict[Hashable, dict[int, np.ndarray]] = {}
    pred_by_slot: dict[Hashable, dict[int, np.ndarray]] = {}
    for ident, entries in gt.items():
        for key, pos in entries.items():
            gt_by_slot.setdefault(key, {})[ident] = pos
    for ident, entries in pred.items():
        for key, pos in entries.items():
            pred_by_slot.setdefault(key, {})[ident] = pos

    fn = fp = idsw = gt_total = 0
    last_match: dict[int, int] = {}
    for key in sorted(set(gt_by_slot) | set(pred_by_slot)):
        gt_here = gt_by_slot.get(key, {})
        pred_here = pred_by_slot.get(key, {})
        gt_total += len(gt_here)
        taken_pred: set[int] = set()
        matches: dict[int, int] = {}
        for g in sorted(gt_here):
            p = last_match.get(g)
            if p is not None and p in pred_here and matcher(gt_here[g], pred_here[p]):
                matches[g] = p
                taken_pred.add(p)
        candidates = sorted(
            (
                (-_score(gt_here[g], pred_here[p]), g, p)
                for g in gt_here
                if g not in matches
                for p in pred_here
                if p not in taken_pred and matcher(gt_here[g], pred_here[p])
            ),
        )
        for _, g, p in candidates:
            if g in matches or p in taken_pred:
                continue
            matches[g] = p
            taken_pred.add(p)
        for g, p in matches.items():
            before = last_match.get(g)
            if before is not None and before != p:
                idsw += 1
            last_match[g] = p
        fn += len(gt_here) - len(matches)
        fp += len(pred_here) - len(taken_pred)
    mota = 1.0 - (fn + fp + idsw) / max(gt_total, 1)
    return MotaMetrics(mota=mota, fn=fn, fp=fp, idsw=idsw, gt_total=gt_total)
