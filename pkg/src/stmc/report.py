"""Evaluation reports: metric computation, CSV/table output, figures."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .metrics import (
    IdMetrics,
    MotaMetrics,
    Trajectories,
    clear_mota,
    id_metrics,
    iou_matcher,
    radius_matcher,
)

_HARMONIC_TOL = 1e-12


def _check_harmonic(ident: IdMetrics) -> None:
    """IDF1 must equal the harmonic mean of IDP and IDR."""
    if ident.idp + ident.idr == 0.0:
        return
    harmonic = 2.0 * ident.idp * ident.idr / (ident.idp + ident.idr)
    if abs(ident.idf1 - harmonic) > _HARMONIC_TOL:
        raise AssertionError(
            f"IDF1 {ident.idf1!r} deviates from the harmonic mean {harmonic!r}"
        )


def evaluate_plane(
    gt: Trajectories, pred: Trajectories, matcher
) -> tuple[IdMetrics, MotaMetrics]:
    ident = id_metrics(gt, pred, matcher)
    _check_harmonic(ident)
    return ident, clear_mota(gt, pred, matcher)


def evaluate_scene(
    gt_image: Trajectories,
    gt_ground: Trajectories,
    pred_image: Trajectories,
    pred_ground: Trajectories,
    iou_threshold: float = 0.5,
    radius: float = 1.0,
) -> dict[str, dict[str, float]]:
    """ID metrics and MOTA on both evaluation planes."""
    report: dict[str, dict[str, float]] = {}
    for plane, gt, pred, matcher in (
        ("image", gt_image, pred_image, iou_matcher(iou_threshold)),
        ("ground", gt_ground, pred_ground, radius_matcher(radius)),
    ):
        ident, mota = evaluate_plane(gt, pred, matcher)
        report[plane] = {
            "idf1": ident.idf1,
            "idp": ident.idp,
            "idr": ident.idr,
            "idtp": ident.idtp,
            "idfp": ident.idfp,
            "idfn": ident.idfn,
            "mota": mota.mota,
            "fn": mota.fn,
            "fp": mota.fp,
            "idsw": mota.idsw,
            "gt_total": mota.gt_total,
        }
    return report


_CSV_FIELDS = ["idf1", "idp", "idr", "idtp", "idfp", "idfn", "mota", "fn", "fp", "idsw", "gt_total"]


def report_csv(report: dict[str, dict[str, float]]) -> str:
    lines = ["plane," + ",".join(_CSV_FIELDS)]
    for plane in sorted(report):
        values = report[plane]
        cells = [
            f"{values[field]:.6f}" if isinstance(values[field], float) else str(values[field])
            for field in _CSV_FIELDS
        ]
        lines.append(plane + "," + ",".join(cells))
    return "\n".join(lines) + "\n"


def report_table(report: dict[str, dict[str, float]]) -> str:
    header = f"{'plane':<8}{'IDF1':>8}{'IDP':>8}{'IDR':>8}{'MOTA':>8}{'IDSW':>6}{'FP':>6}{'FN':>6}"
    lines = [header, "-" * len(header)]
    for plane in sorted(report):
        v = report[plane]
        lines.append(
            f"{plane:<8}{v['idf1']:>8.4f}{v['idp']:>8.4f}{v['idr']:>8.4f}"
            f"{v['mota']:>8.4f}{v['idsw']:>6d}{v['fp']:>6d}{v['fn']:>6d}"
        )
    return "\n".join(lines)


def render_figures(
    out_dir: str | Path,
    report: dict[str, dict[str, float]],
    gt_ground: Trajectories,
    pred_ground: Trajectories,
) -> list[Path]:
    """Write the metric bar chart and the ground-plane trajectory overlay."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    fig, ax = plt.subplots(figsize=(7, 4))
    names = ["idf1", "idp", "idr", "mota"]
    planes = sorted(report)
    width = 0.8 / max(len(planes), 1)
    for k, plane in enumerate(planes):
        values = [report[plane][name] for name in names]
        offsets = [i + k * width for i in range(len(names))]
        ax.bar(offsets, values, width=width, label=plane)
    ax.set_xticks([i + width * (len(planes) - 1) / 2 for i in range(len(names))])
    ax.set_xticklabels([name.upper() for name in names])
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("score")
    ax.set_title("Tracking metrics")
    ax.legend()
    fig.tight_layout()
    path = out / "metrics.png"
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6, 6))
    for identity in sorted(gt_ground):
        entries = gt_ground[identity]
        frames = sorted(entries)
        xs = [entries[f][0] for f in frames]
        ys = [entries[f][1] for f in frames]
        ax.plot(xs, ys, color="0.6", linewidth=1.0)
    for identity in sorted(pred_ground):
        entries = pred_ground[identity]
        frames = sorted(entries)
        xs = [entries[f][0] for f in frames]
        ys = [entries[f][1] for f in frames]
        ax.plot(xs, ys, linewidth=0.8)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title("Ground-plane trajectories (gray: truth)")
    fig.tight_layout()
    path = out / "trajectories.png"
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    written.append(path)
    return written


def write_report(
    out_dir: str | Path,
    report: dict[str, dict[str, float]],
    gt_ground: Trajectories | None = None,
    pred_ground: Trajectories | None = None,
    figures: bool = True,
) -> Path:
    """Persist metrics.csv (and figures); returns the CSV path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "metrics.csv"
    csv_path.write_text(report_csv(report), encoding="utf-8")
    if figures:
        render_figures(out, report, gt_ground or {}, pred_ground or {})
    return csv_path
