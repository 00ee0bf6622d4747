"""Ordered top-k evaluation, split aggregation, distinct-artwork coverage, and
visit-record analytics.

A prediction counts at k if the predicted label appears among the k most
visible ground-truth labels of its frame. Reports carry per-split accuracy
curves for k=1..K, the cross-split mean and sample standard deviation,
coverage over distinct instances, and per-split visit records; percentages
print with one decimal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import CaptureRecord, GalleryManifest, LabelSpace
from .nn import NetworkSpec, Params, network_forward
from .sim.warp import resize_bilinear

DEFAULT_K_MAX = 10


@dataclass(frozen=True)
class Prediction:
    capture: str                   # capture id (the frame path)
    label: str                     # argmax class
    scores: tuple[float, ...] = ()


def prediction_from_scores(capture: str, scores: np.ndarray,
                           label_space: LabelSpace) -> Prediction:
    """Build a Prediction whose label is the argmax score (first index on ties)."""
    idx = int(np.argmax(scores))
    return Prediction(capture=capture, label=label_space.label(idx),
                      scores=tuple(float(s) for s in scores))


def to_network_input(img: np.ndarray, input_hw: tuple[int, int]) -> np.ndarray:
    """uint8 [H,W,3] frame -> float32 [3,h,w] in [-0.5, 0.5], resized."""
    img = resize_bilinear(img, input_hw)
    return (img.astype(np.float32) / 255.0 - 0.5).transpose(2, 0, 1)


def classify_images(spec: NetworkSpec, params: Params, images: list[np.ndarray],
                    batch_size: int = 64) -> np.ndarray:
    """Score a list of uint8 frames; returns [N, C] float32 class scores."""
    out = []
    for start in range(0, len(images), batch_size):
        chunk = images[start:start + batch_size]
        x = np.stack([to_network_input(im, spec.input_hw) for im in chunk])
        scores, _ = network_forward(spec, params, x)
        out.append(scores)
    return np.concatenate(out) if out else np.zeros((0, spec.classes), dtype=np.float32)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def topk_hit(pred_label: str, ordered_gt: tuple[str, ...] | list[str], k: int) -> bool:
    """True iff the prediction is among the first min(k, len(gt)) labels."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not ordered_gt:
        raise ValueError("ordered_gt must not be empty")
    return pred_label in tuple(ordered_gt)[:k]


def _check_correspondence(predictions: list[Prediction], records: list[CaptureRecord]) -> None:
    if len(predictions) != len(records):
        raise ValueError(
            f"predictions and records must correspond 1-1: {len(predictions)} predictions "
            f"vs {len(records)} records")


def split_topk_accuracy(predictions: list[Prediction], records: list[CaptureRecord],
                        k: int) -> float:
    """Fraction of records whose prediction is a top-k hit."""
    _check_correspondence(predictions, records)
    if not records:
        return 0.0
    hits = sum(topk_hit(p.label, r.ordered_gt, k) for p, r in zip(predictions, records))
    return hits / len(records)


def accuracy_curve(predictions: list[Prediction], records: list[CaptureRecord],
                   k_max: int = DEFAULT_K_MAX) -> list[float]:
    return [split_topk_accuracy(predictions, records, k) for k in range(1, k_max + 1)]


def aggregate_splits(curves: list[list[float]]) -> tuple[list[float], list[float]]:
    """Unweighted mean and sample (n-1) std per k; a single split has std 0."""
    if not curves:
        raise ValueError("need at least one split curve")
    k = len(curves[0])
    for c in curves:
        if len(c) != k:
            raise ValueError(f"curves of unequal length: {len(c)} vs {k}")
    arr = np.asarray(curves, dtype=np.float64)
    mean = arr.mean(axis=0)
    std = arr.std(axis=0, ddof=1) if len(curves) > 1 else np.zeros(k)
    return mean.tolist(), std.tolist()


def distinct_coverage(predictions: list[Prediction], records: list[CaptureRecord],
                      manifest: GalleryManifest) -> float:
    """Fraction of distinct instances identified at top-1 in some frame where
    they really appear; auxiliary categories are excluded on both sides."""
    _check_correspondence(predictions, records)
    instance_ids = set(manifest.instance_ids())
    recognized = set()
    for p, r in zip(predictions, records):
        if (p.label in instance_ids and topk_hit(p.label, r.ordered_gt, 1)
                and p.label in r.ordered_gt):
            recognized.add(p.label)
    if not instance_ids:
        return 0.0
    return len(recognized) / len(instance_ids)


@dataclass
class VisitRecord:
    """Chronological tally of correctly identified artworks (top-1, background
    excluded): capture counts, first/last capture step, identified sequence."""

    counts: dict[str, int] = field(default_factory=dict)
    first_step: dict[str, int] = field(default_factory=dict)
    last_step: dict[str, int] = field(default_factory=dict)
    sequence: list[tuple[int, str]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "artworks": {aid: {"count": self.counts[aid], "first": self.first_step[aid],
                               "last": self.last_step[aid]}
                         for aid in sorted(self.counts)},
            "sequence": [[t, aid] for t, aid in self.sequence],
        }


def build_visit_record(predictions: list[Prediction], records: list[CaptureRecord]
                       ) -> VisitRecord:
    """Tally identified artworks over a chronologically ordered capture split."""
    _check_correspondence(predictions, records)
    steps = [r.t for r in records]
    if steps != sorted(steps):
        raise ValueError("records must be in chronological order")
    out = VisitRecord()
    for p, r in zip(predictions, records):
        if p.label == "background" or not topk_hit(p.label, r.ordered_gt, 1):
            continue
        out.sequence.append((r.t, p.label))
        out.counts[p.label] = out.counts.get(p.label, 0) + 1
        if p.label not in out.first_step:
            out.first_step[p.label] = r.t
        out.last_step[p.label] = r.t
    return out


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def format_percent(fraction: float) -> str:
    return f"{100.0 * fraction:.1f}%"


@dataclass
class EvalReport:
    split_curves: dict[str, list[float]]
    mean_curve: list[float]
    std_curve: list[float]
    coverage: float
    visit_records: dict[str, VisitRecord]
    config: dict = field(default_factory=dict)

    @property
    def k_max(self) -> int:
        return len(self.mean_curve)

    def to_json(self) -> dict:
        return {
            "splits": {name: [round(a, 6) for a in curve]
                       for name, curve in sorted(self.split_curves.items())},
            "mean": [round(a, 6) for a in self.mean_curve],
            "std": [round(a, 6) for a in self.std_curve],
            "coverage": round(self.coverage, 6),
            "top1_mean": format_percent(self.mean_curve[0]),
            "coverage_percent": format_percent(self.coverage),
            "visit_records": {name: vr.to_json()
                              for name, vr in sorted(self.visit_records.items())},
            "config": self.config,
        }


def build_eval_report(split_predictions: dict[str, list[Prediction]],
                      split_records: dict[str, list[CaptureRecord]],
                      manifest: GalleryManifest, k_max: int = DEFAULT_K_MAX,
                      config: dict | None = None) -> EvalReport:
    if set(split_predictions) != set(split_records):
        raise ValueError(f"prediction splits {sorted(split_predictions)} do not match "
                         f"record splits {sorted(split_records)}")
    curves: dict[str, list[float]] = {}
    visits: dict[str, VisitRecord] = {}
    all_preds: list[Prediction] = []
    all_records: list[CaptureRecord] = []
    for name in sorted(split_records):
        preds, recs = split_predictions[name], split_records[name]
        curve = accuracy_curve(preds, recs, k_max)
        assert all(curve[i + 1] >= curve[i] - 1e-12 for i in range(len(curve) - 1)), \
            f"top-k accuracy must be non-decreasing in k, got {curve}"
        curves[name] = curve
        visits[name] = build_visit_record(preds, recs)
        all_preds.extend(preds)
        all_records.extend(recs)
    mean, std = aggregate_splits(list(curves.values()))
    coverage = distinct_coverage(all_preds, all_records, manifest)
    return EvalReport(split_curves=curves, mean_curve=mean, std_curve=std,
                      coverage=coverage, visit_records=visits, config=config or {})


def report_to_csv(report: EvalReport) -> str:
    lines = ["split,k,accuracy"]
    for name in sorted(report.split_curves):
        for k, acc in enumerate(report.split_curves[name], start=1):
            lines.append(f"{name},{k},{acc:.6f}")
    for k, acc in enumerate(report.mean_curve, start=1):
        lines.append(f"mean,{k},{acc:.6f}")
    return "\n".join(lines) + "\n"


_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
               "#17becf", "#7f7f7f")


def report_to_svg(report: EvalReport, width: int = 640, height: int = 420) -> str:
    """Accuracy-vs-k line chart: one polyline per split plus the mean curve
    with a +-1 std band. Hand-rolled so output bytes are fully deterministic."""
    m_left, m_right, m_top, m_bottom = 56, 16, 24, 44
    pw, ph = width - m_left - m_right, height - m_top - m_bottom
    k_max = report.k_max

    def x_of(k: int) -> float:
        return m_left + (k - 1) / max(1, k_max - 1) * pw

    def y_of(acc: float) -> float:
        return m_top + (1.0 - acc) * ph

    def pts(curve: list[float]) -> str:
        return " ".join(f"{x_of(k):.2f},{y_of(a):.2f}" for k, a in enumerate(curve, 1))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = y_of(frac)
        parts.append(f'<line x1="{m_left}" y1="{y:.2f}" x2="{width - m_right}" y2="{y:.2f}" '
                     f'stroke="#dddddd"/>')
        parts.append(f'<text x="{m_left - 8}" y="{y + 4:.2f}" font-size="12" '
                     f'text-anchor="end" fill="#444444">{frac * 100:.0f}%</text>')
    for k in range(1, k_max + 1):
        parts.append(f'<text x="{x_of(k):.2f}" y="{height - m_bottom + 18}" font-size="12" '
                     f'text-anchor="middle" fill="#444444">{k}</text>')
    parts.append(f'<text x="{m_left + pw / 2:.2f}" y="{height - 8}" font-size="13" '
                 f'text-anchor="middle" fill="#111111">top-k</text>')

    if len(report.split_curves) > 1:
        upper = [min(1.0, m + s) for m, s in zip(report.mean_curve, report.std_curve)]
        lower = [max(0.0, m - s) for m, s in zip(report.mean_curve, report.std_curve)]
        band = (pts(upper) + " "
                + " ".join(f"{x_of(k):.2f},{y_of(a):.2f}"
                           for k, a in reversed(list(enumerate(lower, 1)))))
        parts.append(f'<polygon points="{band}" fill="#1f77b4" fill-opacity="0.15" '
                     f'stroke="none"/>')

    for i, name in enumerate(sorted(report.split_curves)):
        color = _SVG_COLORS[i % len(_SVG_COLORS)]
        parts.append(f'<polyline points="{pts(report.split_curves[name])}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{width - m_right - 4}" y="{m_top + 14 + 14 * i}" '
                     f'font-size="11" text-anchor="end" fill="{color}">{name}</text>')

    if len(report.split_curves) > 1:
        parts.append(f'<polyline points="{pts(report.mean_curve)}" fill="none" '
                     f'stroke="#111111" stroke-width="2.5" stroke-dasharray="6,3"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
