"""Location-grid conversion and layout detection metrics."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Any, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .diagnostics import Diagnostic, Severity
from .model import LOC_MAX, Block, Document, LocBox

IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
RECALL_POINTS = np.linspace(0.0, 1.0, 101)


@dataclass(frozen=True)
class PixelBox:
    x1: float
    y1: float
    x2: float
    y2: float
    page_width: float
    page_height: float

    def __post_init__(self):
        if not (self.page_width > 0 and self.page_height > 0):
            raise ValueError("page dimensions must be positive")
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise ValueError(f"inverted box {(self.x1, self.y1, self.x2, self.y2)}")
        clamp_x = lambda v: min(max(float(v), 0.0), float(self.page_width))  # noqa: E731
        clamp_y = lambda v: min(max(float(v), 0.0), float(self.page_height))  # noqa: E731
        object.__setattr__(self, "x1", clamp_x(self.x1))
        object.__setattr__(self, "x2", clamp_x(self.x2))
        object.__setattr__(self, "y1", clamp_y(self.y1))
        object.__setattr__(self, "y2", clamp_y(self.y2))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)


Box = Union[LocBox, PixelBox, Sequence[float]]


@dataclass(frozen=True)
class Detection:
    """A layout box; predictions carry a score, ground truth does not."""

    label: str
    box: Box
    score: Optional[float] = None
    page: Any = 0

    @property
    def is_prediction(self) -> bool:
        return self.score is not None


def _round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def encode_loc(box: PixelBox) -> LocBox:
    """Quantize a pixel box onto the 0..500 grid."""
    def q(v, dim):
        return min(max(_round_half_away(v / dim * LOC_MAX), 0), LOC_MAX)

    x1, x2 = q(box.x1, box.page_width), q(box.x2, box.page_width)
    y1, y2 = q(box.y1, box.page_height), q(box.y2, box.page_height)
    return LocBox(min(x1, x2), min(y1, y2), max(x1, x2), max(y1, y2))


def decode_loc(loc: LocBox, page_width: float, page_height: float) -> PixelBox:
    if not (page_width > 0 and page_height > 0):
        raise ValueError("page dimensions must be positive")
    sx, sy = page_width / LOC_MAX, page_height / LOC_MAX
    return PixelBox(loc.x1 * sx, loc.y1 * sy, loc.x2 * sx, loc.y2 * sy, page_width, page_height)


def xyxy(box: Box) -> tuple[float, float, float, float]:
    if isinstance(box, (LocBox, PixelBox)):
        return box.as_tuple()
    x1, y1, x2, y2 = box
    return (float(x1), float(y1), float(x2), float(y2))


def iou(a: Box, b: Box) -> float:
    """Intersection over union; 0 whenever the union has no area."""
    ax1, ay1, ax2, ay2 = xyxy(a)
    bx1, by1, bx2, by2 = xyxy(b)
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    inter = iw * ih if iw > 0 and ih > 0 else 0.0
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    if union <= 0:
        return 0.0
    return inter / union


@dataclass
class MapResult:
    per_class: dict  # label -> AP averaged over thresholds, None when no ground truth
    per_threshold: dict  # label -> list of AP per IoU threshold
    mean_ap: float
    diagnostics: list


def _sort_key(indexed):
    i, det = indexed
    return (-det.score, xyxy(det.box), i)


def _average_precision(scores: list, hits: list, n_gt: int) -> float:
    """101-point interpolated AP from pooled detections (COCO convention)."""
    if not scores:
        return 0.0
    order = np.argsort(-np.asarray(scores, dtype=float), kind="mergesort")
    tp = np.asarray(hits, dtype=float)[order]
    tp_cum = np.cumsum(tp)
    fp_cum = np.cumsum(1.0 - tp)
    recall = tp_cum / n_gt
    # tp + fp >= 1 at every rank, so no epsilon is needed and a perfect run scores exactly 1
    precision = tp_cum / (tp_cum + fp_cum)
    precision = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_POINTS, side="left")
    q = np.where(idx < len(precision), precision[np.minimum(idx, len(precision) - 1)], 0.0)
    return float(q.mean())


def evaluate_map(
    preds: Iterable[Detection],
    gts: Iterable[Detection],
    classes: Sequence[str],
    iou_thresholds: Sequence[float] = IOU_THRESHOLDS,
    max_dets: int = 100,
) -> MapResult:
    """Per-class AP and mAP over IoU thresholds 0.50:0.05:0.95.

    Within each page and class, predictions are matched greedily in
    descending score order to the unmatched ground-truth box of highest IoU
    (at least the threshold).  Score ties are broken by box coordinates, so
    the result does not depend on input order.  Classes without ground truth
    are left out of the mean.
    """
    class_set = set(classes)
    diags: list[Diagnostic] = []
    by_class: dict[str, dict[str, dict]] = {c: {"p": {}, "g": {}} for c in classes}
    unknown: set[str] = set()
    for i, det in enumerate(preds):
        if det.label not in class_set:
            unknown.add(det.label)
            continue
        if det.score is None:
            raise ValueError("prediction without score")
        by_class[det.label]["p"].setdefault(det.page, []).append((i, det))
    for det in gts:
        if det.label not in class_set:
            unknown.add(det.label)
            continue
        by_class[det.label]["g"].setdefault(det.page, []).append(det)
    for label in sorted(unknown):
        diags.append(Diagnostic(Severity.WARNING, "unknown-label", f"detections labelled {label!r} ignored"))

    per_class: dict[str, Optional[float]] = {}
    per_threshold: dict[str, list] = {}
    for label in classes:
        pages_p, pages_g = by_class[label]["p"], by_class[label]["g"]
        n_gt = sum(len(v) for v in pages_g.values())
        if n_gt == 0:
            per_class[label] = None
            continue
        aps = []
        for thr in iou_thresholds:
            scores, hits = [], []
            for page in sorted(set(pages_p) | set(pages_g), key=lambda p: (type(p).__name__, str(p))):
                dets = [d for _, d in sorted(pages_p.get(page, []), key=_sort_key)][:max_dets]
                truth = pages_g.get(page, [])
                taken = [False] * len(truth)
                for det in dets:
                    best, match = min(thr, 1 - 1e-10), -1
                    for g, gt in enumerate(truth):
                        if taken[g]:
                            continue
                        v = iou(det.box, gt.box)
                        if v < best:
                            continue
                        best, match = v, g
                    if match >= 0:
                        taken[match] = True
                    scores.append(det.score)
                    hits.append(match >= 0)
            aps.append(_average_precision(scores, hits, n_gt))
        per_threshold[label] = aps
        per_class[label] = float(np.mean(aps))
    present = [v for v in per_class.values() if v is not None]
    mean_ap = float(np.mean(present)) if present else float("nan")
    return MapResult(per_class, per_threshold, mean_ap, diags)


# --------------------------------------------------------------------------
# label mapping


def load_label_map(path: Optional[str] = None) -> dict:
    """Load the cross-model label mapping (``classes`` + ``mapping``)."""
    if path is None:
        text = resources.files("doctags").joinpath("data/layout_label_map.json").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    data = json.loads(text)
    return {"classes": list(data["classes"]), "mapping": dict(data["mapping"])}


def map_labels(detections: Iterable[Detection], mapping: Mapping[str, Optional[str]]) -> list[Detection]:
    """Rename labels through ``mapping``.

    Labels mapped to ``None`` are dropped; labels missing from the mapping pass
    through unchanged, so that ``evaluate_map`` can report them.
    """
    out = []
    for det in detections:
        target = mapping.get(det.label, det.label)
        if target:
            out.append(Detection(target, det.box, det.score, det.page))
    return out


def detections_from_document(
    doc: Document,
    page_sizes: Optional[Sequence[tuple[float, float]]] = None,
    score: Optional[float] = None,
) -> list[Detection]:
    """Boxes of all located top-level blocks (and nested captions/tables).

    Labels are block kind names; with ``page_sizes`` the boxes are decoded to
    pixels, otherwise they stay on the loc grid.
    """
    out = []

    def visit(block: Block, page: int):
        if block.loc is not None:
            box: Box = block.loc
            if page_sizes is not None:
                w, h = page_sizes[page]
                box = decode_loc(block.loc, w, h)
            out.append(Detection(block.kind.value, box, score, page))
        for child in block.children:
            if child.kind.value in ("caption", "otsl"):
                visit(child, page)

    for p, pg in enumerate(doc.pages):
        for block in pg.blocks:
            visit(block, p)
    return out
