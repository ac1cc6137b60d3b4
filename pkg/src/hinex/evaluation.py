"""Detection mAP50, zero-shot top-1 accuracy, and vocabulary bookkeeping.

Matching and the precision-recall integral run on exact rationals and are
converted to float only for reporting, so results are reproducible across
platforms and directly comparable against reference re-derivations.
"""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .classify import predict
from .hierarchy import SemanticHierarchy, Vocabulary, normalize_name
from .nexus import NexusClassifier

Box = tuple[float, float, float, float]

IOU_THRESHOLD = Fraction(1, 2)


class EvaluationError(ValueError):
    pass


def _check_box(box: Box) -> None:
    x1, y1, x2, y2 = box
    if not (x1 < x2 and y1 < y2):
        raise ValueError(f"box must have positive area: {box}")


@dataclass(frozen=True)
class GroundTruthBox:
    image_id: str
    box: Box
    leaf_label: str

    def __post_init__(self) -> None:
        _check_box(self.box)


@dataclass(frozen=True)
class DetectionRecord:
    image_id: str
    box: Box
    label: str
    confidence: float

    def __post_init__(self) -> None:
        _check_box(self.box)


@dataclass(frozen=True)
class EvalReport:
    level: int | str | None
    per_class_ap: dict[str, float]
    map50: float
    counts: dict[str, int]
    summary_stats: dict[str, float] | None = None


def _iou_fraction(a: Box, b: Box) -> Fraction:
    ax1, ay1, ax2, ay2 = (Fraction(v) for v in a)
    bx1, by1, bx2, by2 = (Fraction(v) for v in b)
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return Fraction(0)
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two positive-area boxes, in [0, 1]."""
    _check_box(a)
    _check_box(b)
    return float(_iou_fraction(a, b))


def _average_precision(tp_flags: Sequence[bool], n_positive: int) -> Fraction:
    """All-point interpolated AP from confidence-ordered hit flags."""
    if n_positive <= 0:
        raise ValueError("AP needs at least one ground-truth box")
    if not tp_flags:
        return Fraction(0)
    recalls: list[Fraction] = []
    precisions: list[Fraction] = []
    tp = 0
    for rank, flag in enumerate(tp_flags, start=1):
        if flag:
            tp += 1
        recalls.append(Fraction(tp, n_positive))
        precisions.append(Fraction(tp, rank))

    envelope = [Fraction(0)] * len(precisions)
    running = Fraction(0)
    for i in range(len(precisions) - 1, -1, -1):
        running = max(running, precisions[i])
        envelope[i] = running

    ap = Fraction(0)
    prev_recall = Fraction(0)
    for i, recall in enumerate(recalls):
        if recall > prev_recall:
            ap += (recall - prev_recall) * envelope[i]
            prev_recall = recall
    return ap


def _match_class(
    dets: list[tuple[float, int, str, Box]],
    gts_by_image: dict[str, list[Box]],
) -> list[bool]:
    """Greedy matching for one class: confidence order, best unmatched IoU >= 0.5.

    Confidence ties keep input order; IoU ties go to the earliest ground
    truth. Each ground-truth box absorbs at most one detection.
    """
    taken: dict[str, set[int]] = {img: set() for img in gts_by_image}
    flags: list[bool] = []
    for _, _, image_id, box in sorted(dets, key=lambda d: (-d[0], d[1])):
        best_iou = Fraction(-1)
        best_idx = -1
        for gt_idx, gt_box in enumerate(gts_by_image.get(image_id, [])):
            if gt_idx in taken.get(image_id, set()):
                continue
            candidate = _iou_fraction(box, gt_box)
            if candidate > best_iou:
                best_iou = candidate
                best_idx = gt_idx
        if best_idx >= 0 and best_iou >= IOU_THRESHOLD:
            taken[image_id].add(best_idx)
            flags.append(True)
        else:
            flags.append(False)
    return flags


def evaluate_map50(
    gts: Sequence[GroundTruthBox],
    dets: Sequence[DetectionRecord],
    hierarchy: SemanticHierarchy | None = None,
    level: int | None = None,
) -> EvalReport:
    """mAP at IoU 0.5, optionally after remapping ground truth to a hierarchy level.

    With a hierarchy, ground-truth leaf labels are remapped to the requested
    level and detection labels must belong to that level's vocabulary.
    Classes without any ground truth are excluded from the mean and only
    counted. Raises EvaluationError on unmappable or out-of-vocabulary labels.
    """
    if not gts:
        raise EvaluationError("evaluation needs at least one ground-truth box")

    canonical: dict[str, str] = {}

    def canon(label: str) -> str:
        key = normalize_name(label)
        return canonical.setdefault(key, label)

    if hierarchy is not None:
        if level is None:
            raise EvaluationError("a hierarchy was given without a target level")
        vocab_names = {}
        for node in hierarchy.nodes.values():
            if node.level == level:
                vocab_names[normalize_name(node.name)] = node.name
        if not vocab_names:
            raise EvaluationError(f"hierarchy has no level-{level} vocabulary")
        canonical.update(vocab_names)

        gt_labels = [canon(hierarchy.map_to_level(g.leaf_label, level)) for g in gts]
        det_labels = []
        for d in dets:
            key = normalize_name(d.label)
            if key not in vocab_names:
                raise EvaluationError(
                    f"detection label {d.label!r} is outside the level-{level} vocabulary"
                )
            det_labels.append(canonical[key])
    else:
        gt_labels = [canon(g.leaf_label) for g in gts]
        det_labels = [canon(d.label) for d in dets]

    gt_boxes: dict[str, dict[str, list[Box]]] = {}
    for g, label in zip(gts, gt_labels):
        gt_boxes.setdefault(label, {}).setdefault(g.image_id, []).append(g.box)

    det_by_class: dict[str, list[tuple[float, int, str, Box]]] = {}
    for order, (d, label) in enumerate(zip(dets, det_labels)):
        det_by_class.setdefault(label, []).append((d.confidence, order, d.image_id, d.box))

    per_class_ap: dict[str, float] = {}
    ap_values: list[Fraction] = []
    for label, images in gt_boxes.items():
        n_positive = sum(len(v) for v in images.values())
        flags = _match_class(det_by_class.get(label, []), images)
        ap = _average_precision(flags, n_positive)
        per_class_ap[label] = float(ap)
        ap_values.append(ap)

    map50 = sum(ap_values, Fraction(0)) / len(ap_values)
    image_ids = {g.image_id for g in gts} | {d.image_id for d in dets}
    counts = {
        "images": len(image_ids),
        "gt_boxes": len(gts),
        "detections": len(dets),
        "classes_evaluated": len(ap_values),
        "detection_classes_without_gt": len(set(det_by_class) - set(gt_boxes)),
    }
    return EvalReport(level=level, per_class_ap=per_class_ap, map50=float(map50), counts=counts)


def evaluate_top1(
    clf: NexusClassifier,
    samples: Sequence[tuple[np.ndarray, str]],
    hierarchy: SemanticHierarchy | None = None,
    level: int | None = None,
) -> float:
    """Fraction of samples whose argmax class matches the (remapped) label."""
    if not samples:
        raise EvaluationError("evaluation needs at least one sample")
    if hierarchy is not None:
        if level is None:
            raise EvaluationError("a hierarchy was given without a target level")
        clf_names = {normalize_name(n) for n in clf.class_names}
        level_names = {
            normalize_name(n.name) for n in hierarchy.nodes.values() if n.level == level
        }
        if clf_names != level_names:
            raise EvaluationError(
                f"classifier vocabulary does not match the level-{level} vocabulary"
            )

    correct = 0
    for embedding, leaf_label in samples:
        target = (
            hierarchy.map_to_level(leaf_label, level) if hierarchy is not None else leaf_label
        )
        guess = predict(clf, embedding).class_name
        if normalize_name(guess) == normalize_name(target):
            correct += 1
    return correct / len(samples)


def expand_vocabulary(vocab: Vocabulary, noise_names: Sequence[str]) -> Vocabulary:
    """Append noise classes, deduplicated case-insensitively; originals keep their indices."""
    seen = {normalize_name(n) for n in vocab.class_names}
    appended: list[str] = []
    for name in noise_names:
        key = normalize_name(name)
        if key not in seen:
            seen.add(key)
            appended.append(name)
    if not appended:
        return vocab
    # mixed bound/unbound classes are not representable, so bindings are dropped
    return Vocabulary(tuple(vocab.class_names) + tuple(appended), level=vocab.level)


def summary_stats(values: Sequence[float]) -> dict[str, float]:
    """AM/HM/GM/Min/Med/Max of per-level scores; HM and GM reject zeros."""
    if not values:
        raise EvaluationError("summary needs at least one value")
    if any(v < 0 for v in values):
        raise EvaluationError("summary values must be non-negative")
    if any(v == 0 for v in values):
        raise EvaluationError("harmonic and geometric means are undefined for zero values")
    return {
        "AM": statistics.fmean(values),
        "HM": statistics.harmonic_mean(values),
        "GM": statistics.geometric_mean(values),
        "Min": min(values),
        "Med": statistics.median(values),
        "Max": max(values),
    }


def summarize_levels(reports: Sequence[EvalReport]) -> dict[str, float]:
    return summary_stats([r.map50 for r in reports])


def load_ground_truth(path: str | Path) -> list[GroundTruthBox]:
    out: list[GroundTruthBox] = []
    for lineno, record in enumerate(read_jsonl(path), start=1):
        try:
            out.append(
                GroundTruthBox(
                    image_id=record["image_id"],
                    box=tuple(record["box"]),
                    leaf_label=record["label"],
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise EvaluationError(f"{path}: bad ground-truth record {lineno}: {exc}") from exc
    return out


def load_detections(path: str | Path) -> list[DetectionRecord]:
    out: list[DetectionRecord] = []
    for lineno, record in enumerate(read_jsonl(path), start=1):
        try:
            out.append(
                DetectionRecord(
                    image_id=record["image_id"],
                    box=tuple(record["box"]),
                    label=record["label"],
                    confidence=float(record["confidence"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise EvaluationError(f"{path}: bad detection record {lineno}: {exc}") from exc
    return out


def read_jsonl(path: str | Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def write_report_files(
    reports: Sequence[EvalReport],
    json_path: str | Path,
    csv_path: str | Path,
    per_class_path: str | Path,
    summary: dict[str, float] | None = None,
) -> None:
    """Emit the JSON report, the per-level CSV, and the per-class AP sidecar.

    The CSV carries one row per level plus, when a summary is supplied, a
    final row with the cross-level statistics. Nothing time-dependent is
    written, so identical inputs give identical files.
    """
    payload = {
        "levels": [
            {"level": r.level, "map50": r.map50, "counts": r.counts} for r in reports
        ],
        "summary": summary,
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")

    sidecar = {str(r.level): r.per_class_ap for r in reports}
    with open(per_class_path, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")

    stat_keys = ["AM", "HM", "GM", "Min", "Med", "Max"]
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "map50", *stat_keys])
        for r in reports:
            writer.writerow([r.level, f"{r.map50:.6f}", *[""] * len(stat_keys)])
        if summary is not None:
            writer.writerow(
                ["summary", "", *[f"{summary[k]:.6f}" if k in summary else "" for k in stat_keys]]
            )
