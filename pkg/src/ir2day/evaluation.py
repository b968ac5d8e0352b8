"""Vehicle-detection evaluation: greedy IoU matching, PR curves, AP, mAP@0.5.

Inputs are JSON-lines files: annotations {"image_id", "category", "bbox":
[x, y, w, h]} and detections with an extra "score" in [0, 1]. Matching is
Pascal-VOC-style greedy per image and class (descending score, each ground
truth used at most once). AP uses all-points interpolation by default; 11- and
101-point variants are selectable. Scalar precision/recall need a score
threshold (default 0.25, always echoed in the report) because they are
undefined without one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

VEHICLE_CATEGORIES = ("car", "bus", "truck", "motorcycle", "bicycle")

# COCO class indices of the vehicle categories, for the detector text-format shim
COCO_VEHICLE_CLASS_IDS = {1: "bicycle", 2: "car", 3: "motorcycle", 5: "bus", 7: "truck"}

# Published full-scale KAIST benchmark rows (200 night test images, 987
# annotated vehicles; the day-RGB row uses its own 200-image/1247-vehicle
# set). Reference constants only: desk-scale runs do not reproduce them.
FULL_SCALE_REFERENCE = {
    "baseline": {"images": 200, "vehicles": 987, "precision": 0.563, "recall": 0.342, "map50": 0.347},
    "approach1": {"images": 200, "vehicles": 987, "precision": 0.658, "recall": 0.348, "map50": 0.441},
    "approach2": {"images": 200, "vehicles": 987, "precision": 0.734, "recall": 0.480, "map50": 0.571},
    "approach3": {"images": 200, "vehicles": 987, "precision": 0.681, "recall": 0.614, "map50": 0.667},
    "night_rgb": {"images": 200, "vehicles": 987, "precision": 0.861, "recall": 0.653, "map50": 0.797},
    "day_rgb": {"images": 200, "vehicles": 1247, "precision": 0.877, "recall": 0.881, "map50": 0.907},
}


class EvalInputError(ValueError):
    """A detection or annotation file is malformed."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned box, top-left corner + size, real-valued pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box needs w > 0 and h > 0, got w={self.w}, h={self.h}")


@dataclass(frozen=True)
class Annotation:
    image_id: str
    category: str
    box: Box

    def __post_init__(self):
        if self.category not in VEHICLE_CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")


@dataclass(frozen=True)
class Detection:
    image_id: str
    category: str
    box: Box
    score: float

    def __post_init__(self):
        if self.category not in VEHICLE_CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")


@dataclass
class EvalReport:
    iou_threshold: float
    score_threshold: float
    n_images: int
    n_annotations: int
    n_detections: int
    precision: float
    recall: float
    mean_ap: float
    per_class_ap: dict[str, float]
    per_class_n_gt: dict[str, int]
    pr_curves: dict[str, list[tuple[float, float]]] = field(default_factory=dict)


def iou(a: Box, b: Box) -> float:
    """Intersection over union; symmetric, 0 when disjoint, no pixel rounding."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a.w * a.h + b.w * b.h - inter
    return inter / union


@dataclass
class MatchResult:
    """tp[i] says whether dets[i] matched a ground truth; n_gt counts GTs per class."""

    tp: list[bool]
    n_gt: dict[str, int]


def match_detections(
    dets: list[Detection], anns: list[Annotation], iou_threshold: float
) -> MatchResult:
    """Greedy per-(image, class) matching: descending score, highest-IoU free GT,
    each annotation used at most once. Score ties break by input order."""
    if not 0 < iou_threshold <= 1:
        raise ValueError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    gt_by_key: dict[tuple[str, str], list[Annotation]] = {}
    for ann in anns:
        gt_by_key.setdefault((ann.image_id, ann.category), []).append(ann)
    det_by_key: dict[tuple[str, str], list[int]] = {}
    for i, det in enumerate(dets):
        det_by_key.setdefault((det.image_id, det.category), []).append(i)

    tp = [False] * len(dets)
    for key, indices in det_by_key.items():
        gts = gt_by_key.get(key, [])
        used = [False] * len(gts)
        for i in sorted(indices, key=lambda i: (-dets[i].score, i)):
            best_iou, best_j = 0.0, -1
            for j, gt in enumerate(gts):
                if used[j]:
                    continue
                v = iou(dets[i].box, gt.box)
                if v > best_iou:
                    best_iou, best_j = v, j
            if best_j >= 0 and best_iou >= iou_threshold:
                tp[i] = True
                used[best_j] = True
    n_gt: dict[str, int] = {}
    for ann in anns:
        n_gt[ann.category] = n_gt.get(ann.category, 0) + 1
    return MatchResult(tp=tp, n_gt=n_gt)


def pr_points(labels: list[bool], n_gt: int) -> list[tuple[float, float]]:
    """Cumulative (recall, precision) after each ranked detection.

    labels must already be sorted by descending score; recall is 0 when
    n_gt == 0.

    """
    if n_gt < 0:
        raise ValueError("n_gt must be >= 0")
    points = []
    tp_cum = 0
    for k, is_tp in enumerate(labels, start=1):
        if is_tp:
            tp_cum += 1
        recall = tp_cum / n_gt if n_gt > 0 else 0.0
        points.append((recall, tp_cum / k))
    return points


def average_precision(points: list[tuple[float, float]], method: str = "all_points") -> float:
    """Area under the precision envelope of a PR curve.

    all_points: exact integral of the step envelope (recall steps x max
    precision at any recall >= that level). 11point / 101point: means of the
    envelope sampled on evenly spaced recall grids.
    """
    if not points:
        return 0.0
    recalls = [r for r, _ in points]
    precisions = [p for _, p in points]
    if method == "all_points":
        mrec = [0.0] + recalls
        mpre = [0.0] + precisions
        for i in range(len(mpre) - 2, -1, -1):
            mpre[i] = max(mpre[i], mpre[i + 1])
        ap = 0.0
        for i in range(1, len(mrec)):
            if mrec[i] != mrec[i - 1]:
                ap += (mrec[i] - mrec[i - 1]) * mpre[i]
        return ap
    if method in ("11point", "101point"):
        n = 11 if method == "11point" else 101
        total = 0.0
        for k in range(n):
            level = k / (n - 1)
            best = max((p for r, p in points if r >= level), default=0.0)
            total += best
        return total / n
    raise ValueError(f"unknown AP method {method!r}")


def _parse_box(bbox, where: str) -> Box:
    if not isinstance(bbox, (list, tuple)) or len(bbox) != 4:
        raise EvalInputError(f"{where}: bbox must be [x, y, w, h]")
    try:
        return Box(*(float(v) for v in bbox))
    except ValueError as exc:
        raise EvalInputError(f"{where}: {exc}") from exc


def load_annotations(path: str | Path) -> list[Annotation]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise EvalInputError(f"{where}: malformed JSON: {exc}") from exc
            try:
                out.append(
                    Annotation(
                        image_id=str(rec["image_id"]),
                        category=rec["category"],
                        box=_parse_box(rec["bbox"], where),
                    )
                )
            except KeyError as exc:
                raise EvalInputError(f"{where}: missing field {exc}") from exc
            except ValueError as exc:
                raise EvalInputError(f"{where}: {exc}") from exc
    return out


def load_detections(path: str | Path) -> list[Detection]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise EvalInputError(f"{where}: malformed JSON: {exc}") from exc
            try:
                out.append(
                    Detection(
                        image_id=str(rec["image_id"]),
                        category=rec["category"],
                        box=_parse_box(rec["bbox"], where),
                        score=float(rec["score"]),
                    )
                )
            except KeyError as exc:
                raise EvalInputError(f"{where}: missing field {exc}") from exc
            except ValueError as exc:
                raise EvalInputError(f"{where}: {exc}") from exc
    return out


def load_detections_from_text(
    txt_dir: str | Path,
    image_sizes: str | Path | dict,
    class_map: dict[int, str] | None = None,
) -> list[Detection]:
    """Import shim for the common detector text format.

    One <image_id>.txt per image, one line per box: "class_index cx cy w h
    score" with normalized center coordinates. image_sizes is a JSON sidecar
    (or dict) mapping image_id -> [width, height] for denormalization.
    class_map defaults to the COCO vehicle indices; other indices are skipped.
    """
    if class_map is None:
        class_map = COCO_VEHICLE_CLASS_IDS
    if not isinstance(image_sizes, dict):
        with open(image_sizes, encoding="utf-8") as fh:
            image_sizes = json.load(fh)
    out = []
    for txt in sorted(Path(txt_dir).glob("*.txt")):
        image_id = txt.stem
        if image_id not in image_sizes:
            raise EvalInputError(f"{txt}: no image size for {image_id!r} in sidecar")
        width, height = image_sizes[image_id]
        with open(txt, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) != 6:
                    raise EvalInputError(f"{txt}:{lineno}: expected 6 fields, got {len(parts)}")
                cls = int(parts[0])
                if cls not in class_map:
                    continue
                cx, cy, w, h, score = (float(v) for v in parts[1:])
                out.append(
                    Detection(
                        image_id=image_id,
                        category=class_map[cls],
                        box=Box((cx - w / 2) * width, (cy - h / 2) * height, w * width, h * height),
                        score=score,
                    )
                )
    return out


def evaluate_sets(
    dets: list[Detection],
    anns: list[Annotation],
    iou_threshold: float = 0.5,
    score_threshold: float = 0.25,
    ap_method: str = "all_points",
) -> EvalReport:
    """Full protocol on in-memory sets; see evaluate() for the file-based entry."""
    match = match_detections(dets, anns, iou_threshold)
    classes = sorted({a.category for a in anns} | {d.category for d in dets})
    per_class_ap: dict[str, float] = {}
    pr_curves: dict[str, list[tuple[float, float]]] = {}
    for cat in classes:
        ranked = sorted(
            (i for i, d in enumerate(dets) if d.category == cat),
            key=lambda i: (-dets[i].score, i),
        )
        labels = [match.tp[i] for i in ranked]
        points = pr_points(labels, match.n_gt.get(cat, 0))
        pr_curves[cat] = points
        per_class_ap[cat] = average_precision(points, ap_method)
    evaluated = [c for c in classes if match.n_gt.get(c, 0) > 0]
    mean_ap = sum(per_class_ap[c] for c in evaluated) / len(evaluated) if evaluated else 0.0

    kept = [i for i, d in enumerate(dets) if d.score >= score_threshold]
    tp_kept = sum(1 for i in kept if match.tp[i])
    precision = tp_kept / len(kept) if kept else 0.0
    total_gt = len(anns)
    recall = tp_kept / total_gt if total_gt else 0.0

    images = {a.image_id for a in anns} | {d.image_id for d in dets}
    return EvalReport(
        iou_threshold=iou_threshold,
        score_threshold=score_threshold,
        n_images=len(images),
        n_annotations=len(anns),
        n_detections=len(dets),
        precision=precision,
        recall=recall,
        mean_ap=mean_ap,
        per_class_ap=per_class_ap,
        per_class_n_gt={c: match.n_gt.get(c, 0) for c in classes},
        pr_curves=pr_curves,
    )


def evaluate(
    det_file: str | Path,
    ann_file: str | Path,
    iou_threshold: float = 0.5,
    score_threshold: float = 0.25,
    ap_method: str = "all_points",
) -> EvalReport:
    """Load detection/annotation files and run the full protocol.

    Per-class AP uses all detections (no score cut); the scalar
    precision/recall pool all classes at score_threshold; mAP averages AP over
    classes with at least one annotation.
    """
    return evaluate_sets(
        load_detections(det_file), load_annotations(ann_file), iou_threshold, score_threshold, ap_method
    )


def report_to_dict(report: EvalReport) -> dict:
    return {
        "iou_threshold": report.iou_threshold,
        "score_threshold": report.score_threshold,
        "counts": {
            "images": report.n_images,
            "annotated_vehicles": report.n_annotations,
            "detections": report.n_detections,
        },
        "precision": report.precision,
        "recall": report.recall,
        "map": report.mean_ap,
        "per_class": {
            c: {"ap": report.per_class_ap[c], "n_gt": report.per_class_n_gt[c]}
            for c in sorted(report.per_class_ap)
        },
    }


def write_report_json(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_pr_csv(report: EvalReport, path: str | Path) -> None:
    """PR curve as CSV rows (class, recall, precision); the bit-exact contract."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("class,recall,precision\n")
        for cat in sorted(report.pr_curves):
            for recall, precision in report.pr_curves[cat]:
                fh.write(f"{cat},{recall!r},{precision!r}\n")


def summary_row(report: EvalReport) -> str:
    """Benchmark-table-style row: images, vehicles, precision, recall, mAP@0.5."""
    return (
        f"{report.n_images} {report.n_annotations} "
        f"{report.precision:.3f} {report.recall:.3f} {report.mean_ap:.3f}"
    )
