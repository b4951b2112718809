"""Greedy detection matching, all-point average precision, and run reports."""

from __future__ import annotations

import csv
import io
import json
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .geometry import OrientedBox3D

REPORT_SCHEMA = "infracp.report"
REPORT_SCHEMA_VERSION = 1
IOU_THRESHOLDS = (0.5, 0.7)


@dataclass(frozen=True)
class MatchResult:
    """Outcome of matching one frame's predictions against its ground truth.

    Attributes
    ----------
    scores : tuple of float
        Prediction confidences in the order they were matched (descending).
    is_tp : tuple of bool
        Whether each prediction in ``scores`` order claimed a ground truth.
    pairs : tuple of (int, int, float)
        ``(prediction index, gt index, iou)`` into the caller's lists.
    n_gt : int
    """

    scores: tuple[float, ...]
    is_tp: tuple[bool, ...]
    pairs: tuple[tuple[int, int, float], ...]
    n_gt: int

    @property
    def true_positives(self) -> int:
        return sum(self.is_tp)

    @property
    def false_positives(self) -> int:
        return len(self.is_tp) - self.true_positives

    @property
    def false_negatives(self) -> int:
        return self.n_gt - self.true_positives


def _bev_rows(boxes: Sequence[OrientedBox3D]) -> np.ndarray:
    return np.array([b.bev() for b in boxes], dtype=np.float64).reshape(-1, 5)


def match(preds: Sequence[OrientedBox3D], gts: Sequence[OrientedBox3D], iou_threshold: float) -> MatchResult:
    """Greedy matching by descending confidence.

    Each prediction in turn claims the still-unmatched ground truth with the
    highest BEV IoU at or above ``iou_threshold``. Equal confidences keep
    input order, and equal IoUs go to the lower ground-truth index.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError("iou_threshold must lie in (0, 1)")
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].confidence, i))
    iou = kernels.iou_matrix(_bev_rows(preds), _bev_rows(gts)) if preds and gts else None
    taken = np.zeros(len(gts), dtype=bool)
    is_tp, pairs = [], []
    for i in order:
        hit = False
        if iou is not None:
            row = np.where(taken, -1.0, iou[i])
            j = int(np.argmax(row))
            if row[j] >= iou_threshold:
                taken[j] = True
                pairs.append((i, j, float(row[j])))
                hit = True
        is_tp.append(hit)
    return MatchResult(tuple(preds[i].confidence for i in order), tuple(is_tp), tuple(pairs), len(gts))


def average_precision(frames: Iterable[MatchResult]) -> float | None:
    """All-point interpolated AP over predictions pooled across frames.

    The precision-recall curve has one point per distinct confidence value
    (tied predictions enter together), and precision is made monotone from
    the right before integrating over recall. Returns None when there is no
    ground truth at all.
    """
    frames = list(frames)
    if not frames:
        raise ValueError("need at least one frame")
    n_gt = sum(f.n_gt for f in frames)
    if n_gt == 0:
        return None
    scores = np.array([s for f in frames for s in f.scores], dtype=np.float64)
    tp = np.array([t for f in frames for t in f.is_tp], dtype=np.int64)
    if scores.size == 0:
        return 0.0
    order = np.argsort(-scores, kind="stable")
    scores, tp = scores[order], tp[order]
    ctp = np.cumsum(tp)
    cfp = np.cumsum(1 - tp)
    # last index of each run of equal confidence
    last = np.flatnonzero(np.append(scores[1:] != scores[:-1], True))
    ctp, cfp = ctp[last].tolist(), cfp[last].tolist()
    # exact rationals, rounded once at the end
    total, best = Fraction(0), Fraction(0)
    for k in range(len(ctp) - 1, -1, -1):
        best = max(best, Fraction(ctp[k], ctp[k] + cfp[k]))
        gain = ctp[k] - (ctp[k - 1] if k else 0)
        if gain:
            total += gain * best
    return float(total / n_gt)


@dataclass(frozen=True)
class SceneResult:
    """Per-frame match results of one scene at both IoU thresholds."""

    scene_id: str
    seed: int
    frames50: tuple[MatchResult, ...]
    frames70: tuple[MatchResult, ...]

    @property
    def n_gt(self) -> int:
        return sum(f.n_gt for f in self.frames50)

    @property
    def n_pred(self) -> int:
        return sum(len(f.scores) for f in self.frames50)


def evaluate_scene(scene_id: str, seed: int, preds: Sequence[Sequence[OrientedBox3D]],
                   gts: Sequence[Sequence[OrientedBox3D]]) -> SceneResult:
    if len(preds) != len(gts):
        raise ValueError("need predictions and ground truth for the same frames")
    m50 = tuple(match(p, g, 0.5) for p, g in zip(preds, gts))
    m70 = tuple(match(p, g, 0.7) for p, g in zip(preds, gts))
    return SceneResult(scene_id, seed, m50, m70)


def _round(v: float | None) -> float | None:
    return None if v is None else round(v, 12)


@dataclass(frozen=True)
class SceneAP:
    scene_id: str
    seed: int
    ap50: float | None
    ap70: float | None
    n_gt: int
    n_pred: int

    def to_dict(self) -> dict:
        return {"scene_id": self.scene_id, "seed": self.seed, "ap50": self.ap50, "ap70": self.ap70,
                "n_gt": self.n_gt, "n_pred": self.n_pred}


@dataclass(frozen=True)
class EvalReport:
    """AP summary for one configuration.

    ``ap50``/``ap70`` pool predictions over every frame of every scene;
    ``mean_ap50``/``mean_ap70`` average the per-scene values that exist.
    """

    ap50: float | None
    ap70: float | None
    per_scene: tuple[SceneAP, ...]
    config: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        for v in (self.ap50, self.ap70, *(s.ap50 for s in self.per_scene), *(s.ap70 for s in self.per_scene)):
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"AP {v} outside [0, 1]")

    @staticmethod
    def _mean(vals) -> float | None:
        vals = [v for v in vals if v is not None]
        return round(sum(vals) / len(vals), 12) if vals else None

    @property
    def mean_ap50(self) -> float | None:
        return self._mean(s.ap50 for s in self.per_scene)

    @property
    def mean_ap70(self) -> float | None:
        return self._mean(s.ap70 for s in self.per_scene)

    def to_dict(self) -> dict:
        return {
            "ap50": self.ap50, "ap70": self.ap70,
            "mean_ap50": self.mean_ap50, "mean_ap70": self.mean_ap70,
            "per_scene": [s.to_dict() for s in self.per_scene],
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(d["ap50"], d["ap70"], tuple(SceneAP(**s) for s in d["per_scene"]), d["config"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls.from_dict(json.loads(text))

    def csv_rows(self) -> list[dict]:
        """One flat row per scene, with the configuration columns repeated."""
        flat = {k: v for k, v in sorted(self.config.items()) if not isinstance(v, (dict, list))}
        return [{**flat, **s.to_dict()} for s in self.per_scene]


def report(results: Sequence[SceneResult], config: dict | None = None) -> EvalReport:
    """Aggregate scene results into pooled and per-scene AP."""
    per_scene = tuple(
        SceneAP(r.scene_id, r.seed, _round(average_precision(r.frames50)),
                _round(average_precision(r.frames70)), r.n_gt, r.n_pred)
        for r in results)
    all50 = [f for r in results for f in r.frames50]
    all70 = [f for r in results for f in r.frames70]
    ap50 = _round(average_precision(all50)) if all50 else None
    ap70 = _round(average_precision(all70)) if all70 else None
    return EvalReport(ap50, ap70, per_scene, dict(config or {}))


def reports_to_json(reports: Sequence[EvalReport], meta: dict | None = None) -> str:
    doc = {"schema": REPORT_SCHEMA, "version": REPORT_SCHEMA_VERSION,
           "meta": dict(meta or {}), "reports": [r.to_dict() for r in reports]}
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def reports_to_csv(reports: Sequence[EvalReport]) -> str:
    rows = [row for r in reports for row in r.csv_rows()]
    if not rows:
        return ""
    cols: list[str] = []
    for row in rows:
        cols += [k for k in row if k not in cols]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in cols})
    return buf.getvalue()
