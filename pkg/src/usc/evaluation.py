"""Dataset-level evaluation protocol.

Pipeline: per frame and class, predictions are greedily matched to ground
truths on BEV center distance (score order, nearest available annotation).
Objects are grouped into range buckets by the ground-truth center distance;
matched detections inherit their annotation's bucket, unmatched detections
fall into the bucket of their own center distance. Per class and bucket the
report carries average precision (one value per distance threshold), mean
true-positive errors, and the average spatial-constraint score (AUSC);
per bucket these consolidate into mAP, NDS, mAUSC and USC-NDS.

Protocol defaults follow a near-field safety focus: objects within 20 m
split into [0, 10) and [10, 20) buckets, with the matching threshold
tightened to 1 m in the near bucket (2 m beyond), and classes absent from a
bucket skipped rather than scored as worst-case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .constraints import usc_score
from .errors import MissingAnnotationField, UscError, ZeroVariance
from .geometry import Box3D, wrap_angle

#: Recognized true-positive error measures, in canonical report order.
TP_MEASURES = ("ATE", "ASE", "AOE", "AVE", "AAE")

#: Number of interpolation points on the recall grid.
_AP_GRID = 101

#: Recall/precision floor below which the PR curve is clipped.
_AP_FLOOR = 0.1


@dataclass(frozen=True)
class Annotation:
    """Ground-truth object: class label plus box, with optional velocity
    (vx, vz in m/s) and attribute label."""

    class_name: str
    box: Box3D
    velocity: Optional[Tuple[float, float]] = None
    attribute: Optional[str] = None

    def __post_init__(self):
        if not self.class_name:
            raise ValueError("class_name must be non-empty")
        if self.velocity is not None:
            object.__setattr__(self, "velocity",
                               (float(self.velocity[0]), float(self.velocity[1])))


@dataclass(frozen=True)
class Detection:
    """Predicted object with a confidence score in [0, 1]."""

    class_name: str
    box: Box3D
    score: float
    velocity: Optional[Tuple[float, float]] = None
    attribute: Optional[str] = None

    def __post_init__(self):
        if not self.class_name:
            raise ValueError("class_name must be non-empty")
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be in [0, 1], got {self.score}")
        if self.velocity is not None:
            object.__setattr__(self, "velocity",
                               (float(self.velocity[0]), float(self.velocity[1])))


@dataclass(frozen=True)
class MatchedPair:
    detection: Detection
    annotation: Annotation
    center_distance: float


@dataclass
class MatchSet:
    """One-to-one assignment of detections to annotations plus the residue."""

    pairs: List[MatchedPair]
    false_positives: List[Detection]
    false_negatives: List[Annotation]


@dataclass(frozen=True)
class ProtocolConfig:
    """Evaluation protocol parameters; defaults implement the near-field
    safety adaptation (20 m cut-off, per-bucket thresholds, skip missing
    classes)."""

    range_buckets: Tuple[Tuple[float, float], ...] = ((0.0, 10.0), (10.0, 20.0))
    match_thresholds: Tuple[float, ...] = (1.0, 2.0)
    ap_distance_thresholds: Tuple[float, ...] = (1.0, 2.0)
    tp_measures: Tuple[str, ...] = ("ATE", "ASE", "AOE")
    skip_missing_classes: bool = True
    focal: float = 1.0

    def __post_init__(self):
        buckets = tuple((float(a), float(b)) for a, b in self.range_buckets)
        if not buckets:
            raise ValueError("at least one range bucket is required")
        for near, far in buckets:
            if not (0.0 <= near < far):
                raise ValueError(f"invalid bucket [{near}, {far})")
        for (_, far), (near, _) in zip(buckets, buckets[1:]):
            if near < far:
                raise ValueError("range buckets must be disjoint and ordered")
        thresholds = tuple(float(t) for t in self.match_thresholds)
        if len(thresholds) != len(buckets):
            raise ValueError("need one match threshold per bucket")
        if any(t <= 0 for t in thresholds):
            raise ValueError("match thresholds must be positive")
        ap_thresholds = tuple(float(t) for t in self.ap_distance_thresholds)
        if not ap_thresholds or any(t <= 0 for t in ap_thresholds):
            raise ValueError("AP distance thresholds must be positive")
        measures = tuple(str(m).upper() for m in self.tp_measures)
        unknown = set(measures) - set(TP_MEASURES)
        if unknown:
            raise ValueError(f"unknown TP measures: {sorted(unknown)}")
        if not measures:
            raise ValueError("at least one TP measure is required")
        if self.focal <= 0:
            raise ValueError(f"focal length must be positive, got {self.focal}")
        object.__setattr__(self, "range_buckets", buckets)
        object.__setattr__(self, "match_thresholds", thresholds)
        object.__setattr__(self, "ap_distance_thresholds", ap_thresholds)
        object.__setattr__(self, "tp_measures", measures)

    @property
    def max_range(self) -> float:
        return self.range_buckets[-1][1]

    def bucket_index(self, distance: float) -> Optional[int]:
        for i, (near, far) in enumerate(self.range_buckets):
            if near <= distance < far:
                return i
        return None

    def bucket_label(self, index: int) -> str:
        near, far = self.range_buckets[index]
        return f"[{near:g},{far:g})"


@dataclass
class ClassBucketMetrics:
    """Per-class, per-bucket slice of the report."""

    ap: Dict[float, Optional[float]]
    tp_errors: Dict[str, Optional[float]]
    ausc: Optional[float]
    tp: int
    fp: int
    fn: int
    usc_excluded: int


@dataclass
class BucketSummary:
    """Consolidated metrics for one range bucket (or the overall average)."""

    mean_ap: Optional[float]
    nds: Optional[float]
    mausc: Optional[float]
    usc_nds: Optional[float]
    tp_errors: Dict[str, Optional[float]]
    tp: int
    fp: int
    fn: int
    usc_excluded: int


@dataclass
class MetricsReport:
    range_buckets: List[Tuple[float, float]]
    classes: List[str]
    ap_distance_thresholds: List[float]
    tp_measures: List[str]
    frames: int
    per_class: Dict[str, Dict[str, ClassBucketMetrics]] = field(default_factory=dict)
    per_bucket: Dict[str, BucketSummary] = field(default_factory=dict)
    overall: Optional[BucketSummary] = None


def bev_center_distance(p: Box3D, g: Box3D) -> float:
    """Ground-plane distance between two box centers (height ignored)."""
    return math.hypot(p.center_x - g.center_x, p.center_z - g.center_z)


def _center_range(box: Box3D) -> float:
    return math.hypot(box.center_x, box.center_z)


def _greedy_match(dets: Sequence[Detection], anns: Sequence[Annotation],
                  threshold_of) -> MatchSet:
    """Greedy score-descending matching; threshold_of(ann) bounds each pair."""
    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
    taken = [False] * len(anns)
    pairs: List[MatchedPair] = []
    matched_det = [False] * len(dets)
    for i in order:
        best_j, best_d = -1, math.inf
        for j, ann in enumerate(anns):
            if taken[j]:
                continue
            d = bev_center_distance(dets[i].box, ann.box)
            if d <= threshold_of(ann) and d < best_d:
                best_j, best_d = j, d
        if best_j >= 0:
            taken[best_j] = True
            matched_det[i] = True
            pairs.append(MatchedPair(dets[i], anns[best_j], best_d))
    fps = [d for i, d in enumerate(dets) if not matched_det[i]]
    fns = [a for j, a in enumerate(anns) if not taken[j]]
    return MatchSet(pairs, fps, fns)


def match_frame(dets: Sequence[Detection], anns: Sequence[Annotation],
                class_name: str, threshold: float) -> MatchSet:
    """Match one frame's detections of a class to its annotations.

    Detections are taken in descending score order (input order on ties) and
    each grabs the closest unmatched annotation within the distance
    threshold; leftovers become false positives / negatives.
    """
    dets = [d for d in dets if d.class_name == class_name]
    anns = [a for a in anns if a.class_name == class_name]
    return _greedy_match(dets, anns, lambda _ann: threshold)


def average_precision(scored_matches: Sequence[Tuple[float, bool]],
                      num_ground_truths: int) -> Optional[float]:
    """Clipped-curve average precision.

    The exact formula: detections sort by descending score (stable under
    ties); cumulative counts give one (recall, precision) sample per
    detection, keeping only the last sample at any repeated recall value.
    Precision is linearly interpolated onto a 101-point recall grid
    (constant at the first sample below the smallest recall, zero above the
    largest), and AP is the mean of ``max(0, precision - 0.1)`` over the 90
    grid points with recall above 0.1, divided by 0.9.

    Returns None when there are no ground truths (undefined rather than
    zero) and 0.0 when there are ground truths but no detections.
    """
    if num_ground_truths == 0:
        return None
    if not scored_matches:
        return 0.0
    # score ties resolve pessimistically (false positives first) so the
    # result does not depend on dataset ordering
    ordered = sorted(scored_matches, key=lambda m: (-m[0], m[1]))
    recalls: List[float] = []
    precisions: List[float] = []
    tp = 0
    for rank, (_, is_tp) in enumerate(ordered, start=1):
        tp += 1 if is_tp else 0
        rec = tp / num_ground_truths
        prec = tp / rank
        if recalls and recalls[-1] == rec:
            precisions[-1] = prec  # keep the last sample at this recall
        else:
            recalls.append(rec)
            precisions.append(prec)
    grid = np.linspace(0.0, 1.0, _AP_GRID)
    interp = np.interp(grid, recalls, precisions,
                       left=precisions[0], right=0.0)
    clipped = np.maximum(0.0, interp[int(_AP_FLOOR * 100) + 1:] - _AP_FLOOR)
    return math.fsum(clipped) / len(clipped) / (1.0 - _AP_FLOOR)


def _scale_error(p: Box3D, g: Box3D) -> float:
    ratio = 1.0
    for pd, gd in ((p.length, g.length), (p.height, g.height), (p.width, g.width)):
        ratio *= min(pd, gd) / max(pd, gd)
    return 1.0 - ratio


def tp_error_means(pairs: Sequence[MatchedPair],
                   measures: Sequence[str] = ("ATE", "ASE", "AOE")) -> Dict[str, float]:
    """Mean true-positive errors over matched pairs.

    ATE: mean BEV center distance. ASE: one minus the product of
    per-dimension min/max ratios. AOE: mean absolute yaw difference wrapped
    to [0, pi]. AVE: mean velocity vector error; AAE: attribute mismatch
    rate; both require the optional fields on every pair.
    """
    if not pairs:
        raise ValueError("tp_error_means needs at least one matched pair")
    means: Dict[str, float] = {}
    for measure in measures:
        measure = measure.upper()
        if measure == "ATE":
            values = [pair.center_distance for pair in pairs]
        elif measure == "ASE":
            values = [_scale_error(pair.detection.box, pair.annotation.box)
                      for pair in pairs]
        elif measure == "AOE":
            values = [abs(wrap_angle(pair.detection.box.yaw - pair.annotation.box.yaw))
                      for pair in pairs]
        elif measure == "AVE":
            if any(pair.detection.velocity is None or pair.annotation.velocity is None
                   for pair in pairs):
                raise MissingAnnotationField("AVE requested but velocity missing")
            values = [math.hypot(pair.detection.velocity[0] - pair.annotation.velocity[0],
                                 pair.detection.velocity[1] - pair.annotation.velocity[1])
                      for pair in pairs]
        elif measure == "AAE":
            if any(pair.detection.attribute is None or pair.annotation.attribute is None
                   for pair in pairs):
                raise MissingAnnotationField("AAE requested but attribute missing")
            values = [0.0 if pair.detection.attribute == pair.annotation.attribute else 1.0
                      for pair in pairs]
        else:
            raise ValueError(f"unknown TP measure {measure!r}")
        means[measure] = math.fsum(values) / len(values)
    return means


def nds(mean_ap: float, tp_means: Mapping[str, float]) -> float:
    """Detection score blending mAP with the configured error measures.

    With k measures: ``(k * mAP + sum(1 - min(1, err))) / (2k)``; the
    five-measure case is the standard full formula.
    """
    k = len(tp_means)
    if not (1 <= k <= 5):
        raise ValueError(f"need between 1 and 5 TP measures, got {k}")
    penalty = sum(1.0 - min(1.0, err) for err in tp_means.values())
    return (k * mean_ap + penalty) / (2.0 * k)


def usc_nds(nds_value: float, mausc: float) -> float:
    """Arithmetic mean of the detection score and the mean average USC."""
    return (nds_value + mausc) / 2.0


@dataclass
class UscAggregate:
    """Per-class average USC plus the exclusion diagnostics."""

    ausc: Dict[str, Optional[float]]
    mausc: Optional[float]
    excluded: Dict[str, int]


def aggregate_usc(pairs_per_class: Mapping[str, Sequence[MatchedPair]],
                  focal: float = 1.0) -> UscAggregate:
    """Average the USC score over matched pairs, class by class.

    Pairs whose constraint evaluation is undefined (object behind the
    vehicle, origin inside a footprint, ...) are excluded and counted
    rather than scored zero; classes with no scoreable pair get a None
    AUSC. mAUSC averages the defined per-class values.
    """
    ausc: Dict[str, Optional[float]] = {}
    excluded: Dict[str, int] = {}
    for class_name, pairs in pairs_per_class.items():
        scores = []
        failures = 0
        for pair in pairs:
            try:
                scores.append(usc_score(pair.detection.box, pair.annotation.box,
                                        focal).usc)
            except UscError:
                failures += 1
        ausc[class_name] = math.fsum(scores) / len(scores) if scores else None
        excluded[class_name] = failures
    defined = [value for value in ausc.values() if value is not None]
    mausc = math.fsum(defined) / len(defined) if defined else None
    return UscAggregate(ausc, mausc, excluded)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient.

    Raises ZeroVariance when either series is constant (or shorter than 2).
    """
    if len(xs) != len(ys):
        raise ValueError("series lengths differ")
    n = len(xs)
    if n < 2:
        raise ZeroVariance("need at least two samples")
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    dx = [x - mean_x for x in xs]
    dy = [y - mean_y for y in ys]
    var_x = sum(d * d for d in dx)
    var_y = sum(d * d for d in dy)
    if var_x <= 0.0 or var_y <= 0.0:
        raise ZeroVariance("a series has zero variance")
    cov = sum(a * b for a, b in zip(dx, dy))
    return cov / math.sqrt(var_x * var_y)


# --- full protocol -----------------------------------------------------------


def _protocol_match(frames, config: ProtocolConfig):
    """Match every frame at the per-bucket thresholds.

    Annotations outside all buckets are dropped; each remaining annotation
    carries the threshold of its own bucket. Returns per (class, bucket):
    matched pairs, false positives, false negatives.
    """
    pairs: Dict[Tuple[str, int], List[MatchedPair]] = {}
    fps: Dict[Tuple[str, int], List[Detection]] = {}
    fns: Dict[Tuple[str, int], List[Annotation]] = {}

    def threshold_of(ann: Annotation) -> float:
        index = config.bucket_index(_center_range(ann.box))
        return config.match_thresholds[index]

    for frame in frames:
        anns_in_range = [a for a in frame.ground_truths
                         if config.bucket_index(_center_range(a.box)) is not None]
        classes = {a.class_name for a in anns_in_range}
        classes |= {d.class_name for d in frame.predictions}
        for class_name in sorted(classes):
            dets = [d for d in frame.predictions if d.class_name == class_name]
            anns = [a for a in anns_in_range if a.class_name == class_name]
            matched = _greedy_match(dets, anns, threshold_of)
            for pair in matched.pairs:
                bucket = config.bucket_index(_center_range(pair.annotation.box))
                pairs.setdefault((class_name, bucket), []).append(pair)
            for det in matched.false_positives:
                bucket = config.bucket_index(_center_range(det.box))
                if bucket is not None:
                    fps.setdefault((class_name, bucket), []).append(det)
            for ann in matched.false_negatives:
                bucket = config.bucket_index(_center_range(ann.box))
                fns.setdefault((class_name, bucket), []).append(ann)
    return pairs, fps, fns


def _ap_inputs(frames, config: ProtocolConfig, distance_threshold: float):
    """Scored TP/FP labels per (class, bucket) at one uniform threshold."""
    labeled: Dict[Tuple[str, int], List[Tuple[float, bool]]] = {}
    gt_counts: Dict[Tuple[str, int], int] = {}
    for frame in frames:
        anns_in_range = [a for a in frame.ground_truths
                         if config.bucket_index(_center_range(a.box)) is not None]
        for ann in anns_in_range:
            key = (ann.class_name, config.bucket_index(_center_range(ann.box)))
            gt_counts[key] = gt_counts.get(key, 0) + 1
        classes = {a.class_name for a in anns_in_range}
        classes |= {d.class_name for d in frame.predictions}
        for class_name in sorted(classes):
            dets = [d for d in frame.predictions if d.class_name == class_name]
            anns = [a for a in anns_in_range if a.class_name == class_name]
            matched = _greedy_match(dets, anns, lambda _a: distance_threshold)
            for pair in matched.pairs:
                bucket = config.bucket_index(_center_range(pair.annotation.box))
                labeled.setdefault((class_name, bucket), []).append(
                    (pair.detection.score, True))
            for det in matched.false_positives:
                bucket = config.bucket_index(_center_range(det.box))
                if bucket is not None:
                    labeled.setdefault((class_name, bucket), []).append(
                        (det.score, False))
    return labeled, gt_counts


def _mean_or_none(values: Sequence[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    return math.fsum(present) / len(present) if present else None


def evaluate(frames, config: ProtocolConfig = ProtocolConfig()) -> MetricsReport:
    """Run the full range-bucketed protocol over a dataset.

    ``frames`` is a sequence of FrameRecord values (see the io module).
    Undefined metrics stay None; they are never silently zeroed.
    """
    frames = list(frames)
    classes = sorted({a.class_name for f in frames for a in f.ground_truths
                      if config.bucket_index(_center_range(a.box)) is not None})
    pairs, fps, fns = _protocol_match(frames, config)
    ap_tables = {d: _ap_inputs(frames, config, d)
                 for d in config.ap_distance_thresholds}

    report = MetricsReport(
        range_buckets=list(config.range_buckets),
        classes=classes,
        ap_distance_thresholds=list(config.ap_distance_thresholds),
        tp_measures=list(config.tp_measures),
        frames=len(frames),
    )

    n_buckets = len(config.range_buckets)
    gt_counts = ap_tables[config.ap_distance_thresholds[0]][1]

    for class_name in classes:
        report.per_class[class_name] = {}
        for b in range(n_buckets):
            key = (class_name, b)
            class_pairs = pairs.get(key, [])
            n_gt = gt_counts.get(key, 0)
            ap: Dict[float, Optional[float]] = {}
            for d, (labeled, counts) in ap_tables.items():
                ap[d] = average_precision(labeled.get(key, []), counts.get(key, 0))
            if class_pairs:
                errors = dict(tp_error_means(class_pairs, config.tp_measures))
                agg = aggregate_usc({class_name: class_pairs}, config.focal)
                ausc = agg.ausc[class_name]
                excluded = agg.excluded[class_name]
            elif n_gt > 0:
                # present class with nothing matched: worst-case error scores
                errors = {m: 1.0 for m in config.tp_measures}
                ausc = 0.0
                excluded = 0
            else:
                errors = {m: None for m in config.tp_measures}
                ausc = None
                excluded = 0
            report.per_class[class_name][config.bucket_label(b)] = ClassBucketMetrics(
                ap=ap,
                tp_errors=errors,
                ausc=ausc,
                tp=len(class_pairs),
                fp=len(fps.get(key, [])),
                fn=len(fns.get(key, [])),
                usc_excluded=excluded,
            )

    for b in range(n_buckets):
        label = config.bucket_label(b)
        if config.skip_missing_classes:
            bucket_classes = [c for c in classes if gt_counts.get((c, b), 0) > 0]
        else:
            bucket_classes = list(classes)
        ap_values: List[Optional[float]] = []
        error_lists: Dict[str, List[Optional[float]]] = {m: [] for m in config.tp_measures}
        ausc_values: List[Optional[float]] = []
        for class_name in bucket_classes:
            metrics = report.per_class[class_name][label]
            for d in config.ap_distance_thresholds:
                value = metrics.ap[d]
                ap_values.append(value if value is not None else 0.0)
            for m in config.tp_measures:
                value = metrics.tp_errors[m]
                error_lists[m].append(value if value is not None else 1.0)
            if metrics.ausc is not None:
                ausc_values.append(metrics.ausc)
            elif gt_counts.get((class_name, b), 0) == 0 and not config.skip_missing_classes:
                ausc_values.append(0.0)
            # classes whose every pair was excluded stay out of mAUSC

        mean_ap = _mean_or_none(ap_values) if bucket_classes else None
        tp_error_summary = {m: _mean_or_none(error_lists[m]) for m in config.tp_measures}
        mausc = _mean_or_none(ausc_values)
        nds_value = None
        if mean_ap is not None and all(v is not None for v in tp_error_summary.values()):
            nds_value = nds(mean_ap, tp_error_summary)
        blended = None
        if nds_value is not None and mausc is not None:
            blended = usc_nds(nds_value, mausc)
        bucket_keys = [(c, b) for c in classes]
        report.per_bucket[label] = BucketSummary(
            mean_ap=mean_ap,
            nds=nds_value,
            mausc=mausc,
            usc_nds=blended,
            tp_errors=tp_error_summary,
            tp=sum(len(pairs.get(k, [])) for k in bucket_keys),
            fp=sum(len(fps.get(k, [])) for k in bucket_keys),
            fn=sum(len(fns.get(k, [])) for k in bucket_keys),
            usc_excluded=sum(report.per_class[c][label].usc_excluded for c in classes),
        )

    summaries = [report.per_bucket[config.bucket_label(b)] for b in range(n_buckets)]
    report.overall = BucketSummary(
        mean_ap=_mean_or_none([s.mean_ap for s in summaries]),
        nds=_mean_or_none([s.nds for s in summaries]),
        mausc=_mean_or_none([s.mausc for s in summaries]),
        usc_nds=_mean_or_none([s.usc_nds for s in summaries]),
        tp_errors={m: _mean_or_none([s.tp_errors[m] for s in summaries])
                   for m in config.tp_measures},
        tp=sum(s.tp for s in summaries),
        fp=sum(s.fp for s in summaries),
        fn=sum(s.fn for s in summaries),
        usc_excluded=sum(s.usc_excluded for s in summaries),
    )
    return report
