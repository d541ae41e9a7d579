"""Correspondence-matrix evaluation of row/column segmentations.

Ground-truth and detected segments are strips (full height for columns,
full width for rows) restricted to ink pixels. Every ground-truth segment
G_i and detected segment S_j is compared through the matrix of pixel
overlaps, and each is sorted into the six categories below using the
0.9 / 0.1 overlap-ratio thresholds with strict inequalities.
"""

import csv
import io
import json
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import InvalidInputError
from .model import Axis

HIGH = 0.9
LOW = 0.1

MEASURES = ("correct", "partial", "missed", "over_segmented", "under_segmented",
            "false_positive")
MEASURE_LABELS = {
    "correct": "Correct Detections",
    "partial": "Partial Detections",
    "missed": "Missed Detections",
    "over_segmented": "Over Segmented Detections",
    "under_segmented": "Under Segmented Detections",
    "false_positive": "False Positive Detections",
}
# measures counted over detections; the rest are over ground-truth segments
DETECTION_MEASURES = ("under_segmented", "false_positive")


@dataclass
class GtStructure:
    axis: Axis
    extent: int
    content_spans: list = field(default_factory=list)

    def __post_init__(self):
        self.axis = Axis(self.axis)
        self.content_spans = [(int(s), int(e)) for s, e in self.content_spans]
        check_spans(self.content_spans, self.extent)

    def to_dict(self):
        return {"axis": self.axis.value, "extent": self.extent,
                "content_spans": [list(s) for s in self.content_spans]}

    @classmethod
    def from_dict(cls, d):
        return cls(d["axis"], int(d["extent"]), d["content_spans"])


def check_spans(spans, extent):
    if extent <= 0:
        raise InvalidInputError("extent must be positive")
    prev_end = -1
    for s, e in spans:
        if not 0 <= s <= e <= extent - 1:
            raise InvalidInputError(f"span ({s}, {e}) outside [0, {extent - 1}]")
        if s <= prev_end:
            raise InvalidInputError("spans must be sorted and non-overlapping")
        prev_end = e


@dataclass
class SegmentMask:
    ids: np.ndarray  # int32, 0 = no segment
    count: int


@dataclass
class CorrespondenceMatrix:
    overlap: np.ndarray  # m x n
    gt_total: np.ndarray  # m
    det_total: np.ndarray  # n

    @property
    def m(self):
        return len(self.gt_total)

    @property
    def n(self):
        return len(self.det_total)


@dataclass
class EvalReport:
    m: int = 0
    n: int = 0
    correct: int = 0
    partial: int = 0
    missed: int = 0
    over_segmented: int = 0
    under_segmented: int = 0
    false_positive: int = 0

    @property
    def degenerate(self):
        return self.m == 0 or self.n == 0

    def denominator(self, measure):
        return self.n if measure in DETECTION_MEASURES else self.m

    def percent(self, measure):
        d = self.denominator(measure)
        return 100.0 * getattr(self, measure) / d if d else 0.0

    def __add__(self, other):
        return EvalReport(**{f.name: getattr(self, f.name) + getattr(other, f.name)
                             for f in fields(self)})


def aggregate(reports):
    """Sum counts and denominators; percentages then follow from the sums."""
    total = EvalReport()
    for r in reports:
        total = total + r
    return total


def spans_to_mask(spans, axis, fg):
    """Label ink pixels by the span (1-based) containing them along ``axis``."""
    fg = np.asarray(fg)
    axis = Axis(axis)
    extent = fg.shape[1] if axis is Axis.COLUMN else fg.shape[0]
    spans = [(int(s), int(e)) for s, e in spans]
    for s, e in spans:
        if not 0 <= s <= e < extent:
            raise InvalidInputError(f"span ({s}, {e}) exceeds extent {extent}")
    strip = np.zeros(extent, dtype=np.int32)
    for k, (s, e) in enumerate(spans, start=1):
        strip[s : e + 1] = k
    ids = strip[None, :] if axis is Axis.COLUMN else strip[:, None]
    ids = np.where(fg > 0, np.broadcast_to(ids, fg.shape), 0).astype(np.int32)
    return SegmentMask(ids, len(spans))


def separators_to_spans(positions, extent):
    """Regions strictly between consecutive separators (and the image ends);
    separator pixels belong to no span and empty regions are dropped."""
    spans = []
    start = 0
    for p in list(positions) + [extent]:
        if p - 1 >= start:
            spans.append((start, p - 1))
        start = p + 1
    return spans


def correspondence(gt, det):
    if gt.ids.shape != det.ids.shape:
        raise InvalidInputError(f"mask shapes differ: {gt.ids.shape} vs {det.ids.shape}")
    m, n = gt.count, det.count
    g = gt.ids.ravel().astype(np.int64)
    d = det.ids.ravel().astype(np.int64)
    joint = np.bincount(g * (n + 1) + d, minlength=(m + 1) * (n + 1)).reshape(m + 1, n + 1)
    return CorrespondenceMatrix(
        overlap=joint[1:, 1:],
        gt_total=joint[1:, :].sum(axis=1),
        det_total=joint[:, 1:].sum(axis=0),
    )


def _ratios(overlap, totals, axis):
    totals = np.asarray(totals, dtype=float)
    shape = (-1, 1) if axis == 0 else (1, -1)
    denom = totals.reshape(shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(denom > 0, overlap / np.where(denom > 0, denom, 1.0), 0.0)
    return r


def classify(c):
    """Sort segments into the six measures; zero-pixel segments get ratio 0."""
    ov = np.asarray(c.overlap, dtype=float)
    rg = _ratios(ov, c.gt_total, 0)  # |G_i ∩ S_j| / |G_i|
    rs = _ratios(ov, c.det_total, 1)  # |G_i ∩ S_j| / |S_j|

    big_s = rs >= LOW
    others_clear = (big_s.sum(axis=0)[None, :] - big_s) == 0
    correct = np.any((rg > HIGH) & others_clear, axis=1)

    mid_g = (rg > LOW) & (rg < HIGH)
    big_g = rg >= LOW
    rest_clear = (big_g.sum(axis=1)[:, None] - big_g) == 0
    partial = np.any(mid_g & rest_clear, axis=1)
    over = mid_g.sum(axis=1) > 1
    missed = np.all(rg < LOW, axis=1)

    mid_s = (rs > LOW) & (rs < HIGH)
    under = mid_s.sum(axis=0) > 1
    false_pos = np.all(rs < LOW, axis=0)

    return EvalReport(
        m=c.m, n=c.n,
        correct=int(correct.sum()), partial=int(partial.sum()), missed=int(missed.sum()),
        over_segmented=int(over.sum()), under_segmented=int(under.sum()),
        false_positive=int(false_pos.sum()),
    )


def evaluate_axis(fg, gt, detected_positions):
    """Report for one axis of one image from original-coordinate separators.

    ``detected_positions=None`` means nothing was detected at all (n = 0),
    as opposed to an empty list, which is one segment spanning the image.
    """
    if detected_positions is None:
        det_spans = []
    else:
        det_spans = separators_to_spans(detected_positions, gt.extent)
    gt_mask = spans_to_mask(gt.content_spans, gt.axis, fg)
    det_mask = spans_to_mask(det_spans, gt.axis, fg)
    return classify(correspondence(gt_mask, det_mask))


def gt_separators(gt):
    """Floor midpoints of the gaps between consecutive ground-truth spans."""
    spans = gt.content_spans
    return [(a[1] + 1 + b[0] - 1) // 2 for a, b in zip(spans, spans[1:])]


def separator_prf(det, gt, tolerance):
    """Precision, recall and F1 of separator positions.

    Pairs are matched one-to-one greedily in order of increasing distance
    (ties by detected then ground-truth index); a pair within ``tolerance``
    pixels is a true positive. Undefined ratios are 0.
    """
    det = list(det)
    gt = list(gt)
    pairs = sorted((abs(d - g), i, j) for i, d in enumerate(det) for j, g in enumerate(gt))
    used_d, used_g = set(), set()
    tp = 0
    for dist, i, j in pairs:
        if dist > tolerance:
            break
        if i in used_d or j in used_g:
            continue
        used_d.add(i)
        used_g.add(j)
        tp += 1
    precision = tp / len(det) if det else 0.0
    recall = tp / len(gt) if gt else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


# -- files ------------------------------------------------------------------

def gt_to_json(image_name, structures):
    doc = {"image": image_name, "structures": [s.to_dict() for s in structures]}
    return json.dumps(doc, indent=2) + "\n"


def read_gt(path):
    """Returns ``(image_name, {Axis: GtStructure})``."""
    with open(path) as fh:
        doc = json.load(fh)
    structures = {}
    for d in doc["structures"]:
        s = GtStructure.from_dict(d)
        structures[s.axis] = s
    return doc.get("image"), structures


def format_separators(sets):
    lines = []
    for s in sets:
        for p, q in zip(s.positions, s.positions_original):
            lines.append(f"{s.axis.value},{p},{q}")
    return "".join(line + "\n" for line in lines)


def read_separators(path):
    """Parse a separator file into ``{Axis: [original positions]}``.

    A file without any separator lines yields ``None`` for both axes, i.e.
    no detected segments.
    """
    out = {Axis.ROW: [], Axis.COLUMN: []}
    seen = False
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise InvalidInputError(f"{path}:{lineno}: expected axis,resized,original")
            out[Axis(parts[0])].append(int(parts[2]))
            seen = True
    if not seen:
        return {a: None for a in out}
    return {a: sorted(set(v)) for a, v in out.items()}


def format_table(columns, title=""):
    """Aligned text table, one row per measure, one column per report."""
    names = list(columns)
    label_w = max(len(v) for v in MEASURE_LABELS.values())
    col_w = max([10] + [len(n) for n in names])
    lines = []
    if title:
        lines.append(title)
    header = "Performance Measures".ljust(label_w) + "".join(
        " | " + n.rjust(col_w) for n in names)
    lines.append(header)
    lines.append("-" * len(header))
    for measure in MEASURES:
        row = MEASURE_LABELS[measure].ljust(label_w)
        row += "".join(" | " + f"{columns[n].percent(measure):.2f}".rjust(col_w) for n in names)
        lines.append(row)
    return "\n".join(lines) + "\n"


def report_csv(report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["measure", "count", "percent"])
    for measure in MEASURES:
        writer.writerow([measure, getattr(report, measure), f"{report.percent(measure):.4f}"])
    return buf.getvalue()
