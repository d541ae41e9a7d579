"""Seeded synthetic table images with exact row/column ground truth.

The canvas is cut into content strips separated by whitespace gaps on
each axis (outer margins are gaps too). Filled cells receive one line of
1-3 dark rectangles standing in for words; every row and every column
gets at least one filled cell. Ground-truth spans are the tight extent of
the rendered ink of each row and column.
"""

import csv
import io
import os
from dataclasses import dataclass

import numpy as np

from .checkpoint import atomic_write
from .errors import InvalidInputError
from .evaluation import GtStructure, gt_to_json
from .images import encode_png
from .model import CONTENT, WHITESPACE, Axis


@dataclass(frozen=True)
class SynthSpec:
    width: int = 400
    height: int = 128
    rows: tuple = (3, 6)
    cols: tuple = (3, 5)
    gap: tuple = (8, 16)
    fill_density: float = 0.8
    blob_margin: int = 2
    ruling_lines: bool = False
    noise: float = 0.0

    def __post_init__(self):
        for name in ("rows", "cols", "gap"):
            lo, hi = getattr(self, name)
            if not 1 <= lo <= hi:
                raise InvalidInputError(f"{name} range must satisfy 1 <= min <= max, got {(lo, hi)}")
        if self.gap[0] < 2:
            raise InvalidInputError("gap minimum must be >= 2")
        if not 0.0 <= self.fill_density <= 1.0:
            raise InvalidInputError("fill_density must lie in [0, 1]")
        if not 0.0 <= self.noise <= 0.05:
            raise InvalidInputError("noise must lie in [0, 0.05]")
        if self.blob_margin < 0:
            raise InvalidInputError("blob_margin must be >= 0")
        for name, extent, count in (("width", self.width, self.cols[0]),
                                    ("height", self.height, self.rows[0])):
            need = count * self.min_cell + (count + 1) * self.gap[0]
            if extent < need:
                raise InvalidInputError(
                    f"{name} {extent} < {need} needed for {count} cells of "
                    f"{self.min_cell} px at minimum gap {self.gap[0]}")

    @property
    def min_cell(self):
        return 2 * self.blob_margin + 3


@dataclass
class SynthSample:
    image: np.ndarray
    gt_rows: GtStructure
    gt_cols: GtStructure
    seed: int


def _layout(rng, extent, count_range, gap_range, min_cell):
    """Content strips along one axis as (start, end) inclusive pairs."""
    n = int(rng.integers(count_range[0], count_range[1] + 1))
    gaps = rng.integers(gap_range[0], gap_range[1] + 1, size=n + 1)
    # shrink gaps until content fills 60% of the extent; drop cells only
    # when even minimum gaps leave too little room
    while True:
        content = extent - gaps.sum()
        k = int(np.argmax(gaps))
        if content >= max(n * min_cell, 0.6 * extent):
            break
        if gaps[k] > gap_range[0]:
            gaps[k] -= 1
        elif content < n * min_cell:
            n -= 1
            gaps = gaps[: n + 1]
        else:
            break
    free = int(extent - gaps.sum() - n * min_cell)
    weights = rng.uniform(0.5, 1.5, size=n)
    sizes = min_cell + np.floor(free * weights / weights.sum()).astype(int)
    spans = []
    pos = int(gaps[0])
    for k in range(n):
        spans.append((pos, pos + int(sizes[k]) - 1))
        pos += int(sizes[k]) + int(gaps[k + 1])
    return spans


def _render_cell(rng, canvas, box):
    x0, y0, x1, y1 = box
    iw, ih = x1 - x0 + 1, y1 - y0 + 1
    th = int(rng.integers((ih + 1) // 2, ih + 1))
    ty = y0 + int(rng.integers(0, ih - th + 1))
    tw = int(rng.integers(max(1, (2 * iw) // 5), iw + 1))
    tx = x0 + int(rng.integers(0, iw - tw + 1))
    words = int(rng.integers(1, 4))
    words = max(1, min(words, (tw + 3) // 5))
    space = 3 if words > 1 else 0
    ink_w = tw - space * (words - 1)
    cuts = np.sort(rng.choice(np.arange(1, ink_w), size=words - 1, replace=False)) \
        if words > 1 else np.array([], dtype=int)
    edges = np.concatenate([[0], cuts, [ink_w]])
    x = tx
    for k in range(words):
        w = int(edges[k + 1] - edges[k])
        canvas[ty : ty + th, x : x + w] = int(rng.integers(0, 61))
        x += w + space


def generate(spec, seed):
    rng = np.random.default_rng(seed)
    row_spans = _layout(rng, spec.height, spec.rows, spec.gap, spec.min_cell)
    col_spans = _layout(rng, spec.width, spec.cols, spec.gap, spec.min_cell)
    nr, nc = len(row_spans), len(col_spans)

    filled = rng.random((nr, nc)) < spec.fill_density
    for r in range(nr):
        if not filled[r].any():
            filled[r, rng.integers(nc)] = True
    for c in range(nc):
        if not filled[:, c].any():
            filled[rng.integers(nr), c] = True

    canvas = np.full((spec.height, spec.width), 255, dtype=np.uint8)
    mb = spec.blob_margin
    for r, (ry0, ry1) in enumerate(row_spans):
        for c, (cx0, cx1) in enumerate(col_spans):
            if filled[r, c]:
                _render_cell(rng, canvas, (cx0 + mb, ry0 + mb, cx1 - mb, ry1 - mb))

    ink = canvas < 255
    tight_rows = []
    for ry0, ry1 in row_spans:
        ys = np.flatnonzero(ink[ry0 : ry1 + 1].any(axis=1))
        tight_rows.append((ry0 + int(ys[0]), ry0 + int(ys[-1])))
    tight_cols = []
    for cx0, cx1 in col_spans:
        xs = np.flatnonzero(ink[:, cx0 : cx1 + 1].any(axis=0))
        tight_cols.append((cx0 + int(xs[0]), cx0 + int(xs[-1])))

    if spec.ruling_lines:
        for (_, a_end), (b_start, _) in zip(row_spans, row_spans[1:]):
            canvas[(a_end + b_start) // 2, :] = 0
    if spec.noise > 0:
        flip = rng.random(canvas.shape) < spec.noise
        canvas[flip] = np.where(canvas[flip] < 128, 255, 0)

    return SynthSample(
        image=canvas,
        gt_rows=GtStructure(Axis.ROW, spec.height, tight_rows),
        gt_cols=GtStructure(Axis.COLUMN, spec.width, tight_cols),
        seed=seed,
    )


def generate_corpus(n, spec, seed):
    if n < 1:
        raise InvalidInputError("corpus size must be >= 1")
    return [generate(spec, seed + i) for i in range(n)]


def labels_from_gt(gt, target_extent):
    """Per-timestep labels in a resized space of ``target_extent`` steps.

    Span ends are scaled by target/extent with round-half-up and clamped;
    everything inside a scaled span is content, the rest whitespace.
    """
    if target_extent <= 0:
        raise InvalidInputError("target_extent must be positive")
    labels = np.full(target_extent, WHITESPACE, dtype=np.int8)

    def scale(v):
        return min((2 * v * target_extent + gt.extent) // (2 * gt.extent), target_extent - 1)

    for s, e in gt.content_spans:
        a, b = scale(s), scale(e)
        labels[a : max(a, b) + 1] = CONTENT
    return labels


def sample_name(index):
    return f"table_{index:05d}"


def write_corpus(samples, out_dir):
    """PNG + ground-truth JSON per sample and a ``manifest.csv``."""
    os.makedirs(out_dir, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["filename", "seed"])
    for i, sample in enumerate(samples):
        name = sample_name(i)
        atomic_write(os.path.join(out_dir, name + ".png"), encode_png(sample.image))
        atomic_write(os.path.join(out_dir, name + ".gt.json"),
                     gt_to_json(name + ".png", [sample.gt_rows, sample.gt_cols]))
        writer.writerow([name + ".png", sample.seed])
    atomic_write(os.path.join(out_dir, "manifest.csv"), buf.getvalue())


def read_manifest(corpus_dir):
    """List of (image path, ground-truth path, seed)."""
    path = os.path.join(corpus_dir, "manifest.csv")
    entries = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            image = os.path.join(corpus_dir, row["filename"])
            stem = os.path.splitext(row["filename"])[0]
            entries.append((image, os.path.join(corpus_dir, stem + ".gt.json"), int(row["seed"])))
    return entries
