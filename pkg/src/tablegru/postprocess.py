"""Decode class probabilities into single-line separators."""

from dataclasses import dataclass, field
from itertools import groupby

import numpy as np

from .model import CONTENT, WHITESPACE, Axis


@dataclass(frozen=True)
class Run:
    start: int
    end: int  # inclusive
    label: int


@dataclass
class SeparatorSet:
    axis: Axis
    positions: list = field(default_factory=list)
    positions_original: list = field(default_factory=list)

    def __post_init__(self):
        self.axis = Axis(self.axis)


def probs_to_labels(probs):
    """Argmax decode; a 0.5/0.5 tie decodes as whitespace."""
    probs = np.asarray(probs, dtype=float)
    return np.where(probs[:, WHITESPACE] >= 0.5, WHITESPACE, CONTENT).astype(np.int8)


def labels_to_runs(labels):
    runs = []
    start = 0
    for label, group in groupby(int(v) for v in labels):
        n = sum(1 for _ in group)
        runs.append(Run(start, start + n - 1, label))
        start += n
    return runs


def runs_to_separators(runs, T, axis):
    """Floor midpoint of every whitespace run that touches neither end of
    the sequence; margin runs at index 0 or T-1 produce nothing."""
    positions = [(r.start + r.end) // 2 for r in runs
                 if r.label == WHITESPACE and r.start > 0 and r.end < T - 1]
    return SeparatorSet(axis, positions)


def rescale_separators(s, resized_extent, original_extent):
    """Map resized-space positions to source pixels (round half up, clamped,
    duplicates merged)."""
    if resized_extent <= 0 or original_extent <= 0:
        raise ValueError("extents must be positive")
    mapped = []
    for p in s.positions:
        # integer round-half-up of p * original / resized
        q = (2 * p * original_extent + resized_extent) // (2 * resized_extent)
        q = min(max(q, 0), original_extent - 1)
        if not mapped or mapped[-1] != q:
            mapped.append(q)
    return SeparatorSet(s.axis, list(s.positions), mapped)


def decode(probs, axis, original_extent):
    """probs -> separators in both coordinate systems."""
    labels = probs_to_labels(probs)
    T = len(labels)
    s = runs_to_separators(labels_to_runs(labels), T, axis)
    return rescale_separators(s, T, original_extent)
