"""Glue shared by the CLI and the acceptance suite: dataset preparation,
inference over images, corpus evaluation and the GRU/LSTM comparison."""

import logging
import time

from . import postprocess
from .evaluation import aggregate, evaluate_axis, format_table
from .model import Axis, Cell, ModelConfig, forward
from .preprocess import PreprocessConfig, foreground, preprocess
from .synthgen import SynthSpec, labels_from_gt
from .train import LossConfig, TrainConfig, train

log = logging.getLogger(__name__)

DESK_PREPROCESS = PreprocessConfig(target_width=400, target_height=128)
DESK_HIDDEN = {Axis.COLUMN: 64, Axis.ROW: 128}
DESK_SPEC = SynthSpec(width=400, height=128, ruling_lines=True)


def timesteps(axis, pcfg):
    return pcfg.target_width if Axis(axis) is Axis.COLUMN else pcfg.target_height


def features(axis, pcfg):
    return pcfg.target_height if Axis(axis) is Axis.COLUMN else pcfg.target_width


def model_config(axis, cell, pcfg, hidden_dim=None):
    return ModelConfig.for_axis(axis, cell, pcfg.target_width, pcfg.target_height, hidden_dim)


def axis_dataset(items, axis, pcfg):
    """``items`` yields (gray image, {Axis: GtStructure}); returns training pairs."""
    axis = Axis(axis)
    T = timesteps(axis, pcfg)
    return [(preprocess(gray, axis, pcfg), labels_from_gt(gts[axis], T)) for gray, gts in items]


def infer(gray, models, pcfg):
    """Separators for every axis that has a model, in both coordinate systems."""
    out = {}
    for axis, params in models.items():
        probs = forward(preprocess(gray, axis, pcfg), params)
        extent = gray.shape[1] if axis is Axis.COLUMN else gray.shape[0]
        out[axis] = postprocess.decode(probs, axis, extent)
    return out


def evaluate_items(items, detections, pcfg):
    """Aggregate reports per axis. ``detections[k][axis]`` lists original
    positions for item ``k``."""
    reports = {}
    for (gray, gts), dets in zip(items, detections):
        fg = foreground(gray, pcfg)
        for axis, positions in dets.items():
            reports.setdefault(axis, []).append(evaluate_axis(fg, gts[axis], positions))
    return {axis: aggregate(r) for axis, r in reports.items()}


def sample_items(samples):
    return [(s.image, {Axis.ROW: s.gt_rows, Axis.COLUMN: s.gt_cols}) for s in samples]


def fit(items, axis, cell, pcfg, epochs, seed, hidden_dim=None, learning_rate=0.0005,
        loss=LossConfig()):
    mcfg = model_config(axis, cell, pcfg, hidden_dim)
    data = axis_dataset(items, axis, pcfg)
    cfg = TrainConfig(learning_rate=learning_rate, epochs=epochs, seed=seed)
    return train(data, cfg, mcfg, loss)


def benchmark(train_items, test_items, pcfg=DESK_PREPROCESS, epochs=20, seed=0,
              hidden=None, cells=(Cell.GRU, Cell.LSTM), axes=(Axis.COLUMN, Axis.ROW)):
    """Train each cell type per axis, evaluate on the held-out items.

    Returns ``{axis: {cell: EvalReport}}`` plus per-run timings and histories.
    """
    hidden = hidden or DESK_HIDDEN
    reports, timings, histories = {}, {}, {}
    for axis in axes:
        for cell in cells:
            start = time.perf_counter()
            params, history = fit(train_items, axis, cell, pcfg, epochs, seed, hidden[axis])
            timings[(axis, cell)] = time.perf_counter() - start
            histories[(axis, cell)] = history
            dets = [{axis: infer(gray, {axis: params}, pcfg)[axis].positions_original}
                    for gray, _ in test_items]
            reports.setdefault(axis, {})[cell] = evaluate_items(test_items, dets, pcfg)[axis]
            log.info("%s %s trained in %.1fs", axis.value, cell.value, timings[(axis, cell)])
    return reports, timings, histories


def benchmark_report(reports, n_train, n_test, epochs, seed):
    """Side-by-side text tables of the cell types, one per axis."""
    text = [f"GRU vs LSTM: {n_train} train / {n_test} test tables, "
            f"{epochs} epochs, seed {seed}\n"]
    for axis in (Axis.COLUMN, Axis.ROW):
        if axis not in reports:
            continue
        cols = {f"Bi-directional {c.value.upper()}": r for c, r in reports[axis].items()}
        text.append(format_table(cols, f"{axis.value} segmentation (Accuracy%)"))
    return "\n".join(text)
