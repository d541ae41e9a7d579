"""Command-line interface.

Subcommands: synth, train, infer, eval, gradcheck, benchmark. Every
command accepts ``--config FILE`` holding flat ``key = value`` lines;
explicit flags override the file. Exit codes: 0 success, 1 quality gate
failed, 2 invalid input, 3 I/O failure.
"""

import argparse
import logging
import os
import sys
import time

import numpy as np

from . import checkpoint, evaluation, experiment, images, synthgen
from .errors import InvalidInputError
from .model import Axis, Cell, ModelConfig, init_params
from .preprocess import PreprocessConfig, preprocess_stages
from .train import LossConfig, TrainConfig, grad_check, train

log = logging.getLogger("tablegru")

EXIT_OK, EXIT_GATE, EXIT_INVALID, EXIT_IO = 0, 1, 2, 3
GRADCHECK_LIMIT = 1e-4


def _range(text):
    lo, _, hi = str(text).partition(":")
    return (int(lo), int(hi or lo))


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


KEYS = {
    # preprocessing
    "target_width": int, "target_height": int, "dilation_iterations": int,
    "binarize_window": int, "binarize_k": float,
    # model / training
    "axis": Axis, "cell": str, "hidden_dim": int, "learning_rate": float, "epochs": int,
    "content_weight": float, "whitespace_weight": float, "seed": int,
    # synthetic corpus
    "n": int, "width": int, "height": int, "rows": _range, "cols": _range, "gap": _range,
    "fill_density": float, "blob_margin": int, "ruling_lines": _bool, "noise": float,
    # evaluation / benchmark
    "tolerance": int, "n_train": int, "n_test": int, "hidden_column": int, "hidden_row": int,
    "eps": float,
    # paths
    "out": str, "corpus": str, "log": str, "pred": str, "gt": str,
    "row_model": str, "column_model": str,
}


def load_config(path):
    settings = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep:
                raise InvalidInputError(f"{path}:{lineno}: expected key = value")
            if key not in KEYS:
                raise InvalidInputError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                settings[key] = KEYS[key](value.strip())
            except ValueError as exc:
                raise InvalidInputError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return settings


def _settings(args):
    settings = load_config(args.config) if args.config else {}
    for key, value in vars(args).items():
        if key in KEYS and value is not None:
            settings[key] = value
    return settings


def _preprocess_config(s, **defaults):
    keys = ("target_width", "target_height", "dilation_iterations", "binarize_window",
            "binarize_k")
    values = {**defaults, **{k: s[k] for k in keys if k in s}}
    return PreprocessConfig(**values)


def _loss_config(s):
    return LossConfig(s.get("content_weight", 0.66), s.get("whitespace_weight", 1.0))


def _synth_spec(s):
    keys = ("width", "height", "rows", "cols", "gap", "fill_density", "blob_margin",
            "ruling_lines", "noise")
    return synthgen.SynthSpec(**{k: s[k] for k in keys if k in s})


def _require(s, key):
    if not s.get(key):
        raise InvalidInputError(f"--{key.replace('_', '-')} is required")
    return s[key]


def _load_corpus(corpus_dir):
    items, names = [], []
    for image_path, gt_path, _ in synthgen.read_manifest(corpus_dir):
        if not os.path.exists(gt_path):
            raise InvalidInputError(f"missing ground truth {gt_path}")
        _, gts = evaluation.read_gt(gt_path)
        items.append((images.read_gray(image_path), gts))
        names.append(os.path.splitext(os.path.basename(image_path))[0])
    if not items:
        raise InvalidInputError(f"corpus {corpus_dir} is empty")
    return items, names


# -- subcommands --------------------------------------------------------------

def cmd_synth(args):
    s = _settings(args)
    spec = _synth_spec(s)
    n = s.get("n", 10)
    out = _require(s, "out")
    samples = synthgen.generate_corpus(n, spec, s.get("seed", 0))
    synthgen.write_corpus(samples, out)
    print(f"wrote {n} samples to {out}")
    return EXIT_OK


def cmd_train(args):
    s = _settings(args)
    axis = Axis(_require(s, "axis"))
    cell = Cell(s.get("cell", "gru"))
    pcfg = _preprocess_config(s)
    cfg = TrainConfig.for_axis(axis, **{k: s[k] for k in ("learning_rate", "epochs", "seed")
                                        if k in s})
    loss = _loss_config(s)
    mcfg = experiment.model_config(axis, cell, pcfg, s.get("hidden_dim"))
    out = _require(s, "out")
    corpus = _require(s, "corpus")

    items, _ = _load_corpus(corpus)
    for gray, gts in items:
        if axis not in gts:
            raise InvalidInputError(f"ground truth lacks the {axis.value} axis")
    data = experiment.axis_dataset(items, axis, pcfg)
    log_lines = []

    def on_epoch(epoch, mean_loss):
        log_lines.append(f"{epoch},{mean_loss:.8f}")
        print(f"epoch {epoch}/{cfg.epochs} mean loss {mean_loss:.6f}")

    print(f"training {axis.value} {cell.value} model: {len(data)} images, "
          f"{cfg.epochs} epochs, lr {cfg.learning_rate}")
    params, _ = train(data, cfg, mcfg, loss, on_epoch=on_epoch)
    checkpoint.save(params, out)
    log_path = s.get("log") or os.path.splitext(out)[0] + ".log"
    checkpoint.atomic_write(log_path, "".join(line + "\n" for line in log_lines))
    print(f"checkpoint written to {out}")
    return EXIT_OK


def _load_models(s):
    models = {}
    for axis, key in ((Axis.ROW, "row_model"), (Axis.COLUMN, "column_model")):
        if s.get(key):
            params = checkpoint.load(s[key])
            if params.config.axis is not axis:
                raise InvalidInputError(
                    f"--{key.replace('_', '-')} expects a {axis.value} model but "
                    f"{s[key]} holds a {params.config.axis.value} model")
            models[axis] = params
    if not models:
        raise InvalidInputError("give --row-model and/or --column-model")
    dims = {}
    if Axis.COLUMN in models:
        dims["target_height"] = models[Axis.COLUMN].config.input_dim
    if Axis.ROW in models:
        dims["target_width"] = models[Axis.ROW].config.input_dim
    for key, value in dims.items():
        if key in s and s[key] != value:
            raise InvalidInputError(f"--{key.replace('_', '-')} {s[key]} conflicts with "
                                    f"checkpoint input size {value}")
    return models, dims


def cmd_infer(args):
    s = _settings(args)
    models, dims = _load_models(s)
    pcfg = _preprocess_config(s, **dims)
    out = _require(s, "out")
    if not args.images:
        raise InvalidInputError("no input images")
    grays = [(path, images.read_gray(path)) for path in args.images]
    os.makedirs(out, exist_ok=True)
    for path, gray in grays:
        stem = os.path.splitext(os.path.basename(path))[0]
        seps = experiment.infer(gray, models, pcfg)
        ordered = [seps[a] for a in (Axis.ROW, Axis.COLUMN) if a in seps]
        checkpoint.atomic_write(os.path.join(out, stem + ".sep.csv"),
                                evaluation.format_separators(ordered))
        if args.overlay:
            rows = seps[Axis.ROW].positions_original if Axis.ROW in seps else ()
            cols = seps[Axis.COLUMN].positions_original if Axis.COLUMN in seps else ()
            checkpoint.atomic_write(os.path.join(out, stem + ".overlay.png"),
                                    images.overlay(gray, rows, cols))
        if args.dump_stages:
            for axis in models:
                for name, raster in preprocess_stages(gray, axis, pcfg).items():
                    picture = images.binary_to_gray(raster > 0)
                    images.write_png(os.path.join(out, f"{stem}.{axis.value}.{name}.png"),
                                     picture)
        summary = ", ".join(f"{a.value}s {len(seps[a].positions_original)}" for a in seps)
        print(f"{stem}: {summary}")
    return EXIT_OK


def cmd_eval(args):
    s = _settings(args)
    pred = _require(s, "pred")
    gt_dir = _require(s, "gt")
    pcfg = _preprocess_config(s)
    tolerance = s.get("tolerance", 5)
    gt_files = sorted(f for f in os.listdir(gt_dir) if f.endswith(".gt.json"))
    if not gt_files:
        raise InvalidInputError(f"no ground-truth files in {gt_dir}")
    missing = [f[: -len(".gt.json")] for f in gt_files
               if not os.path.exists(os.path.join(pred, f[: -len(".gt.json")] + ".sep.csv"))]
    if missing:
        for stem in missing:
            print(f"missing detections for {stem}", file=sys.stderr)
        return EXIT_INVALID

    items, dets = [], []
    prf = {Axis.ROW: [], Axis.COLUMN: []}
    for f in gt_files:
        stem = f[: -len(".gt.json")]
        image_name, gts = evaluation.read_gt(os.path.join(gt_dir, f))
        gray = images.read_gray(os.path.join(gt_dir, image_name or stem + ".png"))
        seps = evaluation.read_separators(os.path.join(pred, stem + ".sep.csv"))
        items.append((gray, gts))
        dets.append({a: seps[a] for a in gts})
        for a in gts:
            prf[a].append((seps[a] or [], evaluation.gt_separators(gts[a])))
    reports = experiment.evaluate_items(items, dets, pcfg)

    text = []
    for axis in (Axis.COLUMN, Axis.ROW):
        if axis not in reports:
            continue
        r = reports[axis]
        text.append(evaluation.format_table(
            {"Accuracy%": r}, f"{axis.value} segmentation ({len(items)} tables, "
                              f"{r.m} ground-truth / {r.n} detected segments)"))
        tp_p = [evaluation.separator_prf(d, g, tolerance) for d, g in prf[axis]]
        mean = np.mean(tp_p, axis=0) if tp_p else (0.0, 0.0, 0.0)
        text.append(f"separator P/R/F1 (tolerance {tolerance} px, mean over tables): "
                    f"{mean[0]:.4f} / {mean[1]:.4f} / {mean[2]:.4f}\n")
    report = "\n".join(text)
    print(report, end="")
    out = s.get("out")
    if out:
        os.makedirs(out, exist_ok=True)
        checkpoint.atomic_write(os.path.join(out, "report.txt"), report)
        for axis, r in reports.items():
            checkpoint.atomic_write(os.path.join(out, f"report_{axis.value}.csv"),
                                    evaluation.report_csv(r))
    return EXIT_OK


def cmd_gradcheck(args):
    s = _settings(args)
    eps = s.get("eps", 1e-5)
    seed = s.get("seed", 0)
    cells = [Cell.GRU, Cell.LSTM] if args.cell == "both" else [Cell(args.cell)]
    axes = [Axis.COLUMN, Axis.ROW] if args.which_axis == "both" else [Axis(args.which_axis)]
    T, D, H = 8, 6, 5
    print(f"gradient check: T={T} D={D} H={H} eps={eps:g} threshold={GRADCHECK_LIMIT:g}")
    worst = 0.0
    for cell in cells:
        for axis in axes:
            rng = np.random.default_rng([seed, 7])
            params = init_params(ModelConfig(axis, cell, D, H), seed)
            image = rng.random((D, T) if axis is Axis.COLUMN else (T, D))
            labels = rng.integers(0, 2, size=T)
            start = time.perf_counter()
            err = grad_check(params, (image, labels), eps)
            worst = max(worst, err)
            status = "ok" if err < GRADCHECK_LIMIT else "FAIL"
            print(f"{cell.value:5s} {axis.value:7s} max relative error {err:.3e} "
                  f"({time.perf_counter() - start:.1f}s) {status}")
    return EXIT_OK if worst < GRADCHECK_LIMIT else EXIT_GATE


def cmd_benchmark(args):
    s = _settings(args)
    seed = s.get("seed", 0)
    epochs = s.get("epochs", 20)
    pcfg = _preprocess_config(s, target_width=400, target_height=128)
    hidden = {Axis.COLUMN: s.get("hidden_column", 64), Axis.ROW: s.get("hidden_row", 128)}
    if s.get("corpus"):
        items, _ = _load_corpus(s["corpus"])
        n_train = s.get("n_train", int(round(0.75 * len(items))))
        train_items, test_items = items[:n_train], items[n_train:]
        if not train_items or not test_items:
            raise InvalidInputError("corpus too small for a train/test split")
    else:
        spec = _synth_spec({"ruling_lines": True, **s})
        n_train, n_test = s.get("n_train", 60), s.get("n_test", 20)
        train_items = experiment.sample_items(synthgen.generate_corpus(n_train, spec, seed))
        test_items = experiment.sample_items(
            synthgen.generate_corpus(n_test, spec, seed + n_train))
    reports, timings, _ = experiment.benchmark(train_items, test_items, pcfg, epochs, seed,
                                               hidden)
    report = experiment.benchmark_report(reports, len(train_items), len(test_items), epochs,
                                         seed)
    print(report, end="")
    for (axis, cell), secs in timings.items():
        print(f"# {axis.value} {cell.value} training time {secs:.1f}s", file=sys.stderr)
    if s.get("out"):
        checkpoint.atomic_write(s["out"], report)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _add_preprocess_flags(p):
    p.add_argument("--target-width", dest="target_width", type=int)
    p.add_argument("--target-height", dest="target_height", type=int)
    p.add_argument("--dilation-iterations", dest="dilation_iterations", type=int)
    p.add_argument("--binarize-window", dest="binarize_window", type=int)
    p.add_argument("--binarize-k", dest="binarize_k", type=float)


def _add_synth_flags(p):
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--rows", type=_range, help="row count range, e.g. 3:6")
    p.add_argument("--cols", type=_range, help="column count range, e.g. 3:5")
    p.add_argument("--gap", type=_range, help="gap width range in pixels, e.g. 8:16")
    p.add_argument("--fill-density", dest="fill_density", type=float)
    p.add_argument("--blob-margin", dest="blob_margin", type=int)
    p.add_argument("--ruling-lines", dest="ruling_lines", type=_bool, metavar="BOOL")
    p.add_argument("--noise", type=float)


def build_parser():
    parser = argparse.ArgumentParser(prog="tablegru", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--config", help="file of key = value settings")
        p.add_argument("--seed", type=int)
        return p

    p = command("synth", cmd_synth, "generate a synthetic table corpus")
    p.add_argument("--n", type=int)
    p.add_argument("--out")
    _add_synth_flags(p)

    p = command("train", cmd_train, "train a row or column model")
    p.add_argument("--corpus")
    p.add_argument("--axis", type=Axis, choices=list(Axis))
    p.add_argument("--cell", choices=[c.value for c in Cell])
    p.add_argument("--epochs", type=int, help="default 10 (column) / 35 (row)")
    p.add_argument("--lr", dest="learning_rate", type=float)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    p.add_argument("--content-weight", dest="content_weight", type=float)
    p.add_argument("--whitespace-weight", dest="whitespace_weight", type=float)
    p.add_argument("--out", help="checkpoint path")
    p.add_argument("--log", help="loss log path (default: checkpoint stem + .log)")
    _add_preprocess_flags(p)

    p = command("infer", cmd_infer, "predict separators for table images")
    p.add_argument("images", nargs="*")
    p.add_argument("--row-model", dest="row_model")
    p.add_argument("--column-model", dest="column_model")
    p.add_argument("--out")
    p.add_argument("--overlay", action="store_true", help="also write overlay PNGs")
    p.add_argument("--dump-stages", dest="dump_stages", action="store_true",
                   help="write every preprocessing stage as PNG")
    _add_preprocess_flags(p)

    p = command("eval", cmd_eval, "score separator files against ground truth")
    p.add_argument("--pred", help="directory of .sep.csv files")
    p.add_argument("--gt", help="directory of .gt.json files and their images")
    p.add_argument("--out", help="directory for report.txt and CSV files")
    p.add_argument("--tolerance", type=int, help="separator P/R/F1 tolerance in pixels")
    _add_preprocess_flags(p)

    p = command("gradcheck", cmd_gradcheck, "finite-difference gradient check")
    p.add_argument("--cell", choices=["gru", "lstm", "both"], default="both")
    p.add_argument("--axis", dest="which_axis", choices=["row", "column", "both"],
                   default="both")
    p.add_argument("--eps", type=float)

    p = command("benchmark", cmd_benchmark, "GRU vs LSTM comparison on a seeded corpus")
    p.add_argument("--corpus", help="corpus directory (default: generate one)")
    p.add_argument("--n-train", dest="n_train", type=int)
    p.add_argument("--n-test", dest="n_test", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--hidden-column", dest="hidden_column", type=int)
    p.add_argument("--hidden-row", dest="hidden_row", type=int)
    p.add_argument("--out", help="write the report here")
    _add_preprocess_flags(p)
    _add_synth_flags(p)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InvalidInputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
