"""Batch experiment driver.

Subcommands:

    train    fit a model with k-fold cross-validation, write checkpoint + curves
    eval     score a checkpoint on a noise sweep, write metric rows
    corrupt  write corrupted copies of a dataset as IDX files
    report   join metric CSVs, run pairwise significance tests, plot curves

Exit codes: 0 success, 2 bad arguments, 3 I/O failure, 4 malformed file,
5 numeric failure. Noise points of a sweep evaluate concurrently; the env
var QSPIKE_THREADS caps the worker count. All outputs are deterministic
per seed, so re-running a command overwrites files with identical bytes.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import data, metrics, noise
from . import train as training
from .model import ModelConfig, SpikingQuantumClassifier, predict

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_FORMAT = 4
EXIT_NUMERIC = 5

METRIC_HEADER = ("model", "dataset", "noise", "acc", "dsc", "ppv", "ss")
SIGNIFICANCE_HEADER = ("model_a", "model_b", "metric", "w", "p", "n")


class UsageError(ValueError):
    """Command-line arguments that parse but do not make sense."""


class ReportFormatError(ValueError):
    """A metrics CSV is missing required columns or has bad values."""


class NumericError(RuntimeError):
    """Training or evaluation produced non-finite numbers."""


def _parse_classes(text: str) -> tuple[int, ...]:
    try:
        out = tuple(int(tok) for tok in text.split(",") if tok.strip() != "")
    except ValueError:
        raise UsageError(f"classes must be comma-separated integers, got {text!r}")
    if not out:
        raise UsageError("classes list is empty")
    return out


def _load_config(path) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(f"config file {path} not found")
    return {s: dict(parser.items(s)) for s in parser.sections()}


class _Settings:
    """Layered lookup: explicit flag, then config file section, then default."""

    def __init__(self, args: argparse.Namespace, cfg: dict[str, dict[str, str]]):
        self.args = args
        self.cfg = cfg

    def get(self, flag: str, section: str, key: str, default, convert=str):
        value = getattr(self.args, flag, None)
        if value is not None:
            return value
        raw = self.cfg.get(section, {}).get(key)
        if raw is not None:
            try:
                return convert(raw)
            except ValueError:
                raise UsageError(f"config [{section}] {key} = {raw!r} is invalid")
        return default


def _thread_count(n_tasks: int) -> int:
    cap = os.environ.get("QSPIKE_THREADS")
    if cap is not None:
        try:
            cap = int(cap)
        except ValueError:
            raise UsageError(f"QSPIKE_THREADS must be an integer, got {cap!r}")
        if cap < 1:
            raise UsageError("QSPIKE_THREADS must be >= 1")
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_tasks))


def _load_filtered(settings: _Settings, split: str) -> tuple[data.Dataset, tuple[int, ...]]:
    data_dir = settings.get("data_dir", "data", "data_dir", "data")
    dataset = settings.get("dataset", "data", "dataset", "mnist")
    if dataset not in data.DEFAULT_CLASSES:
        raise UsageError(
            f"dataset must be one of {tuple(data.DEFAULT_CLASSES)}, got {dataset!r}")
    classes = settings.get("classes", "data", "classes",
                           data.DEFAULT_CLASSES[dataset], _parse_classes)
    ds = data.load_dataset(data_dir, dataset, split)
    return data.filter_classes(ds, classes), tuple(classes)


def _noise_points(args, cfg) -> list[noise.NoiseSpec]:
    points: list[noise.NoiseSpec] = []
    for text in args.noise or []:
        points.append(noise.parse_noise_spec(text))
    for text in args.sweep or []:
        points.extend(noise.parse_sweep(text))
    if not points:
        if "noise" in cfg and cfg["noise"].get("point"):
            points.append(noise.parse_noise_spec(cfg["noise"]["point"]))
        if "noise" in cfg and cfg["noise"].get("sweep"):
            points.extend(noise.parse_sweep(cfg["noise"]["sweep"]))
    return points


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config) if args.config else {}
    s = _Settings(args, cfg)
    ds, classes = _load_filtered(s, "train")
    limit = s.get("limit", "data", "limit", 0, int)
    if limit:
        ds = data.Dataset(ds.images[:limit], ds.labels[:limit], name=ds.name)

    seed = s.get("seed", "train", "seed", 0, int)
    train_noise = (args.train_noise_flag[0] if args.train_noise_flag
                   else cfg.get("noise", {}).get("train"))
    if train_noise is not None:
        spec = noise.parse_noise_spec(train_noise)
        rng = np.random.default_rng([seed, 0xC0FFEE])
        images = np.stack([noise.corrupt(img, spec, rng) for img in ds.images])
        ds = data.Dataset(images, ds.labels, name=ds.name)

    model_cfg = ModelConfig(
        in_dim=ds.images.shape[1],
        hidden_dim=s.get("hidden", "model", "hidden", 128, int),
        feature_dim=s.get("features", "model", "features", 10, int),
        n_qubits=s.get("qubits", "model", "qubits", 6, int),
        n_layers=s.get("layers", "model", "layers", 2, int),
        n_classes=len(classes),
        T=s.get("T", "model", "t", 16, int),
        dt=s.get("dt", "model", "dt", 1.0, float),
        head_kind=s.get("head", "model", "head", "quantum"),
    )
    train_cfg = training.TrainConfig(
        epochs=s.get("epochs", "train", "epochs", 30, int),
        batch_size=s.get("batch_size", "train", "batch_size", 32, int),
        folds=s.get("folds", "train", "folds", 5, int),
        seed=seed,
        mode=s.get("mode", "train", "mode", "stochastic"),
        adam=training.AdamConfig(
            lr=s.get("lr", "optimizer", "lr", 0.003, float),
            beta1=s.get("beta1", "optimizer", "beta1", 0.81, float),
            beta2=s.get("beta2", "optimizer", "beta2", 0.88, float),
            eps=s.get("eps", "optimizer", "eps", 1e-8, float),
        ),
    )
    base = SpikingQuantumClassifier.build(model_cfg, seed=seed)
    report = training.fit(base, ds, train_cfg)
    if not all(np.isfinite(r.loss) for r in report.rows):
        raise NumericError("training produced a non-finite loss")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    training.save_checkpoint(report.best_model, report.best_state,
                             out / "checkpoint.qspk")
    training.write_report_csv(report, out / "report.csv")
    print(f"best fold {report.best_fold} epoch {report.best_epoch} "
          f"val_acc {report.best_accuracy:.4f}")
    print(f"wrote {out / 'checkpoint.qspk'} and {out / 'report.csv'}")
    return EXIT_OK


def _eval_point(net: SpikingQuantumClassifier, ds: data.Dataset,
                spec: noise.NoiseSpec, seed: int,
                point: int) -> metrics.MetricBundle:
    rng = np.random.default_rng([seed, point])
    preds = np.empty(len(ds), dtype=np.int64)
    for i in range(len(ds)):
        preds[i] = predict(net, noise.corrupt(ds.images[i], spec, rng))
    cm = metrics.confusion(preds, ds.labels, net.config.n_classes)
    return metrics.bundle(cm)


def _write_metric_rows(path, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(METRIC_HEADER)
        for model_name, dataset, label, b in rows:
            w.writerow([model_name, dataset, label,
                        f"{b.acc:.6f}", f"{b.dsc:.6f}", f"{b.ppv:.6f}", f"{b.ss:.6f}"])


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config) if args.config else {}
    s = _Settings(args, cfg)
    net, _ = training.load_checkpoint(args.checkpoint)
    model_name = args.name or Path(args.checkpoint).stem
    ds, _ = _load_filtered(s, args.split)
    if len(ds) and ds.labels.max() >= net.config.n_classes:
        raise UsageError(
            f"dataset has {int(ds.labels.max()) + 1} classes but the model "
            f"predicts {net.config.n_classes}")
    seed = s.get("seed", "train", "seed", 0, int)
    points = _noise_points(args, cfg)
    dataset_name = ds.name or "dataset"

    results: list[metrics.MetricBundle] = []
    if points:
        with ThreadPoolExecutor(max_workers=_thread_count(len(points))) as pool:
            futures = [pool.submit(_eval_point, net, ds, spec, seed, i)
                       for i, spec in enumerate(points)]
            results = [f.result() for f in futures]
    for b in results:
        for value in (b.acc, b.dsc, b.ppv, b.ss):
            if not np.isfinite(value):
                raise NumericError("evaluation produced a non-finite metric")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [(model_name, dataset_name, spec.label(), b)
            for spec, b in zip(points, results)]
    _write_metric_rows(out / "metrics.csv", rows)
    print(f"wrote {out / 'metrics.csv'} ({len(rows)} noise points)")
    return EXIT_OK


def _safe_label(label: str) -> str:
    return label.replace(":", "_").replace(",", "_").replace("=", "")


def cmd_corrupt(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config) if args.config else {}
    s = _Settings(args, cfg)
    data_dir = s.get("data_dir", "data", "data_dir", "data")
    dataset = s.get("dataset", "data", "dataset", "mnist")
    ds = data.load_dataset(data_dir, dataset, args.split)
    if len(args.noise) != 1:
        raise UsageError("corrupt takes exactly one --noise spec")
    spec = noise.parse_noise_spec(args.noise[0])
    seed = s.get("seed", "train", "seed", 0, int)
    rng = np.random.default_rng([seed])
    images = np.stack([noise.corrupt(img, spec, rng) for img in ds.images])
    corrupted = data.Dataset(images, ds.labels, name=ds.name)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{dataset}-{args.split}-{_safe_label(spec.label())}"
    img_path = out / f"{stem}-images-idx3-ubyte"
    lbl_path = out / f"{stem}-labels-idx1-ubyte"
    data.write_idx(corrupted, img_path, lbl_path)
    print(f"wrote {img_path} and {lbl_path} ({len(corrupted)} images)")
    return EXIT_OK


def _read_metric_rows(path) -> list[dict[str, str]]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or \
                set(METRIC_HEADER) - set(reader.fieldnames):
            raise ReportFormatError(
                f"{path}: expected columns {','.join(METRIC_HEADER)}")
        rows = list(reader)
    for row in rows:
        for col in ("acc", "dsc", "ppv", "ss"):
            try:
                float(row[col])
            except (TypeError, ValueError):
                raise ReportFormatError(f"{path}: bad {col} value {row[col]!r}")
    return rows


def _sweep_value(label: str) -> float | None:
    _, _, rest = label.partition(":")
    first = rest.split(",")[0]
    _, eq, value = first.partition("=")
    try:
        return float(value) if eq else None
    except ValueError:
        return None


def _write_plots(rows: list[dict[str, str]], out: Path) -> list[Path]:
    try:
        import matplotlib
    except ImportError:
        raise UsageError("plotting needs matplotlib (pip install qspike[plot])")
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    groups: dict[tuple[str, str], list[dict[str, str]]] = {}
    for row in rows:
        kind = row["noise"].partition(":")[0]
        groups.setdefault((row["dataset"], kind), []).append(row)
    written = []
    for (dataset, kind), members in sorted(groups.items()):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for model_name in sorted({m["model"] for m in members}):
            pts = sorted(
                ((_sweep_value(m["noise"]), float(m["acc"]))
                 for m in members
                 if m["model"] == model_name and _sweep_value(m["noise"]) is not None))
            if pts:
                ax.plot([p[0] for p in pts], [p[1] for p in pts],
                        marker="o", label=model_name)
        ax.set_xlabel(f"{kind} intensity")
        ax.set_ylabel("accuracy")
        ax.set_title(f"{dataset}: {kind}")
        ax.legend()
        fig.tight_layout()
        path = out / f"{dataset}-{kind}-acc.svg"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written


def cmd_report(args: argparse.Namespace) -> int:
    if not args.metrics:
        raise UsageError("report needs at least one --metrics CSV")
    rows: list[dict[str, str]] = []
    for path in args.metrics:
        rows.extend(_read_metric_rows(path))
    by_model: dict[str, dict[tuple[str, str], dict[str, str]]] = {}
    for row in rows:
        by_model.setdefault(row["model"], {})[(row["dataset"], row["noise"])] = row

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = sorted(by_model)
    with open(out / "significance.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(SIGNIFICANCE_HEADER)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                shared = sorted(set(by_model[a]) & set(by_model[b]))
                if not shared:
                    continue
                for col in ("acc", "dsc", "ppv", "ss"):
                    x = [float(by_model[a][key][col]) for key in shared]
                    y = [float(by_model[b][key][col]) for key in shared]
                    res = metrics.wilcoxon(x, y)
                    w.writerow([a, b, col, f"{res.w_statistic:g}",
                                f"{res.p_value:.6g}", res.n_effective])
    print(f"wrote {out / 'significance.csv'}")
    if args.plot:
        for path in _write_plots(rows, out):
            print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qspike",
        description="Train and benchmark the spiking quantum classifier "
                    "under image corruptions.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="INI config file "
                       "(sections: model, data, train, optimizer, noise)")
        p.add_argument("--data-dir", dest="data_dir", help="dataset root directory")
        p.add_argument("--dataset", choices=sorted(data.DEFAULT_CLASSES))
        p.add_argument("--classes", type=_parse_classes,
                       help="comma-separated original class labels to keep")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("train", help="fit a model with cross-validation")
    common(p)
    p.add_argument("--limit", type=int, help="use only the first N samples")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--mode", choices=("stochastic", "expected"))
    p.add_argument("--qubits", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--head", choices=("quantum", "classical"))
    p.add_argument("--noise", action="append", dest="train_noise_flag",
                   help="corrupt the training images with this spec")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint under noise")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--name", help="model column value in the metrics CSV")
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--noise", action="append",
                   help="single noise point KIND:k=v (repeatable)")
    p.add_argument("--sweep", action="append",
                   help="noise sweep KIND:param=a,b,c (repeatable)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("corrupt", help="write corrupted IDX copies")
    common(p)
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--noise", action="append", required=True,
                   help="noise spec KIND:k=v")
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("report", help="significance tests over metric CSVs")
    p.add_argument("--metrics", action="append",
                   help="metrics CSV produced by eval (repeatable)")
    p.add_argument("--out", default=".")
    p.add_argument("--plot", action="store_true",
                   help="also write accuracy-vs-intensity SVG curves")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (data.IdxFormatError, training.CheckpointError, ReportFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(f"run 'qspike {args.command} --help' for usage", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
