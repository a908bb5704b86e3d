"""Desk-scale benchmark run: 954 training samples, 30 epochs, 5 folds,
noisy-test evaluation, median over seeds.

Needs real IDX data, e.g.:

    python scripts/desk_scale.py --data-dir ./data --head both
"""

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from qspike import data, metrics, noise
from qspike.model import ModelConfig, SpikingQuantumClassifier, predict
from qspike.train import TrainConfig, fit


def run_protocol(root, dataset, head_kind, seeds, samples, epochs, test_noise):
    keep = data.DEFAULT_CLASSES[dataset]
    train = data.filter_classes(data.load_dataset(root, dataset, "train"), keep)
    train = data.Dataset(train.images[:samples], train.labels[:samples],
                         name=train.name)
    test = data.filter_classes(data.load_dataset(root, dataset, "test"), keep)
    spec = noise.parse_noise_spec(test_noise)

    accs = []
    for seed in seeds:
        report = fit(
            SpikingQuantumClassifier.build(
                ModelConfig(head_kind=head_kind), seed=seed),
            train,
            TrainConfig(epochs=epochs, batch_size=32, folds=5, seed=seed))
        rng = np.random.default_rng([seed, 0])
        preds = np.array([
            predict(report.best_model, noise.corrupt(img, spec, rng))
            for img in test.images])
        cm = metrics.confusion(preds, test.labels, len(keep))
        acc = metrics.bundle(cm).acc
        accs.append(acc)
        print(f"  seed {seed}: val_acc {report.best_accuracy:.4f} "
              f"(fold {report.best_fold}, epoch {report.best_epoch}), "
              f"noisy test ACC {acc:.4f}")
    return accs


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data-dir",
                        default=os.environ.get("QSPIKE_DATA_DIR", "data"))
    parser.add_argument("--dataset", default="mnist",
                        choices=sorted(data.DEFAULT_CLASSES))
    parser.add_argument("--head", default="quantum",
                        choices=("quantum", "classical", "both"))
    parser.add_argument("--seeds", default="0,1,2")
    parser.add_argument("--samples", type=int, default=954)
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--noise", default="gaussian:sigma=0.3")
    parser.add_argument("--out", default="desk_scale.csv")
    args = parser.parse_args(argv)

    root = Path(args.data_dir)
    if not root.is_dir():
        print(f"no data directory at {root}; download the IDX files first "
              "(see README)", file=sys.stderr)
        return 1
    seeds = [int(s) for s in args.seeds.split(",")]
    heads = ("quantum", "classical") if args.head == "both" else (args.head,)

    rows = []
    for head in heads:
        print(f"{head} head, {args.dataset}, {args.samples} samples, "
              f"{args.epochs} epochs, noise {args.noise}")
        accs = run_protocol(root, args.dataset, head, seeds, args.samples,
                            args.epochs, args.noise)
        median = float(np.median(accs))
        print(f"  median ACC over {len(seeds)} seeds: {median:.4f}")
        for seed, acc in zip(seeds, accs):
            rows.append((head, seed, acc))
        rows.append((head, "median", median))

    with open(args.out, "w") as f:
        f.write("head,seed,acc\n")
        for head, seed, acc in rows:
            f.write(f"{head},{seed},{acc:.6f}\n")
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
