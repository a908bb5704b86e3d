"""Render a grid of example corruptions at increasing intensity.

Uses the first test image of a real dataset when --data-dir points at one,
otherwise a synthetic blob, so it runs anywhere matplotlib is installed:

    python scripts/noise_gallery.py --out gallery.png
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from qspike import data, noise

SWEEPS = [
    ("salt_pepper", "p", [0.05, 0.15, 0.3, 0.5], {}),
    ("gaussian", "sigma", [0.1, 0.3, 0.5, 0.8], {}),
    ("rayleigh", "scale", [0.1, 0.2, 0.4, 0.6], {}),
    ("uniform", "high", [0.2, 0.4, 0.6, 0.9], {}),
    ("perlin", "amplitude", [0.25, 0.5, 1.0, 1.5], {"res": 7}),
]


def sample_image(data_dir, dataset):
    root = Path(data_dir) if data_dir else None
    if root is not None and root.is_dir():
        try:
            ds = data.load_dataset(root, dataset, "test")
            return ds.images[0].reshape(28, 28), f"{dataset} test[0]"
        except (OSError, data.IdxFormatError):
            pass
    rng = np.random.default_rng(0)
    img = np.zeros((28, 28))
    img[4:24, 10:18] = rng.uniform(0.7, 1.0, (20, 8))
    img += rng.uniform(0.0, 0.08, (28, 28))
    return np.clip(img, 0.0, 1.0), "synthetic"


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data-dir", default=None)
    parser.add_argument("--dataset", default="mnist",
                        choices=sorted(data.DEFAULT_CLASSES))
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="gallery.png")
    args = parser.parse_args(argv)

    try:
        import matplotlib
    except ImportError:
        print("matplotlib is required: pip install qspike[plot]",
              file=sys.stderr)
        return 1
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    image, source = sample_image(args.data_dir, args.dataset)
    n_cols = 1 + max(len(values) for _, _, values, _ in SWEEPS)
    fig, axes = plt.subplots(len(SWEEPS), n_cols,
                             figsize=(1.6 * n_cols, 1.6 * len(SWEEPS)))
    for row, (kind, param, values, base) in enumerate(SWEEPS):
        axes[row, 0].imshow(image, cmap="gray", vmin=0, vmax=1)
        axes[row, 0].set_ylabel(kind, fontsize=9)
        axes[row, 0].set_xticks([])
        axes[row, 0].set_yticks([])
        if row == 0:
            axes[row, 0].set_title("clean", fontsize=9)
        for col, value in enumerate(values, start=1):
            spec = noise.NoiseSpec.make(kind, **{**base, param: value})
            rng = np.random.default_rng([args.seed, row, col])
            out = noise.corrupt(image, spec, rng)
            ax = axes[row, col]
            ax.imshow(out, cmap="gray", vmin=0, vmax=1)
            ax.set_title(f"{param}={value:g}", fontsize=9)
            ax.set_xticks([])
            ax.set_yticks([])
        for col in range(len(values) + 1, n_cols):
            axes[row, col].axis("off")
    fig.suptitle(f"corruptions ({source})", fontsize=11)
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
