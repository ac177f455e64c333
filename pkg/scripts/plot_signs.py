"""Render a sign matrix CSV (rows = coordinates) as an image.

    python3 scripts/plot_signs.py out/signs.csv signs.png

Needs matplotlib, which the package itself does not depend on.
"""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("signs")
    parser.add_argument("output")
    args = parser.parse_args()
    s = np.loadtxt(args.signs, delimiter=",", ndmin=2)
    fig, ax = plt.subplots(figsize=(10, 0.4 * s.shape[0] + 1))
    ax.imshow(s, aspect="auto", cmap="bwr", vmin=-1, vmax=1, interpolation="nearest")
    ax.set_xlabel("iteration (tail)")
    ax.set_ylabel("coordinate")
    ax.set_yticks(range(s.shape[0]), [str(i + 1) for i in range(s.shape[0])])
    fig.tight_layout()
    fig.savefig(args.output, dpi=120)


if __name__ == "__main__":
    main()
