"""Plot empirical SE CDFs from an se_samples.csv file (needs matplotlib).

    python scripts/plot_cdf.py results/fig1/se_samples.csv -o fig1.png
"""
import argparse
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ris_mimo.simulation import read_se_samples


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("samples")
    p.add_argument("-o", "--output", default="cdf.png")
    args = p.parse_args()

    curves = defaultdict(list)
    for _, _, comb, variant, se in read_se_samples(args.samples):
        curves[(variant, comb)].append(se)

    fig, ax = plt.subplots(figsize=(6, 4))
    for (variant, comb), vals in sorted(curves.items()):
        x = np.sort(vals)
        ax.step(x, np.arange(1, len(x) + 1) / len(x), where="post", label=f"{variant} {comb.upper()}")
    ax.set_xlabel("SE per UE [bit/s/Hz]")
    ax.set_ylabel("CDF")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)
    print("wrote", args.output)


if __name__ == "__main__":
    main()
