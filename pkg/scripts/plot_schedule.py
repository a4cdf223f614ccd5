#!/usr/bin/env python3
"""Plot the one-cycle learning-rate and momentum curves.

Usage: python3 scripts/plot_schedule.py --steps 10000 --out schedule.png
"""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from balanced3d import one_cycle  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=10000)
    ap.add_argument("--out", default="schedule.png")
    args = ap.parse_args()

    steps = range(0, args.steps + 1, max(args.steps // 2000, 1))
    lrs, moms = zip(*(one_cycle(s, args.steps) for s in steps))

    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.plot(steps, lrs)
    ax1.set_ylabel("learning rate")
    ax1.set_yscale("log")
    ax2.plot(steps, moms, color="tab:orange")
    ax2.set_ylabel("momentum")
    ax2.set_xlabel("step")
    for ax in (ax1, ax2):
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"start lr {lrs[0]:.6g}, peak lr {max(lrs):.6g}, "
          f"final lr {lrs[-1]:.6g} -> {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
