"""Per-output dynamic range of an encoder trained without quantization.

    python3 scripts/dynamic_range_stats.py --seed 0 --out results/dynamic_range.csv

Writes one row per output: population std, its ratio to the mean std and a
moving average (window 5) over outputs sorted by ratio.
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from csiquant.evaluation import moving_average, output_stats
from csiquant.training import Splits, TrainConfig, train


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--M", type=int, default=32)
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--out", default="results/dynamic_range.csv")
    args = p.parse_args(argv)

    data = Splits.generate(seed=0)
    system = train(TrainConfig(method="nq", M=args.M, epochs=args.epochs, seed=args.seed), data)
    st = output_stats(system.ae.encode(data.train))
    order = np.argsort(st.ratios)
    smooth = moving_average(st.ratios[order], args.window)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(("rank", "output", "sigma", "ratio", "moving_average"))
        for rank, (m, a) in enumerate(zip(order, smooth)):
            w.writerow((rank, int(m), repr(float(st.sigma[m])), repr(float(st.ratios[m])), repr(float(a))))
    print(f"mean sigma {st.mean_sigma:.4g}, max/min ratio {st.spread:.2f} -> {out}")


if __name__ == "__main__":
    main()
