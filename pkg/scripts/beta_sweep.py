"""Test NMSE of the proposed method as a function of the penalty weight beta.

    python3 scripts/beta_sweep.py --betas 0.01 0.05 0.1 0.2 --B 2 --out results/beta_sweep.csv
"""
import argparse
import csv
from pathlib import Path

from csiquant.training import Splits, TrainConfig, train


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--betas", type=float, nargs="+", default=[0.01, 0.05, 0.1, 0.2])
    p.add_argument("--method", default="proposed", choices=["proposed", "proposed-var1", "proposed-var2"])
    p.add_argument("--B", type=int, default=2)
    p.add_argument("--M", type=int, default=32)
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="results/beta_sweep.csv")
    args = p.parse_args(argv)

    data = Splits.generate(seed=0)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(("beta", "method", "M", "B", "nmse_db", "bits"))
        for beta in args.betas:
            cfg = TrainConfig(method=args.method, M=args.M, B=args.B, epochs=args.epochs, beta=beta, seed=args.seed)
            system = train(cfg, data)
            nmse = system.nmse(data.test)
            w.writerow((beta, args.method, args.M, args.B, f"{nmse:.2f}", " ".join(map(str, system.alloc.bits))))
            print(f"beta {beta:<6g} {nmse:8.2f} dB", flush=True)
    print(f"-> {out}")


if __name__ == "__main__":
    main()
