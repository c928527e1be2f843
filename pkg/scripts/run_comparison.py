"""Train every method on desk-scale data and write a comparison table.

    python3 scripts/run_comparison.py --B 2 4 --seeds 0 1 2 --out results/comparison

Each run is saved under OUT_runs/<method>-B<b>-s<seed>; the table goes to
OUT.csv and OUT.json. Lloyd variants share their unquantized first stage
across bit budgets.
"""
import argparse
from pathlib import Path

from csiquant import reports
from csiquant.training import METHODS, Splits, TrainConfig, save_run, train, train_lloyd


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--methods", nargs="+", default=list(METHODS), choices=METHODS)
    p.add_argument("--B", type=int, nargs="+", default=[2, 4])
    p.add_argument("--M", type=int, default=32)
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--out", default="results/comparison")
    args = p.parse_args(argv)

    data = Splits.generate(seed=args.data_seed)
    run_root = Path(f"{args.out}_runs")
    rows = []
    for seed in args.seeds:
        stage1 = {}
        for method in args.methods:
            budgets = [0] if method == "nq" else args.B
            for B in budgets:
                cfg = TrainConfig(method=method, M=args.M, B=B or TrainConfig.B, epochs=args.epochs, seed=seed)
                if method in ("lloyd", "lloyd-log"):
                    system = train_lloyd(cfg, data, stage1=stage1.get(method))
                    stage1.setdefault(method, system)
                else:
                    system = train(cfg, data)
                name = f"{method}-s{seed}" if method == "nq" else f"{method}-B{B}-s{seed}"
                save_run(system, run_root / name)
                rows.append(reports.report(system, data.test, run=name))
                print(f"{name:28s} {rows[-1].nmse_db:8.2f} dB  ({system.runtime_s:.1f} s)", flush=True)
    rows.sort(key=lambda r: (r.method, r.B, r.M, r.run))
    csv_path, _ = reports.write_tables(rows, args.out)
    print(f"table -> {csv_path}")


if __name__ == "__main__":
    main()
