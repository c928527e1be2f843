"""Command-line entry point: ``csiquant <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical fault.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import channels, reports
from .allocation import BitAllocation, allocate_bits, save_allocation
from .errors import ConfigError, CsiQuantError, DataError
from .evaluation import infer, moving_average, output_stats
from .training import METHODS, Splits, TrainConfig, load_run, save_run, train

SPLITS = ("train", "val", "test")


def _load_config(path) -> TrainConfig:
    if path is None:
        return TrainConfig()
    try:
        return TrainConfig.from_text(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None


def _data_for(args, system=None) -> Splits:
    src = args.data or (system.config.data if system is not None else "")
    if not src:
        raise DataError("pass --data DIR (a directory written by generate-data)")
    return Splits.load(src)


def cmd_generate_data(args) -> None:
    params = channels.ChannelParams(paths_min=args.paths[0], paths_max=args.paths[1], n_t=args.nt,
                                    n_c_full=args.nc_full, delay_spread=args.delay_spread,
                                    angle_spread=args.angle_spread)
    params.validate()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sets = channels.make_splits(params, args.nc_trunc, tuple(args.samples), args.seed)
    for split in SPLITS:
        channels.save_dataset(sets[split], out / f"{split}.csiq")
    print(f"wrote {sum(args.samples)} samples ({args.nc_trunc}x{args.nt}) to {out}")


def cmd_train(args) -> None:
    cfg = _load_config(args.config)
    if args.method:
        cfg = replace(cfg, method=args.method)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.data:
        cfg = replace(cfg, data=str(args.data))
    cfg.validate()
    data = Splits.load(cfg.data) if cfg.data else Splits.generate(seed=cfg.seed)
    system = train(cfg, data)
    out = save_run(system, args.out)
    print(f"{cfg.method}: test NMSE {system.nmse(data.test):.2f} dB -> {out}")


def cmd_evaluate(args) -> None:
    system = load_run(args.run)
    data = _data_for(args, system)
    row = reports.report(system, getattr(data, args.split), run=str(args.run)).row()
    text = json.dumps(row, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)


def _latents(args) -> np.ndarray:
    if args.latents:
        z = np.load(args.latents)
    else:
        if not args.run:
            raise ConfigError("pass either --latents FILE.npy or --run DIR")
        system = load_run(args.run)
        z = system.ae.encode(getattr(_data_for(args, system), args.split))
    if z.ndim != 2:
        raise DataError(f"latents must be a 2-D array (samples, outputs), got shape {z.shape}")
    return z


def cmd_allocate(args) -> None:
    z = _latents(args)
    M = z.shape[1]
    budget = args.budget if args.budget is not None else 2 * M
    res = allocate_bits([z[:, m] for m in range(M)], budget, args.b_min, args.b_max, seed=args.seed)
    if args.out:
        save_allocation(res.allocation, args.out)
    sys.stdout.write(res.allocation.to_text())
    print(f"# swaps {len(res.swaps)} quantization loss {res.loss_history[0]:.6g} -> {res.total_loss:.6g}")


def cmd_stats(args) -> None:
    st = output_stats(_latents(args))
    smooth = moving_average(st.ratios, args.window)
    rows = [("output", "sigma", "ratio", "moving_average")]
    rows += [(m, repr(float(s)), repr(float(r)), repr(float(a)))
             for m, (s, r, a) in enumerate(zip(st.sigma, st.ratios, smooth))]
    if args.out:
        with open(args.out, "w", newline="") as f:
            csv.writer(f, lineterminator="\n").writerows(rows)
    print(f"mean sigma {st.mean_sigma:.6g}, max/min ratio {st.spread:.3f}")


def cmd_compare(args) -> None:
    rows = reports.compare(args.runs, args.data)
    if args.out:
        reports.write_tables(rows, args.out)
    sys.stdout.write(reports.to_csv(rows))


def cmd_infer(args) -> None:
    system = load_run(args.run)
    if not system.quantized:
        raise ConfigError(f"run {args.run} has no quantizer, nothing to transmit")
    path = Path(args.input)
    x = channels.load_dataset(path).flat() if path.suffix == ".csiq" else np.load(path)
    streams, x_hat = infer(system, x)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "bitstreams.bin").write_bytes(b"".join(s.to_bytes() for s in streams))
    np.save(out / "reconstruction.npy", x_hat)
    print(f"{len(streams)} streams of {sum(system.widths)} bits -> {out}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="csiquant", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate-data", help="synthesize train/val/test channel files")
    d = channels.DESK_PARAMS
    g.add_argument("--paths", type=int, nargs=2, default=(d.paths_min, d.paths_max), metavar=("MIN", "MAX"))
    g.add_argument("--samples", type=int, nargs=3, default=(4000, 500, 500), metavar=("TRAIN", "VAL", "TEST"))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--nt", type=int, default=d.n_t)
    g.add_argument("--nc-full", type=int, default=d.n_c_full)
    g.add_argument("--nc-trunc", type=int, default=channels.DESK_N_C)
    g.add_argument("--delay-spread", type=int, default=d.delay_spread)
    g.add_argument("--angle-spread", type=float, default=d.angle_spread)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate_data)

    t = sub.add_parser("train", help="train one method and save the run directory")
    t.add_argument("--config")
    t.add_argument("--method", choices=METHODS)
    t.add_argument("--seed", type=int)
    t.add_argument("--data", help="dataset directory (overrides the config's data entry)")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="NMSE report of one run as JSON")
    e.add_argument("--run", required=True)
    e.add_argument("--data")
    e.add_argument("--split", choices=SPLITS, default="test")
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    for name, func, helptext in (("allocate", cmd_allocate, "greedy bit allocation over latent samples"),
                                 ("stats", cmd_stats, "per-output dynamic range as CSV")):
        a = sub.add_parser(name, help=helptext)
        a.add_argument("--latents", help=".npy array of shape (samples, outputs)")
        a.add_argument("--run", help="run directory whose encoder produces the latents")
        a.add_argument("--data")
        a.add_argument("--split", choices=SPLITS, default="train")
        a.add_argument("--seed", type=int, default=0)
        a.add_argument("--out")
        a.set_defaults(func=func)
        if name == "allocate":
            a.add_argument("--budget", type=int, help="total bits (default 2 per output)")
            a.add_argument("--b-min", type=int, default=1)
            a.add_argument("--b-max", type=int, default=8)
        else:
            a.add_argument("--window", type=int, default=5)

    c = sub.add_parser("compare", help="CSV/JSON table over run directories")
    c.add_argument("runs", nargs="*")
    c.add_argument("--data")
    c.add_argument("--out", help="path prefix; writes PREFIX.csv and PREFIX.json")
    c.set_defaults(func=cmd_compare)

    i = sub.add_parser("infer", help="encode inputs to bitstreams and decode them")
    i.add_argument("--run", required=True)
    i.add_argument("--input", required=True, help=".csiq dataset or .npy of flattened inputs")
    i.add_argument("--out", required=True)
    i.set_defaults(func=cmd_infer)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except CsiQuantError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
