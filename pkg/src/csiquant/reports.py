"""Comparison tables over finished run directories."""
from __future__ import annotations

import csv
import io
import json
from collections import Counter
from pathlib import Path

from .errors import DataError
from .evaluation import NmseReport
from .training import Splits, TrainedSystem, load_run

CSV_COLUMNS = ("run", "method", "M", "B", "nmse_db", "nmse_nq_path_db", "quant_loss", "bits_histogram",
               "runtime_s")


def report(system: TrainedSystem, test, run: str = "") -> NmseReport:
    """Test-set NMSE (quantized and latent-only path) plus quantization loss."""
    if system.alloc is not None:
        hist = dict(Counter(system.alloc.bits))
    elif system.vector_codebook is not None:
        hist = {system.config.B: system.ae.M}
    else:
        hist = {}
    return NmseReport(system.method, system.config.M, system.config.B, system.nmse(test),
                      system.nmse(test, quantized=False), system.quant_loss(test), hist,
                      system.runtime_s, run)


def _test_split(system: TrainedSystem, data_dir) -> "Splits":
    src = data_dir or system.config.data
    if not src:
        raise DataError("no dataset given and the run config does not name one")
    return Splits.load(src)


def compare(run_dirs, data_dir=None) -> list[NmseReport]:
    """One report per run directory, sorted by (method, B, M, run path).

    Duplicated directories give duplicated, identical rows.
    """
    cache: dict[str, Splits] = {}
    rows = []
    for d in run_dirs:
        system = load_run(d)
        key = str(data_dir or system.config.data)
        if key not in cache:
            cache[key] = _test_split(system, data_dir)
        rows.append(report(system, cache[key].test, run=str(d)))
    return sorted(rows, key=lambda r: (r.method, r.B, r.M, r.run))


def _hist_text(hist: dict) -> str:
    return " ".join(f"{k}:{v}" for k, v in sorted(hist.items()))


def to_csv(rows: list[NmseReport]) -> str:
    """dB columns to 2 decimals; the header is written even for no rows."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([r.run, r.method, r.M, r.B, f"{r.nmse_db:.2f}", f"{r.nmse_nq_path_db:.2f}",
                    f"{r.quant_loss:.6g}", _hist_text(r.bits_histogram), f"{r.runtime_s:.1f}"])
    return buf.getvalue()


def to_json(rows: list[NmseReport]) -> str:
    """Full precision."""
    return json.dumps([r.row() for r in rows], indent=2, sort_keys=True) + "\n"


def write_tables(rows: list[NmseReport], prefix) -> tuple[Path, Path]:
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = prefix.with_suffix(".csv"), prefix.with_suffix(".json")
    csv_path.write_text(to_csv(rows))
    json_path.write_text(to_json(rows))
    return csv_path, json_path
