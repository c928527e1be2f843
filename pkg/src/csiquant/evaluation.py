"""NMSE, the per-output dynamic-range statistic, and the split inference path."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DimensionError
from .quantizer import Bitstream, pack_indices, unpack_indices

NMSE_FLOOR_DB = -120.0


def nmse_db(x_hat, x) -> float:
    """10 log10 of the mean per-sample ||x_hat - x||^2 / ||x||^2, floored at -120 dB.

    Inputs are batches with samples along the first axis, in any real or
    complex layout (flattened real vectors or complex matrices).
    """
    x_hat = np.asarray(x_hat)
    x = np.asarray(x)
    if x.shape != x_hat.shape:
        raise DimensionError(f"shape mismatch {x_hat.shape} vs {x.shape}")
    if x.shape[0] == 0:
        raise DataError("NMSE of an empty set")
    n = x.shape[0]
    err = np.sum(np.abs(x_hat - x).reshape(n, -1) ** 2, axis=1)
    ref = np.sum(np.abs(x).reshape(n, -1) ** 2, axis=1)
    if np.any(ref == 0):
        raise DataError("reference sample with zero norm")
    ratio = float(np.mean(err / ref))
    if ratio <= 0:
        return NMSE_FLOOR_DB
    return max(NMSE_FLOOR_DB, 10 * np.log10(ratio))


@dataclass
class OutputStats:
    sigma: np.ndarray
    mean_sigma: float
    ratios: np.ndarray

    @property
    def spread(self) -> float:
        """max ratio / min ratio (inf when some output is constant)."""
        lo = float(self.ratios.min())
        return np.inf if lo == 0 else float(self.ratios.max()) / lo


def output_stats(z) -> OutputStats:
    """Population standard deviation of each latent column and its ratio to the mean."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] < 2:
        raise DataError("need at least 2 latent samples, shape (n, M)")
    sigma = z.std(axis=0)
    mean = float(sigma.mean())
    ratios = sigma / mean if mean > 0 else np.zeros_like(sigma)
    return OutputStats(sigma, mean, ratios)


def moving_average(values, window: int = 5) -> np.ndarray:
    """Centered moving average; the window shrinks at the ends."""
    v = np.asarray(values, dtype=np.float64)
    half = window // 2
    cs = np.concatenate([[0.0], np.cumsum(v)])
    lo = np.clip(np.arange(v.size) - half, 0, v.size)
    hi = np.clip(np.arange(v.size) + half + 1, 0, v.size)
    return (cs[hi] - cs[lo]) / (hi - lo)


@dataclass
class NmseReport:
    method: str
    M: int
    B: int
    nmse_db: float
    nmse_nq_path_db: float
    quant_loss: float
    bits_histogram: dict = field(default_factory=dict)
    runtime_s: float = 0.0
    run: str = ""

    def row(self) -> dict:
        return {
            "run": self.run,
            "method": self.method,
            "M": self.M,
            "B": self.B,
            "nmse_db": self.nmse_db,
            "nmse_nq_path_db": self.nmse_nq_path_db,
            "quant_loss": self.quant_loss,
            "bits_histogram": {str(k): v for k, v in sorted(self.bits_histogram.items())},
            "runtime_s": self.runtime_s,
        }


# ---------------------------------------------------------------------------
# Online inference
# ---------------------------------------------------------------------------


def user_side(system, x) -> list[Bitstream]:
    """Encode, quantize and pack each input vector into its own bitstream."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    _, idx = system.quantize(system.ae.encode(x))
    widths = system.widths
    return [pack_indices(row, widths) for row in idx]


def bs_side(system, streams) -> np.ndarray:
    """Unpack bitstreams, look the codewords up and decode."""
    widths = system.widths
    idx = np.stack([unpack_indices(s, widths) for s in streams])
    return system.ae.decode(system.dequantize(idx))


def infer(system, x) -> tuple[list[Bitstream], np.ndarray]:
    streams = user_side(system, x)
    return streams, bs_side(system, streams)
