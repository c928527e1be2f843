"""Per-output scalar codebooks, nearest-codeword quantization, 1-D K-means and
the fixed-length bitstream codec."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, CorruptFileError, DataError, DimensionError

PAD_EPS = 1e-9
BANK_MAGIC = b"CSCB"
BANK_VERSION = 1


class Codebook:
    """Strictly increasing codewords, ``2**bits`` of them.

    A single codeword (``bits == 0``) is representable but never transmitted;
    bit allocation keeps every output at one bit or more.
    """

    __slots__ = ("codewords",)

    def __init__(self, codewords):
        w = np.array(codewords, dtype=np.float64).reshape(-1)
        n = w.size
        if n < 1 or n & (n - 1):
            raise ConfigError(f"codebook length must be a power of two, got {n}")
        if not np.all(np.isfinite(w)):
            raise ConfigError("codewords must be finite")
        if np.any(np.diff(w) <= 0):
            raise ConfigError("codewords must be strictly increasing")
        w.flags.writeable = False
        self.codewords = w

    @classmethod
    def from_values(cls, values) -> "Codebook":
        """Sort arbitrary values and nudge ties apart by multiples of PAD_EPS."""
        return cls(_strictly_increasing(np.sort(np.asarray(values, dtype=np.float64))))

    @property
    def bits(self) -> int:
        return int(self.codewords.size).bit_length() - 1

    def __len__(self) -> int:
        return self.codewords.size

    def __eq__(self, other) -> bool:
        return isinstance(other, Codebook) and np.array_equal(self.codewords, other.codewords)

    def __repr__(self) -> str:
        return f"Codebook(bits={self.bits}, codewords={self.codewords.tolist()})"


def _strictly_increasing(w: np.ndarray) -> np.ndarray:
    w = w.copy()
    for i in range(1, w.size):
        if w[i] <= w[i - 1]:
            w[i] = w[i - 1] + PAD_EPS * max(1.0, abs(w[i - 1]))
    return w


def nearest_indices(z, codewords: np.ndarray) -> np.ndarray:
    """Index of the nearest codeword for every element of ``z``; ties go to the lower index.

    ``codewords`` must be sorted ascending.
    """
    z = np.asarray(z, dtype=np.float64)
    w = codewords
    if w.size == 1:
        return np.zeros(z.shape, dtype=np.int64)
    hi = np.clip(np.searchsorted(w, z, side="left"), 1, w.size - 1)
    lo = hi - 1
    take_hi = (w[hi] - z) ** 2 < (w[lo] - z) ** 2
    j = np.where(take_hi, hi, lo)
    # codewords closer together than the rounding of (w - z)**2 can tie with
    # the chosen one from below; the lowest index among exact ties wins
    while True:
        down = (j > 0) & ((w[np.maximum(j - 1, 0)] - z) ** 2 == (w[j] - z) ** 2)
        if not np.any(down):
            return j
        j = j - down


def quantize_scalar(z: float, cb: Codebook) -> tuple[int, float]:
    """Same rule as ``nearest_indices`` for one value, in plain floats."""
    w = cb.codewords
    n = w.size
    z = float(z)
    if n == 1:
        return 0, float(w[0])
    hi = min(max(int(np.searchsorted(w, z)), 1), n - 1)
    d_lo, d_hi = float(w[hi - 1]) - z, float(w[hi]) - z
    j = hi if d_hi * d_hi < d_lo * d_lo else hi - 1
    dj = float(w[j]) - z
    while j > 0:
        d = float(w[j - 1]) - z
        if d * d != dj * dj:
            break
        j -= 1
    return j, float(w[j])


@dataclass
class QuantizedLatent:
    values: np.ndarray  # (..., M) float
    indices: np.ndarray  # (..., M) int


class CodebookBank:
    """One codebook per encoder output."""

    def __init__(self, codebooks: Sequence[Codebook]):
        self.codebooks = list(codebooks)

    def __len__(self) -> int:
        return len(self.codebooks)

    def __getitem__(self, m: int) -> Codebook:
        return self.codebooks[m]

    def __setitem__(self, m: int, cb: Codebook) -> None:
        self.codebooks[m] = cb

    def __eq__(self, other) -> bool:
        return isinstance(other, CodebookBank) and self.codebooks == other.codebooks

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple(cb.bits for cb in self.codebooks)

    def copy(self) -> "CodebookBank":
        return CodebookBank(self.codebooks)

    @classmethod
    def uniform(cls, M: int, bits: int, lo: float = 0.0, hi: float = 1.0) -> "CodebookBank":
        return cls([Codebook(np.linspace(lo, hi, 2**bits)) for _ in range(M)])


def quantize_vector(z, bank: CodebookBank) -> QuantizedLatent:
    """Quantize each column ``m`` of ``z`` (shape (M,) or (n, M)) with ``bank[m]``."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != len(bank):
        raise DimensionError(f"latent length {z.shape[-1]} != bank size {len(bank)}")
    idx = np.empty(z.shape, dtype=np.int64)
    vals = np.empty(z.shape, dtype=np.float64)
    for m, cb in enumerate(bank.codebooks):
        j = nearest_indices(z[..., m], cb.codewords)
        idx[..., m] = j
        vals[..., m] = cb.codewords[j]
    return QuantizedLatent(vals, idx)


def dequantize(indices, bank: CodebookBank) -> np.ndarray:
    indices = np.asarray(indices)
    out = np.empty(indices.shape, dtype=np.float64)
    for m, cb in enumerate(bank.codebooks):
        out[..., m] = cb.codewords[indices[..., m]]
    return out


# ---------------------------------------------------------------------------
# K-means
# ---------------------------------------------------------------------------


@dataclass
class KMeansResult:
    centers: np.ndarray
    sse_history: list[float]
    iterations: int

    @property
    def sse(self) -> float:
        return self.sse_history[-1]


def quantile_seeds(samples: np.ndarray, k: int) -> np.ndarray:
    """Up to ``k`` distinct values taken at evenly spaced quantiles."""
    s = np.sort(samples)
    pos = ((np.arange(k) + 0.5) / k * s.size).astype(np.int64)
    seeds = np.unique(s[np.clip(pos, 0, s.size - 1)])
    if seeds.size < k:
        # fill from the remaining distinct values, spread over the range
        rest = np.setdiff1d(np.unique(s), seeds)
        if rest.size:
            take = rest[np.linspace(0, rest.size - 1, min(k - seeds.size, rest.size)).astype(np.int64)]
            seeds = np.union1d(seeds, take)
    return seeds


def _pad(centers: np.ndarray, k: int) -> np.ndarray:
    if centers.size >= k:
        return centers
    top = centers[-1]
    extra = top + PAD_EPS * max(1.0, abs(top)) * np.arange(1, k - centers.size + 1)
    return np.concatenate([centers, extra])


def kmeans_1d(samples, k: int, max_iters: int = 100, tol: float = 1e-10, init=None) -> KMeansResult:
    """Lloyd iteration on scalar samples.

    Starts from ``init`` (any values, sorted internally) or from quantile seeds.
    Stops when no center moves by more than ``tol`` or after ``max_iters``.
    ``sse_history[i]`` is the within-cluster SSE right after the i-th assignment.

    Samples are sorted once; clusters are then contiguous runs between the
    midpoints of adjacent centers and their sums come from prefix sums.
    """
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    if x.size == 0:
        raise DataError("K-means needs at least one sample")
    if k < 1:
        raise ConfigError(f"K must be >= 1, got {k}")
    xs = np.sort(x)
    distinct = np.unique(xs)
    if distinct.size <= k:
        return KMeansResult(_pad(distinct, k), [0.0], 0)

    c = np.sort(np.asarray(init, dtype=np.float64)) if init is not None else quantile_seeds(xs, k)
    if c.size != k:
        raise ConfigError(f"init has {c.size} centers, expected {k}")
    n = xs.size
    cs1 = np.concatenate([[0.0], np.cumsum(xs)])
    cs2 = np.concatenate([[0.0], np.cumsum(xs * xs)])
    history = []
    it = 0
    for it in range(1, max_iters + 1):
        # a sample exactly on a midpoint joins the lower cluster
        cut = np.searchsorted(xs, (c[:-1] + c[1:]) / 2, side="right")
        bounds = np.concatenate([[0], cut, [n]])
        counts = np.diff(bounds)
        s1 = np.diff(cs1[bounds])
        s2 = np.diff(cs2[bounds])
        history.append(float(np.sum(np.maximum(s2 - 2 * c * s1 + counts * c * c, 0.0))))
        new = c.copy()
        nz = counts > 0
        new[nz] = s1[nz] / counts[nz]
        empty = np.flatnonzero(~nz)
        if empty.size:
            # reseed empty clusters at the worst-served samples
            resid = (xs - np.repeat(c, counts)) ** 2
            for e in empty:
                worst = int(np.argmax(resid))
                new[e] = xs[worst]
                resid[worst] = -1.0
        new = np.sort(new)
        moved = np.max(np.abs(new - c))
        c = new
        if moved < tol:
            break
    return KMeansResult(_strictly_increasing(c), history, it)


def kmeans_train(samples, k: int, max_iters: int = 100, tol: float = 1e-10, seed: int = 0,
                 batch: int | None = 2000, init=None) -> Codebook:
    """Train a K-means codebook (``k`` a power of two); subsample to ``batch`` points if larger."""
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    if batch is not None and x.size > batch:
        x = np.random.default_rng(seed).choice(x, batch, replace=False)
    return Codebook(kmeans_1d(x, k, max_iters=max_iters, tol=tol, init=init).centers)


def estimate_quant_loss(samples, cb: Codebook | np.ndarray) -> float:
    """Mean squared distance from each sample to its nearest codeword."""
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    if x.size == 0:
        raise DataError("quantization loss needs at least one sample")
    w = cb.codewords if isinstance(cb, Codebook) else np.asarray(cb, dtype=np.float64)
    return float(np.mean((w[nearest_indices(x, w)] - x) ** 2))


# ---------------------------------------------------------------------------
# Bitstream
# ---------------------------------------------------------------------------


@dataclass
class Bitstream:
    bits: np.ndarray  # uint8 array of 0/1
    widths: tuple[int, ...]  # bits per field, in field order

    def __len__(self) -> int:
        return int(self.bits.size)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Bitstream)
            and self.widths == other.widths
            and np.array_equal(self.bits, other.bits)
        )

    def to_bytes(self) -> bytes:
        n = len(self)
        if n >= 1 << 16:
            raise ConfigError(f"bitstream of {n} bits does not fit the 2-byte length prefix")
        return struct.pack("<H", n) + np.packbits(self.bits).tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, widths: Sequence[int]) -> "Bitstream":
        if len(data) < 2:
            raise CorruptFileError("bitstream shorter than its length prefix")
        (n,) = struct.unpack_from("<H", data)
        widths = tuple(int(b) for b in widths)
        if n != sum(widths):
            raise DataError(f"stream carries {n} bits, allocation expects {sum(widths)}")
        payload = np.frombuffer(data, dtype=np.uint8, offset=2)
        if payload.size != (n + 7) // 8:
            raise CorruptFileError("bitstream payload length does not match its prefix")
        return cls(np.unpackbits(payload)[:n].copy(), widths)


def pack_indices(indices, widths: Sequence[int]) -> Bitstream:
    """Fixed-width fields, field order, most-significant bit first."""
    indices = np.asarray(indices, dtype=np.int64).reshape(-1)
    widths = tuple(int(b) for b in widths)
    if indices.size != len(widths):
        raise DimensionError(f"{indices.size} indices for {len(widths)} fields")
    out = np.empty(sum(widths), dtype=np.uint8)
    pos = 0
    for j, b in zip(indices.tolist(), widths):
        if not 0 <= j < (1 << b):
            raise DataError(f"index {j} does not fit in {b} bits")
        for k in range(b):
            out[pos + k] = (j >> (b - 1 - k)) & 1
        pos += b
    return Bitstream(out, widths)


def unpack_indices(x: Bitstream, widths: Sequence[int]) -> np.ndarray:
    widths = tuple(int(b) for b in widths)
    if len(x) != sum(widths):
        raise DataError(f"stream has {len(x)} bits, allocation expects {sum(widths)}")
    out = np.empty(len(widths), dtype=np.int64)
    pos = 0
    for m, b in enumerate(widths):
        v = 0
        for bit in x.bits[pos:pos + b].tolist():
            v = (v << 1) | int(bit)
        out[m] = v
        pos += b
    return out


def pack_bitstream(q: QuantizedLatent, alloc) -> Bitstream:
    """``alloc`` is a BitAllocation or a plain sequence of per-output bit counts."""
    return pack_indices(q.indices, _widths(alloc))


def unpack_bitstream(x: Bitstream, alloc, bank: CodebookBank) -> QuantizedLatent:
    widths = _widths(alloc)
    if bank.bits != widths:
        raise DataError("codebook bank does not match the bit allocation")
    idx = unpack_indices(x, widths)
    return QuantizedLatent(dequantize(idx, bank), idx)


def _widths(alloc) -> tuple[int, ...]:
    return tuple(int(b) for b in getattr(alloc, "bits", alloc))


# ---------------------------------------------------------------------------
# Bank file
# ---------------------------------------------------------------------------


def save_bank(bank: CodebookBank, path) -> None:
    parts = [struct.pack("<4sII", BANK_MAGIC, BANK_VERSION, len(bank))]
    for cb in bank.codebooks:
        parts.append(struct.pack("<B", cb.bits))
        parts.append(cb.codewords.astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_bank(path) -> CodebookBank:
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise CorruptFileError(f"{path}: too short for a codebook bank")
    magic, version, M = struct.unpack_from("<4sII", raw)
    if magic != BANK_MAGIC:
        raise CorruptFileError(f"{path}: bad magic {magic!r}")
    if version != BANK_VERSION:
        raise DataError(f"{path}: unsupported bank version {version}")
    off = 12
    cbs = []
    for _ in range(M):
        if off >= len(raw):
            raise CorruptFileError(f"{path}: truncated codebook bank")
        b = raw[off]
        off += 1
        n = 1 << b
        if off + 8 * n > len(raw):
            raise CorruptFileError(f"{path}: truncated codebook bank")
        cbs.append(Codebook(np.frombuffer(raw, dtype="<f8", count=n, offset=off)))
        off += 8 * n
    if off != len(raw):
        raise CorruptFileError(f"{path}: trailing bytes after codebook bank")
    return CodebookBank(cbs)
