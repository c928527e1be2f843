"""Synthetic sparse multipath channels and the angle-delay transform.

Channels are generated in the spatial-frequency domain as a sum of rank-one
path terms, moved to the angle-delay domain with a unitary 2-D IDFT and
truncated to the first ``n_c`` delay rows. Datasets hold the truncated
angle-delay samples, which is the domain the autoencoder works in.
"""
from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, CorruptFileError, DataError, DimensionError

MAGIC = b"CSIQ"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIIQQ")
_TRAILER_LEN = struct.Struct("<I")

SPLIT_CODES = {"train": 0, "val": 1, "test": 2}


@dataclass(frozen=True)
class ChannelParams:
    """Generator settings.

    Path positions are drawn on the DFT grid (integer delay taps and integer
    spatial-frequency bins of a half-wavelength ULA) and then perturbed by a
    uniform offset of at most ``grid_jitter`` bins, so each path leaks only
    slightly into neighbouring angle-delay cells.
    """

    paths_min: int = 3
    paths_max: int = 6
    n_t: int = 32
    n_c_full: int = 256
    delay_spread: int = 16
    angle_spread: float = 4.0
    grid_jitter: float = 0.1

    def validate(self) -> None:
        if self.paths_min < 1 or self.paths_max < self.paths_min:
            raise ConfigError(f"bad path count range [{self.paths_min}, {self.paths_max}]")
        if self.n_t < 1 or self.n_c_full < 1:
            raise ConfigError("antenna and subcarrier counts must be >= 1")
        if self.delay_spread < 1 or self.delay_spread > self.n_c_full:
            raise ConfigError(f"delay_spread must lie in [1, {self.n_c_full}]")
        if self.angle_spread < 0 or not 0 <= self.grid_jitter < 0.5:
            raise ConfigError("angle_spread must be >= 0 and grid_jitter in [0, 0.5)")


DESK_PARAMS = ChannelParams(n_t=8, n_c_full=32, delay_spread=3, angle_spread=1.0)
DESK_N_C = 8


def _split_code(split: str) -> int:
    try:
        return SPLIT_CODES[split]
    except KeyError:
        raise ConfigError(f"unknown split {split!r}; expected one of {sorted(SPLIT_CODES)}") from None


def steering_vector(n_t: int, spatial_freq: float) -> np.ndarray:
    """ULA response exp(-j 2 pi u n); ``spatial_freq`` u is in cycles per antenna."""
    return np.exp(-2j * np.pi * spatial_freq * np.arange(n_t))


def delay_vector(n_c_full: int, delay: float) -> np.ndarray:
    """Per-subcarrier phase exp(-j 2 pi k tau / N) for a delay in sample taps."""
    return np.exp(-2j * np.pi * np.arange(n_c_full) * delay / n_c_full)


def _one_channel(params: ChannelParams, rng: np.random.Generator) -> np.ndarray:
    p = int(rng.integers(params.paths_min, params.paths_max + 1))
    centre = rng.uniform(0, params.n_t)
    half = params.angle_spread / 2
    bins = np.round(centre + rng.uniform(-half, half, p))
    bins = bins + rng.uniform(-params.grid_jitter, params.grid_jitter, p)
    taps = rng.integers(0, params.delay_spread, p)
    delays = taps + rng.uniform(-params.grid_jitter, params.grid_jitter, p)
    # exponential power-delay profile
    power = np.exp(-taps / max(params.delay_spread / 3, 1e-12))
    gains = np.sqrt(power / 2) * (rng.standard_normal(p) + 1j * rng.standard_normal(p))

    h = np.zeros((params.n_c_full, params.n_t), dtype=np.complex128)
    for g, tau, b in zip(gains, delays, bins):
        h += g * np.outer(delay_vector(params.n_c_full, tau), steering_vector(params.n_t, b / params.n_t))
    energy = np.linalg.norm(h)
    if energy == 0.0:
        return h
    return h / energy


def generate_channels(params: ChannelParams, count: int, seed: int, split: str = "train") -> np.ndarray:
    """Spatial-frequency channels, shape ``(count, n_c_full, n_t)``, unit energy each.

    Sample ``i`` uses its own generator seeded by ``(seed, split, i)`` so the
    output does not depend on evaluation order and splits never overlap.
    """
    params.validate()
    if count < 0:
        raise ConfigError(f"count must be >= 0, got {count}")
    code = _split_code(split)
    out = np.empty((count, params.n_c_full, params.n_t), dtype=np.complex128)
    for i in range(count):
        out[i] = _one_channel(params, np.random.default_rng([seed, code, i]))
    return out


def to_angle_delay(h: np.ndarray, n_c: int) -> np.ndarray:
    """Unitary 2-D IDFT over the last two axes, keeping the first ``n_c`` rows."""
    h = np.asarray(h)
    if h.ndim < 2:
        raise DimensionError("channel must have at least 2 dimensions")
    if not 1 <= n_c <= h.shape[-2]:
        raise DimensionError(f"n_c={n_c} outside [1, {h.shape[-2]}]")
    return np.fft.ifft2(h, norm="ortho")[..., :n_c, :]


def from_angle_delay(h: np.ndarray, n_c_full: int) -> np.ndarray:
    """Zero-pad rows to ``n_c_full`` and apply the unitary 2-D DFT."""
    h = np.asarray(h)
    if h.ndim < 2:
        raise DimensionError("channel must have at least 2 dimensions")
    n_c = h.shape[-2]
    if n_c_full < n_c:
        raise DimensionError(f"target rows {n_c_full} < truncated rows {n_c}")
    padded = np.zeros(h.shape[:-2] + (n_c_full, h.shape[-1]), dtype=np.complex128)
    padded[..., :n_c, :] = h
    return np.fft.fft2(padded, norm="ortho")


def flatten(h: np.ndarray) -> np.ndarray:
    """(n, N_c, N_t) complex -> (n, 2*N_c*N_t) real: real parts, then imaginary parts."""
    h = np.asarray(h)
    n = h.shape[0]
    return np.concatenate([h.real.reshape(n, -1), h.imag.reshape(n, -1)], axis=1)


def unflatten(x: np.ndarray, n_c: int, n_t: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    half = n_c * n_t
    if x.shape[-1] != 2 * half:
        raise DimensionError(f"expected vectors of length {2 * half}, got {x.shape[-1]}")
    return (x[..., :half] + 1j * x[..., half:]).reshape(x.shape[:-1] + (n_c, n_t))


@dataclass(eq=False)
class ChannelDataset:
    samples: np.ndarray  # (count, n_c, n_t) complex128, truncated angle-delay domain
    split: str = "train"
    seed: int = 0
    params: ChannelParams = field(default_factory=ChannelParams)

    @property
    def n_c(self) -> int:
        return self.samples.shape[1]

    @property
    def n_t(self) -> int:
        return self.samples.shape[2]

    def __len__(self) -> int:
        return self.samples.shape[0]

    def flat(self) -> np.ndarray:
        return flatten(self.samples)

    def identical(self, other: "ChannelDataset") -> bool:
        return (
            self.split == other.split
            and self.seed == other.seed
            and self.params == other.params
            and self.samples.shape == other.samples.shape
            and self.samples.tobytes() == other.samples.tobytes()
        )


def make_dataset(params: ChannelParams, n_c: int, count: int, seed: int, split: str = "train") -> ChannelDataset:
    if not 1 <= n_c < params.n_c_full:
        raise DimensionError(f"truncation rows n_c={n_c} must lie in [1, {params.n_c_full})")
    h = to_angle_delay(generate_channels(params, count, seed, split), n_c)
    if count == 0:
        h = np.zeros((0, n_c, params.n_t), dtype=np.complex128)
    return ChannelDataset(np.ascontiguousarray(h), split=split, seed=seed, params=params)


def make_splits(params: ChannelParams, n_c: int, sizes=(4000, 500, 500), seed: int = 0) -> dict[str, ChannelDataset]:
    return {
        split: make_dataset(params, n_c, n, seed, split)
        for split, n in zip(("train", "val", "test"), sizes)
    }


def save_dataset(d: ChannelDataset, path) -> None:
    count, n_c, n_t = d.samples.shape
    body = np.empty((count, n_c, n_t, 2), dtype="<f8")
    body[..., 0] = d.samples.real
    body[..., 1] = d.samples.imag
    meta = json.dumps(
        {"split": d.split, "params": dataclasses.asdict(d.params)}, sort_keys=True
    ).encode()
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, FORMAT_VERSION, n_c, n_t, count, d.seed))
        f.write(body.tobytes())
        f.write(_TRAILER_LEN.pack(len(meta)))
        f.write(meta)


def load_dataset(path) -> ChannelDataset:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise CorruptFileError(f"{path}: file shorter than header")
    magic, version, n_c, n_t, count, seed = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise CorruptFileError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported dataset version {version}")
    n_body = count * n_c * n_t * 2 * 8
    off = _HEADER.size
    if len(raw) < off + n_body + _TRAILER_LEN.size:
        raise CorruptFileError(f"{path}: truncated body ({len(raw)} bytes, header promises more)")
    body = np.frombuffer(raw, dtype="<f8", count=count * n_c * n_t * 2, offset=off)
    off += n_body
    (n_meta,) = _TRAILER_LEN.unpack_from(raw, off)
    off += _TRAILER_LEN.size
    if len(raw) != off + n_meta:
        raise CorruptFileError(f"{path}: metadata length field does not match file size")
    try:
        meta = json.loads(raw[off:].decode())
        params = ChannelParams(**meta["params"])
        split = meta["split"]
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptFileError(f"{path}: unreadable metadata: {exc}") from exc
    body = body.reshape(count, n_c, n_t, 2)
    samples = np.empty((count, n_c, n_t), dtype=np.complex128)
    samples.real = body[..., 0]
    samples.imag = body[..., 1]
    return ChannelDataset(samples, split=split, seed=seed, params=params)
