"""Small dense autoencoder with hand-written backprop and an ADAM optimizer.

The quantizer sits between encoder and decoder. In the backward pass it is
treated as the identity (straight-through estimator): the gradient arriving
at the quantized latent is handed to the encoder output unchanged.
"""
from __future__ import annotations

import copy
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import CorruptFileError, DataError, DimensionError, NumericalFault

ACTIVATIONS = ("linear", "leaky_relu", "sigmoid")
CKPT_MAGIC = b"CSAE"
CKPT_VERSION = 1


@dataclass
class Dense:
    W: np.ndarray  # (fan_in, fan_out)
    b: np.ndarray  # (fan_out,)
    act: str = "linear"
    slope: float = 0.01

    def forward(self, x):
        pre = x @ self.W + self.b
        if self.act == "linear":
            y = pre
        elif self.act == "leaky_relu":
            y = np.where(pre > 0, pre, self.slope * pre)
        else:
            y = 1.0 / (1.0 + np.exp(-pre))
        return y, (x, pre, y)

    def backward(self, cache, gy):
        x, pre, y = cache
        if self.act == "leaky_relu":
            gy = gy * np.where(pre > 0, 1.0, self.slope)
        elif self.act == "sigmoid":
            gy = gy * y * (1.0 - y)
        return gy @ self.W.T, x.T @ gy, gy.sum(axis=0)


def glorot_dense(rng, fan_in, fan_out, act="linear", slope=0.01) -> Dense:
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return Dense(rng.uniform(-lim, lim, (fan_in, fan_out)), np.zeros(fan_out), act, slope)


def _run(layers, x):
    caches = []
    for layer in layers:
        x, c = layer.forward(x)
        caches.append(c)
    return x, caches


def _back(layers, caches, g, prefix, grads):
    for i in reversed(range(len(layers))):
        g, gW, gb = layers[i].backward(caches[i], g)
        grads[f"{prefix}.{i}.W"] = gW
        grads[f"{prefix}.{i}.b"] = gb
    return g


@dataclass
class Tape:
    z: np.ndarray
    zq: np.ndarray
    x_hat: np.ndarray
    enc_caches: list
    dec_caches: list
    extra: object = None  # whatever the quantize hook returned besides zq
    grad_zq: np.ndarray | None = None
    grad_z: np.ndarray | None = None


class Autoencoder:
    def __init__(self, encoder: list[Dense], decoder: list[Dense]):
        if encoder[-1].W.shape[1] != decoder[0].W.shape[0]:
            raise DimensionError("encoder output and decoder input dimensions differ")
        self.encoder = encoder
        self.decoder = decoder

    @classmethod
    def build(cls, input_dim: int, M: int, seed: int = 0, hidden_mult: int = 4, slope: float = 0.01,
              latent_act: str = "linear") -> "Autoencoder":
        """dense(d->hM) + leaky-ReLU + dense(hM->M), mirrored for the decoder."""
        rng = np.random.default_rng(seed)
        h = hidden_mult * M
        enc = [glorot_dense(rng, input_dim, h, "leaky_relu", slope), glorot_dense(rng, h, M, latent_act)]
        dec = [glorot_dense(rng, M, h, "leaky_relu", slope), glorot_dense(rng, h, input_dim)]
        return cls(enc, dec)

    @property
    def input_dim(self) -> int:
        return self.encoder[0].W.shape[0]

    @property
    def M(self) -> int:
        return self.encoder[-1].W.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for prefix, layers in (("enc", self.encoder), ("dec", self.decoder)):
            for i, layer in enumerate(layers):
                out[f"{prefix}.{i}.W"] = layer.W
                out[f"{prefix}.{i}.b"] = layer.b
        return out

    def copy(self) -> "Autoencoder":
        return copy.deepcopy(self)

    def encode(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.input_dim:
            raise DimensionError(f"input length {x.shape[-1]} != {self.input_dim}")
        return _run(self.encoder, x)[0]

    def decode(self, zq) -> np.ndarray:
        zq = np.asarray(zq, dtype=np.float64)
        if zq.shape[-1] != self.M:
            raise DimensionError(f"latent length {zq.shape[-1]} != {self.M}")
        return _run(self.decoder, zq)[0]

    def forward(self, x, quantize: Callable | None = None) -> Tape:
        """Forward pass recording what backward needs.

        ``quantize(z)`` returns ``(zq, extra)``; without it the latent passes
        through unchanged.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise DimensionError(f"expected a batch of shape (n, {self.input_dim})")
        z, enc_c = _run(self.encoder, x)
        zq, extra = quantize(z) if quantize is not None else (z, None)
        x_hat, dec_c = _run(self.decoder, zq)
        return Tape(z, zq, x_hat, enc_c, dec_c, extra)

    def backward(self, tape: Tape, grad_xhat, grad_z=None) -> dict[str, np.ndarray]:
        """Parameter gradients. ``grad_z`` is any loss gradient taken directly at z
        (the quantization penalty); the decoder's gradient at zq is added to it
        unchanged."""
        grads: dict[str, np.ndarray] = {}
        g_zq = _back(self.decoder, tape.dec_caches, grad_xhat, "dec", grads)
        g_z = g_zq if grad_z is None else g_zq + grad_z
        tape.grad_zq, tape.grad_z = g_zq, g_z
        _back(self.encoder, tape.enc_caches, g_z, "enc", grads)
        return grads


def forward_with_ste(ae: Autoencoder, x, quantize: Callable) -> Tape:
    return ae.forward(x, quantize)


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay: float = 0.998
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def end_epoch(self) -> None:
        self.lr *= self.decay

    def reset(self, key) -> None:
        self.m.pop(key, None)
        self.v.pop(key, None)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState) -> None:
    """One in-place ADAM update of ``params``."""
    for k, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalFault(f"non-finite gradient for {k} at step {state.step + 1}")
    state.step += 1
    t = state.step
    c1 = 1 - state.beta1**t
    c2 = 1 - state.beta2**t
    for k, g in grads.items():
        p = params[k]
        if g.shape != p.shape:
            raise DimensionError(f"gradient shape {g.shape} != parameter shape {p.shape} for {k}")
        m = state.m.get(k)
        v = state.v.get(k)
        if m is None or m.shape != g.shape:
            m = np.zeros_like(p)
            v = np.zeros_like(p)
        m = state.beta1 * m + (1 - state.beta1) * g
        v = state.beta2 * v + (1 - state.beta2) * g * g
        state.m[k], state.v[k] = m, v
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


# ---------------------------------------------------------------------------
# Checkpoint
# ---------------------------------------------------------------------------

_LAYER = struct.Struct("<IIBd")


def save_checkpoint(ae: Autoencoder, path) -> None:
    parts = [struct.pack("<4sIII", CKPT_MAGIC, CKPT_VERSION, len(ae.encoder), len(ae.decoder))]
    for layer in ae.encoder + ae.decoder:
        fan_in, fan_out = layer.W.shape
        parts.append(_LAYER.pack(fan_in, fan_out, ACTIVATIONS.index(layer.act), layer.slope))
        parts.append(layer.W.astype("<f8").tobytes())
        parts.append(layer.b.astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path) -> Autoencoder:
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise CorruptFileError(f"{path}: too short for a checkpoint")
    magic, version, n_enc, n_dec = struct.unpack_from("<4sIII", raw)
    if magic != CKPT_MAGIC:
        raise CorruptFileError(f"{path}: bad magic {magic!r}")
    if version != CKPT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    off = 16
    layers = []
    for _ in range(n_enc + n_dec):
        if off + _LAYER.size > len(raw):
            raise CorruptFileError(f"{path}: truncated checkpoint")
        fan_in, fan_out, act, slope = _LAYER.unpack_from(raw, off)
        off += _LAYER.size
        n = fan_in * fan_out + fan_out
        if off + 8 * n > len(raw) or act >= len(ACTIVATIONS):
            raise CorruptFileError(f"{path}: truncated or corrupt layer")
        flat = np.frombuffer(raw, dtype="<f8", count=n, offset=off).astype(np.float64)
        off += 8 * n
        W = flat[: fan_in * fan_out].reshape(fan_in, fan_out).copy()
        layers.append(Dense(W, flat[fan_in * fan_out:].copy(), ACTIVATIONS[act], slope))
    if off != len(raw):
        raise CorruptFileError(f"{path}: trailing bytes after checkpoint")
    return Autoencoder(layers[:n_enc], layers[n_enc:])
