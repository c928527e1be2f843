"""Training losses: reconstruction (plain or logarithmic), the weighted
quantization penalty with fixed or spacing-adaptive weights, and the codebook loss."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, DimensionError
from .quantizer import Codebook, CodebookBank

MODES = ("fixed", "fixed-log", "adaptive", "adaptive-log")


@dataclass(frozen=True)
class LossConfig:
    """``mode`` picks the weight rule (fixed/adaptive) and whether the
    reconstruction term enters through its logarithm."""

    beta: float = 0.05
    eps: float = 1e-12
    mode: str = "adaptive-log"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown loss mode {self.mode!r}; expected one of {MODES}")
        if not self.beta > 0 or not self.eps > 0:
            raise ConfigError("beta and eps must be positive")

    @property
    def adaptive(self) -> bool:
        return self.mode.startswith("adaptive")

    @property
    def use_log(self) -> bool:
        return self.mode.endswith("-log")


def adaptive_weight(cb: Codebook, j: int, beta: float) -> float:
    """Weight for a value quantized to codeword ``j``.

    Interior codewords use beta times the gap between the two neighbours;
    the smallest and largest use twice beta times the gap to their only neighbour.
    A one-codeword codebook has no spacing and gets weight 0.
    """
    w = cb.codewords
    n = w.size
    if n == 1:
        return 0.0
    if j == 0:
        return 2 * beta * (w[1] - w[0])
    if j == n - 1:
        return 2 * beta * (w[j] - w[j - 1])
    return beta * (w[j + 1] - w[j - 1])


def codeword_weights(cb: Codebook, beta: float) -> np.ndarray:
    """``adaptive_weight`` for every codeword of ``cb``, as a lookup table."""
    w = cb.codewords
    if w.size == 1:
        return np.zeros(1)
    out = np.empty(w.size)
    out[1:-1] = beta * (w[2:] - w[:-2])
    out[0] = 2 * beta * (w[1] - w[0])
    out[-1] = 2 * beta * (w[-1] - w[-2])
    return out


def adaptive_weights(indices: np.ndarray, bank: CodebookBank, beta: float) -> np.ndarray:
    """Per-sample, per-output weights for quantization indices of shape (n, M)."""
    out = np.empty(indices.shape, dtype=np.float64)
    for m, cb in enumerate(bank.codebooks):
        out[..., m] = codeword_weights(cb, beta)[indices[..., m]]
    return out


def loss_weights(indices: np.ndarray, bank: CodebookBank, cfg: LossConfig) -> np.ndarray:
    if cfg.adaptive:
        return adaptive_weights(indices, bank, cfg.beta)
    return np.full(indices.shape, cfg.beta)


@dataclass
class LossValue:
    total: float
    recon_mse: float  # batch mean of ||H_hat - H||^2
    quant: float  # batch mean of sum_m weight_m (zq_m - z_m)^2
    grad_xhat: np.ndarray
    grad_z: np.ndarray


def composite_loss(x, x_hat, z, zq, weights, use_log: bool = True, eps: float = 1e-12) -> LossValue:
    """Reconstruction term plus weighted quantization penalty, with gradients.

    With ``use_log`` the reconstruction term is ``log(mean ||x_hat - x||^2 + eps)``,
    otherwise the plain batch mean. The quantization penalty is the batch mean of
    per-sample sums ``sum_m weights_m (zq_m - z_m)^2`` with ``zq`` held constant,
    so its gradient only reaches ``z``. ``weights`` broadcasts against ``z``.
    """
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    zq = np.asarray(zq, dtype=np.float64)
    if x.shape[0] == 0:
        raise DataError("empty batch")
    if x.shape != x_hat.shape or z.shape != zq.shape or x.shape[0] != z.shape[0]:
        raise DimensionError("inconsistent batch shapes")
    n = x.shape[0]
    diff = x_hat - x
    mse = float(np.sum(diff * diff) / n)
    if use_log:
        recon = float(np.log(mse + eps))
        grad_xhat = 2 * diff / (n * (mse + eps))
    else:
        recon = mse
        grad_xhat = 2 * diff / n
    resid = zq - z
    wts = np.broadcast_to(np.asarray(weights, dtype=np.float64), z.shape)
    quant = float(np.sum(wts * resid * resid) / n)
    grad_z = -2 * wts * resid / n
    return LossValue(recon + quant, mse, quant, grad_xhat, grad_z)


def codebook_loss(z, indices, bank: CodebookBank) -> tuple[float, list[np.ndarray]]:
    """Batch mean of sum_m (zq_m - z_m)^2 and its gradient for every codeword.

    Only codewords that some sample selected receive a non-zero gradient.
    """
    z = np.asarray(z, dtype=np.float64)
    indices = np.asarray(indices)
    if z.shape[0] == 0:
        raise DataError("empty batch")
    n = z.shape[0]
    total = 0.0
    grads = []
    for m, cb in enumerate(bank.codebooks):
        j = indices[:, m]
        r = cb.codewords[j] - z[:, m]
        total += float(np.sum(r * r))
        grads.append(np.bincount(j, weights=2 * r / n, minlength=len(cb)))
    return total / n, grads
