"""Alternating training of autoencoder, codebooks and bit allocation, plus the
comparison methods (two-stage Lloyd, rounding, shared vector codebook, PCA,
and the unquantized autoencoder)."""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy.cluster.vq import kmeans2

from . import channels
from .allocation import BitAllocation, allocate_bits, check_budget, load_allocation, save_allocation
from .errors import ConfigError, CorruptFileError, DataError, NumericalFault
from .evaluation import nmse_db
from .losses import LossConfig, codebook_loss, composite_loss, loss_weights
from .nn import AdamState, Autoencoder, Dense, adam_step, load_checkpoint, save_checkpoint
from .quantizer import (Codebook, CodebookBank, dequantize, kmeans_train, load_bank, quantize_vector,
                        save_bank)

METHODS = ("proposed", "proposed-var1", "proposed-var2", "lloyd", "lloyd-log", "round", "vector", "pca", "nq")
NEVER = 0  # refresh_every value meaning "never refresh the allocation"


@dataclass
class TrainConfig:
    method: str = "proposed"
    M: int = 32
    B: int = 2
    epochs: int = 60
    batch_size: int = 200
    lr: float = 1e-2
    lr_decay: float = 0.97
    beta: float = 0.05
    loss_mode: str = "adaptive-log"
    refresh_every: int = 1
    seed: int = 0
    b_min: int = 1
    b_max: int = 8
    vector_L: int = 2
    vector_cap: int = 1 << 16
    kmeans_batch: int = 2000
    alloc_subsample: int = 2000
    hidden_mult: int = 4
    leaky_slope: float = 0.01
    eps: float = 1e-12
    data: str = ""

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        for name in ("M", "B", "epochs", "batch_size", "kmeans_batch", "alloc_subsample", "hidden_mult", "vector_L"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if not (self.lr > 0 and 0 < self.lr_decay <= 1 and self.beta > 0 and self.refresh_every >= 0):
            raise ConfigError("lr, lr_decay, beta must be positive and refresh_every >= 0")
        LossConfig(self.beta, self.eps, self.loss_mode)
        check_budget(self.M, self.M * self.B, self.b_min, self.b_max)

    def to_text(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)}\n" for f in fields(self))

    @classmethod
    def from_text(cls, text: str) -> "TrainConfig":
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = (s.strip() for s in line.partition("="))
            if not sep or key not in types:
                raise ConfigError(f"config line {lineno}: unknown or malformed entry {line!r}")
            kind = types[key]
            try:
                kw[key] = int(val) if kind == "int" else float(val) if kind == "float" else val
            except ValueError:
                raise ConfigError(f"config line {lineno}: {key} expects {kind}, got {val!r}") from None
        return cls(**kw)


def expand(cfg: TrainConfig) -> TrainConfig:
    """Fill in the settings a method tag implies.

    The two ablations are the proposed method with fields overridden: var1
    keeps the equal allocation and a fixed weight, var2 drops the logarithm.
    """
    if cfg.method == "proposed-var1":
        return replace(cfg, loss_mode="fixed-log", refresh_every=NEVER)
    if cfg.method == "proposed-var2":
        return replace(cfg, loss_mode="adaptive")
    if cfg.method == "vector":
        return replace(cfg, loss_mode="fixed", refresh_every=NEVER)
    if cfg.method in ("lloyd", "round"):
        return replace(cfg, loss_mode="fixed", refresh_every=NEVER)
    if cfg.method in ("lloyd-log", "nq"):
        return replace(cfg, loss_mode="fixed-log", refresh_every=NEVER)
    if cfg.method == "pca":
        return replace(cfg, refresh_every=NEVER)
    return cfg


@dataclass
class Splits:
    """Flattened real training/validation/test vectors."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    n_c: int
    n_t: int

    def __post_init__(self):
        for name in ("train", "val", "test"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise DataError(f"{name} split contains non-finite values")

    @classmethod
    def from_datasets(cls, train, val, test) -> "Splits":
        return cls(train.flat(), val.flat(), test.flat(), train.n_c, train.n_t)

    @classmethod
    def generate(cls, params=channels.DESK_PARAMS, n_c=channels.DESK_N_C, sizes=(4000, 500, 500),
                 seed: int = 0) -> "Splits":
        d = channels.make_splits(params, n_c, sizes, seed)
        return cls.from_datasets(d["train"], d["val"], d["test"])

    @classmethod
    def load(cls, directory) -> "Splits":
        directory = Path(directory)
        try:
            d = {s: channels.load_dataset(directory / f"{s}.csiq") for s in ("train", "val", "test")}
        except FileNotFoundError as exc:
            raise DataError(f"missing dataset file: {exc.filename}") from None
        return cls.from_datasets(d["train"], d["val"], d["test"])

    @property
    def dim(self) -> int:
        return self.train.shape[1]


# ---------------------------------------------------------------------------
# Quantizers used inside the training loop
# ---------------------------------------------------------------------------


class ScalarQuantizer:
    """Per-output codebooks under a bit allocation, with learnable codewords."""

    kind = "scalar"

    def __init__(self, bank: CodebookBank, alloc: BitAllocation, loss_cfg: LossConfig | None,
                 lr: float = 1e-3, decay: float = 1.0, learn: bool = True):
        self.bank = bank
        self.alloc = alloc
        self.loss_cfg = loss_cfg
        self.learn = learn
        self.adam = AdamState(lr=lr, decay=decay)

    def quantize(self, z):
        q = quantize_vector(z, self.bank)
        if self.loss_cfg is None:
            w = np.zeros(z.shape)
        else:
            w = loss_weights(q.indices, self.bank, self.loss_cfg)
        return q.values, (q.indices, w)

    def indices_to_values(self, idx):
        return dequantize(idx, self.bank)

    @property
    def widths(self) -> tuple[int, ...]:
        return self.alloc.bits

    def update_codewords(self, z, indices) -> float:
        loss, grads = codebook_loss(z, indices, self.bank)
        if not self.learn:
            return loss
        params = {m: self.bank[m].codewords.copy() for m in range(len(self.bank))}
        adam_step(params, dict(enumerate(grads)), self.adam)
        for m, w in params.items():
            order = np.argsort(w, kind="stable")
            if np.any(order != np.arange(w.size)):
                # keep moments attached to their codewords after re-sorting
                w = w[order]
                self.adam.m[m] = self.adam.m[m][order]
                self.adam.v[m] = self.adam.v[m][order]
            self.bank[m] = Codebook.from_values(w)
        return loss

    def replace_codebook(self, m: int, cb: Codebook) -> None:
        self.bank[m] = cb
        self.adam.reset(m)

    def snapshot(self):
        return self.bank.copy(), self.alloc


class VectorQuantizer:
    """One codebook of ``2**(L*B)`` vectors of length L shared by every group of L outputs."""

    kind = "vector"

    def __init__(self, codebook: np.ndarray, L: int, B: int, beta: float, lr: float = 1e-3, decay: float = 1.0):
        self.codebook = np.array(codebook, dtype=np.float64)
        self.L, self.B, self.beta = L, B, beta
        self.adam = AdamState(lr=lr, decay=decay)

    def nearest(self, z):
        n, M = z.shape
        v = z.reshape(n * (M // self.L), self.L)
        d = ((v[:, None, :] - self.codebook[None, :, :]) ** 2).sum(axis=2)
        return np.argmin(d, axis=1).reshape(n, M // self.L)

    def indices_to_values(self, idx):
        n = idx.shape[0]
        return self.codebook[idx].reshape(n, -1)

    def quantize(self, z):
        idx = self.nearest(z)
        return self.indices_to_values(idx), (idx, np.full(z.shape, self.beta))

    def update_codewords(self, z, indices) -> float:
        n, M = z.shape
        v = z.reshape(-1, self.L)
        j = indices.reshape(-1)
        r = self.codebook[j] - v
        grad = np.zeros_like(self.codebook)
        np.add.at(grad, j, 2 * r / n)
        params = {"vq": self.codebook}
        adam_step(params, {"vq": grad}, self.adam)
        return float(np.sum(r * r) / n)

    def snapshot(self):
        return self.codebook.copy()


def vector_codebook_entries(L: int, B: int) -> int:
    return L * (1 << (L * B))


# ---------------------------------------------------------------------------
# Trained system
# ---------------------------------------------------------------------------


@dataclass
class TrainedSystem:
    method: str
    ae: Autoencoder
    config: TrainConfig
    bank: CodebookBank | None = None
    alloc: BitAllocation | None = None
    vector_codebook: np.ndarray | None = None
    history: list[dict] = field(default_factory=list)
    runtime_s: float = 0.0

    @property
    def quantized(self) -> bool:
        return self.bank is not None or self.vector_codebook is not None

    def _vq(self) -> VectorQuantizer:
        return VectorQuantizer(self.vector_codebook, self.config.vector_L, self.config.B, self.config.beta)

    @property
    def widths(self) -> tuple[int, ...]:
        if self.bank is not None:
            return self.alloc.bits
        if self.vector_codebook is not None:
            L = self.config.vector_L
            return (L * self.config.B,) * (self.ae.M // L)
        raise ConfigError("an unquantized system has no bitstream")

    def quantize(self, z):
        """Return (quantized latents, transmitted indices)."""
        if self.bank is not None:
            q = quantize_vector(z, self.bank)
            return q.values, q.indices
        if self.vector_codebook is not None:
            vq = self._vq()
            idx = vq.nearest(np.atleast_2d(z))
            return vq.indices_to_values(idx), idx
        return z, None

    def dequantize(self, idx):
        if self.bank is not None:
            return dequantize(idx, self.bank)
        return self._vq().indices_to_values(idx)

    def reconstruct(self, x, quantized: bool = True):
        z = self.ae.encode(x)
        if quantized and self.quantized:
            z = self.quantize(z)[0]
        return self.ae.decode(z)

    def nmse(self, x, quantized: bool = True) -> float:
        return nmse_db(self.reconstruct(x, quantized), x)

    def quant_loss(self, x) -> float:
        """Mean over samples of ||zq - z||^2."""
        if not self.quantized:
            return 0.0
        z = self.ae.encode(x)
        zq = self.quantize(z)[0]
        return float(np.mean(np.sum((zq - z) ** 2, axis=1)))


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


def _subsample(rng, x, size):
    if x.shape[0] <= size:
        return x
    return x[np.sort(rng.choice(x.shape[0], size, replace=False))]


def _fit(ae: Autoencoder, data: Splits, cfg: TrainConfig, quantizer=None, use_log=True,
         refresh=None, select_quantized=True):
    """Mini-batch training with ADAM; returns (best ae, best quantizer snapshot, history)."""
    rng = np.random.default_rng([cfg.seed, 1])
    adam = AdamState(lr=cfg.lr, decay=cfg.lr_decay)
    n = data.train.shape[0]
    best = (np.inf, None, None)
    history = []
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        sums = np.zeros(3)
        batches = 0
        for start in range(0, n, cfg.batch_size):
            xb = data.train[perm[start:start + cfg.batch_size]]
            tape = ae.forward(xb, quantizer.quantize if quantizer is not None else None)
            weights = tape.extra[1] if quantizer is not None else 0.0
            lv = composite_loss(xb, tape.x_hat, tape.z, tape.zq, weights, use_log, cfg.eps)
            if not np.isfinite(lv.total):
                raise NumericalFault(f"non-finite loss at epoch {epoch} (recon {lv.recon_mse}, quant {lv.quant})")
            grads = ae.backward(tape, lv.grad_xhat, lv.grad_z)
            adam_step(ae.params(), grads, adam)
            if quantizer is not None:
                quantizer.update_codewords(tape.z, tape.extra[0])
            sums += (lv.recon_mse, lv.quant, lv.total)
            batches += 1
        row = {"epoch": epoch, "recon_mse": sums[0] / batches, "quant_loss": sums[1] / batches,
               "total_loss": sums[2] / batches, "lr": adam.lr}
        adam.end_epoch()
        if quantizer is not None:
            quantizer.adam.end_epoch()
        if refresh is not None and cfg.refresh_every and epoch % cfg.refresh_every == 0:
            row.update(refresh(ae, quantizer, rng))
        z = ae.encode(data.val)
        if quantizer is not None and select_quantized:
            z = quantizer.quantize(z)[0]
        row["val_nmse_db"] = nmse_db(ae.decode(z), data.val)
        history.append(row)
        if row["val_nmse_db"] < best[0]:
            best = (row["val_nmse_db"], ae.copy(), quantizer.snapshot() if quantizer is not None else None)
    return best[1], best[2], history


def _scalar_refresh(cfg: TrainConfig, data: Splits):
    def refresh(ae, quantizer: ScalarQuantizer, rng):
        z = ae.encode(_subsample(rng, data.train, cfg.alloc_subsample))
        res = allocate_bits([z[:, m] for m in range(cfg.M)], cfg.M * cfg.B, cfg.b_min, cfg.b_max,
                            init=quantizer.alloc, batch=None)
        changed = [m for m in range(cfg.M) if res.allocation.bits[m] != quantizer.alloc.bits[m]]
        for m in changed:
            quantizer.replace_codebook(m, res.bank[m])
        quantizer.alloc = res.allocation
        return {"alloc_loss_history": res.loss_history, "alloc_swaps": len(res.swaps),
                "bits": list(res.allocation.bits)}
    return refresh


def _init_bank(z: np.ndarray, bits, cfg: TrainConfig) -> CodebookBank:
    return CodebookBank([kmeans_train(z[:, m], 1 << b, batch=None) for m, b in enumerate(bits)])


def train_proposed(cfg: TrainConfig, data: Splits) -> TrainedSystem:
    """Alternating training: end-to-end epochs with the quantizer in the loop,
    with the bit allocation re-optimized every ``refresh_every`` epochs."""
    cfg = expand(cfg)
    cfg.validate()
    t0 = time.perf_counter()
    ae = Autoencoder.build(data.dim, cfg.M, cfg.seed, cfg.hidden_mult, cfg.leaky_slope)
    rng = np.random.default_rng([cfg.seed, 2])
    alloc = BitAllocation.equal(cfg.M, cfg.M * cfg.B, cfg.b_min, cfg.b_max)
    z0 = ae.encode(_subsample(rng, data.train, cfg.kmeans_batch))
    loss_cfg = LossConfig(cfg.beta, cfg.eps, cfg.loss_mode)
    quantizer = ScalarQuantizer(_init_bank(z0, alloc.bits, cfg), alloc, loss_cfg, cfg.lr, cfg.lr_decay)
    refresh = _scalar_refresh(cfg, data) if cfg.refresh_every else None
    ae, (bank, alloc), history = _fit(ae, data, cfg, quantizer, loss_cfg.use_log, refresh)
    return TrainedSystem(cfg.method, ae, cfg, bank, alloc, history=history, runtime_s=time.perf_counter() - t0)


def train_nq(cfg: TrainConfig, data: Splits) -> TrainedSystem:
    """Autoencoder with log reconstruction loss and no quantizer."""
    cfg = expand(cfg)
    cfg.validate()
    t0 = time.perf_counter()
    ae = Autoencoder.build(data.dim, cfg.M, cfg.seed, cfg.hidden_mult, cfg.leaky_slope)
    ae, _, history = _fit(ae, data, cfg, None, LossConfig(cfg.beta, cfg.eps, cfg.loss_mode).use_log)
    return TrainedSystem(cfg.method, ae, cfg, history=history, runtime_s=time.perf_counter() - t0)


def train_lloyd(cfg: TrainConfig, data: Splits, use_log: bool | None = None,
                stage1: TrainedSystem | None = None) -> TrainedSystem:
    """Two-stage baseline: train without quantization, then fit per-output
    Lloyd-Max codebooks with B bits each. The decoder is not retrained.

    ``stage1`` reuses an already trained unquantized system (its autoencoder
    and history) so that several bit budgets can share one first stage.
    """
    if use_log is not None:
        cfg = replace(cfg, method="lloyd-log" if use_log else "lloyd")
    cfg = expand(cfg)
    cfg.validate()
    t0 = time.perf_counter()
    if stage1 is None:
        ae = Autoencoder.build(data.dim, cfg.M, cfg.seed, cfg.hidden_mult, cfg.leaky_slope)
        ae, _, history = _fit(ae, data, cfg, None, LossConfig(cfg.beta, cfg.eps, cfg.loss_mode).use_log)
    else:
        ae, history = stage1.ae, stage1.history
    rng = np.random.default_rng([cfg.seed, 2])
    alloc = BitAllocation.equal(cfg.M, cfg.M * cfg.B, cfg.b_min, cfg.b_max)
    z = ae.encode(_subsample(rng, data.train, cfg.kmeans_batch))
    bank = CodebookBank([kmeans_train(z[:, m], 1 << cfg.B, max_iters=1000, batch=None) for m in range(cfg.M)])
    return TrainedSystem(cfg.method, ae, cfg, bank, alloc, history=history, runtime_s=time.perf_counter() - t0)


def train_round(cfg: TrainConfig, data: Splits) -> TrainedSystem:
    """Sigmoid-bounded latents rounded to 2**B uniform levels on [0, 1], trained
    end-to-end with the straight-through estimator and plain MSE."""
    cfg = expand(cfg)
    cfg.validate()
    t0 = time.perf_counter()
    ae = Autoencoder.build(data.dim, cfg.M, cfg.seed, cfg.hidden_mult, cfg.leaky_slope, latent_act="sigmoid")
    alloc = BitAllocation.equal(cfg.M, cfg.M * cfg.B, cfg.b_min, cfg.b_max)
    quantizer = ScalarQuantizer(CodebookBank.uniform(cfg.M, cfg.B), alloc, None, learn=False)
    ae, (bank, alloc), history = _fit(ae, data, cfg, quantizer, use_log=False)
    return TrainedSystem(cfg.method, ae, cfg, bank, alloc, history=history, runtime_s=time.perf_counter() - t0)


def train_vector(cfg: TrainConfig, data: Splits, L: int | None = None) -> TrainedSystem:
    """Shared vector codebook over groups of L outputs, STE training with the
    fixed-weight loss."""
    if L is not None:
        cfg = replace(cfg, vector_L=L)
    cfg = expand(replace(cfg, method="vector"))
    cfg.validate()
    L = cfg.vector_L
    if cfg.M % L:
        raise ConfigError(f"group length L={L} must divide M={cfg.M}")
    entries = vector_codebook_entries(L, cfg.B)
    if entries > cfg.vector_cap:
        raise ConfigError(f"vector codebook of {entries} entries exceeds the cap {cfg.vector_cap} (L={L}, B={cfg.B})")
    t0 = time.perf_counter()
    ae = Autoencoder.build(data.dim, cfg.M, cfg.seed, cfg.hidden_mult, cfg.leaky_slope)
    rng = np.random.default_rng([cfg.seed, 2])
    z0 = ae.encode(_subsample(rng, data.train, cfg.kmeans_batch)).reshape(-1, L)
    K = 1 << (L * cfg.B)
    centers, _ = kmeans2(z0, K, minit="++", seed=np.random.default_rng([cfg.seed, 3]))
    quantizer = VectorQuantizer(centers, L, cfg.B, cfg.beta, cfg.lr, cfg.lr_decay)
    ae, codebook, history = _fit(ae, data, cfg, quantizer, use_log=False)
    return TrainedSystem(cfg.method, ae, cfg, vector_codebook=codebook, history=history,
                         runtime_s=time.perf_counter() - t0)


def fit_pca(train: np.ndarray, M: int) -> tuple[Autoencoder, np.ndarray]:
    """Linear encoder/decoder from the top-M principal components.

    Returns the autoencoder and the eigenvalues (component variances), descending.
    """
    x = np.asarray(train, dtype=np.float64)
    if M > x.shape[1]:
        raise ConfigError(f"M={M} exceeds the data dimension {x.shape[1]}")
    mean = x.mean(axis=0)
    cov = (x - mean).T @ (x - mean) / x.shape[0]
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1][:M]
    V = vecs[:, order]
    enc = Dense(V.copy(), -mean @ V)
    dec = Dense(V.T.copy(), mean.copy())
    return Autoencoder([enc], [dec]), vals[order]


def train_pca(cfg: TrainConfig, data: Splits) -> TrainedSystem:
    """PCA encoder/decoder with greedy bit allocation over the component scores."""
    cfg = expand(cfg)
    cfg.validate()
    t0 = time.perf_counter()
    ae, _ = fit_pca(data.train, cfg.M)
    rng = np.random.default_rng([cfg.seed, 2])
    z = ae.encode(_subsample(rng, data.train, cfg.alloc_subsample))
    res = allocate_bits([z[:, m] for m in range(cfg.M)], cfg.M * cfg.B, cfg.b_min, cfg.b_max, batch=None)
    history = [{"epoch": 0, "alloc_loss_history": res.loss_history, "bits": list(res.allocation.bits),
                "val_nmse_db": nmse_db(ae.decode(quantize_vector(ae.encode(data.val), res.bank).values), data.val)}]
    return TrainedSystem(cfg.method, ae, cfg, res.bank, res.allocation, history=history,
                         runtime_s=time.perf_counter() - t0)


TRAINERS = {
    "proposed": train_proposed,
    "proposed-var1": train_proposed,
    "proposed-var2": train_proposed,
    "lloyd": train_lloyd,
    "lloyd-log": train_lloyd,
    "round": train_round,
    "vector": train_vector,
    "pca": train_pca,
    "nq": train_nq,
}


def train(cfg: TrainConfig, data: Splits) -> TrainedSystem:
    cfg.validate()
    return TRAINERS[cfg.method](cfg, data)


# ---------------------------------------------------------------------------
# Run directories
# ---------------------------------------------------------------------------

HISTORY_COLUMNS = ("epoch", "recon_mse", "quant_loss", "total_loss", "lr", "val_nmse_db",
                   "alloc_swaps", "alloc_final_loss")


def save_run(system: TrainedSystem, out) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(system.config.to_text())
    save_checkpoint(system.ae, out / "checkpoint.bin")
    if system.bank is not None:
        save_bank(system.bank, out / "codebooks.bin")
        save_allocation(system.alloc, out / "allocation.txt")
    if system.vector_codebook is not None:
        np.save(out / "vector_codebook.npy", system.vector_codebook)
    with open(out / "history.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for row in system.history:
            alloc_hist = row.get("alloc_loss_history")
            vals = dict(row, alloc_final_loss=alloc_hist[-1] if alloc_hist else "")
            w.writerow([_fmt(vals.get(c, "")) for c in HISTORY_COLUMNS])
    (out / "meta.json").write_text(json.dumps({"method": system.method}, sort_keys=True) + "\n")
    # wall-clock time is the only non-deterministic artifact, so it lives on its own
    (out / "timing.json").write_text(json.dumps({"runtime_s": system.runtime_s}) + "\n")
    return out


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def load_run(path) -> TrainedSystem:
    path = Path(path)
    try:
        cfg = TrainConfig.from_text((path / "config.txt").read_text())
        meta = json.loads((path / "meta.json").read_text())
        ae = load_checkpoint(path / "checkpoint.bin")
        bank = alloc = vq = None
        if (path / "codebooks.bin").exists():
            bank = load_bank(path / "codebooks.bin")
            alloc = load_allocation(path / "allocation.txt")
            if bank.bits != alloc.bits:
                raise CorruptFileError(f"{path}: codebook bank and allocation disagree")
        if (path / "vector_codebook.npy").exists():
            vq = np.load(path / "vector_codebook.npy")
        with open(path / "history.csv", newline="") as f:
            history = list(csv.DictReader(f))
        timing = path / "timing.json"
        runtime = json.loads(timing.read_text())["runtime_s"] if timing.exists() else 0.0
    except FileNotFoundError as exc:
        raise DataError(f"incomplete run directory: missing {exc.filename}") from None
    except ValueError as exc:
        if isinstance(exc, (ConfigError, DataError)):
            raise
        raise CorruptFileError(f"{path}: {exc}") from exc
    return TrainedSystem(meta["method"], ae, cfg, bank, alloc, vq, history, runtime)
