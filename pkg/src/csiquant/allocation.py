"""Greedy bit allocation across encoder outputs.

Each iteration takes one bit from the output whose quantization loss grows
least when it loses a bit and gives it to the output whose loss shrinks most
when it gains one. The swap is kept only if the total loss drops by more than
``tol``; otherwise the loop stops. Budget and per-output bounds never change.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import AllocationSaturated, ConfigError, CorruptFileError
from .quantizer import Codebook, CodebookBank, estimate_quant_loss, kmeans_1d, quantile_seeds

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class BitAllocation:
    bits: tuple[int, ...]
    b_min: int = 1
    b_max: int = 8

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))
        if self.b_min < 1 or self.b_max < self.b_min:
            raise ConfigError(f"bad bounds [{self.b_min}, {self.b_max}]")
        bad = [b for b in self.bits if not self.b_min <= b <= self.b_max]
        if bad:
            raise ConfigError(f"bits {bad} outside [{self.b_min}, {self.b_max}]")

    @classmethod
    def equal(cls, M: int, budget: int, b_min: int = 1, b_max: int = 8) -> "BitAllocation":
        """Spread ``budget`` evenly; any remainder goes to the first outputs."""
        check_budget(M, budget, b_min, b_max)
        base, rem = divmod(budget, M)
        return cls(tuple(base + (m < rem) for m in range(M)), b_min, b_max)

    @property
    def M(self) -> int:
        return len(self.bits)

    @property
    def budget(self) -> int:
        return sum(self.bits)

    def swapped(self, d: int, a: int) -> "BitAllocation":
        bits = list(self.bits)
        bits[d] -= 1
        bits[a] += 1
        return BitAllocation(tuple(bits), self.b_min, self.b_max)

    def to_text(self) -> str:
        lines = [f"# budget {self.budget} b_min {self.b_min} b_max {self.b_max}"]
        lines += [f"{m} {b}" for m, b in enumerate(self.bits)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "BitAllocation":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        try:
            head = lines[0].lstrip("#").split()
            meta = dict(zip(head[0::2], (int(v) for v in head[1::2])))
            rows = [tuple(int(v) for v in ln.split()) for ln in lines[1:]]
        except (IndexError, ValueError) as exc:
            raise CorruptFileError(f"unreadable allocation file: {exc}") from exc
        if [m for m, _ in rows] != list(range(len(rows))):
            raise CorruptFileError("allocation rows must list outputs 0..M-1 in order")
        alloc = cls(tuple(b for _, b in rows), meta["b_min"], meta["b_max"])
        if alloc.budget != meta["budget"]:
            raise CorruptFileError(f"allocation sums to {alloc.budget}, header says {meta['budget']}")
        return alloc


def save_allocation(alloc: BitAllocation, path) -> None:
    Path(path).write_text(alloc.to_text())


def load_allocation(path) -> BitAllocation:
    return BitAllocation.from_text(Path(path).read_text())


def check_budget(M: int, budget: int, b_min: int, b_max: int) -> None:
    if M < 1:
        raise ConfigError("need at least one output")
    if not M * b_min <= budget <= M * b_max:
        raise ConfigError(f"budget {budget} infeasible for {M} outputs with bits in [{b_min}, {b_max}]")


class StaticLossTable:
    """Loss table from precomputed numbers; ``rows[m][b]`` is the loss of output m at b bits."""

    def __init__(self, rows: Sequence[Mapping[int, float]]):
        self.rows = [dict(r) for r in rows]

    def loss(self, m: int, b: int) -> float:
        return self.rows[m][b]


class AllocationLossTable:
    """Per-output quantization loss as a function of bit count, computed lazily.

    All codebooks for output ``m`` are trained on the same fixed sample set, so
    the table does not drift within one allocation run. The ``b``-bit codebook
    is the better of a fresh quantile-seeded K-means run and a run seeded with
    the ``(b-1)``-bit codewords plus extra quantile centers; the latter can only
    improve on the ``(b-1)``-bit loss, which makes every row non-increasing in ``b``.
    """

    def __init__(self, sample_sets: Sequence[np.ndarray], b_min: int = 1, b_max: int = 8,
                 max_iters: int = 100):
        self.samples = [np.asarray(s, dtype=np.float64).reshape(-1) for s in sample_sets]
        if any(s.size == 0 for s in self.samples):
            raise ConfigError("every output needs a non-empty sample set")
        self.b_min, self.b_max = b_min, b_max
        self.max_iters = max_iters
        self._rows: list[dict[int, tuple[float, Codebook]]] = [{} for _ in self.samples]
        self.kmeans_runs = 0

    def __len__(self) -> int:
        return len(self.samples)

    def _fit(self, x: np.ndarray, k: int, init=None) -> Codebook:
        self.kmeans_runs += 1
        return Codebook(kmeans_1d(x, k, max_iters=self.max_iters, init=init).centers)

    def _compute(self, m: int, b: int) -> tuple[float, Codebook]:
        x = self.samples[m]
        k = 1 << b
        fresh = self._fit(x, k)
        cands = [fresh]
        if b - 1 >= self.b_min:
            prev = self.entry(m, b - 1)[1].codewords
            extra = np.setdiff1d(quantile_seeds(x, k), prev)
            if extra.size < k - prev.size:
                extra = np.union1d(extra, np.setdiff1d(np.unique(x), prev))
            if extra.size >= k - prev.size:
                pick = extra[np.linspace(0, extra.size - 1, k - prev.size).round().astype(np.int64)]
                init = np.union1d(prev, pick)
                if init.size == k:
                    cands += [self._fit(x, k, init=init), Codebook(init)]
        losses = [estimate_quant_loss(x, cb) for cb in cands]
        i = int(np.argmin(losses))
        return losses[i], cands[i]

    def entry(self, m: int, b: int) -> tuple[float, Codebook]:
        if not 1 <= b <= self.b_max:
            raise ConfigError(f"bit count {b} outside [1, {self.b_max}]")
        row = self._rows[m]
        if b not in row:
            row[b] = self._compute(m, b)
        return row[b]

    def loss(self, m: int, b: int) -> float:
        return self.entry(m, b)[0]

    def codebook(self, m: int, b: int) -> Codebook:
        return self.entry(m, b)[1]

    def bank(self, alloc: BitAllocation) -> CodebookBank:
        return CodebookBank([self.codebook(m, b) for m, b in enumerate(alloc.bits)])

    def total(self, alloc: BitAllocation) -> float:
        return float(sum(self.loss(m, b) for m, b in enumerate(alloc.bits)))


def select_decrement(table, alloc: BitAllocation) -> int:
    """Eligible output whose loss rises least when it gives up one bit (lowest index on ties)."""
    best, best_m = np.inf, -1
    for m, b in enumerate(alloc.bits):
        if b <= alloc.b_min:
            continue
        inc = table.loss(m, b - 1) - table.loss(m, b)
        if inc < best:
            best, best_m = inc, m
    if best_m < 0:
        raise AllocationSaturated("every output is already at the minimum bit count")
    return best_m


def select_increment(table, alloc: BitAllocation) -> int:
    """Eligible output whose loss falls most when it gains one bit (lowest index on ties)."""
    best, best_m = -np.inf, -1
    for m, b in enumerate(alloc.bits):
        if b >= alloc.b_max:
            continue
        dec = table.loss(m, b) - table.loss(m, b + 1)
        if dec > best:
            best, best_m = dec, m
    if best_m < 0:
        raise AllocationSaturated("every output is already at the maximum bit count")
    return best_m


@dataclass
class AllocationResult:
    allocation: BitAllocation
    bank: CodebookBank
    loss_history: list[float] = field(default_factory=list)
    swaps: list[tuple[int, int]] = field(default_factory=list)
    table: AllocationLossTable | None = None

    @property
    def total_loss(self) -> float:
        return self.loss_history[-1]


def run_allocation(table, init: BitAllocation, max_iters: int | None = None,
                   tol: float = DEFAULT_TOL) -> tuple[BitAllocation, list[float], list[tuple[int, int]]]:
    """The swap loop over an existing loss table."""
    alloc = init
    if max_iters is None:
        max_iters = 10 * alloc.M
    total = float(sum(table.loss(m, b) for m, b in enumerate(alloc.bits)))
    history = [total]
    swaps = []
    for _ in range(max_iters):
        try:
            d = select_decrement(table, alloc)
            a = select_increment(table, alloc)
        except AllocationSaturated:
            break
        if d == a:
            break
        delta = (table.loss(d, alloc.bits[d] - 1) - table.loss(d, alloc.bits[d])
                 - (table.loss(a, alloc.bits[a]) - table.loss(a, alloc.bits[a] + 1)))
        if not delta < -tol:
            break
        alloc = alloc.swapped(d, a)
        total = total + delta
        history.append(total)
        swaps.append((d, a))
    return alloc, history, swaps


def allocate_bits(sample_sets: Sequence[np.ndarray], budget: int, b_min: int = 1, b_max: int = 8,
                  max_iters: int | None = None, tol: float = DEFAULT_TOL,
                  init: BitAllocation | Sequence[int] | None = None,
                  batch: int | None = 2000, seed: int = 0) -> AllocationResult:
    """Allocate ``budget`` bits over ``len(sample_sets)`` outputs.

    Sample sets larger than ``batch`` are subsampled once (seeded) and that
    subsample is reused for every codebook of the output. Starts from an equal
    split unless ``init`` is given.
    """
    M = len(sample_sets)
    check_budget(M, budget, b_min, b_max)
    sets = []
    for m, s in enumerate(sample_sets):
        s = np.asarray(s, dtype=np.float64).reshape(-1)
        if batch is not None and s.size > batch:
            s = np.random.default_rng([seed, m]).choice(s, batch, replace=False)
        sets.append(s)
    if init is None:
        start = BitAllocation.equal(M, budget, b_min, b_max)
    else:
        start = BitAllocation(tuple(getattr(init, "bits", init)), b_min, b_max)
        if start.budget != budget or start.M != M:
            raise ConfigError("initial allocation does not match the budget/output count")
    table = AllocationLossTable(sets, b_min, b_max)
    alloc, history, swaps = run_allocation(table, start, max_iters, tol)
    return AllocationResult(alloc, table.bank(alloc), history, swaps, table)
