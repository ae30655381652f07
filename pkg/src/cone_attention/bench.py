"""Wall-clock throughput of :func:`cone_attention.attention.attend`."""

from __future__ import annotations

import csv
import time
from typing import NamedTuple

import numpy as np

from .attention import AttentionBatch, attend
from .kernels import KernelConfig

__all__ = ["Throughput", "measure_throughput", "scaling_exponent", "write_csv", "CSV_COLUMNS"]

CSV_COLUMNS = ("kernel", "n", "m", "d", "threads", "median_seconds", "tokens_per_second")


class Throughput(NamedTuple):
    median_seconds: float
    tokens_per_second: float


def random_batch(n: int, m: int, d: int, seed: int, scale: float = 0.3) -> AttentionBatch:
    rng = np.random.default_rng(seed)
    return AttentionBatch(
        scale * rng.standard_normal((n, d)),
        scale * rng.standard_normal((m, d)),
        rng.standard_normal((m, d)),
    )


def measure_throughput(
    n: int, m: int, d: int, config: KernelConfig, repetitions: int = 5, seed: int = 0, threads: int = 1
) -> Throughput:
    """Median time of ``attend`` on a seeded random batch, after one warmup.

    ``tokens_per_second`` counts query rows.
    """
    if repetitions < 3:
        raise ValueError("need at least 3 repetitions")
    batch = random_batch(n, m, d, seed)
    attend(batch, config, threads)
    times = []
    for _ in range(repetitions):
        start = time.perf_counter()
        attend(batch, config, threads)
        times.append(time.perf_counter() - start)
    median = float(np.median(times))
    return Throughput(median, n / median)


def scaling_exponent(times, sizes) -> float:
    """Least-squares slope of ``log(time)`` against ``log(size)``."""
    times = np.asarray(times, dtype=np.float64)
    sizes = np.asarray(sizes, dtype=np.float64)
    if times.shape != sizes.shape or times.ndim != 1:
        raise ValueError("times and sizes must be 1-D and the same length")
    if times.size < 3:
        raise ValueError("need at least 3 size points")
    if np.any(times <= 0) or np.any(sizes <= 0):
        raise ValueError("times and sizes must be positive")
    slope, _ = np.polyfit(np.log(sizes), np.log(times), 1)
    return float(slope)


def write_csv(rows, path) -> None:
    """Write dict rows with :data:`CSV_COLUMNS` (times as ``%.17g``)."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            out = dict(row)
            for key in ("median_seconds", "tokens_per_second"):
                out[key] = f"{float(out[key]):.17g}"
            writer.writerow(out)
