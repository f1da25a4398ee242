"""Throughput benchmark for the scan kernels."""
from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

import numpy as np

from .core import Dims, Rng
from .discretization import Method
from .scan import scan_parallel, scan_sequential
from .selection import init_weights

EQUIVALENCE_RTOL = 1e-12


@dataclass(frozen=True)
class BenchRow:
    T: int
    method: Method
    kernel: str
    workers: int
    tokens_per_sec: float


def _median_seconds(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def run_bench(
    T_list,
    *,
    N: int = 4,
    D: int = 4,
    chunk: int = 4096,
    workers: int = 1,
    methods=tuple(Method),
    repeats: int = 5,
    seed: int = 42,
    dtype=np.float64,
) -> list[BenchRow]:
    """Time sequential and parallel kernels after checking they agree.

    Parallel rows are emitted for 1 worker and, if larger, for ``workers``.
    Raises ``RuntimeError`` if the kernels disagree beyond 1e-12 relative
    (only checked in 64-bit mode).
    """
    rows = []
    worker_counts = sorted({1, max(1, int(workers))})
    for T in T_list:
        rng = Rng(seed)
        weights = init_weights(Dims(T, D, N), rng).astype(dtype)
        x = rng.uniform(-1.0, 1.0, (T, D)).astype(dtype)
        for method in methods:
            method = Method(method)
            ref = scan_sequential(x, weights, method).y.values
            par = scan_parallel(x, weights, method, chunk, worker_counts[-1]).y.values
            if np.dtype(dtype) == np.float64:
                scale = max(np.max(np.abs(ref)), np.finfo(np.float64).tiny)
                err = np.max(np.abs(par - ref)) / scale
                if err > EQUIVALENCE_RTOL:
                    raise RuntimeError(f"parallel/sequential mismatch {err:.3g} at T={T}, {method}")
            secs = _median_seconds(lambda: scan_sequential(x, weights, method), repeats)
            rows.append(BenchRow(T, method, "sequential", 1, T / secs))
            for w in worker_counts:
                secs = _median_seconds(lambda: scan_parallel(x, weights, method, chunk, w), repeats)
                rows.append(BenchRow(T, method, "parallel", w, T / secs))
    return rows


def throughput_ratio(rows, numerator=Method.FSSM, denominator=Method.FOH_EXACT, kernel="sequential"):
    """``{T: tokens/s(numerator) / tokens/s(denominator)}`` for one kernel at 1 worker."""
    pick = {(r.T, r.method): r.tokens_per_sec for r in rows if r.kernel == kernel and r.workers == 1}
    return {
        T: pick[(T, numerator)] / pick[(T, denominator)]
        for (T, m) in pick
        if m is numerator and (T, denominator) in pick
    }
