"""Selective scan kernels.

Per channel ``d`` and token ``n`` the state advances as

    h[n+1] = abar[n] * h[n] + bbar1[n] * x[n] + bbar2[n] * x[n+1]
    y[n]   = <c[n], h[n+1]>

with ``h[0] = 0``. The last token has no successor, so it always takes the
zero-order-hold step ``h[T] = abar * h[T-1] + bbar * x[T-1]``; a length-1
sequence therefore gives the same output under every method.

Folding ``bbar2[n] * x[n+1]`` into step ``n`` keeps the recurrence first
order, so each step is the affine map ``h -> mult * h + offset`` and steps
compose associatively (see :func:`compose`). :func:`scan_parallel` uses that
to run chunks independently and stitch them with a Blelloch tree.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import Sequence, sequence_new
from .discretization import Method, hold_coefficient_slopes, hold_coefficients, phi1, phi1_prime
from .errors import ShapeMismatch
from .selection import SelectionWeights, project_params, softplus_grad


@dataclass(frozen=True, eq=False)
class ScanElement:
    """Affine map ``h -> mult * h + offset`` (elementwise)."""

    mult: np.ndarray
    offset: np.ndarray

    @classmethod
    def identity(cls, shape, dtype=np.float64) -> "ScanElement":
        return cls(np.ones(shape, dtype), np.zeros(shape, dtype))


def compose(e1: ScanElement, e2: ScanElement) -> ScanElement:
    """Apply ``e1`` then ``e2``."""
    return ScanElement(e2.mult * e1.mult, e2.mult * e1.offset + e2.offset)


@dataclass(frozen=True, eq=False)
class ScanOutput:
    y: Sequence
    h_final: np.ndarray  # (D, N)


class _Terms(NamedTuple):
    z: np.ndarray  # (T, D, N)
    abar: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    db: np.ndarray  # (T, 1, N), delta_n * b_n
    x_next: np.ndarray  # (T, D)
    offset: np.ndarray  # (T, D, N)


def _step_terms(x, delta, a, b, method: Method) -> _Terms:
    method = Method(method)
    z = delta[:, None, None] * a[None, :, :]
    f1, f2 = hold_coefficients(method, z)
    if method.uses_lookahead:
        # no x[T] exists: last token falls back to the ZOH step
        f1 = f1.copy()
        f2 = f2.copy()
        f1[-1] = phi1(z[-1])
        f2[-1] = 0.0
    db = (delta[:, None] * b)[:, None, :]
    x_next = np.zeros_like(x)
    x_next[:-1] = x[1:]
    offset = (f1 * db) * x[:, :, None]
    if method.uses_lookahead:
        offset = offset + (f2 * db) * x_next[:, :, None]
    return _Terms(z, np.exp(z), f1, f2, db, x_next, offset)


def _sequential_states(abar, offset):
    states = np.empty_like(offset)
    h = np.zeros_like(offset[0])
    for n in range(offset.shape[0]):
        h = abar[n] * h + offset[n]
        states[n] = h
    return states


def blelloch_exclusive_scan(elems: ScanElement) -> ScanElement:
    """Work-efficient exclusive scan along axis 0 under :func:`compose`.

    Entry ``j`` of the result is the composition of elements ``0 .. j-1``
    (identity for ``j = 0``). The combine tree depends only on the length.
    """
    n = elems.mult.shape[0]
    size = 1 << max(0, math.ceil(math.log2(n))) if n > 0 else 0
    rest = elems.mult.shape[1:]
    m = np.ones((size,) + rest, dtype=elems.mult.dtype)
    b = np.zeros((size,) + rest, dtype=elems.offset.dtype)
    m[:n] = elems.mult
    b[:n] = elems.offset

    stride = 1
    while stride < size:
        right = np.arange(2 * stride - 1, size, 2 * stride)
        left = right - stride
        m[right], b[right] = m[right] * m[left], m[right] * b[left] + b[right]
        stride *= 2

    if size:
        m[size - 1] = 1
        b[size - 1] = 0
    stride = size // 2
    while stride >= 1:
        right = np.arange(2 * stride - 1, size, 2 * stride)
        left = right - stride
        pm, pb = m[right], b[right]
        tm, tb = m[left], b[left]
        m[left], b[left] = pm, pb
        m[right], b[right] = tm * pm, tm * pb + tb
        stride //= 2
    return ScanElement(m[:n], b[:n])


def _chunk_groups(n_chunks, workers):
    workers = max(1, min(int(workers), n_chunks))
    bounds = np.linspace(0, n_chunks, workers + 1).round().astype(int)
    return [slice(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]


def _map(fn, groups, workers):
    if workers <= 1 or len(groups) == 1:
        for g in groups:
            fn(g)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(fn, groups))


def _chunked_states(abar, offset, chunk: int, workers: int = 1):
    T = offset.shape[0]
    rest = offset.shape[1:]
    n_chunks = -(-T // chunk)
    pad = n_chunks * chunk - T
    if pad:
        abar = np.concatenate([abar, np.ones((pad,) + rest, abar.dtype)])
        offset = np.concatenate([offset, np.zeros((pad,) + rest, offset.dtype)])
    A = abar.reshape((n_chunks, chunk) + rest)
    U = offset.reshape((n_chunks, chunk) + rest)
    local = np.empty_like(U)
    mcum = np.empty_like(A)

    def intra(sl):
        h = np.zeros_like(U[sl, 0])
        m = np.ones_like(A[sl, 0])
        for i in range(chunk):
            h = A[sl, i] * h + U[sl, i]
            local[sl, i] = h
            m = A[sl, i] * m
            mcum[sl, i] = m

    groups = _chunk_groups(n_chunks, workers)
    _map(intra, groups, workers)

    carry = blelloch_exclusive_scan(ScanElement(mcum[:, -1], local[:, -1])).offset

    def fixup(sl):
        start = max(sl.start, 1)  # chunk 0 starts from h = 0
        if start < sl.stop:
            local[start : sl.stop] += mcum[start : sl.stop] * carry[start : sl.stop, None]

    _map(fixup, groups, workers)
    return local.reshape((n_chunks * chunk,) + rest)[:T]


def _as_values(x):
    return x.values if isinstance(x, Sequence) else sequence_new(x).values


def _broadcast_params(x, delta, a, b, c):
    T, D = x.shape
    delta = np.broadcast_to(np.asarray(delta, dtype=x.dtype), (T,))
    a = np.asarray(a, dtype=x.dtype)
    if a.ndim == 1:
        a = np.broadcast_to(a, (D, a.shape[0]))
    if a.ndim != 2 or a.shape[0] != D:
        raise ShapeMismatch(f"a must be (N,) or ({D}, N), got {a.shape}")
    N = a.shape[1]
    try:
        b = np.broadcast_to(np.asarray(b, dtype=x.dtype), (T, N))
        c = np.broadcast_to(np.asarray(c, dtype=x.dtype), (T, N))
    except ValueError:
        raise ShapeMismatch(f"b and c must be (N,) or ({T}, N) with N={N}") from None
    return delta, a, b, c


def _run(x, delta, a, b, c, method, kernel="sequential", chunk=None, workers=1):
    delta, a, b, c = _broadcast_params(x, delta, a, b, c)
    terms = _step_terms(x, delta, a, b, method)
    if kernel == "sequential":
        states = _sequential_states(terms.abar, terms.offset)
    elif kernel == "parallel":
        states = _chunked_states(terms.abar, terms.offset, chunk or x.shape[0], workers)
    else:
        raise ValueError(f"unknown kernel {kernel!r}")
    y = (states * c[:, None, :]).sum(axis=-1)
    return y, states


def selective_scan(
    x, delta, a, b, c, method: Method, *, kernel: str = "sequential", chunk: int | None = None, workers: int = 1
) -> ScanOutput:
    """Scan with explicitly supplied step parameters (selection bypassed).

    ``delta`` is a scalar or ``(T,)``; ``a`` is ``(N,)`` or ``(D, N)``;
    ``b`` and ``c`` are ``(N,)`` or ``(T, N)``. Scalars and 1-vectors
    broadcast, so a time-invariant system is just constant arguments.
    """
    x = _as_values(x)
    y, states = _run(x, delta, a, b, c, method, kernel, chunk, workers)
    return ScanOutput(y=sequence_new(y, dtype=y.dtype), h_final=states[-1])


def _selective(x, weights: SelectionWeights, method, **kw) -> ScanOutput:
    x = _as_values(x)
    if x.shape[1] != weights.D:
        raise ShapeMismatch(f"sequence has D={x.shape[1]} but weights expect D={weights.D}")
    p = project_params(x, weights)
    y, states = _run(x, p.delta, weights.a.astype(x.dtype, copy=False), p.b, p.c, method, **kw)
    if weights.d_skip is not None:
        y = y + weights.d_skip * x
    return ScanOutput(y=sequence_new(y, dtype=y.dtype), h_final=states[-1])


def scan_sequential(x, weights: SelectionWeights, method: Method) -> ScanOutput:
    """Token-by-token scan of ``x`` (``T x D``) with per-token selective parameters."""
    return _selective(x, weights, method, kernel="sequential")


def scan_parallel(x, weights: SelectionWeights, method: Method, chunk: int, workers: int = 1) -> ScanOutput:
    """Chunked scan: sequential inside chunks, a fixed Blelloch tree across them.

    The result is a function of ``chunk`` only; ``workers`` changes which
    thread handles which chunks, never the arithmetic. With ``chunk >= T``
    it performs exactly the operations of :func:`scan_sequential`.
    """
    if int(chunk) < 1:
        raise ValueError("chunk must be a positive integer")
    return _selective(x, weights, method, kernel="parallel", chunk=int(chunk), workers=workers)


@dataclass(frozen=True, eq=False)
class ScanGradients:
    d_x: np.ndarray
    d_w_delta: np.ndarray
    d_bias_delta: float
    d_w_b: np.ndarray
    d_w_c: np.ndarray
    d_a_log: np.ndarray
    d_d_skip: np.ndarray | None = None


def scan_backward(x, weights: SelectionWeights, method: Method, grad_y) -> ScanGradients:
    """Reverse-mode gradients of ``L = sum(grad_y * y)``.

    Re-runs the forward pass keeping every state, then sweeps the adjoint
    ``lam[n] = abar[n+1] * lam[n+1] + c[n] * grad_y[n]`` backwards.
    """
    method = Method(method)
    x = _as_values(x)
    T, D = x.shape
    if D != weights.D:
        raise ShapeMismatch(f"sequence has D={D} but weights expect D={weights.D}")
    g = _as_values(grad_y)
    if g.shape != x.shape:
        raise ShapeMismatch(f"grad_y has shape {g.shape}, expected {x.shape}")

    a = weights.a.astype(x.dtype, copy=False)
    p = project_params(x, weights)
    t = _step_terms(x, p.delta, a, p.b, method)
    states = _sequential_states(t.abar, t.offset)
    h_prev = np.zeros_like(states)
    h_prev[1:] = states[:-1]

    d_c = np.einsum("td,tdn->tn", g, states)
    lam = np.empty_like(states)
    acc = np.zeros_like(states[0])
    for n in range(T - 1, -1, -1):
        acc = p.c[n][None, :] * g[n][:, None] + (t.abar[n + 1] * acc if n + 1 < T else 0.0)
        lam[n] = acc

    bb1 = t.f1 * t.db
    bb2 = t.f2 * t.db
    d_bb1 = lam * x[:, :, None]
    d_bb2 = lam * t.x_next[:, :, None]
    d_x = (lam * bb1).sum(axis=-1)
    d_x[1:] += (lam * bb2).sum(axis=-1)[:-1]

    fp1, fp2 = hold_coefficient_slopes(method, t.z)
    if method.uses_lookahead:
        fp1 = fp1.copy()
        fp2 = fp2.copy()
        fp1[-1] = phi1_prime(t.z[-1])
        fp2[-1] = 0.0
    d_z = (d_bb1 * fp1 + d_bb2 * fp2) * t.db + lam * h_prev * t.abar
    d_db = (d_bb1 * t.f1 + d_bb2 * t.f2).sum(axis=1)  # (T, N)

    d_delta = (d_z * a[None]).sum(axis=(1, 2)) + (d_db * p.b).sum(axis=1)
    d_a = (d_z * p.delta[:, None, None]).sum(axis=0)
    d_b = d_db * p.delta[:, None]

    s = x @ weights.w_delta + weights.bias_delta
    d_s = d_delta * softplus_grad(s)
    d_x += np.outer(d_s, weights.w_delta) + d_b @ weights.w_b + d_c @ weights.w_c

    d_skip = None
    if weights.d_skip is not None:
        d_x += g * weights.d_skip
        d_skip = (g * x).sum(axis=0)

    return ScanGradients(
        d_x=d_x,
        d_w_delta=x.T @ d_s,
        d_bias_delta=float(d_s.sum()),
        d_w_b=d_b.T @ x,
        d_w_c=d_c.T @ x,
        d_a_log=d_a * a,
        d_d_skip=d_skip,
    )
