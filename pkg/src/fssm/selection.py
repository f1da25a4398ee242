"""Input-dependent step parameters and the state-matrix parameterization.

Each token ``x_n`` (a ``D``-vector) is mapped to

    delta_n = softplus(<w_delta, x_n> + bias_delta)
    b_n     = w_b @ x_n        (N-vector)
    c_n     = w_c @ x_n        (N-vector)

and the diagonal state matrix is ``a = -exp(a_log)`` with one row of ``N``
entries per channel.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import Dims, Rng
from .errors import BadHeader, BadMagic, NonFinite, ShapeMismatch

SOFTPLUS_LINEAR_ABOVE = 30.0
DELTA_INIT_RANGE = (1e-3, 1e-1)

WEIGHTS_MAGIC = b"FSSMW01\0"


def softplus(z):
    z = np.asarray(z)
    with np.errstate(over="ignore"):
        out = np.where(z > SOFTPLUS_LINEAR_ABOVE, z, np.log1p(np.exp(np.minimum(z, SOFTPLUS_LINEAR_ABOVE))))
    return out[()] if out.ndim == 0 else out


def softplus_grad(z):
    """Derivative of :func:`softplus` consistent with its linear branch."""
    z = np.asarray(z)
    with np.errstate(over="ignore"):
        out = np.where(z > SOFTPLUS_LINEAR_ABOVE, 1.0, 1.0 / (1.0 + np.exp(-np.minimum(z, SOFTPLUS_LINEAR_ABOVE))))
    return out[()] if out.ndim == 0 else out.astype(z.dtype, copy=False)


def inverse_softplus(y):
    y = np.asarray(y, dtype=np.float64)
    return np.where(y > SOFTPLUS_LINEAR_ABOVE, y, y + np.log(-np.expm1(-y)))


@dataclass(frozen=True, eq=False)
class SelectionWeights:
    """Projection weights for one scan direction.

    ``d_skip`` is an optional per-channel skip gain (``y += d_skip * x``);
    it is off by default so outputs are exactly ``y = C h``.
    """

    w_delta: np.ndarray  # (D,)
    bias_delta: float
    w_b: np.ndarray  # (N, D)
    w_c: np.ndarray  # (N, D)
    a_log: np.ndarray  # (D, N)
    d_skip: np.ndarray | None = field(default=None)

    def __post_init__(self):
        for name in ("w_delta", "w_b", "w_c", "a_log", "d_skip"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, np.asarray(v))
        object.__setattr__(self, "bias_delta", float(self.bias_delta))
        w_delta = self.w_delta
        D = w_delta.shape[0] if w_delta.ndim == 1 else -1
        a_log = self.a_log
        if w_delta.ndim != 1 or a_log.ndim != 2 or a_log.shape[0] != D:
            raise ShapeMismatch("w_delta must be (D,) and a_log (D, N)")
        N = a_log.shape[1]
        for name in ("w_b", "w_c"):
            if np.shape(getattr(self, name)) != (N, D):
                raise ShapeMismatch(f"{name} must have shape {(N, D)}, got {np.shape(getattr(self, name))}")
        if self.d_skip is not None and np.shape(self.d_skip) != (D,):
            raise ShapeMismatch(f"d_skip must have shape {(D,)}")
        arrays = [w_delta, a_log, self.w_b, self.w_c, [self.bias_delta]]
        if self.d_skip is not None:
            arrays.append(self.d_skip)
        if not all(np.all(np.isfinite(v)) for v in arrays):
            raise NonFinite("selection weights must be finite")

    @property
    def D(self) -> int:
        return self.w_delta.shape[0]

    @property
    def N(self) -> int:
        return self.a_log.shape[1]

    @property
    def a(self) -> np.ndarray:
        return -np.exp(self.a_log)

    def astype(self, dtype) -> "SelectionWeights":
        cast = lambda v: None if v is None else np.asarray(v, dtype=dtype)  # noqa: E731
        return replace(
            self,
            w_delta=cast(self.w_delta),
            w_b=cast(self.w_b),
            w_c=cast(self.w_c),
            a_log=cast(self.a_log),
            d_skip=cast(self.d_skip),
        )


@dataclass(frozen=True, eq=False)
class StepParams:
    """Selective parameters for one token, or for a whole sequence when batched."""

    delta: np.ndarray  # () or (T,)
    b: np.ndarray  # (N,) or (T, N)
    c: np.ndarray  # (N,) or (T, N)


def project_params(x_n, weights: SelectionWeights) -> StepParams:
    """Project a token ``(D,)`` or a stack of tokens ``(T, D)`` to step parameters."""
    x_n = np.asarray(x_n)
    if x_n.shape[-1:] != (weights.D,) or x_n.ndim not in (1, 2):
        raise ShapeMismatch(f"token width {x_n.shape} does not match D={weights.D}")
    s = x_n @ weights.w_delta + weights.bias_delta
    # softplus underflows to 0 below about -745; keep the step strictly positive
    delta = np.maximum(softplus(s), np.finfo(x_n.dtype if x_n.dtype.kind == "f" else np.float64).tiny)
    return StepParams(delta=delta[()] if np.ndim(delta) == 0 else delta, b=x_n @ weights.w_b.T, c=x_n @ weights.w_c.T)


def init_a(dims: Dims) -> np.ndarray:
    """S4D-real init: ``a_log[d, k] = ln(k + 1)`` so that ``a = -(1, 2, ..., N)`` on every channel."""
    row = np.log(np.arange(1, dims.N + 1, dtype=np.float64))
    return np.tile(row, (dims.D, 1))


def init_weights(dims: Dims, rng: Rng) -> SelectionWeights:
    """Uniform projections in ``[-1/sqrt(D), 1/sqrt(D)]``; the bias puts the zero-input step in [1e-3, 1e-1]."""
    s = 1.0 / np.sqrt(dims.D)
    w_delta = rng.uniform(-s, s, (dims.D,))
    w_b = rng.uniform(-s, s, (dims.N, dims.D))
    w_c = rng.uniform(-s, s, (dims.N, dims.D))
    lo, hi = DELTA_INIT_RANGE
    delta0 = lo + (hi - lo) * rng.next_real()
    return SelectionWeights(
        w_delta=w_delta,
        bias_delta=float(inverse_softplus(delta0)),
        w_b=w_b,
        w_c=w_c,
        a_log=init_a(dims),
    )


# --- binary fixtures -------------------------------------------------------
# Layout: magic (8 bytes), D and N as little-endian uint32, then little-endian
# float64 values: w_delta (D), bias_delta (1), w_b (N*D, row-major),
# w_c (N*D, row-major), a_log (D*N, row-major).


def weights_to_bytes(weights: SelectionWeights) -> bytes:
    D, N = weights.D, weights.N
    flat = np.concatenate(
        [
            np.asarray(weights.w_delta, dtype="<f8").ravel(),
            np.asarray([weights.bias_delta], dtype="<f8"),
            np.asarray(weights.w_b, dtype="<f8").ravel(),
            np.asarray(weights.w_c, dtype="<f8").ravel(),
            np.asarray(weights.a_log, dtype="<f8").ravel(),
        ]
    ).astype("<f8")
    return WEIGHTS_MAGIC + struct.pack("<II", D, N) + flat.tobytes()


def weights_from_bytes(blob: bytes) -> SelectionWeights:
    if blob[:8] != WEIGHTS_MAGIC:
        raise BadMagic("not a weights blob (bad magic)")
    if len(blob) < 16:
        raise BadHeader("truncated weights header")
    D, N = struct.unpack("<II", blob[8:16])
    if D < 1 or N < 1:
        raise BadHeader(f"invalid dims D={D}, N={N}")
    expected = D + 1 + 3 * N * D
    body = blob[16:]
    if len(body) != 8 * expected:
        raise BadHeader(f"expected {8 * expected} payload bytes, got {len(body)}")
    flat = np.frombuffer(body, dtype="<f8").astype(np.float64)
    i = 0

    def take(n, shape):
        nonlocal i
        out = flat[i : i + n].reshape(shape)
        i += n
        return out

    w_delta = take(D, (D,))
    bias = float(take(1, (1,))[0])
    w_b = take(N * D, (N, D))
    w_c = take(N * D, (N, D))
    a_log = take(D * N, (D, N))
    return SelectionWeights(w_delta=w_delta, bias_delta=bias, w_b=w_b, w_c=w_c, a_log=a_log)


def save_weights(weights: SelectionWeights, path) -> None:
    Path(path).write_bytes(weights_to_bytes(weights))


def load_weights(path) -> SelectionWeights:
    return weights_from_bytes(Path(path).read_bytes())
