"""Four-direction selective scan over a 2D feature map.

The ``H x W x D`` map is flattened along four traversal orders, each order
is scanned with its own weights, and the four outputs are scattered back to
their grid positions and summed.
"""
from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import Dims, Rng, Sequence, sequence_new
from .discretization import Method
from .errors import NonFinite, ShapeMismatch
from .scan import scan_parallel, scan_sequential
from .selection import SelectionWeights, init_weights


class Direction(enum.Enum):
    ROW_FORWARD = "row-forward"
    ROW_BACKWARD = "row-backward"
    COL_FORWARD = "col-forward"
    COL_BACKWARD = "col-backward"


DIRECTIONS = tuple(Direction)


@dataclass(frozen=True, eq=False)
class FeatureMap:
    values: np.ndarray  # (H, W, D)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.result_type(self.values, np.float64), copy=True)
        if v.ndim != 3 or 0 in v.shape:
            raise ShapeMismatch(f"feature map must be H x W x D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NonFinite("feature map contains NaN or Inf")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def H(self) -> int:
        return self.values.shape[0]

    @property
    def W(self) -> int:
        return self.values.shape[1]

    @property
    def D(self) -> int:
        return self.values.shape[2]


def ordering(direction: Direction, H: int, W: int) -> np.ndarray:
    """Row-major grid indices in the order ``direction`` visits them."""
    grid = np.arange(H * W).reshape(H, W)
    if direction is Direction.ROW_FORWARD:
        return grid.ravel()
    if direction is Direction.ROW_BACKWARD:
        return grid.ravel()[::-1].copy()
    if direction is Direction.COL_FORWARD:
        return grid.T.ravel()
    if direction is Direction.COL_BACKWARD:
        return grid.T.ravel()[::-1].copy()
    raise ValueError(direction)


@dataclass(frozen=True, eq=False)
class DirectionSet:
    """Per-direction weights; every direction must be present."""

    weights: dict

    def __post_init__(self):
        missing = [d for d in DIRECTIONS if d not in self.weights]
        if missing:
            raise ShapeMismatch(f"missing weights for {missing}")
        dims = {(w.D, w.N) for w in self.weights.values()}
        if len(dims) != 1:
            raise ShapeMismatch(f"direction weights disagree on (D, N): {sorted(dims)}")

    @classmethod
    def shared(cls, weights: SelectionWeights) -> "DirectionSet":
        return cls({d: weights for d in DIRECTIONS})

    @classmethod
    def init(cls, dims: Dims, rng: Rng) -> "DirectionSet":
        """Independent weights per direction, drawn in the fixed direction order."""
        return cls({d: init_weights(dims, rng.split()) for d in DIRECTIONS})

    @property
    def D(self) -> int:
        return self.weights[Direction.ROW_FORWARD].D

    def __getitem__(self, direction: Direction) -> SelectionWeights:
        return self.weights[direction]


def cross_scan(fm: FeatureMap, direction: Direction) -> Sequence:
    flat = fm.values.reshape(fm.H * fm.W, fm.D)
    return sequence_new(flat[ordering(direction, fm.H, fm.W)])


def cross_merge(outputs, dirs, H: int, W: int) -> FeatureMap:
    """Scatter each directional output back to the grid and sum.

    ``outputs`` maps (or zips, in :data:`DIRECTIONS` order) directions to
    ``T x D`` sequences with ``T = H * W``.
    """
    if not isinstance(outputs, dict):
        outputs = dict(zip(DIRECTIONS, outputs))
    acc = None
    for direction in DIRECTIONS:
        y = np.asarray(outputs[direction].values if isinstance(outputs[direction], Sequence) else outputs[direction])
        if y.ndim != 2 or y.shape[0] != H * W:
            raise ShapeMismatch(f"{direction.value} output has shape {y.shape}, expected ({H * W}, D)")
        if acc is None:
            acc = np.zeros((H * W, y.shape[1]), dtype=y.dtype)
        elif y.shape[1] != acc.shape[1]:
            raise ShapeMismatch("directional outputs disagree on D")
        grid = np.empty_like(y)
        grid[ordering(direction, H, W)] = y
        acc += grid
    return FeatureMap(acc.reshape(H, W, -1))


def scan2d_forward(
    fm: FeatureMap,
    dirs: DirectionSet,
    method: Method,
    *,
    kernel: str = "sequential",
    chunk: int | None = None,
    workers: int = 1,
    directions=DIRECTIONS,
) -> FeatureMap:
    """Scan ``fm`` along each of ``directions`` and merge.

    Directions not listed contribute zeros, which makes single-direction
    runs reduce to a plain 1D scan of the flattened map.
    """
    if fm.D != dirs.D:
        raise ShapeMismatch(f"feature map has D={fm.D} but weights expect D={dirs.D}")

    def run(direction):
        seq = cross_scan(fm, direction)
        if kernel == "parallel":
            return scan_parallel(seq, dirs[direction], method, chunk or seq.T).y
        return scan_sequential(seq, dirs[direction], method).y

    if workers > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(directions))) as pool:
            results = dict(zip(directions, pool.map(run, directions)))
    else:
        results = {d: run(d) for d in directions}
    zero = np.zeros((fm.H * fm.W, fm.D))
    outputs = {d: results.get(d, zero) for d in DIRECTIONS}
    return cross_merge(outputs, dirs, fm.H, fm.W)


def rotate180(fm: FeatureMap) -> FeatureMap:
    return FeatureMap(fm.values[::-1, ::-1])
