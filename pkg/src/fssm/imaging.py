"""Grayscale demo pipeline for the four-direction scan."""
from __future__ import annotations

import numpy as np

from .core import Dims, Rng
from .discretization import Method
from .scan2d import DirectionSet, FeatureMap, scan2d_forward
from .selection import SelectionWeights


def image2d_features(
    image,
    seed: int,
    method: Method,
    *,
    channels: int = 4,
    state_dim: int = 4,
    weights: SelectionWeights | None = None,
    workers: int = 1,
) -> np.ndarray:
    """Lift ``image`` to ``channels`` by a seeded gain per channel, scan in 2D, project back.

    Returns the single-channel map before normalization. If ``weights`` is
    given it is shared by all four directions and fixes ``channels``.
    """
    img = np.asarray(image, dtype=np.float64)
    H, W = img.shape
    rng = Rng(seed)
    D = weights.D if weights is not None else channels
    embed = rng.uniform(-1.0, 1.0, (D,))
    proj = rng.uniform(-1.0, 1.0, (D,)) / np.sqrt(D)
    if weights is not None:
        dirs = DirectionSet.shared(weights)
    else:
        dirs = DirectionSet.init(Dims(H * W, D, state_dim), rng)
    fm = FeatureMap(img[:, :, None] * embed)
    out = scan2d_forward(fm, dirs, method, workers=workers)
    return out.values @ proj


def min_max_normalize(values) -> np.ndarray:
    """Affine map onto [0, 1]; a constant map becomes all zeros."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = v.min(), v.max()
    if hi <= lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def image2d(image, seed: int, method: Method, **kw) -> np.ndarray:
    return min_max_normalize(image2d_features(image, seed, method, **kw))
