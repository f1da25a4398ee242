"""Hold discretizations of a diagonal linear system ``h' = a h + b x``.

Four methods share the exact transition ``abar = exp(delta * a)`` and differ
only in how the input enters the state:

* ``zoh``       piecewise-constant hold, ``bbar = phi1(z) * delta * b``
* ``foh-exact`` piecewise-linear hold, ``bbar1 = (phi1 - phi2)(z) * delta * b``
                and ``bbar2 = phi2(z) * delta * b``
* ``fssm``      ``bbar1 = bbar2 = delta * b / 2``
* ``fssm-plus`` ``bbar1 = (1/2 + z/3) delta b``, ``bbar2 = (1/2 + z/6) delta b``

with ``z = delta * a``. ``bbar1`` multiplies the current sample and ``bbar2``
the next one.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveDelta

# |z| below this uses the Taylor series. The closed forms lose ~4*eps/|z| of
# relative accuracy to cancellation, so the cut has to sit near 1 to hold 1e-14.
SERIES_RADIUS = 1.0
_NTERMS = 24

_PHI1_COEFFS = np.array([1.0 / math.factorial(j + 1) for j in range(_NTERMS)])
_PHI2_COEFFS = np.array([1.0 / math.factorial(j + 2) for j in range(_NTERMS)])
_DPHI1_COEFFS = np.array([(j + 1) / math.factorial(j + 2) for j in range(_NTERMS)])
_DPHI2_COEFFS = np.array([(j + 1) / math.factorial(j + 3) for j in range(_NTERMS)])


class Method(str, enum.Enum):
    ZOH = "zoh"
    FOH_EXACT = "foh-exact"
    FSSM = "fssm"
    FSSM_PLUS = "fssm-plus"

    def __str__(self):
        return self.value

    @property
    def uses_lookahead(self) -> bool:
        return self is not Method.ZOH


def _as_float_array(z):
    z = np.asarray(z)
    if not np.issubdtype(z.dtype, np.floating):
        z = z.astype(np.float64)
    return z


def _horner(coeffs, z):
    acc = np.full_like(z, coeffs[-1])
    for c in coeffs[-2::-1]:
        acc = acc * z + c
    return acc


def _series_or_closed(z, coeffs, closed):
    z = _as_float_array(z)
    small = np.abs(z) < SERIES_RADIUS
    out = _horner(coeffs.astype(z.dtype), z)
    if not np.all(small):
        zb = np.where(small, 1.0, z).astype(z.dtype)
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.where(small, out, closed(zb))
    return out[()] if out.ndim == 0 else out


def phi1(z):
    """``(exp(z) - 1) / z``, continuous through 0 where it equals 1."""
    return _series_or_closed(z, _PHI1_COEFFS, lambda z: np.expm1(z) / z)


def phi2(z):
    """``(exp(z) - 1 - z) / z**2``, continuous through 0 where it equals 1/2."""
    return _series_or_closed(z, _PHI2_COEFFS, lambda z: (np.expm1(z) - z) / (z * z))


def phi1_prime(z):
    """Derivative of :func:`phi1`: ``(exp(z) (z - 1) + 1) / z**2``."""
    return _series_or_closed(z, _DPHI1_COEFFS, lambda z: (np.exp(z) * (z - 1) + 1) / (z * z))


def phi2_prime(z):
    """Derivative of :func:`phi2`: ``(exp(z) (z - 2) + z + 2) / z**3``."""
    return _series_or_closed(
        z, _DPHI2_COEFFS, lambda z: (np.exp(z) * (z - 2) + z + 2) / (z * z * z)
    )


def hold_coefficients(method: Method, z):
    """Dimensionless input weights ``(f1, f2)`` so that ``bbar_i = f_i(z) * delta * b``.

    For ``zoh`` the single weight is returned as ``f1`` and ``f2`` is zero.
    """
    method = Method(method)
    z = _as_float_array(z)
    if method is Method.ZOH:
        return phi1(z), np.zeros_like(z)
    if method is Method.FOH_EXACT:
        p2 = phi2(z)
        return phi1(z) - p2, p2
    if method is Method.FSSM:
        half = np.full_like(z, 0.5)
        return half, half.copy()
    return 0.5 + z / 3.0, 0.5 + z / 6.0


def hold_coefficient_slopes(method: Method, z):
    """Derivatives of :func:`hold_coefficients` with respect to ``z``."""
    method = Method(method)
    z = _as_float_array(z)
    if method is Method.ZOH:
        return phi1_prime(z), np.zeros_like(z)
    if method is Method.FOH_EXACT:
        d2 = phi2_prime(z)
        return phi1_prime(z) - d2, d2
    if method is Method.FSSM:
        return np.zeros_like(z), np.zeros_like(z)
    return np.full_like(z, 1.0 / 3.0), np.full_like(z, 1.0 / 6.0)


@dataclass(frozen=True, eq=False)
class DiscreteFactors:
    """Per-step discretized factors.

    ``bbar2`` is zero-filled and ``has_bbar2`` is False for ``zoh``, in which
    case ``bbar1`` holds the single input matrix.
    """

    abar: np.ndarray
    bbar1: np.ndarray
    bbar2: np.ndarray
    method: Method
    has_bbar2: bool = True

    @property
    def bbar(self):
        if self.has_bbar2:
            raise AttributeError(f"{self.method} has two input factors; use bbar1/bbar2")
        return self.bbar1


def _check_delta(delta):
    if not np.all(np.asarray(delta) > 0):
        raise NonPositiveDelta(f"delta must be > 0, got {delta!r}")


def _factors(method, delta, a, b):
    _check_delta(delta)
    a = _as_float_array(a)
    b = _as_float_array(b)
    z = delta * a
    f1, f2 = hold_coefficients(method, z)
    db = delta * b
    return DiscreteFactors(
        abar=np.exp(z),
        bbar1=f1 * db,
        bbar2=f2 * db,
        method=Method(method),
        has_bbar2=Method(method) is not Method.ZOH,
    )


def discretize_zoh(delta, a, b) -> DiscreteFactors:
    return _factors(Method.ZOH, delta, a, b)


def discretize_foh_exact(delta, a, b) -> DiscreteFactors:
    """Exact first-order-hold factors, evaluated through phi1/phi2 with no inverse of ``delta*a``."""
    return _factors(Method.FOH_EXACT, delta, a, b)


def discretize_fssm(delta, b, a=None) -> DiscreteFactors:
    """Half/half split of ``delta * b``.

    The input factors do not depend on ``a``; pass it only to get the
    matching ``abar``. Without it ``abar`` is filled with ones.
    """
    b = _as_float_array(b)
    return _factors(Method.FSSM, delta, np.zeros_like(b) if a is None else a, b)


def discretize_fssm_plus(delta, a, b) -> DiscreteFactors:
    return _factors(Method.FSSM_PLUS, delta, a, b)


def discretize(method: Method, delta, a, b) -> DiscreteFactors:
    return _factors(Method(method), delta, a, b)
