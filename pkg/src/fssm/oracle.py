"""Continuous-time reference solutions and cumulative-error measurement.

Everything here is time-invariant: one ``(delta, a, b, c)`` for the whole
horizon, on the uniform grid ``t_n = n * delta``.

Output alignment: discrete output ``y_n = c h_{n+1}`` is the state after
absorbing token ``n``, so it is compared against ``y(t_{n+1})``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.signal import lfilter

from .discretization import Method, hold_coefficients, phi1
from .errors import DegenerateFit, NonPositiveDelta, OutOfRange
from .scan import selective_scan

DEFAULT_SUBSTEPS = 1024


@dataclass(frozen=True, eq=False)
class ContinuousSystem:
    """``h' = a h + b x``, ``y = c h`` with a scalar or dense ``N x N`` state matrix."""

    a: float | np.ndarray
    b: float | np.ndarray
    c: float | np.ndarray
    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise NonPositiveDelta(f"delta must be > 0, got {self.delta!r}")

    @property
    def is_dense(self) -> bool:
        return np.ndim(self.a) == 2

    def with_delta(self, delta: float) -> "ContinuousSystem":
        return ContinuousSystem(self.a, self.b, self.c, delta)


@dataclass(frozen=True)
class ErrorBoundParams:
    lipschitz: float
    c_abs: float
    b_abs: float
    delta: float
    a: float
    n: int
    exp_xi_sup: float | None = field(default=None)

    def __post_init__(self):
        if self.exp_xi_sup is None:
            # sup of e^xi for xi between 0 and delta*a, whichever sign a has
            object.__setattr__(self, "exp_xi_sup", max(1.0, float(np.exp(self.delta * self.a))))
        if self.exp_xi_sup < 1:
            raise ValueError("exp_xi_sup must be >= 1")

    @classmethod
    def for_system(cls, sys: ContinuousSystem, lipschitz: float, n: int) -> "ErrorBoundParams":
        if sys.is_dense:
            raise ValueError("error bounds are defined for scalar systems only")
        return cls(lipschitz, abs(float(sys.c)), abs(float(sys.b)), sys.delta, float(sys.a), int(n))


def reconstruct_input(samples, mode: str, t: float, delta: float = 1.0, t0: float = 0.0) -> float:
    """Evaluate the zero- or first-order hold of ``samples`` at time ``t``."""
    x = np.asarray(samples, dtype=np.float64)
    t_last = t0 + (len(x) - 1) * delta
    if not (t0 <= t <= t_last):
        raise OutOfRange(f"t={t} outside [{t0}, {t_last}]")
    s = (t - t0) / delta
    n = min(int(np.floor(s)), len(x) - 1)
    if mode == "zoh":
        return float(x[n])
    if mode == "foh":
        if n == len(x) - 1:
            return float(x[n])
        frac = s - n
        return float(x[n] + frac * (x[n + 1] - x[n]))
    raise ValueError(f"unknown mode {mode!r}")


def dense_hold_factors(a, b, delta: float, method: Method):
    """``(abar, bbar1, bbar2)`` for a dense ``a`` via one augmented matrix exponential.

    ``expm([[a, b, 0], [0, 0, 1], [0, 0, 0]] * delta)`` carries
    ``exp(delta a)``, ``delta phi1(delta a) b`` and ``delta phi2(delta a) b``
    in its last two columns.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    N = a.shape[0]
    method = Method(method)
    M = np.zeros((N + 2, N + 2))
    M[:N, :N] = a
    M[:N, N] = b
    M[N, N + 1] = 1.0
    E = expm(M * delta)
    abar = E[:N, :N]
    g1 = E[:N, N]  # delta * phi1(delta a) b
    g2 = E[:N, N + 1] / delta  # delta * phi2(delta a) b
    I = np.eye(N)
    if method is Method.ZOH:
        return abar, g1, np.zeros(N)
    if method is Method.FOH_EXACT:
        return abar, g1 - g2, g2
    if method is Method.FSSM:
        return abar, 0.5 * delta * b, 0.5 * delta * b
    za = delta * a
    return abar, (0.5 * I + za / 3.0) @ b * delta, (0.5 * I + za / 6.0) @ b * delta


def dense_discrete_scan(sys: ContinuousSystem, samples, method: Method) -> np.ndarray:
    """Time-invariant scan with a dense state matrix; last token takes the ZOH step."""
    x = np.asarray(samples, dtype=np.float64)
    a = np.atleast_2d(sys.a)
    c = np.asarray(sys.c, dtype=np.float64).reshape(-1)
    abar, b1, b2 = dense_hold_factors(a, sys.b, sys.delta, method)
    _, bz, _ = dense_hold_factors(a, sys.b, sys.delta, Method.ZOH)
    h = np.zeros(a.shape[0])
    y = np.empty(len(x))
    for n in range(len(x)):
        if Method(method) is Method.ZOH or n == len(x) - 1:
            h = abar @ h + bz * x[n]
        else:
            h = abar @ h + b1 * x[n] + b2 * x[n + 1]
        y[n] = c @ h
    return y


def solve_continuous(
    sys: ContinuousSystem, x_fn, T: int, substeps: int = DEFAULT_SUBSTEPS, hold: str = "foh"
) -> np.ndarray:
    """Reference ``y(t_1), ..., y(t_T)`` from ``h(0) = 0``.

    Steps the exact first-order-hold update on a grid ``substeps`` times finer
    than ``sys.delta``, sampling ``x_fn`` there. Exact when ``x_fn`` is
    piecewise linear on the fine grid, second order in ``1/substeps`` for
    smooth inputs.

    ``hold="zoh"`` steps the exact piecewise-constant update instead (left
    endpoint samples), which is exact for inputs that jump on the grid.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if hold not in ("foh", "zoh"):
        raise ValueError(f"unknown hold {hold!r}")
    method = Method.FOH_EXACT if hold == "foh" else Method.ZOH
    fine = sys.delta / substeps
    t = np.arange(T * substeps + 1) * fine
    x = np.asarray(x_fn(t), dtype=np.float64) * np.ones_like(t)
    if sys.is_dense:
        abar, b1, b2 = dense_hold_factors(sys.a, sys.b, fine, method)
        c = np.asarray(sys.c, dtype=np.float64).reshape(-1)
        h = np.zeros(abar.shape[0])
        y = np.empty(T)
        for n in range(T):
            for j in range(n * substeps, (n + 1) * substeps):
                h = abar @ h + b1 * x[j] + b2 * x[j + 1]
            y[n] = c @ h
        return y
    z = fine * float(sys.a)
    f1, f2 = hold_coefficients(method, z)
    db = fine * float(sys.b)
    u = (f1 * db) * x[:-1] + (f2 * db) * x[1:]
    h = lfilter([1.0], [1.0, -np.exp(z)], u)
    return float(sys.c) * h[substeps - 1 :: substeps]


def discrete_outputs(sys: ContinuousSystem, x_fn, method: Method, T: int) -> np.ndarray:
    """Discrete ``y_0 .. y_{T-1}`` from the samples ``x(t_0) .. x(t_T)``.

    The sample ``x(t_T)`` is the lookahead for token ``T-1``; the scan over
    ``T + 1`` tokens therefore applies the first-order-hold step at every
    compared output, and its extra trailing output is dropped.
    """
    t = np.arange(T + 1) * sys.delta
    x = np.asarray(x_fn(t), dtype=np.float64) * np.ones_like(t)
    if sys.is_dense:
        return dense_discrete_scan(sys, x, method)[:T]
    out = selective_scan(x[:, None], sys.delta, [float(sys.a)], [float(sys.b)], [float(sys.c)], method)
    return out.y.values[:T, 0]


@dataclass(frozen=True, eq=False)
class CumulativeError:
    errors: np.ndarray  # |y(t_{n+1}) - y_n| for n = 0 .. T-1
    running_max: np.ndarray

    @property
    def max(self) -> float:
        return float(self.running_max[-1])


def measure_cumulative_error(
    sys: ContinuousSystem,
    x_fn,
    method: Method,
    T: int,
    substeps: int = DEFAULT_SUBSTEPS,
    reference_hold: str = "foh",
) -> CumulativeError:
    """Per-step ``|y(t_{n+1}) - y_n|`` and its running maximum."""
    ref = solve_continuous(sys, x_fn, T, substeps, hold=reference_hold)
    err = np.abs(ref - discrete_outputs(sys, x_fn, method, T))
    return CumulativeError(errors=err, running_max=np.maximum.accumulate(err))


def geometric_growth(delta: float, a: float, n: int) -> float:
    """``sum_{k<n} exp(k delta a)``, evaluated as ``n phi1(n z) / phi1(z)``."""
    z = delta * a
    return float(n * phi1(n * z) / phi1(z))


def bound_ssm(p: ErrorBoundParams) -> float:
    return p.c_abs * p.lipschitz * p.b_abs * p.exp_xi_sup * p.delta**2 * geometric_growth(p.delta, p.a, p.n)


def bound_fssm(p: ErrorBoundParams) -> float:
    return 0.5 * bound_ssm(p)


def bound_for(method: Method, p: ErrorBoundParams) -> float:
    """Zero-order hold gets the SSM bound, every first-order variant the halved one."""
    return bound_ssm(p) if Method(method) is Method.ZOH else bound_fssm(p)


def convergence_order(deltas, errors) -> float:
    """Least-squares slope of ``log(error)`` against ``log(delta)``."""
    d = np.asarray(deltas, dtype=np.float64)
    e = np.asarray(errors, dtype=np.float64)
    if d.shape != e.shape or d.size < 3:
        raise DegenerateFit("need at least 3 (delta, error) pairs")
    if np.any(e <= 0) or np.any(d <= 0) or not np.all(np.isfinite(e)):
        raise DegenerateFit("errors and deltas must be positive and finite")
    return float(np.polyfit(np.log(d), np.log(e), 1)[0])


@dataclass(frozen=True)
class SweepRow:
    delta: float
    method: Method
    max_abs_err: float
    bound: float
    slope_so_far: float


@dataclass(frozen=True)
class ErrorReport:
    rows: list

    def for_method(self, method: Method) -> list:
        return [r for r in self.rows if r.method is Method(method)]

    def slope(self, method: Method) -> float:
        rows = self.for_method(method)
        return convergence_order([r.delta for r in rows], [r.max_abs_err for r in rows])


def sine_input(t):
    return np.sin(t)


def error_sweep(
    deltas,
    methods,
    *,
    a: float = -1.0,
    b: float = 1.0,
    c: float = 1.0,
    x_fn=sine_input,
    lipschitz: float = 1.0,
    T: int = 100,
    substeps: int = DEFAULT_SUBSTEPS,
) -> ErrorReport:
    """Measure max cumulative error and its error bound for each ``(delta, method)``.

    Rows are ordered by decreasing ``delta``, methods in the order given.
    ``bound`` is the bound at step ``T``, the largest over the horizon.
    """
    deltas = sorted((float(d) for d in deltas), reverse=True)
    methods = [Method(m) for m in methods]
    rows = []
    seen = {m: ([], []) for m in methods}
    for delta in deltas:
        sys = ContinuousSystem(a, b, c, delta)
        for m in methods:
            err = measure_cumulative_error(sys, x_fn, m, T, substeps).max
            bound = bound_for(m, ErrorBoundParams.for_system(sys, lipschitz, T))
            ds, es = seen[m]
            ds.append(delta)
            es.append(err)
            slope = convergence_order(ds, es) if len(ds) >= 3 else float("nan")
            rows.append(SweepRow(delta, m, err, bound, slope))
    return ErrorReport(rows)
