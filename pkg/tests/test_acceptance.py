"""Acceptance criteria, one test each, at the stated tolerances and time limits.

Every test prints a single ``PASS``/``FAIL`` line (visible even with output
capture on) before asserting.
"""
import subprocess
import sys
import time

import numpy as np
import pytest

from fssm.core import Rng
from fssm.discretization import Method, discretize_foh_exact, discretize_fssm, discretize_fssm_plus, discretize_zoh
from fssm.oracle import (
    ContinuousSystem,
    ErrorBoundParams,
    bound_fssm,
    bound_ssm,
    convergence_order,
    measure_cumulative_error,
    sine_input,
)
from fssm.pgm import encode_pgm
from fssm.imaging import image2d
from fssm.scan import scan_backward, scan_parallel, scan_sequential, selective_scan
from fssm.scan2d import DIRECTIONS, DirectionSet, FeatureMap, cross_merge, cross_scan, rotate180, scan2d_forward
from fssm.verify import (
    HAND_FIXTURE_Y,
    finite_difference_gradients,
    per_step_bounds,
    piecewise_constant_input,
    piecewise_linear_input,
    random_instance,
    relative_gap,
)

METHODS = list(Method)
GRAD_GROUPS = ("d_x", "d_w_delta", "d_bias_delta", "d_w_b", "d_w_c", "d_a_log")


@pytest.fixture
def report(capsys):
    def _report(num, title, ok, detail, elapsed, limit):
        in_time = elapsed < limit
        status = "PASS" if ok and in_time else "FAIL"
        with capsys.disabled():
            print(f"\n[acceptance {num:>2}] {status} {title}: {detail}; {elapsed:.2f}s (limit {limit:g}s)")
        assert ok, detail
        assert in_time, f"took {elapsed:.2f}s, limit {limit}s"

    return _report


def test_c01_hold_identity(report):
    t0 = time.perf_counter()
    rng = Rng(2024)
    n = 10_000
    delta = rng.uniform(1e-4, 1.0, (n,))
    a = rng.uniform(-16.0, -1e-6, (n,))
    b = rng.uniform(-2.0, 2.0, (n,))
    foh = discretize_foh_exact(delta, a, b)
    zoh = discretize_zoh(delta, a, b)
    rel = float(np.max(np.abs(foh.bbar1 + foh.bbar2 - zoh.bbar) / np.abs(zoh.bbar)))
    report(1, "zoh/foh identity", rel <= 1e-12, f"max rel err {rel:.2e} (tol 1e-12)", time.perf_counter() - t0, 1)


def test_c02_approximation_orders(report):
    t0 = time.perf_counter()
    zs = np.array([1e-1, 1e-2, 1e-3, 1e-4])

    def resid(approx):
        out = []
        for z in zs:
            exact = discretize_foh_exact(1.0, -z, 1.0)
            f = approx(z)
            out.append(max(abs(exact.bbar1 - f.bbar1), abs(exact.bbar2 - f.bbar2)))
        return out

    s1 = convergence_order(zs, resid(lambda z: discretize_fssm(1.0, 1.0, -z)))
    s2 = convergence_order(zs, resid(lambda z: discretize_fssm_plus(1.0, -z, 1.0)))
    ok = abs(s1 - 1.0) <= 0.1 and abs(s2 - 2.0) <= 0.1
    report(2, "approximation orders", ok, f"fssm slope {s1:.4f}, fssm-plus slope {s2:.4f}", time.perf_counter() - t0, 1)


def test_c03_exactness(report):
    t0 = time.perf_counter()
    sys_ = ContinuousSystem(-1.0, 1.0, 1.0, 0.1)
    knots = np.random.default_rng(3).uniform(-1, 1, 102)
    e_foh = measure_cumulative_error(sys_, piecewise_linear_input(knots, 0.1), Method.FOH_EXACT, 100).max
    e_zoh = measure_cumulative_error(
        sys_, piecewise_constant_input(knots, 0.1), Method.ZOH, 100, reference_hold="zoh"
    ).max
    ok = e_foh <= 1e-10 and e_zoh <= 1e-10
    report(3, "exactness", ok, f"foh-exact {e_foh:.1e}, zoh {e_zoh:.1e} (tol 1e-10)", time.perf_counter() - t0, 1)


def test_c04_error_bounds(report):
    t0 = time.perf_counter()
    worst = 0.0
    for delta in (0.2, 0.1, 0.05):
        sys_ = ContinuousSystem(-1.0, 1.0, 1.0, delta)
        for m in (Method.ZOH, Method.FOH_EXACT):
            err = measure_cumulative_error(sys_, sine_input, m, 200).errors
            worst = max(worst, float(np.max(err / per_step_bounds(sys_, m, 200))))
    params = [
        ErrorBoundParams(1.0, 1.0, 1.0, 0.1, -1.0, 10, 1.0),
        ErrorBoundParams(2.0, 0.5, 3.0, 0.05, -4.0, 77),
        ErrorBoundParams(1.0, 1.0, 1.0, 0.2, 0.5, 30),
    ]
    half = all(bound_fssm(p) / bound_ssm(p) == 0.5 for p in params)
    worked = bound_fssm(params[0])
    ok = worst <= 1.0 and half and abs(worked - 0.0332127) <= 1e-6
    detail = f"max err/bound {worst:.3f}, ratio exactly 1/2: {half}, bound_fssm(0.1, 10) = {worked:.7f}"
    report(4, "error bounds", ok, detail, time.perf_counter() - t0, 5)


def test_c05_improvement_and_order(report):
    t0 = time.perf_counter()
    deltas = (0.2, 0.1, 0.05, 0.025)
    errs = {m: [] for m in (Method.ZOH, Method.FOH_EXACT)}
    for delta in deltas:
        sys_ = ContinuousSystem(-1.0, 1.0, 1.0, delta)
        for m in errs:
            errs[m].append(measure_cumulative_error(sys_, sine_input, m, 100).max)
    better = all(f < z for f, z in zip(errs[Method.FOH_EXACT], errs[Method.ZOH]))
    slopes = {m: convergence_order(deltas, e) for m, e in errs.items()}
    ok = better and all(1.8 <= s <= 2.2 for s in slopes.values())
    detail = (
        f"foh-exact < zoh at every delta: {better}; slopes zoh {slopes[Method.ZOH]:.3f}, "
        f"foh-exact {slopes[Method.FOH_EXACT]:.3f} (want [1.8, 2.2])"
    )
    report(5, "improvement and order", ok, detail, time.perf_counter() - t0, 5)


def test_c06_scan_equivalence(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    Ts = (1, 2, 3, 7, 64, 1025)
    worst = 0.0
    for i in range(200):
        T = Ts[i % len(Ts)]
        x, w = random_instance(rng, T, int(rng.integers(1, 4)), int(rng.integers(1, 5)))
        for m in METHODS:
            ref = scan_sequential(x, w, m).y.values
            for chunk in sorted({1, 4, 64, T}):
                worst = max(worst, relative_gap(scan_parallel(x, w, m, chunk).y.values, ref))
    x, w = random_instance(rng, 4096, 2, 3)
    bits = True
    for m in METHODS:
        outs = [scan_parallel(x, w, m, 64, workers=k).y.values for k in (1, 2, 8)]
        bits &= all(np.array_equal(o, outs[0]) for o in outs[1:])
    ok = worst <= 1e-12 and bits
    detail = f"max rel gap {worst:.1e} (tol 1e-12), worker-count bitwise independent: {bits}"
    report(6, "scan equivalence", ok, detail, time.perf_counter() - t0, 30)


def test_c07_gradients(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    worst, look_ok, notes = 0.0, True, []
    for m in METHODS:
        x, w = random_instance(rng, 8, 4, 3)
        g = rng.uniform(-1, 1, (8, 4))
        an = scan_backward(x, w, m, g)
        fd = finite_difference_gradients(x, w, m, g)
        for k in GRAD_GROUPS:
            worst = max(worst, relative_gap(np.asarray(getattr(an, k)), np.asarray(fd[k])))
        probe = np.zeros_like(x)
        probe[3, 1] = 1.0
        look = float(np.max(np.abs(scan_backward(x, w, m, probe).d_x[4])))
        notes.append(f"{m.value} {look:.1e}")
        look_ok &= (look == 0.0) if m is Method.ZOH else (look > 0.0)
    ok = worst <= 1e-5 and look_ok
    detail = f"worst rel err {worst:.1e} (tol 1e-5); lookahead |dy_n/dx_n+1|: {', '.join(notes)}"
    report(7, "gradients", ok, detail, time.perf_counter() - t0, 10)


def test_c08_boundary(report):
    t0 = time.perf_counter()
    x, w = random_instance(np.random.default_rng(8), 1, 3, 4)
    ys = [scan_sequential(x, w, m).y.values for m in METHODS]
    same = all(np.array_equal(y, ys[0]) for y in ys[1:])
    y = selective_scan([[1.0], [2.0]], 0.1, [-1.0], [1.0], [1.0], Method.FOH_EXACT).y.values[:, 0]
    gap = float(np.max(np.abs(y - np.array(HAND_FIXTURE_Y))))
    ok = same and gap <= 1e-9
    detail = f"T=1 identical across methods: {same}; fixture y = [{y[0]:.10f}, {y[1]:.10f}], gap {gap:.1e}"
    report(8, "last-token boundary", ok, detail, time.perf_counter() - t0, 1)


def test_c09_scan2d(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(5):
        _, w = random_instance(rng, 1, 3, 2)
        dirs = DirectionSet.shared(w)
        fm = FeatureMap(rng.uniform(-1, 1, (4, 4, 3)))
        for m in METHODS:
            lhs = scan2d_forward(rotate180(fm), dirs, m).values
            rhs = rotate180(scan2d_forward(fm, dirs, m)).values
            worst = max(worst, relative_gap(lhs, rhs))
    fm = FeatureMap(rng.uniform(-1, 1, (3, 5, 2)))
    round_trip = np.array_equal(cross_merge([cross_scan(fm, d) for d in DIRECTIONS], None, 3, 5).values, 4 * fm.values)
    img = rng.integers(0, 256, (8, 9)) / 255.0
    same = encode_pgm(image2d(img, 11, Method.FOH_EXACT)) == encode_pgm(image2d(img, 11, Method.FOH_EXACT))
    ok = worst <= 1e-12 and round_trip and same
    detail = f"equivariance gap {worst:.1e} (tol 1e-12), round trip 4*fm: {round_trip}, image2d byte-identical: {same}"
    report(9, "2D module", ok, detail, time.perf_counter() - t0, 5)


def test_c10_verify_end_to_end(report):
    t0 = time.perf_counter()
    r = subprocess.run([sys.executable, "-m", "fssm", "verify"], capture_output=True, text=True, timeout=600)
    failed = [l for l in r.stdout.splitlines() if l.startswith("FAIL")]
    suites = [l for l in r.stdout.splitlines() if l.startswith(("PASS", "FAIL"))]
    detail = f"exit {r.returncode}, {len(suites)} suites, failing: {failed or 'none'}"
    report(10, "verify end to end", r.returncode == 0, detail, time.perf_counter() - t0, 120)
