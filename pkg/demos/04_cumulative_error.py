"""How far the discrete scan drifts from the continuous system.

Drives h' = -h + sin(t) with each hold rule and compares against a fine-grid
reference. Also prints the theoretical bound for each row.
"""
from fssm import Method
from fssm.oracle import error_sweep

report = error_sweep([0.2, 0.1, 0.05, 0.025], [Method.ZOH, Method.FOH_EXACT, Method.FSSM, Method.FSSM_PLUS])
print(f"{'delta':>6} {'method':>10} {'max err':>11} {'bound':>11}")
for r in report.rows:
    print(f"{r.delta:>6} {r.method.value:>10} {r.max_abs_err:>11.3e} {r.bound:>11.3e}")
print()
for m in (Method.ZOH, Method.FOH_EXACT, Method.FSSM, Method.FSSM_PLUS):
    print(f"log-log slope {m.value:>10}: {report.slope(m):.3f}")
