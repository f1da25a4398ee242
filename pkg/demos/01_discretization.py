"""Hold rules side by side.

Prints the discrete factors each method produces for one (delta, a, b) and
shows how the two truncated approximations drift from the exact first-order
hold as delta*a grows.
"""
import numpy as np

from fssm import Method, discretize, discretize_foh_exact, discretize_zoh

delta, a, b = 0.1, -1.0, 1.0
print(f"delta={delta}  a={a}  b={b}\n")
for m in Method:
    f = discretize(m, delta, a, b)
    if f.has_bbar2:
        print(f"{m.value:>10}: abar={f.abar:.12f}  bbar1={f.bbar1:.12f}  bbar2={f.bbar2:.12f}")
    else:
        print(f"{m.value:>10}: abar={f.abar:.12f}  bbar ={f.bbar:.12f}")

# the two first-order factors always add up to the zero-order one
foh, zoh = discretize_foh_exact(delta, a, b), discretize_zoh(delta, a, b)
print(f"\nbbar1 + bbar2 - bbar_zoh = {foh.bbar1 + foh.bbar2 - zoh.bbar:.1e}")

print("\n   delta*a   |exact - fssm|   |exact - fssm-plus|")
for z in (1e-1, 1e-2, 1e-3, 1e-4):
    exact = discretize(Method.FOH_EXACT, 1.0, -z, 1.0)
    r1 = abs(exact.bbar1 - discretize(Method.FSSM, 1.0, -z, 1.0).bbar1)
    r2 = abs(exact.bbar1 - discretize(Method.FSSM_PLUS, 1.0, -z, 1.0).bbar1)
    print(f"{-z:>10.0e}   {r1:>13.3e}   {r2:>17.3e}")
print("\nfirst column shrinks 10x per row, second 100x")
