"""Backward pass through the scan, checked against finite differences."""
import numpy as np

from fssm import Method, scan_backward
from fssm.verify import finite_difference_gradients, random_instance, relative_gap

rng = np.random.default_rng(0)
x, w = random_instance(rng, 8, 4, 3)
g = rng.uniform(-1, 1, x.shape)

for m in Method:
    an = scan_backward(x, w, m, g)
    fd = finite_difference_gradients(x, w, m, g)
    worst = max(relative_gap(np.asarray(getattr(an, k)), np.asarray(v)) for k, v in fd.items())
    print(f"{m.value:>10}: worst relative error {worst:.1e}")
