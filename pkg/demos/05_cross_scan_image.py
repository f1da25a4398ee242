"""Four-direction scan over a small synthetic image, written out as PGM."""
import sys
from pathlib import Path

import numpy as np

from fssm import Method
from fssm.imaging import image2d
from fssm.pgm import write_pgm

out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(".")
yy, xx = np.mgrid[0:48, 0:64]
img = 0.5 + 0.5 * np.sin(xx / 5.0) * np.cos(yy / 7.0)
img[16:32, 20:44] = 1.0  # a bright block so the directional sweeps show up

write_pgm(out_dir / "input.pgm", img)
for m in (Method.ZOH, Method.FOH_EXACT):
    out = image2d(img, seed=7, method=m)
    path = out_dir / f"scan_{m.value}.pgm"
    write_pgm(path, out)
    print(f"wrote {path}  mean {out.mean():.3f}")
