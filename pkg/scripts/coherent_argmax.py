"""Lag of the density peak behind x_c(T) for the F = 50 coherent state.

Fits off = A tau^2 + B h^2 over a few (m, steps) pairs; the h^2 part is the
group-velocity defect of the stride-2h Laplacian, the tau^2 part that of the
Cayley half-steps.
"""
import argparse
import time

import numpy as np

from schrocert.core import GridFunction
from schrocert.problems import builtin
from schrocert.propagate import DiscretePotential, SplitScheme, choose_k, strang_linear


def peak_offset(m, steps, R=32.0, F=50.0):
    ref = builtin("coherent-field").exact
    n = int(2 * R * m)
    x = -R + (np.arange(n) + 0.5) / m
    tau = 1.0 / steps
    r = 1.25 * tau * F * R
    scheme = SplitScheme("linear", tau, choose_k(1e-14, r), 2 ** -0.5, phase_range=r, phase_tol=1e-14)
    tr = strang_linear(GridFunction(R, m, 1, ref(x, 0.0)), scheme,
                       DiscretePotential(None, -x, lambda t: F), steps)
    dens = np.abs(tr.snapshots[-1]) ** 2
    i = int(np.argmax(dens))
    # parabolic refinement of the peak position
    c = (dens[i - 1] - dens[i + 1]) / (2 * (dens[i - 1] - 2 * dens[i] + dens[i + 1])) / m
    return x[i] - ref.center(1.0) + c


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", default="1024:4096,1024:8192,2048:8192",
                    help="comma separated m:steps pairs")
    args = ap.parse_args()
    rows = []
    for item in args.runs.split(","):
        m, steps = (int(v) for v in item.split(":"))
        t0 = time.time()
        off = peak_offset(m, steps)
        rows.append((1.0 / steps, 1.0 / m, off))
        print(f"m={m} steps={steps} offset={off:+.5f} ({time.time() - t0:.1f}s)", flush=True)
    if len(rows) >= 2:
        A = np.array([[tau ** 2, h ** 2] for tau, h, _ in rows])
        coef, *_ = np.linalg.lstsq(A, -np.array([o for *_, o in rows]), rcond=None)
        a, b = coef
        print(f"lag ~ {a:.3g} tau^2 + {b:.3g} h^2")
        if b > 0:
            print(f"2h tolerance needs h <= {2 / b:.2e} before any time error")


if __name__ == "__main__":
    main()
