"""Global order of the Strang/Crank-Nicolson scheme against the dense exact flow."""
import argparse

import numpy as np
import scipy.linalg as la

from schrocert.core import GridFunction
from schrocert.propagate import DiscretePotential, SplitScheme, hamiltonian_matrix, strang_linear


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--R", type=float, default=8.0)
    ap.add_argument("--m", type=int, default=8)
    ap.add_argument("--T", type=float, default=1.0)
    ap.add_argument("--halvings", type=int, default=4)
    args = ap.parse_args()
    R, m = args.R, args.m
    n = int(2 * R * m)
    x = -R + (np.arange(n) + 0.5) / m
    psi0 = np.pi ** -0.25 * np.exp(-x ** 2 / 2 + 1j * x)
    V = 0.5 * np.cos(x)
    H = hamiltonian_matrix(n, 1 / m, 1, 1.0, V).toarray()
    lam, U = la.eigh(H)
    exact = U @ (np.exp(-1j * lam * args.T) * (U.conj().T @ psi0))
    prev = None
    print("tau,error,order")
    for j in range(args.halvings + 1):
        steps = 8 * 2 ** j
        tau = args.T / steps
        tr = strang_linear(GridFunction(R, m, 1, psi0), SplitScheme("linear", tau, 0), DiscretePotential(V), steps)
        err = np.sqrt(1 / m) * np.linalg.norm(tr.snapshots[-1] - exact)
        order = "" if prev is None else f"{np.log2(prev / err):.3f}"
        print(f"{tau:.6g},{err:.6e},{order}")
        prev = err


if __name__ == "__main__":
    main()
