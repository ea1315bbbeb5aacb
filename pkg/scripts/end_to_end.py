"""Solve builtins with pinned constants and compare with their closed forms."""
import argparse
import time

from schrocert.budget import BudgetConstants
from schrocert.pipeline import l2_error, solve
from schrocert.problems import builtin


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--problems", default="free-gaussian,coherent-field")
    ap.add_argument("--eps", default="0.25,0.125")
    args = ap.parse_args()
    print("problem,eps,R,m,steps,N,K,error,cayley_drift,seconds")
    for name in args.problems.split(","):
        b = builtin(name)
        for eps in (float(e) for e in args.eps.split(",")):
            t0 = time.time()
            res = solve(b.problem, b.state, b.potential, eps, BudgetConstants(**b.pinned), lattice=b.lattice)
            p = res.budget.params
            err = l2_error(res, b.exact) if b.exact is not None else float("nan")
            drift = getattr(res.trajectory, "cayley_drift", float("nan"))
            print(f"{name},{eps:g},{p['R']:g},{p['m']},{p['steps']},{p['N']},{p['K']},{err:.4e},{drift:.1e},"
                  f"{time.time() - t0:.1f}", flush=True)


if __name__ == "__main__":
    main()
