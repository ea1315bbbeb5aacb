"""Planned parameters of every builtin across an eps ladder (pinned constants)."""
import argparse

from schrocert.budget import BudgetConstants, plan, replay, uniform_runtime_estimate
from schrocert.core import BudgetInfeasible
from schrocert.problems import BUILTINS, builtin

KEYS = ("R", "m", "steps", "N", "K", "hermite_N", "sigma")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", default="0.25,0.125,0.0625")
    ap.add_argument("--unpinned", action="store_true", help="use the documented default constants")
    args = ap.parse_args()
    eps_list = [float(e) for e in args.eps.split(",")]
    print("problem,eps," + ",".join(KEYS) + ",ops,replay")
    for name in sorted(BUILTINS):
        b = builtin(name)
        consts = BudgetConstants() if args.unpinned else BudgetConstants(**b.pinned)
        for eps in eps_list:
            try:
                bud = plan(b.problem, b.state, b.potential, eps, consts, b.lattice)
            except BudgetInfeasible as err:
                print(f"{name},{eps:g}," + ",".join("" for _ in KEYS) + f",,infeasible ({err.share})")
                continue
            vals = [bud.params.get(k, "") for k in KEYS]
            ok = "ok" if not replay(bud) else "violated"
            print(f"{name},{eps:g}," + ",".join(f"{v:g}" if isinstance(v, float) else str(v) for v in vals)
                  + f",{uniform_runtime_estimate(bud)},{ok}")


if __name__ == "__main__":
    main()
