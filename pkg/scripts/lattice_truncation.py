"""Truncation error of the lattice NLS against a large reference lattice."""
import argparse

from schrocert.lattice import from_sampler, truncation_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--decay", type=float, default=2.0, help="data ~ <k>^(-2 decay)")
    ap.add_argument("--reference", type=int, default=96)
    ap.add_argument("--radii", default="4,8,16,32,64")
    ap.add_argument("--nu", type=int, default=1)
    args = ap.parse_args()
    v0 = from_sampler(lambda k: (1 + (k ** 2).sum(1)) ** -args.decay, args.reference, 1, 4.0)
    st = truncation_study(v0, [int(r) for r in args.radii.split(",")], nu=args.nu)
    print("n,error")
    for n, e in zip(st.radii, st.errors):
        print(f"{n},{e:.6e}")
    print(f"# monotone = {st.monotone}, fitted decay exponent = {st.decay_exponent}")


if __name__ == "__main__":
    main()
