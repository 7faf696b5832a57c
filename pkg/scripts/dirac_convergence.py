"""Grid refinement study of the Dirac defect for affine observable pairs."""

import argparse
import math

from jetmech import symexpr as sx
from jetmech.quantum import AffineObservable, Axis, dirac_defect, gaussian

PAIRS = {
    "q, p": ("q1", "p1"),
    "qp, p": ("q1*p1", "p1"),
    "q^2 p, p + q": ("q1^2*p1", "p1 + q1"),
    "sin(q) p, q^2": ("sin(q1)*p1", "q1^2"),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256, 512, 1024])
    ap.add_argument("--scheme", choices=("symmetric", "literal"), default="symmetric")
    args = ap.parse_args()

    for label, (f, g) in PAIRS.items():
        fo = AffineObservable.from_expr(sx.parse(f, 1), 1)
        go = AffineObservable.from_expr(sx.parse(g, 1), 1)
        errs = [dirac_defect(fo, go, gaussian((Axis(-10, 10, n),), momentum=[0.5]), margin=2.0,
                             scheme=args.scheme) for n in args.sizes]
        print(f"{label}:")
        for k, (n, e) in enumerate(zip(args.sizes, errs)):
            order = "" if k == 0 else f"  order {math.log2(errs[k - 1] / e):.3f}"
            print(f"  N = {n:5d}  defect {e:.3e}{order}")


if __name__ == "__main__":
    main()
