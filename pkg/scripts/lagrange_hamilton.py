"""Integrate a Lagrangian and its associated Hamiltonian side by side and
report the gap between the trajectories under the Legendre map."""

import argparse
import math

import numpy as np

from jetmech import symexpr as sx
from jetmech.hamiltonian import associated_hamiltonian, integrate_hamilton, legendre_image
from jetmech.lagrangian import LagrangianSystem, integrate_lagrange, legendre_map


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lagrangian", default="1/2*exp(t)*qt1^2 - 1/2*q1^2")
    ap.add_argument("--dim", type=int, default=1)
    ap.add_argument("--q", type=float, nargs="+", default=[1.0])
    ap.add_argument("--qt", type=float, nargs="+", default=[0.0])
    ap.add_argument("--t1", type=float, default=2 * math.pi)
    ap.add_argument("--dt", type=float, nargs="+", default=[1e-2, 1e-3])
    args = ap.parse_args()

    L = LagrangianSystem.parse(args.lagrangian, args.dim)
    report = legendre_map(L)
    print("momenta:", ", ".join(map(str, report.momenta)))
    if not report.hyperregular:
        raise SystemExit("not hyperregular: no associated Hamiltonian")
    H = associated_hamiltonian(L)
    print("associated hamiltonian:", H.hamiltonian)

    ic = sx.point(t=0.0, q=args.q, qt=args.qt)
    hic = sx.point(t=0.0, q=args.q, p=legendre_image(L, ic))
    for dt in args.dt:
        tl = integrate_lagrange(L, ic, (0.0, args.t1), dt)
        th = integrate_hamilton(H, hic, (0.0, args.t1), dt)
        mom = np.column_stack([tl.evaluate(m) for m in L.momenta])
        gap = max(np.max(np.abs(tl.q - th.q)), np.max(np.abs(mom - th.p)))
        print(f"dt = {dt:g}: max gap in (q, p) {gap:.3e} over {len(tl.times) - 1} steps")


if __name__ == "__main__":
    main()
