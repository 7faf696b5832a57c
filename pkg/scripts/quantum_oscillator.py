"""Crank-Nicolson evolution of oscillator states: norm drift, stationarity of
the ground state and the period of a displaced packet."""

import argparse
import math

import numpy as np

from jetmech.hamiltonian import HamiltonianSystem
from jetmech.quantum import Axis, gaussian, inner_product, position_operator, schrodinger_evolve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=512)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--shift", type=float, default=1.5)
    args = ap.parse_args()

    H = HamiltonianSystem.parse("1/2*p1^2 + 1/2*q1^2", 1)
    axes = (Axis(-10, 10, args.n),)
    ground = gaussian(axes)
    ev = schrodinger_evolve(ground, H, (0.0, 2 * math.pi), args.dt)
    overlap = inner_product(ground, ev.final)
    print(f"ground state after one period: |<rho0, rho>| = {abs(overlap):.10f}, "
          f"phase {np.angle(overlap):+.6f} (expected {-math.pi:+.6f} mod 2pi)")
    print(f"max per-step norm drift: {ev.max_step_drift:.2e}")

    shifted = gaussian(axes, center=[args.shift])
    ev = schrodinger_evolve(shifted, H, (0.0, 2 * math.pi), args.dt, record_every=round(0.25 / args.dt),
                            observables={"q": position_operator()})
    print("displaced packet <q>(t) against shift*cos(t):")
    for tk, v in zip(ev.times, ev.observables["q"]):
        print(f"  t = {tk:6.3f}  <q> = {v.real:+.6f}  closed form {args.shift * math.cos(tk):+.6f}")


if __name__ == "__main__":
    main()
