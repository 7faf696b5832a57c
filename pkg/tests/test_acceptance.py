"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run standalone with ``python3 tests/test_acceptance.py`` or as part of pytest.
"""

import io
import math
import sys
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest

from jetmech import symexpr as sx
from jetmech.bundle import Frame, VectorField, frame_of_chart, prolong_transform, random_points
from jetmech.cli import main
from jetmech.hamiltonian import (HamiltonianSystem, associated_hamiltonian, frame_split, homogeneous_bracket,
                                 legendre_image, lift, poisson_bracket)
from jetmech.integrate import Trajectory
from jetmech.systemfile import load_system
from jetmech.lagrangian import (LagrangianSystem, energy_function, free_motion_transform, integrate_lagrange,
                                noether_current)
from jetmech.quantum import (AffineObservable, Axis, HalfDensityGrid, commutator, dirac_defect, gaussian,
                             hamilton_operator, inner_product, position_operator, quantize, schrodinger_evolve)
from conftest import ACCEPTANCE_LINES, OMEGA, SYSTEMS, rotation

t, q1, q2, p1, p2, qt1, qt2 = sx.t, sx.q(1), sx.q(2), sx.p(1), sx.p(2), sx.qt(1), sx.qt(2)
HALF = Fraction(1, 2)


@contextmanager
def criterion(number: int, title: str):
    info: dict = {}
    start = time.perf_counter()
    try:
        yield info
    except BaseException:
        line = f"[FAIL] {number}. {title}: {info.get('detail', '')}".rstrip(": ")
        ACCEPTANCE_LINES.append(line)
        print(line)
        raise
    line = f"[PASS] {number}. {title}: {info.get('detail', '')} ({time.perf_counter() - start:.2f} s)"
    ACCEPTANCE_LINES.append(line)
    print(line)


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], out, err)
    assert code == 0, err.getvalue()
    return out.getvalue()


def hamilton_system_file(H: HamiltonianSystem, q0, p0, t1, dt) -> str:
    return (f"[system]\ndimension = {H.n}\n[hamiltonian]\nexpr = \"{H.hamiltonian}\"\n"
            f"[simulation]\nt0 = 0\nt1 = {t1!r}\ndt = {dt!r}\n"
            f"q = {', '.join(repr(float(v)) for v in q0)}\np = {', '.join(repr(float(v)) for v in p0)}\n")


def test_lagrange_hamilton_equivalence(tmp_path):
    with criterion(1, "Lagrange/Hamilton trajectory equivalence") as info:
        start = time.perf_counter()
        gaps = {}
        for name in ("oscillator", "exp_kinetic"):
            src = SYSTEMS / f"{name}.ini"
            lag_dir = tmp_path / f"{name}_l"
            cli("simulate", "--system", src, "--lagrange", "--out", lag_dir, "--t1", repr(2 * math.pi), "--dt", "1e-3")
            traj_l = Trajectory.from_csv(lag_dir / "trajectory.csv", "lagrange", 1)

            L = load_system(src).lagrangian
            H = associated_hamiltonian(L)
            ic = sx.point(t=0, q=traj_l.q[0], qt=traj_l.qt[0])
            ham_file = tmp_path / f"{name}_h.ini"
            ham_file.write_text(hamilton_system_file(H, traj_l.q[0], legendre_image(L, ic), 2 * math.pi, 1e-3))
            ham_dir = tmp_path / f"{name}_h"
            cli("simulate", "--system", ham_file, "--hamilton", "--out", ham_dir)
            traj_h = Trajectory.from_csv(ham_dir / "trajectory.csv", "hamilton", 1)

            assert np.array_equal(traj_l.times, traj_h.times)
            mom = np.column_stack([traj_l.evaluate(m) for m in L.momenta])
            gaps[name] = max(np.max(np.abs(traj_l.q - traj_h.q)), np.max(np.abs(mom - traj_h.p)))
        elapsed = time.perf_counter() - start
        info["detail"] = ", ".join(f"{k} gap {v:.2e}" for k, v in gaps.items()) + f", runtime {elapsed:.2f} s"
        assert max(gaps.values()) <= 1e-6
        assert elapsed < 5


def test_noether_suite():
    with criterion(2, "Noether currents") as info:
        free = LagrangianSystem(1, HALF * qt1**2)
        osc = LagrangianSystem(1, HALF * qt1**2 - HALF * q1**2)
        ic = sx.point(t=0, q=[0.5], qt=[1.0])

        translation = noether_current(VectorField(0, (sx.ONE,)), free)
        traj = integrate_lagrange(free, ic, (0.0, 1.0), 1e-3)
        vals = traj.evaluate(translation.current)
        d_mom = float(np.max(np.abs(vals - vals[0])))

        time_shift = noether_current(VectorField(1, (sx.ZERO,)), osc)
        energy = energy_function(Frame.rest(1), osc)
        assert max(abs(sx.evaluate(energy + time_shift.current, pt)) for pt in random_points(1, 20)) <= 1e-12
        traj = integrate_lagrange(osc, ic, (0.0, 1.0), 1e-3, {"E": energy})
        d_energy = float(np.max(np.abs(traj.monitors["E"] - traj.monitors["E"][0])))

        broken = noether_current(VectorField(0, (sx.ONE,)), osc)
        vals = integrate_lagrange(osc, ic, (0.0, 1.0), 1e-3).evaluate(broken.current)
        d_broken = float(np.max(np.abs(vals - vals[0])))

        info["detail"] = (f"translation drift {d_mom:.1e}, energy drift {d_energy:.1e}, "
                          f"broken drift {d_broken:.2f} (flag {broken.symmetry})")
        assert translation.symmetry and time_shift.symmetry and not broken.symmetry
        assert d_mom <= 1e-6 and d_energy <= 1e-6 and d_broken > 1e-2


def test_inertial_forces():
    with criterion(3, "Inertial forces in the rotating chart") as info:
        tr = rotation()
        xi = free_motion_transform(tr)
        ref = (2 * OMEGA * qt2 + OMEGA**2 * q1, -2 * OMEGA * qt1 + OMEGA**2 * q2)
        pts = random_points(2, 100, np.random.default_rng(2024), box=3.0, t_range=(-5, 5))
        rhs_err = max(abs(sx.evaluate(a - b, pt)) for a, b in zip(xi.rhs, ref) for pt in pts)

        # the straight line qbar(t) = (1 + t, 0) seen from the rotating chart
        pr = prolong_transform(tr)
        residual = 0.0
        for s in np.linspace(0, 10, 101):
            bar = sx.point(t=s, q=(1 + s, 0.0), qt=(1.0, 0.0), qtt=(0.0, 0.0))
            img = {t: s, **{sx.q(i): sx.evaluate(pr.position[i - 1], bar) for i in (1, 2)},
                   **{sx.qt(i): sx.evaluate(pr.velocity[i - 1], bar) for i in (1, 2)}}
            acc = [sx.evaluate(a, bar) for a in pr.acceleration]
            residual = max(residual, *(abs(acc[i] - sx.evaluate(xi.rhs[i], img)) for i in range(2)))
        info["detail"] = f"rhs mismatch {rhs_err:.1e}, straight-line residual {residual:.1e}"
        assert rhs_err <= 1e-9 and residual <= 1e-9


def test_bracket_axioms():
    with criterion(4, "Poisson bracket axioms") as info:
        rng = np.random.default_rng(4)
        phase = [t, q1, q2, p1, p2]

        def poly():
            terms = []
            for _ in range(rng.integers(1, 5)):
                powers = rng.multinomial(rng.integers(0, 4), [0.2] * 5)
                terms.append(int(rng.integers(-3, 4)) * sx.mul(*(v ** int(k) for v, k in zip(phase, powers))))
            return sx.add(*terms)

        pts = random_points(2, 10, rng, kinds=("q", "p", "p0"))
        antisym, jacobi, zeta = 0, 0.0, 0.0
        for _ in range(20):
            f, g, h = poly(), poly(), poly()
            if sx.simplify(poisson_bracket(f, g) + poisson_bracket(g, f)) != sx.ZERO:
                antisym += 1
            jac = (poisson_bracket(f, poisson_bracket(g, h)) + poisson_bracket(g, poisson_bracket(h, f))
                   + poisson_bracket(h, poisson_bracket(f, g)))
            jacobi = max(jacobi, max(abs(sx.evaluate(jac, pt)) for pt in pts))
            gap = homogeneous_bracket(lift(f), lift(g)) - lift(poisson_bracket(f, g))
            zeta = max(zeta, max(abs(sx.evaluate(gap, pt)) for pt in pts))
        info["detail"] = f"antisymmetry failures {antisym}, Jacobi {jacobi:.1e}, zeta-compatibility {zeta:.1e}"
        assert antisym == 0 and jacobi <= 1e-9 and zeta <= 1e-12


def test_dirac_condition():
    with criterion(5, "Dirac condition, second-order convergence") as info:
        start = time.perf_counter()
        rng = np.random.default_rng(5)

        def affine():
            a = sum(int(c) * q1**k for k, c in enumerate(rng.integers(-2, 3, 3)))
            b = sum(int(c) * q1**k for k, c in enumerate(rng.integers(-2, 3, 3)))
            a = a if sx.simplify(a) != sx.ZERO else sx.ONE
            return AffineObservable((a,), b)

        sizes = (128, 256, 512)
        pairs = [(affine(), affine()) for _ in range(5)]
        orders = []
        for f, g in pairs:
            errs = [dirac_defect(f, g, gaussian((Axis(-10, 10, n),), width=1.0, momentum=[0.5]), margin=2.0)
                    for n in sizes]
            orders += [math.log2(errs[0] / errs[1]), math.log2(errs[1] / errs[2])]

        # (q, p): the defect is exactly -i times the averaging stencil minus the identity
        stencil = 0.0
        fq, fp = AffineObservable.from_expr(q1, 1), AffineObservable.from_expr(p1, 1)
        for n in sizes:
            rho = gaussian((Axis(-10, 10, n),))
            defect = (commutator(quantize(fq), quantize(fp))
                      + 1j * quantize(AffineObservable.from_expr(poisson_bracket(q1, p1), 1))).apply(rho).values
            trunc = -1j * ((np.roll(rho.values, 1) + np.roll(rho.values, -1)) / 2 - rho.values)
            stencil = max(stencil, float(np.max(np.abs(defect - trunc))))
        elapsed = time.perf_counter() - start
        info["detail"] = (f"orders {min(orders):.3f}..{max(orders):.3f}, (q,p) stencil mismatch {stencil:.1e}, "
                          f"runtime {elapsed:.2f} s")
        assert all(1.8 <= o <= 2.2 for o in orders)
        assert stencil <= 1e-12
        assert elapsed < 10


def test_unitarity_and_stationarity():
    with criterion(6, "Crank-Nicolson unitarity, stationarity, Ehrenfest") as info:
        start = time.perf_counter()
        osc = HamiltonianSystem(1, HALF * p1**2 + HALF * q1**2)
        axes = (Axis(-10, 10, 512),)
        rho0 = gaussian(axes)
        ev = schrodinger_evolve(rho0, osc, (0.0, 2 * math.pi), 1e-3)
        survival = abs(inner_product(rho0, ev.final))

        long = schrodinger_evolve(gaussian(axes, center=[1.0], momentum=[0.5]), osc, (0.0, 10.0), 1e-3)
        steps = round(10.0 / 1e-3)

        free = HamiltonianSystem(1, HALF * p1**2)
        # the composed central stencil lags the packet by about (2dx)^2 <k^3> t / 6
        wide = (Axis(-20, 20, 2048),)
        packet = schrodinger_evolve(gaussian(wide, momentum=[1.0]), free, (0.0, 1.0), 1e-3, record_every=10,
                                    observables={"q": position_operator()})
        mean_q = np.real(np.array(packet.observables["q"]))
        times = np.array(packet.times)
        ehrenfest = float(np.max(np.abs(mean_q - mean_q[0] - times)))
        elapsed = time.perf_counter() - start
        info["detail"] = (f"max step drift {long.max_step_drift:.1e} over {steps} steps, survival {survival:.8f}, "
                          f"Ehrenfest drift {ehrenfest:.1e}, runtime {elapsed:.1f} s")
        assert long.max_step_drift <= 1e-10 and steps >= 10**4
        assert survival >= 1 - 1e-4
        assert ehrenfest <= 2e-3
        assert elapsed < 60


def test_frame_split_identities():
    with criterion(7, "Frame-split identities") as info:
        rng = np.random.default_rng(7)
        H = HamiltonianSystem(2, HALF * (p1**2 + p2**2) + sx.sin(t) * q1 * p2 + q1**2 * q2 + t * p1)
        frames = [frame_of_chart(rotation()), Frame((sx.cos(t) * q2, q1 * q1 + 1)), Frame.rest(2)]
        classical = 0.0
        for frame in frames:
            hg, eg = frame_split(H, frame)
            for pt in random_points(2, 50, rng, kinds=("q", "p")):
                classical = max(classical, abs(sx.evaluate(hg + eg, pt) - sx.evaluate(H.hamiltonian, pt)))
        quantum = 0.0
        axes = (Axis(-4, 4, 48), Axis(-3, 3, 40))
        for frame in frames:
            ops = hamilton_operator(H, frame)
            for _ in range(3):
                vals = rng.normal(size=(48, 40)) + 1j * rng.normal(size=(48, 40))
                grid = HalfDensityGrid(axes, vals, t=float(rng.uniform(0, 1)))
                lhs = ops.frame_part.apply(grid).values + ops.energy.apply(grid).values
                full = ops.full.apply(grid).values
                # relative to the largest entry: the operator values reach ~1e3 on these grids
                quantum = max(quantum, float(np.max(np.abs(lhs - full)) / np.max(np.abs(full))))
        info["detail"] = f"classical {classical:.1e}, operator (relative) {quantum:.1e}"
        assert classical <= 1e-13 and quantum <= 1e-13


def test_rk4_order():
    with criterion(8, "RK4 convergence order") as info:
        osc = LagrangianSystem(1, HALF * qt1**2 - HALF * q1**2)
        T = 10.0
        errs = []
        for dt in (0.1, 0.05):
            traj = integrate_lagrange(osc, sx.point(t=0, q=[1], qt=[0]), (0.0, T), dt)
            errs.append(abs(traj.q[-1, 0] - math.cos(T)))
        ratio = errs[0] / errs[1]
        info["detail"] = f"errors {errs[0]:.2e} -> {errs[1]:.2e}, ratio {ratio:.2f}"
        assert 12 <= ratio <= 20


if __name__ == "__main__":
    code = pytest.main([__file__, "-q", "-p", "no:cacheprovider", "-W", "ignore::pytest.PytestAssertRewriteWarning"])
    sys.exit(code)
