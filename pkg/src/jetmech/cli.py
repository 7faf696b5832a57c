"""Command-line entry point: ``jetmech <command> --system <file> [options]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import symexpr as sx
from .bundle import TransformError, frame_of_chart, random_points
from .hamiltonian import (HamiltonianError, HamiltonianSystem, associated_hamiltonian, evolution_derivative,
                          frame_split, hamilton_equations, integrate_hamilton, legendre_image)
from .integrate import NumericalError, Trajectory, format_float
from .lagrangian import (LagrangianError, energy_function, free_motion_transform, integrate_lagrange,
                         lagrange_operator, legendre_map, noether_current, poincare_cartan,
                         relative_acceleration, second_order_equation)
from .quantum import (AffineObservable, Axis, GridError, HalfDensityGrid, QuantizationError, dirac_defect,
                      gaussian, hamilton_operator, inner_product, quantize_quadratic, schrodinger_evolve)
from .systemfile import SystemFile, SystemFileError, load_system

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3
COMMANDS = ("derive", "simulate", "legendre", "noether", "frame", "quantum")


class CommandError(ValueError):
    """Validation failure detected while running a command."""


def _kind(sf: SystemFile, args) -> str:
    if args.lagrange and args.hamilton:
        raise CommandError("[flags] choose one of --lagrange / --hamilton")
    if args.lagrange or (not args.hamilton and sf.lagrangian is not None and sf.hamiltonian is None):
        if sf.lagrangian is None:
            raise SystemFileError("lagrangian", "section required for --lagrange")
        return "lagrange"
    if args.hamilton or (sf.hamiltonian is not None and sf.lagrangian is None):
        if sf.hamiltonian is None:
            raise SystemFileError("hamiltonian", "section required for --hamilton")
        return "hamilton"
    if sf.lagrangian is None and sf.hamiltonian is None:
        raise SystemFileError("system", "a lagrangian or hamiltonian section is required")
    raise SystemFileError("system", "both lagrangian and hamiltonian declared; pass --lagrange or --hamilton")


def _simulation(sf: SystemFile, args):
    if sf.simulation is None:
        raise SystemFileError("simulation", "section required for this command")
    sim = sf.simulation
    t0 = sim.t0 if args.t0 is None else args.t0
    t1 = sim.t1 if args.t1 is None else args.t1
    dt = sim.dt if args.dt is None else args.dt
    if not dt > 0 or not t1 > t0:
        raise SystemFileError("simulation", "need dt > 0 and t1 > t0")
    return sim, t0, t1, dt


def _monitor_exprs(sf: SystemFile, kind: str) -> dict:
    out = {}
    for name, m in sf.monitors.items():
        if isinstance(m, str):
            frame = sf.frame(m.split(":", 1)[1])
            if kind == "lagrange":
                out[name] = energy_function(frame, sf.lagrangian)
            else:
                out[name] = frame_split(sf.hamiltonian, frame)[1]
        else:
            bad = {"lagrange": ("p",), "hamilton": ("qt", "qtt")}[kind]
            if any(s.kind in bad for s in sx.free_symbols(m)):
                raise SystemFileError("monitors", f"monitor {name} uses symbols unavailable in a {kind} run")
            out[name] = m
    return out


def _run(sf: SystemFile, args, kind: str) -> Trajectory:
    sim, t0, t1, dt = _simulation(sf, args)
    ic = sim.initial_point(kind)
    ic[sx.t] = t0
    monitors = _monitor_exprs(sf, kind)
    if kind == "lagrange":
        leg = legendre_map(sf.lagrangian)
        if not leg.hyperregular:
            raise SystemFileError("lagrangian", f"cannot simulate: {leg.diagnostic}")
        return integrate_lagrange(sf.lagrangian, ic, (t0, t1), dt, monitors)
    return integrate_hamilton(sf.hamiltonian, ic, (t0, t1), dt, monitors)


def _emit(args, name: str, text: str, out) -> None:
    if args.out:
        path = Path(args.out)
        path.mkdir(parents=True, exist_ok=True)
        (path / name).write_text(text)
        print(f"wrote {path / name}", file=out)
    else:
        out.write(text)


def cmd_derive(sf: SystemFile, args, out) -> None:
    kind = _kind(sf, args)
    n = sf.dimension
    if kind == "lagrange":
        L = sf.lagrangian
        print(f"lagrangian: {L.lagrangian}", file=out)
        print("lagrange operator:", file=out)
        for i, e in enumerate(lagrange_operator(L), start=1):
            print(f"  E{i} = {e}", file=out)
        mom, dt_coeff = poincare_cartan(L)
        print("poincare-cartan form:", file=out)
        for i, m in enumerate(mom, start=1):
            print(f"  dq{i}: {m}", file=out)
        print(f"  dt: {dt_coeff}", file=out)
        leg = legendre_map(L)
        print("legendre map:", file=out)
        for i, m in enumerate(leg.momenta, start=1):
            print(f"  p{i} = {m}", file=out)
        print(f"  hessian: [{'; '.join(', '.join(str(e) for e in row) for row in leg.hessian)}]", file=out)
        print(f"  hyperregular: {'yes' if leg.hyperregular else 'no'} ({leg.diagnostic})", file=out)
        if leg.inverse is not None:
            for i, v in enumerate(leg.inverse, start=1):
                print(f"  inverse qt{i} = {v}", file=out)
        if leg.hyperregular:
            xi = second_order_equation(L)
            print("second-order equation:", file=out)
            for i, e in enumerate(xi.rhs, start=1):
                print(f"  qtt{i} = {e}", file=out)
    else:
        H = sf.hamiltonian
        qdot, pdot = hamilton_equations(H)
        print(f"hamiltonian: {H.hamiltonian}", file=out)
        print("hamilton equations:", file=out)
        for i in range(n):
            print(f"  qt{i + 1} = {qdot[i]}", file=out)
        for i in range(n):
            print(f"  pt{i + 1} = {pdot[i]}", file=out)


def cmd_simulate(sf: SystemFile, args, out) -> None:
    kind = _kind(sf, args)
    traj = _run(sf, args, kind)
    _emit(args, "trajectory.csv", traj.to_csv(), out)
    if args.out:
        for name, vals in traj.monitors.items():
            print(f"monitor {name}: max drift {format_float(float(np.max(np.abs(vals - vals[0]))))}", file=out)


def cmd_legendre(sf: SystemFile, args, out) -> None:
    if sf.lagrangian is None:
        raise SystemFileError("lagrangian", "section required for legendre")
    L = sf.lagrangian
    leg = legendre_map(L)
    for i, m in enumerate(leg.momenta, start=1):
        print(f"p{i} = {m}", file=out)
    print(f"hyperregular: {'yes' if leg.hyperregular else 'no'} ({leg.diagnostic})", file=out)
    if not leg.hyperregular or leg.inverse is None:
        raise CommandError(f"[lagrangian] associated Hamiltonian requires a hyperregular Lagrangian: {leg.diagnostic}")
    rep = associated_hamiltonian(L, report=True)
    print(f"associated hamiltonian: {rep.hamiltonian.hamiltonian}", file=out)
    print(f"residual L∘H∘L = L: {format_float(rep.legendre_residual)}", file=out)
    print(f"residual H*L_H = H*L: {format_float(rep.lagrangian_residual)}", file=out)
    print(f"residual H∘L = id: {format_float(rep.roundtrip_residual)}", file=out)
    n = L.n
    if sf.hamiltonian is not None:
        gap = sx.simplify(sf.hamiltonian.hamiltonian - rep.hamiltonian.hamiltonian)
        pts = random_points(n, 30, kinds=("q", "p"))
        worst = max(abs(sx.evaluate(gap, pt)) for pt in pts)
        print(f"declared hamiltonian matches: {'yes' if worst <= 1e-9 else 'no'} (max gap {format_float(worst)})",
              file=out)
    if sf.simulation is not None and sf.simulation.q and sf.simulation.qt:
        traj_l = _run(sf, args, "lagrange")
        sim, t0, t1, dt = _simulation(sf, args)
        ic = sx.point(t=t0, q=sim.q, qt=sim.qt)
        p0 = legendre_image(L, ic)
        traj_h = integrate_hamilton(rep.hamiltonian, sx.point(t=t0, q=sim.q, p=p0), (t0, t1), dt)
        mom = np.column_stack([
            sx.lambdify(m, L.jet_symbols(), backend="numpy")(traj_l.times, *traj_l.q.T, *traj_l.qt.T)
            for m in L.momenta])
        gap = max(float(np.max(np.abs(traj_l.q - traj_h.q))), float(np.max(np.abs(mom - traj_h.p))))
        print(f"lagrange/hamilton trajectory gap: {format_float(gap)}", file=out)


def cmd_noether(sf: SystemFile, args, out) -> None:
    if sf.lagrangian is None:
        raise SystemFileError("lagrangian", "section required for noether")
    if args.symmetry:
        if args.symmetry not in sf.symmetries:
            raise SystemFileError(f"symmetry:{args.symmetry}", "no such symmetry declared")
        chosen = {args.symmetry: sf.symmetries[args.symmetry]}
    else:
        chosen = sf.symmetries
    if not chosen:
        raise SystemFileError("symmetry", "declare at least one [symmetry:<name>] section")
    traj = _run(sf, args, "lagrange") if sf.simulation is not None else None
    for name, u in chosen.items():
        res = noether_current(u, sf.lagrangian)
        line = f"{name}: symmetry: {'yes' if res.symmetry else 'no'}; current {res.current}"
        if traj is not None:
            vals = traj.evaluate(res.current)
            line += f"; max drift {format_float(float(np.max(np.abs(vals - vals[0]))))}"
        print(line, file=out)


def cmd_frame(sf: SystemFile, args, out) -> None:
    frame = sf.frame(args.frame)
    print(f"frame {frame.name or 'rest'}: " + ", ".join(f"G{i} = {g}" for i, g in enumerate(frame.components, 1)),
          file=out)
    if sf.lagrangian is not None:
        print(f"energy function E_G: {energy_function(frame, sf.lagrangian)}", file=out)
        if legendre_map(sf.lagrangian).hyperregular:
            xi = second_order_equation(sf.lagrangian)
            for i, a in enumerate(relative_acceleration(xi, frame), start=1):
                print(f"relative acceleration a{i} = {a}", file=out)
    if sf.hamiltonian is not None:
        h_frame, energy = frame_split(sf.hamiltonian, frame)
        print(f"frame hamiltonian H_G: {h_frame}", file=out)
        print(f"hamiltonian function E_G: {energy}", file=out)
        print(f"evolution of E_G: {evolution_derivative(energy, sf.hamiltonian)}", file=out)
    if args.transform:
        tr = sf.transform(args.transform)
        rest = frame_of_chart(tr)
        print(f"frame at rest in chart {tr.name}: "
              + ", ".join(f"G{i} = {g}" for i, g in enumerate(rest.components, 1)), file=out)
        xi = free_motion_transform(tr)
        print(f"free motion (inertial chart mapped by {tr.name}):", file=out)
        for i, e in enumerate(xi.rhs, start=1):
            print(f"  qtt{i} = {e}", file=out)


def _default_pairs(n: int) -> dict:
    q1, p1 = sx.q(1), sx.p(1)
    return {
        "q-p": (AffineObservable.from_expr(q1, n), AffineObservable.from_expr(p1, n)),
        "qp-p": (AffineObservable.from_expr(q1 * p1, n), AffineObservable.from_expr(p1 + q1 * q1, n)),
    }


def cmd_quantum(sf: SystemFile, args, out) -> None:
    if sf.hamiltonian is None:
        raise SystemFileError("hamiltonian", "section required for quantum")
    if sf.quantum is None:
        raise SystemFileError("quantum", "section required for quantum")
    qc = sf.quantum
    axes = qc.axes()
    H = sf.hamiltonian
    frame = sf.frame(args.frame) if args.frame else None
    ops = hamilton_operator(H, frame)
    print(f"hamilton operator: {ops.full.describe()}", file=out)
    if frame is not None:
        print(f"frame part ({frame.name}): {ops.frame_part.describe()}", file=out)
        print(f"energy operator: {ops.energy.describe()}", file=out)
    rng = np.random.default_rng(0)
    probe = HalfDensityGrid(axes, rng.normal(size=tuple(a.n for a in axes))
                            + 1j * rng.normal(size=tuple(a.n for a in axes)), qc.bc)
    split = ops.frame_part.apply(probe).values + ops.energy.apply(probe).values - ops.full.apply(probe).values
    print(f"split identity max error: {format_float(float(np.max(np.abs(split))))}", file=out)

    pairs = sf.dirac or _default_pairs(sf.dimension)
    print("dirac check (relative defect by node count, observed order):", file=out)
    for name, (f, g) in pairs.items():
        errs = []
        sizes = [max(8, a.n // 4) for a in axes], [max(8, a.n // 2) for a in axes], [a.n for a in axes]
        for ns in sizes:
            ax = tuple(Axis(a.x_min, a.x_max, m) for a, m in zip(axes, ns))
            rho = gaussian(ax, qc.center, qc.width, qc.momentum, qc.bc)
            margin = 0.1 * min(a.length for a in ax)
            errs.append(dirac_defect(f, g, rho, margin))
        orders = [np.log2(errs[k] / errs[k + 1]) if errs[k + 1] > 0 else float("inf") for k in range(2)]
        print(f"  {name}: " + ", ".join(f"N={ns[0]}: {e:.6e}" for ns, e in zip(sizes, errs))
              + f"; order {orders[0]:.3f}, {orders[1]:.3f}", file=out)

    if sf.simulation is not None:
        _, t0, t1, dt = _simulation(sf, args)
        rho0 = gaussian(axes, qc.center, qc.width, qc.momentum, qc.bc, t=t0)
        observables = {name: quantize_quadratic(o) for name, o in sf.observables.items()}
        op = ops.full
        ev = schrodinger_evolve(rho0, op, (t0, t1), dt, qc.record_every, observables)
        print(f"evolution: {len(ev.times)} records, final norm {format_float(ev.norms[-1])}, "
              f"max step drift {format_float(ev.max_step_drift)}, "
              f"survival {format_float(abs(inner_product(rho0, ev.final)))}", file=out)
        if args.out:
            _emit(args, "observables.csv", ev.observables_csv(), out)
            _emit(args, "snapshot_initial.csv", ev.snapshots[0].to_csv(), out)
            _emit(args, "snapshot_final.csv", ev.final.to_csv(), out)


HANDLERS = {
    "derive": cmd_derive, "simulate": cmd_simulate, "legendre": cmd_legendre,
    "noether": cmd_noether, "frame": cmd_frame, "quantum": cmd_quantum,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jetmech", description="Time-dependent mechanics on fibre bundles over R.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--system", required=True, help="system definition file")
    ap.add_argument("--out", help="directory for CSV output")
    ap.add_argument("--dt", type=float)
    ap.add_argument("--t0", type=float)
    ap.add_argument("--t1", type=float)
    ap.add_argument("--frame", help="name of a [frame:<name>] section (or 'rest')")
    ap.add_argument("--transform", help="name of a [transform:<name>] section")
    ap.add_argument("--symmetry", help="name of a [symmetry:<name>] section")
    ap.add_argument("--lagrange", action="store_true", help="use the Lagrangian description")
    ap.add_argument("--hamilton", action="store_true", help="use the Hamiltonian description")
    return ap


def main(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    try:
        sf = load_system(args.system)
        HANDLERS[args.command](sf, args, out)
    except NumericalError as exc:
        print(f"jetmech: numerical failure: {exc}", file=err)
        return EXIT_NUMERICAL
    except (SystemFileError, CommandError, sx.ExprError, TransformError, LagrangianError,
            HamiltonianError, QuantizationError, GridError) as exc:
        print(f"jetmech: error: {str(exc).splitlines()[0]}", file=err)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
