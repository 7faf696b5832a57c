"""First-order Lagrangian mechanics on the velocity space J¹Q."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from . import symexpr as sx
from .bundle import (ChartTransform, Frame, JetVectorField, VectorField, prolong_transform,
                     prolong_vector_field, random_points, symbolic_det, symbolic_inverse,
                     transform_expression)
from .integrate import NumericalError, Trajectory, initial_state, rk4
from .symexpr import Expr, Sym

__all__ = [
    "LagrangianError", "SingularHessianError", "LagrangianSystem", "SecondOrderEquation",
    "LegendreReport", "NoetherResult", "lagrange_operator", "poincare_cartan", "legendre_map",
    "second_order_equation", "cartan_residuals", "noether_current", "energy_function",
    "holonomic_prolongation", "relative_acceleration", "free_motion_transform",
    "integrate_lagrange", "DET_TOL",
]

DET_TOL = 1e-12


class LagrangianError(sx.ExprError):
    pass


class SingularHessianError(LagrangianError, NumericalError):
    """The velocity Hessian is singular, so q_tt cannot be eliminated."""


@dataclass(frozen=True)
class LagrangianSystem:
    n: int
    lagrangian: Expr

    def __post_init__(self):
        object.__setattr__(self, "lagrangian", sx.as_expr(self.lagrangian))
        bad = sorted(s.name for s in sx.free_symbols(self.lagrangian) if s.kind in ("p", "qtt"))
        if bad:
            raise LagrangianError(f"a first-order Lagrangian depends on (t, q, q_t) only; found {', '.join(bad)}")
        sx.check_dimension(self.lagrangian, self.n)

    @classmethod
    def parse(cls, text: str, n: int) -> "LagrangianSystem":
        return cls(n, sx.parse(text, n))

    @cached_property
    def momenta(self) -> tuple:
        """``π_i = ∂^t_i L``."""
        return tuple(sx.simplify(sx.diff(self.lagrangian, sx.qt(i))) for i in range(1, self.n + 1))

    @cached_property
    def hessian(self) -> tuple:
        """``∂^t_i ∂^t_j L``."""
        return tuple(tuple(sx.simplify(sx.diff(pi, sx.qt(j))) for j in range(1, self.n + 1))
                     for pi in self.momenta)

    def jet_symbols(self) -> list[Sym]:
        return ([sx.t] + [sx.q(i) for i in range(1, self.n + 1)]
                + [sx.qt(i) for i in range(1, self.n + 1)])


@dataclass(frozen=True)
class SecondOrderEquation:
    """Holonomic connection ``q^i_tt = ξ^i(t, q, q_t)``."""

    rhs: tuple

    def __post_init__(self):
        object.__setattr__(self, "rhs", tuple(sx.as_expr(e) for e in self.rhs))
        for e in self.rhs:
            bad = sorted(s.name for s in sx.free_symbols(e) if s.kind in ("p", "qtt"))
            if bad:
                raise LagrangianError(f"second-order equation right-hand side contains {', '.join(bad)}")

    @property
    def n(self) -> int:
        return len(self.rhs)

    def residual(self) -> tuple:
        """``q_tt - ξ`` as expressions."""
        return tuple(sx.qtt(i + 1) - e for i, e in enumerate(self.rhs))

    def integrate(self, ic: Mapping[Sym, float], t_span: tuple[float, float], dt: float) -> Trajectory:
        n = self.n
        t0, y0 = initial_state(ic, ("q", "qt"), n)
        args = [sx.t] + [sx.q(i) for i in range(1, n + 1)] + [sx.qt(i) for i in range(1, n + 1)]
        f = sx.lambdify(list(self.rhs), args)

        def rhs(tk, y):
            return np.concatenate([y[n:], f(tk, *y)])

        ts, ys = rk4(rhs, y0, t_span[0] if t_span[0] is not None else t0, t_span[1], dt)
        return Trajectory("lagrange", ts, ys[:, :n], ys[:, n:], ts[1] - ts[0])


def lagrange_operator(L: LagrangianSystem) -> tuple:
    """``E_i = ∂_i L - d_t ∂^t_i L``; its kernel is the Lagrange equation."""
    return tuple(sx.simplify(sx.diff(L.lagrangian, sx.q(i)) - sx.total_derivative(pi))
                 for i, pi in enumerate(L.momenta, start=1))


def poincare_cartan(L: LagrangianSystem) -> tuple[tuple, Expr]:
    """Coefficients of ``dq^i`` and ``dt`` in ``π_i dq^i - (q^i_t π_i - L) dt``."""
    energy = sx.add(*(sx.qt(i) * pi for i, pi in enumerate(L.momenta, start=1))) - L.lagrangian
    return L.momenta, sx.simplify(-energy)


@dataclass(frozen=True)
class LegendreReport:
    momenta: tuple
    hessian: tuple
    hyperregular: bool
    inverse: tuple | None
    numeric_inverse_only: bool
    diagnostic: str

    def inverse_rules(self) -> dict[Sym, Expr]:
        if self.inverse is None:
            raise LagrangianError(f"no symbolic inverse Legendre map: {self.diagnostic}")
        return {sx.qt(i): e for i, e in enumerate(self.inverse, start=1)}


def _probe_points(n: int, count: int = 50, seed: int = 7) -> list[dict]:
    return random_points(n, count, np.random.default_rng(seed), kinds=("q", "qt", "p"))


def _numeric_det(m: Sequence[Sequence[Expr]], pt: Mapping[Sym, float]) -> float:
    return float(np.linalg.det(np.array([[sx.evaluate(e, pt) for e in row] for row in m], dtype=float)))


def legendre_map(L: LagrangianSystem) -> LegendreReport:
    """Momenta ``p_i = ∂^t_i L`` plus a hyperregularity report.

    A symbolic inverse is built when the Hessian does not depend on the
    velocities (the map is then fibrewise affine); otherwise only a numeric
    inverse is possible.
    """
    n, H = L.n, L.hessian
    dets = []
    for pt in _probe_points(n):
        try:
            dets.append(_numeric_det(H, pt))
        except sx.DomainError:
            continue
    if not dets or min(abs(d) for d in dets) < DET_TOL:
        where = "everywhere probed" if dets and max(abs(d) for d in dets) < DET_TOL else "at a probed point"
        return LegendreReport(L.momenta, H, False, None, False,
                              f"velocity Hessian singular {where}; Lagrangian is not hyperregular")
    fibre_affine = all(not any(s.kind == "qt" for s in sx.free_symbols(e)) for row in H for e in row)
    if not fibre_affine:
        return LegendreReport(L.momenta, H, True, None, True,
                              "Hessian depends on velocities; inverse available numerically only")
    zero_vel = {sx.qt(i): sx.ZERO for i in range(1, n + 1)}
    offset = [sx.substitute(pi, zero_vel) for pi in L.momenta]
    inv, _ = symbolic_inverse([list(r) for r in H])
    inverse = tuple(
        sx.simplify(sx.add(*(inv[i][j] * (sx.p(j + 1) - offset[j]) for j in range(n))))
        for i in range(n))
    return LegendreReport(L.momenta, H, True, inverse, False, "hyperregular; fibrewise affine Legendre map")


def second_order_equation(L: LagrangianSystem) -> SecondOrderEquation:
    """Solve ``E_i = 0`` (linear in ``q_tt``) for ``q_tt``."""
    n, H = L.n, L.hessian
    dets = [_numeric_det(H, pt) for pt in _probe_points(n, 20)]
    if max(abs(d) for d in dets) < DET_TOL:
        raise SingularHessianError(
            "velocity Hessian vanishes identically: degenerate (almost-regular) Lagrangians are not supported")
    E = lagrange_operator(L)
    zero_acc = {sx.qtt(i): sx.ZERO for i in range(1, n + 1)}
    force = [sx.substitute(e, zero_acc) for e in E]
    # E_i = F_i - H_ij q_tt^j
    inv, _ = symbolic_inverse([list(r) for r in H])
    xi = tuple(sx.simplify(sx.add(*(inv[i][j] * force[j] for j in range(n)))) for i in range(n))
    return SecondOrderEquation(xi)


def cartan_residuals(L: LagrangianSystem, pt: Mapping[Sym, float],
                     q_paren: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Both residual families of the first-order Cartan equation.

    ``pt`` assigns ``t, q, q_t, q_tt`` of the repeated jet point and
    ``q_paren`` the independent first-derivative coordinates ``q_(t)``.
    """
    n = L.n
    q_paren = np.asarray(q_paren, dtype=float)
    if q_paren.shape != (n,):
        raise LagrangianError(f"q_(t) must have {n} components")
    gap = np.array([q_paren[j] - pt[sx.qt(j + 1)] if sx.qt(j + 1) in pt else np.nan for j in range(n)])
    if np.any(np.isnan(gap)):
        raise sx.UnassignedSymbolError("unassigned symbol(s): velocities q_t")
    pis = L.momenta
    first = np.array([sum(sx.evaluate(L.hessian[i][j], pt) * gap[j] for j in range(n)) for i in range(n)])
    second = np.empty(n)
    for i in range(n):
        pi = pis[i]
        dhat = sx.evaluate(sx.diff(pi, sx.t), pt)
        for j in range(n):
            dhat += q_paren[j] * sx.evaluate(sx.diff(pi, sx.q(j + 1)), pt)
            dpi = sx.diff(pi, sx.qt(j + 1))
            if dpi != sx.ZERO:
                acc = sx.qtt(j + 1)
                if acc not in pt:
                    raise sx.UnassignedSymbolError(f"unassigned symbol(s): {acc.name}")
                dhat += pt[acc] * sx.evaluate(dpi, pt)
        val = sx.evaluate(sx.diff(L.lagrangian, sx.q(i + 1)), pt) - dhat
        val += sum(sx.evaluate(sx.diff(pis[j], sx.q(i + 1)), pt) * gap[j] for j in range(n))
        second[i] = val
    return first, second


@dataclass(frozen=True)
class NoetherResult:
    symmetry: bool
    current: Expr
    lie_derivative: Expr
    max_violation: float


def noether_current(u: VectorField, L: LagrangianSystem, samples: int = 50,
                    tol: float = 1e-9, seed: int = 11) -> NoetherResult:
    """Symmetry test along ``J¹u`` and the current ``(u^i - u^t q^i_t) π_i + u^t L``."""
    if u.n != L.n:
        raise LagrangianError("vector field and Lagrangian dimensions differ")
    ju: JetVectorField = prolong_vector_field(u)
    lie = ju.lie_derivative(L.lagrangian)
    worst = 0.0
    for pt in random_points(L.n, samples, np.random.default_rng(seed)):
        try:
            worst = max(worst, abs(sx.evaluate(lie, pt)))
        except sx.DomainError:
            continue
    terms = [(c - u.ut * sx.qt(i)) * pi for i, (c, pi) in enumerate(zip(u.components, L.momenta), start=1)]
    current = sx.simplify(sx.add(*terms) + u.ut * L.lagrangian)
    return NoetherResult(worst <= tol, current, lie, worst)


def energy_function(frame: Frame, L: LagrangianSystem) -> Expr:
    """``E_Γ = π_i (q^i_t - Γ^i) - L``."""
    terms = [pi * (sx.qt(i) - g) for i, (pi, g) in enumerate(zip(L.momenta, frame.components), start=1)]
    return sx.simplify(sx.add(*terms) - L.lagrangian)


def holonomic_prolongation(frame: Frame) -> SecondOrderEquation:
    """``ξ_Γ^i = d_t Γ^i + ∂_j Γ^i (q^j_t - Γ^j)``."""
    n = frame.n
    out = []
    for g in frame.components:
        terms = [sx.total_derivative(g)]
        terms += [sx.diff(g, sx.q(j)) * (sx.qt(j) - frame.components[j - 1]) for j in range(1, n + 1)]
        out.append(sx.simplify(sx.add(*terms)))
    return SecondOrderEquation(tuple(out))


def relative_acceleration(xi: SecondOrderEquation, frame: Frame) -> tuple:
    """``a_Γ = ξ - ξ_Γ``."""
    if xi.n != frame.n:
        raise LagrangianError("equation and frame dimensions differ")
    xg = holonomic_prolongation(frame)
    return tuple(sx.simplify(a - b) for a, b in zip(xi.rhs, xg.rhs))


def free_motion_transform(tr: ChartTransform) -> SecondOrderEquation:
    """Image of ``q̄_tt = 0`` under ``q = f(t, q̄)``, written in the working chart."""
    acc = prolong_transform(tr).acceleration
    zero = {sx.qtt(i): sx.ZERO for i in range(1, tr.n + 1)}
    return SecondOrderEquation(tuple(transform_expression(sx.substitute(a, zero), tr, "forward") for a in acc))


def integrate_lagrange(L: LagrangianSystem, ic: Mapping[Sym, float], t_span: tuple[float, float],
                       dt: float, monitors: Mapping[str, Expr] | None = None) -> Trajectory:
    """RK4 on ``(q, q_t)`` with ``q_tt`` from a per-step solve of ``Hess · q_tt = F``."""
    n = L.n
    t0, y0 = initial_state(ic, ("q", "qt"), n)
    E = lagrange_operator(L)
    zero_acc = {sx.qtt(i): sx.ZERO for i in range(1, n + 1)}
    force = [sx.substitute(e, zero_acc) for e in E]
    args = L.jet_symbols()
    constant_hessian = all(not sx.free_symbols(e) for row in L.hessian for e in row)
    if constant_hessian:
        xi = second_order_equation(L)
        f = sx.lambdify(list(xi.rhs), args)

        def accel(tk, y):
            return np.array(f(tk, *y))
    else:
        fF = sx.lambdify(force, args)
        fH = sx.lambdify([e for row in L.hessian for e in row], args)

        def accel(tk, y):
            Hm = np.array(fH(tk, *y)).reshape(n, n)
            det = np.linalg.det(Hm)
            if abs(det) < DET_TOL:
                raise SingularHessianError(f"velocity Hessian singular at t = {tk:.6g} (det = {det:.3g})")
            return np.linalg.solve(Hm, np.array(fF(tk, *y)))

    def rhs(tk, y):
        try:
            return np.concatenate([y[n:], accel(tk, y)])
        except sx.DomainError as err:
            raise NumericalError(f"domain error at t = {tk:.6g}: {err}") from None

    start = t0 if t_span[0] is None else t_span[0]
    ts, ys = rk4(rhs, y0, start, t_span[1], dt)
    traj = Trajectory("lagrange", ts, ys[:, :n], ys[:, n:], ts[1] - ts[0])
    if monitors:
        traj.add_monitors(monitors)
    return traj
