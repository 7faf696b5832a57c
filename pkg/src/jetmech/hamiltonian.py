"""Hamiltonian mechanics on the phase space V*Q and its homogeneous lift to T*Q.

Bracket convention (kept as given, not the textbook one)::

    {f, g}_V = ∂^i f ∂_i g - ∂^i g ∂_i f

so ``{p1, q1}_V = 1`` and ``{q1, p1}_V = -1``.  The evolution of an
observable is ``∂_t F + {H, F}_V``.

The homogeneous bracket on T*Q adds the conjugate pair ``(t, p0)``::

    {f, g}_T = {f, g}_V + ∂_{p0} f ∂_t g - ∂_{p0} g ∂_t f

This explicit formula is a reconstruction: it is the extension for which
``{p0 + H, F}_T`` reproduces ``∂_t F + {H, F}_V`` on lifted functions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import symexpr as sx
from .bundle import Frame, random_points
from .integrate import NumericalError, Trajectory, initial_state, rk4
from .lagrangian import LagrangianError, LagrangianSystem, legendre_map
from .symexpr import Expr, Sym

__all__ = [
    "HamiltonianError", "HamiltonianSystem", "HomogeneousHamiltonian", "AssociationReport",
    "poisson_bracket", "homogeneous_bracket", "lift", "hamilton_equations", "frame_split",
    "evolution_derivative", "homogeneous_evolution", "associated_hamiltonian",
    "association_residuals", "hamiltonian_map", "lagrangian_of_H", "hamilton_lagrange_residuals",
    "integrate_hamilton", "legendre_image",
]


class HamiltonianError(sx.ExprError):
    pass


def _indices(*exprs: Expr) -> list[int]:
    idx = {s.index for e in exprs for s in sx.free_symbols(e) if s.kind in ("q", "p") and s.index > 0}
    return sorted(idx)


def _check_phase(e: Expr, allow_p0: bool = False) -> None:
    bad = sorted(s.name for s in sx.free_symbols(e)
                 if s.kind in ("qt", "qtt") or (s == sx.p0 and not allow_p0))
    if bad:
        raise HamiltonianError(f"phase-space function may not contain {', '.join(bad)}")


@dataclass(frozen=True)
class HamiltonianSystem:
    n: int
    hamiltonian: Expr

    def __post_init__(self):
        object.__setattr__(self, "hamiltonian", sx.as_expr(self.hamiltonian))
        _check_phase(self.hamiltonian)
        sx.check_dimension(self.hamiltonian, self.n)

    @classmethod
    def parse(cls, text: str, n: int) -> "HamiltonianSystem":
        return cls(n, sx.parse(text, n))

    def phase_symbols(self) -> list[Sym]:
        return ([sx.t] + [sx.q(i) for i in range(1, self.n + 1)]
                + [sx.p(i) for i in range(1, self.n + 1)])

    def homogeneous(self) -> "HomogeneousHamiltonian":
        return HomogeneousHamiltonian(self.n, sx.p0 + self.hamiltonian)


@dataclass(frozen=True)
class HomogeneousHamiltonian:
    """``H* = p0 + H`` on T*Q."""

    n: int
    expr: Expr

    def __post_init__(self):
        if sx.simplify(sx.diff(self.expr, sx.p0)) != sx.ONE:
            raise HamiltonianError("homogeneous Hamiltonian must have unit p0 coefficient")


def _bracket(f: Expr, g: Expr) -> Expr:
    terms = []
    for i in _indices(f, g):
        qi, pi = sx.q(i), sx.p(i)
        terms.append(sx.diff(f, pi) * sx.diff(g, qi))
        terms.append(-sx.diff(g, pi) * sx.diff(f, qi))
    return sx.add(*terms)


def poisson_bracket(f: Expr, g: Expr) -> Expr:
    """``{f, g}_V = ∂^i f ∂_i g - ∂^i g ∂_i f``."""
    f, g = sx.as_expr(f), sx.as_expr(g)
    _check_phase(f)
    _check_phase(g)
    return sx.simplify(_bracket(f, g))


def homogeneous_bracket(f: Expr, g: Expr) -> Expr:
    """Canonical bracket on T*Q, treating ``(t, p0)`` as a conjugate pair."""
    f, g = sx.as_expr(f), sx.as_expr(g)
    _check_phase(f, allow_p0=True)
    _check_phase(g, allow_p0=True)
    extra = sx.diff(f, sx.p0) * sx.diff(g, sx.t) - sx.diff(g, sx.p0) * sx.diff(f, sx.t)
    return sx.simplify(_bracket(f, g) + extra)


def lift(f: Expr) -> Expr:
    """Pull-back along T*Q -> V*Q; a function of (t, q, p) is read on T*Q unchanged."""
    _check_phase(f)
    return f


def hamilton_equations(H: HamiltonianSystem) -> tuple[tuple, tuple]:
    """``q^k_t = ∂^k H``, ``p_tk = -∂_k H``."""
    h = H.hamiltonian
    qdot = tuple(sx.simplify(sx.diff(h, sx.p(k))) for k in range(1, H.n + 1))
    pdot = tuple(sx.simplify(-sx.diff(h, sx.q(k))) for k in range(1, H.n + 1))
    return qdot, pdot


def frame_split(H: HamiltonianSystem, frame: Frame) -> tuple[Expr, Expr]:
    """``(H_Γ, E_Γ)`` with ``H_Γ = p_i Γ^i`` and ``E_Γ = H - H_Γ``."""
    if frame.n != H.n:
        raise HamiltonianError("frame and Hamiltonian dimensions differ")
    h_frame = sx.simplify(sx.add(*(sx.p(i) * g for i, g in enumerate(frame.components, start=1))))
    return h_frame, sx.simplify(H.hamiltonian - h_frame)


def homogeneous_evolution(F: Expr, H: HamiltonianSystem) -> Expr:
    """``{H*, ζ*F}_T``."""
    return homogeneous_bracket(H.homogeneous().expr, lift(F))


def evolution_derivative(F: Expr, H: HamiltonianSystem, check_points: int = 20) -> Expr:
    """``∂_t F + {H, F}_V``, cross-checked against the homogeneous form."""
    F = sx.as_expr(F)
    _check_phase(F)
    value = sx.simplify(sx.diff(F, sx.t) + poisson_bracket(H.hamiltonian, F))
    homog = homogeneous_evolution(F, H)
    gap = sx.simplify(value - homog)
    n = max([H.n] + _indices(F))
    pts = random_points(n, check_points, np.random.default_rng(3), kinds=("q", "p", "p0"))
    if not sx.is_numerically_zero(gap, pts, 1e-12):
        raise HamiltonianError("homogeneous evolution disagrees with the V*Q evolution")
    return value


def hamiltonian_map(H: HamiltonianSystem) -> tuple:
    """Velocities ``q^i_t = ∂^i H`` of the Hamiltonian map V*Q -> J¹Q."""
    return hamilton_equations(H)[0]


def lagrangian_of_H(H: HamiltonianSystem) -> Expr:
    """``L_H = p_i q^i_t - H`` on J¹V*Q."""
    return sx.simplify(sx.add(*(sx.p(i) * sx.qt(i) for i in range(1, H.n + 1))) - H.hamiltonian)


def hamilton_lagrange_residuals(H: HamiltonianSystem, pt: Mapping[Sym, float],
                                pdot: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Lagrange-equation residuals of ``L_H`` in the variables ``(q, p)``.

    ``pt`` assigns ``t, q, p, q_t``; ``pdot`` holds ``p_t`` (no symbol for it
    exists in the alphabet).  Returns ``(E_q, E_p)``; since ``∂L_H/∂p_t = 0``,
    ``E_p = ∂L_H/∂p`` and ``E_q = ∂L_H/∂q - d_t p``.
    """
    LH = lagrangian_of_H(H)
    n = H.n
    e_q = np.array([sx.evaluate(sx.diff(LH, sx.q(i)), pt) - pdot[i - 1] for i in range(1, n + 1)])
    e_p = np.array([sx.evaluate(sx.diff(LH, sx.p(i)), pt) for i in range(1, n + 1)])
    return e_q, e_p


@dataclass(frozen=True)
class AssociationReport:
    hamiltonian: HamiltonianSystem
    legendre_residual: float
    lagrangian_residual: float
    roundtrip_residual: float


def legendre_image(L: LagrangianSystem, pt: Mapping[Sym, float]) -> np.ndarray:
    """Momenta ``π_i(t, q, q_t)`` at ``pt``."""
    return np.array([sx.evaluate(pi, pt) for pi in L.momenta])


def association_residuals(L: LagrangianSystem, H: HamiltonianSystem,
                          points: Sequence[Mapping[Sym, float]]) -> tuple[float, float, float]:
    """Max residuals of ``L̂∘Ĥ∘L̂ = L̂``, ``Ĥ*L_H = Ĥ*L`` and ``Ĥ∘L̂ = id``."""
    n = L.n
    vel_map = hamiltonian_map(H)
    LH = lagrangian_of_H(H)
    r1 = r2 = r3 = 0.0
    for pt in points:
        base = {sx.t: pt[sx.t], **{sx.q(i): pt[sx.q(i)] for i in range(1, n + 1)}}
        jet = {**base, **{sx.qt(i): pt[sx.qt(i)] for i in range(1, n + 1)}}
        mom = legendre_image(L, jet)
        phase = {**base, **{sx.p(i): mom[i - 1] for i in range(1, n + 1)}}
        v = np.array([sx.evaluate(e, phase) for e in vel_map])
        r3 = max(r3, float(np.max(np.abs(v - [pt[sx.qt(i)] for i in range(1, n + 1)]))))
        jet2 = {**base, **{sx.qt(i): v[i - 1] for i in range(1, n + 1)}}
        mom2 = legendre_image(L, jet2)
        r1 = max(r1, float(np.max(np.abs(mom2 - mom))))
        # pull-backs by Ĥ at an arbitrary phase point
        ph = {**base, **{sx.p(i): pt[sx.p(i)] for i in range(1, n + 1)}}
        vh = [sx.evaluate(e, ph) for e in vel_map]
        full = {**ph, **{sx.qt(i): vh[i - 1] for i in range(1, n + 1)}}
        r2 = max(r2, abs(sx.evaluate(LH, full) - sx.evaluate(L.lagrangian, full)))
    return r1, r2, r3


def associated_hamiltonian(L: LagrangianSystem, samples: int = 30, tol: float = 1e-9,
                           report: bool = False):
    """``H = p_i L̂⁻¹ⁱ - L(t, q, L̂⁻¹)`` for a hyperregular ``L``.

    The association conditions are checked at random points; with
    ``report=True`` an :class:`AssociationReport` is returned instead.
    """
    leg = legendre_map(L)
    if not leg.hyperregular or leg.inverse is None:
        raise LagrangianError(f"cannot build the associated Hamiltonian: {leg.diagnostic}")
    rules = leg.inverse_rules()
    h = sx.add(*(sx.p(i) * v for i, v in enumerate(leg.inverse, start=1)))
    h = sx.simplify(h - sx.substitute(L.lagrangian, rules))
    H = HamiltonianSystem(L.n, h)
    pts = random_points(L.n, samples, np.random.default_rng(5), kinds=("q", "qt", "p"))
    r1, r2, r3 = association_residuals(L, H, pts)
    if max(r1, r2, r3) > tol:
        raise LagrangianError(f"association conditions violated (residuals {r1:.3g}, {r2:.3g}, {r3:.3g})")
    if report:
        return AssociationReport(H, r1, r2, r3)
    return H


def integrate_hamilton(H: HamiltonianSystem, ic: Mapping[Sym, float], t_span: tuple[float, float],
                       dt: float, monitors: Mapping[str, Expr] | None = None) -> Trajectory:
    """RK4 on the Hamilton equations."""
    n = H.n
    t0, y0 = initial_state(ic, ("q", "p"), n)
    qdot, pdot = hamilton_equations(H)
    f = sx.lambdify(list(qdot + pdot), H.phase_symbols())

    def rhs(tk, y):
        try:
            return np.array(f(tk, *y))
        except sx.DomainError as err:
            raise NumericalError(f"domain error at t = {tk:.6g}: {err}") from None

    start = t0 if t_span[0] is None else t_span[0]
    ts, ys = rk4(rhs, y0, start, t_span[1], dt)
    traj = Trajectory("hamilton", ts, ys[:, :n], ys[:, n:], ts[1] - ts[0])
    if monitors:
        traj.add_monitors(monitors)
    return traj
