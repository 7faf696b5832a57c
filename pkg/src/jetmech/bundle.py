"""Configuration bundle Q -> R: chart transforms, reference frames, prolongations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import symexpr as sx
from .symexpr import Expr, Sym

__all__ = [
    "TransformError", "ChartTransform", "Frame", "VectorField", "Prolongation",
    "JetVectorField", "prolong_transform", "transform_expression", "frame_of_chart",
    "relative_velocity", "prolong_vector_field", "random_points", "symbolic_det",
    "symbolic_inverse",
]


class TransformError(sx.ExprError):
    """Invalid or singular chart transform."""


def _require_config_only(exprs: Sequence[Expr], what: str) -> None:
    for e in exprs:
        bad = sorted(s.name for s in sx.free_symbols(e) if s.kind not in ("t", "q"))
        if bad:
            raise TransformError(f"{what} may depend only on t and q; found {', '.join(bad)}")


def random_points(n: int, count: int, rng: np.random.Generator | None = None,
                  kinds: Sequence[str] = ("q", "qt"), t_range=(0.0, 1.0),
                  box: float = 1.0) -> list[dict]:
    """Random coordinate assignments with time in ``t_range`` and the rest in ``[-box, box]``."""
    rng = np.random.default_rng(0) if rng is None else rng
    pts = []
    for _ in range(count):
        pt = {sx.t: float(rng.uniform(*t_range))}
        for kind in kinds:
            if kind == "p0":
                pt[sx.p0] = float(rng.uniform(-box, box))
                continue
            for i in range(1, n + 1):
                pt[Sym(kind, i)] = float(rng.uniform(-box, box))
        pts.append(pt)
    return pts


def symbolic_det(m: Sequence[Sequence[Expr]]) -> Expr:
    n = len(m)
    if n == 1:
        return m[0][0]
    if n == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    terms = []
    for j in range(n):
        if m[0][j] == sx.ZERO:
            continue
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        sign = 1 if j % 2 == 0 else -1
        terms.append(sign * m[0][j] * symbolic_det(minor))
    return sx.add(*terms)


def symbolic_inverse(m: Sequence[Sequence[Expr]]) -> tuple[list[list[Expr]], Expr]:
    """Adjugate-over-determinant inverse.  Returns ``(inverse, det)``."""
    n = len(m)
    det = sx.simplify(symbolic_det(m))
    if det == sx.ZERO:
        raise TransformError("matrix is symbolically singular")
    if n == 1:
        return [[sx.simplify(1 / det)]], det
    inv_det = sx.power(det, -1)
    inv = [[sx.ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:j] + row[j + 1:] for k, row in enumerate(m) if k != i]
            cof = symbolic_det(minor) * (1 if (i + j) % 2 == 0 else -1)
            inv[j][i] = sx.simplify(cof * inv_det)
    return inv, det


@dataclass(frozen=True)
class ChartTransform:
    """Time-dependent change of bundle coordinates ``q' = f(t, q)``.

    ``inverse`` holds ``q = g(t, q')`` written in the same symbols ``q1..qn``
    (read as primed coordinates).  The inverse is supplied, not computed.
    """

    forward: tuple
    inverse: tuple
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "forward", tuple(sx.as_expr(e) for e in self.forward))
        object.__setattr__(self, "inverse", tuple(sx.as_expr(e) for e in self.inverse))
        if len(self.forward) != len(self.inverse) or not self.forward:
            raise TransformError("forward and inverse maps must have the same nonzero length")
        _require_config_only(self.forward + self.inverse, "transition functions")
        for e in self.forward + self.inverse:
            sx.check_dimension(e, self.n)

    @property
    def n(self) -> int:
        return len(self.forward)

    @classmethod
    def identity(cls, n: int) -> "ChartTransform":
        qs = tuple(sx.q(i) for i in range(1, n + 1))
        return cls(qs, qs, name="identity")

    @classmethod
    def parse(cls, forward: Sequence[str], inverse: Sequence[str], name: str = "") -> "ChartTransform":
        n = len(forward)
        return cls(tuple(sx.parse(s, n) for s in forward), tuple(sx.parse(s, n) for s in inverse), name)

    def inverted(self) -> "ChartTransform":
        return ChartTransform(self.inverse, self.forward, name=f"{self.name}^-1" if self.name else "")

    def jacobian(self) -> list[list[Expr]]:
        """Spatial Jacobian ``∂f^i/∂q^j`` of the forward map."""
        return [[sx.diff(f, sx.q(j)) for j in range(1, self.n + 1)] for f in self.forward]

    def inverse_jacobian(self) -> list[list[Expr]]:
        return [[sx.diff(g, sx.q(j)) for j in range(1, self.n + 1)] for g in self.inverse]

    def compose_forward_inverse(self) -> tuple:
        """``f(t, g(t, q'))``, which must equal ``q'``."""
        rules = {sx.q(i): g for i, g in enumerate(self.inverse, start=1)}
        return tuple(sx.substitute(f, rules) for f in self.forward)

    def check_at(self, pt: Mapping[Sym, float]) -> None:
        """Raise :class:`TransformError` if the spatial Jacobian is singular at ``pt``."""
        jac = np.array([[sx.evaluate(e, pt) for e in row] for row in self.jacobian()])
        det = float(np.linalg.det(jac))
        if abs(det) <= 1e-12:
            raise TransformError(f"singular spatial Jacobian (det = {det:.3g}) in transform {self.name or '<anonymous>'}")

    def verify(self, points: Sequence[Mapping[Sym, float]], tol: float = 1e-9) -> float:
        """Check invertibility and ``f∘g = id`` at ``points``; returns max residual."""
        comp = self.compose_forward_inverse()
        worst = 0.0
        for pt in points:
            self.check_at(pt)
            for i, e in enumerate(comp, start=1):
                worst = max(worst, abs(sx.evaluate(e, pt) - pt[sx.q(i)]))
        if worst > tol:
            raise TransformError(f"inverse map does not invert forward map (residual {worst:.3g})")
        return worst


@dataclass(frozen=True)
class Prolongation:
    """Images of jet and momentum coordinates under a chart transform.

    Every entry is written in the *source* coordinates: ``position[i]`` is
    ``q'^i``, ``velocity[i]`` is ``q'^i_t`` and so on.
    """

    transform: ChartTransform
    position: tuple
    velocity: tuple
    acceleration: tuple
    momentum: tuple
    energy_momentum: Expr

    def rules(self) -> dict[Sym, Expr]:
        """Primed symbol -> source-coordinate expression."""
        out: dict[Sym, Expr] = {sx.t: sx.t, sx.p0: self.energy_momentum}
        for i in range(1, self.transform.n + 1):
            out[sx.q(i)] = self.position[i - 1]
            out[sx.qt(i)] = self.velocity[i - 1]
            out[sx.qtt(i)] = self.acceleration[i - 1]
            out[sx.p(i)] = self.momentum[i - 1]
        return out

    def map_point(self, pt: Mapping[Sym, float]) -> dict:
        """Image of a point; only coordinates computable from ``pt`` are returned."""
        self.transform.check_at(pt)
        out = {}
        for sym, e in self.rules().items():
            if sx.free_symbols(e) <= set(pt):
                out[sym] = sx.evaluate(e, pt)
        return out


def prolong_transform(tr: ChartTransform) -> Prolongation:
    n = tr.n
    vel = tuple(sx.simplify(sx.total_derivative(f)) for f in tr.forward)
    acc = tuple(sx.simplify(sx.total_derivative(v)) for v in vel)
    # p'_i = (∂g^j/∂q'^i)∘f · p_j
    to_source = {sx.q(i): f for i, f in enumerate(tr.forward, start=1)}
    inv_jac = tr.inverse_jacobian()
    mom = []
    for i in range(n):
        terms = [sx.substitute(inv_jac[j][i], to_source) * sx.p(j + 1) for j in range(n)]
        mom.append(sx.simplify(sx.add(*terms)))
    # p'_0 = p_0 - p'_i ∂_t f^i
    e0 = sx.simplify(sx.p0 - sx.add(*(mom[i] * sx.diff(tr.forward[i], sx.t) for i in range(n))))
    return Prolongation(tr, tr.forward, vel, acc, tuple(mom), e0)


def transform_expression(e: Expr, tr: ChartTransform, direction: str = "forward") -> Expr:
    """Rewrite ``e`` in the target chart (``forward``) or the source chart (``inverse``).

    Value preserving: ``e(pt) == e'(image of pt)``.
    """
    if direction == "forward":
        rules = prolong_transform(tr.inverted()).rules()
    elif direction == "inverse":
        rules = prolong_transform(tr).rules()
    else:
        raise ValueError(f"direction must be 'forward' or 'inverse', not {direction!r}")
    sx.check_dimension(e, tr.n)
    return sx.simplify(sx.substitute(e, rules))


@dataclass(frozen=True)
class Frame:
    """Reference frame: the connection ``∂_t + Γ^i ∂_i`` on Q -> R."""

    components: tuple
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(sx.as_expr(e) for e in self.components))
        if not self.components:
            raise TransformError("a frame needs at least one component")
        _require_config_only(self.components, "frame components")

    @property
    def n(self) -> int:
        return len(self.components)

    @classmethod
    def rest(cls, n: int) -> "Frame":
        return cls((sx.ZERO,) * n, name="rest")

    @classmethod
    def parse(cls, components: Sequence[str], name: str = "") -> "Frame":
        n = len(components)
        return cls(tuple(sx.parse(s, n) for s in components), name)

    def transform(self, tr: ChartTransform) -> "Frame":
        """Components in the chart ``q' = f(t, q)``: ``Γ'^i = ∂_t f^i + ∂_j f^i Γ^j``."""
        if tr.n != self.n:
            raise TransformError("frame and transform dimensions differ")
        back = {sx.q(i): g for i, g in enumerate(tr.inverse, start=1)}
        comps = []
        for f in tr.forward:
            expr = sx.diff(f, sx.t) + sx.add(*(sx.diff(f, sx.q(j + 1)) * self.components[j] for j in range(self.n)))
            comps.append(sx.simplify(sx.substitute(expr, back)))
        return Frame(tuple(comps), self.name)


def frame_of_chart(tr: ChartTransform) -> Frame:
    """Frame at rest in the chart ``q̄ = f(t, q)``, expressed in the working chart."""
    to_bar = {sx.q(i): f for i, f in enumerate(tr.forward, start=1)}
    comps = tuple(sx.simplify(sx.substitute(sx.diff(g, sx.t), to_bar)) for g in tr.inverse)
    return Frame(comps, name=tr.name)


def relative_velocity(frame: Frame, pt: Mapping[Sym, float]) -> np.ndarray:
    """``q^i_t - Γ^i(t, q)`` at ``pt``."""
    out = np.empty(frame.n)
    for i, g in enumerate(frame.components):
        vel = sx.qt(i + 1)
        if vel not in pt:
            raise sx.UnassignedSymbolError(f"unassigned symbol(s): {vel.name}")
        out[i] = pt[vel] - sx.evaluate(g, pt)
    return out


@dataclass(frozen=True)
class VectorField:
    """``u = u^t ∂_t + u^i ∂_i`` with ``u^t`` exactly 0 or 1."""

    ut: int
    components: tuple
    name: str = ""

    def __post_init__(self):
        if self.ut not in (0, 1) or isinstance(self.ut, bool):
            raise TransformError(f"time component must be exactly 0 or 1, got {self.ut!r}")
        object.__setattr__(self, "components", tuple(sx.as_expr(e) for e in self.components))
        _require_config_only(self.components, "vector field components")

    @property
    def n(self) -> int:
        return len(self.components)

    @classmethod
    def from_frame(cls, frame: Frame) -> "VectorField":
        return cls(1, frame.components, frame.name)

    @classmethod
    def parse(cls, ut: int, components: Sequence[str], name: str = "") -> "VectorField":
        n = len(components)
        return cls(ut, tuple(sx.parse(s, n) for s in components), name)


@dataclass(frozen=True)
class JetVectorField:
    ut: int
    position: tuple
    velocity: tuple

    def lie_derivative(self, e: Expr) -> Expr:
        """Derivative of a function on J¹Q along this field."""
        terms = [sx.diff(e, sx.t)] if self.ut else []
        for i, (u, v) in enumerate(zip(self.position, self.velocity), start=1):
            terms.append(u * sx.diff(e, sx.q(i)))
            terms.append(v * sx.diff(e, sx.qt(i)))
        return sx.simplify(sx.add(*terms))


def prolong_vector_field(u: VectorField) -> JetVectorField:
    """``J¹u = u^t ∂_t + u^i ∂_i + d_t u^i ∂^t_i`` (``u^t`` constant)."""
    vel = tuple(sx.simplify(sx.total_derivative(c)) for c in u.components)
    return JetVectorField(u.ut, u.components, vel)
