"""Schrödinger quantization on uniform grids of complex half-densities.

Affine observables ``f = a^k p_k + b`` are represented verbatim::

    f̂ ρ = (-i a^k ∂_k - (i/2) ∂_k a^k - b) ρ

(note ``b`` quantizes to multiplication by ``-b``).  Hamiltonians use the
physics-facing map instead, where ``b`` acts as multiplication by ``+b``;
both agree on the part linear in momenta.

Derivatives are second-order centered differences.  By default the pair
``a^k ∂_k + ½ ∂_k a^k`` is discretized as ``½(A D + D A)``, which is the
same operator to O(Δx²) but exactly symmetric on the grid; pass
``scheme="literal"`` for the term-by-term stencil.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import symexpr as sx
from .bundle import ChartTransform
from .hamiltonian import HamiltonianSystem, poisson_bracket
from .integrate import NumericalError, format_float, step_count
from .symexpr import Expr, Sym

__all__ = [
    "QuantizationError", "GridError", "Axis", "HalfDensityGrid", "GridOperator", "AffineObservable",
    "HamiltonOperator", "Evolution", "quantize", "quantize_quadratic", "hamilton_operator",
    "schrodinger_evolve", "transform_half_density", "inner_product", "norm", "expectation",
    "dirac_defect", "position_operator", "gaussian",
]

SCHEMES = ("symmetric", "literal")


class QuantizationError(sx.ExprError):
    pass


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Axis:
    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if self.n < 8:
            raise GridError(f"an axis needs at least 8 nodes, got {self.n}")
        if not self.x_max > self.x_min:
            raise GridError("axis extent must be increasing")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    def nodes(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)


@dataclass
class HalfDensityGrid:
    """Samples ``ρ_j`` of a complex half-density on the fibre ``Q_t``."""

    axes: tuple
    values: np.ndarray
    bc: str = "periodic"
    t: float = 0.0

    def __post_init__(self):
        self.axes = tuple(self.axes)
        if not 1 <= len(self.axes) <= 2:
            raise GridError("only 1 or 2 spatial dimensions are supported")
        if self.bc not in ("periodic", "dirichlet"):
            raise GridError(f"unknown boundary condition {self.bc!r}")
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.shape:
            raise GridError(f"values have shape {self.values.shape}, grid is {self.shape}")

    @property
    def shape(self) -> tuple:
        return tuple(a.n for a in self.axes)

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def cell(self) -> float:
        return float(np.prod([a.dx for a in self.axes]))

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*(a.nodes() for a in self.axes), indexing="ij")

    @classmethod
    def from_function(cls, axes: Sequence[Axis], fn: Callable, bc: str = "periodic",
                      t: float = 0.0) -> "HalfDensityGrid":
        mesh = np.meshgrid(*(a.nodes() for a in axes), indexing="ij")
        return cls(tuple(axes), np.asarray(fn(*mesh), dtype=complex), bc, t)

    def with_values(self, values: np.ndarray, t: float | None = None) -> "HalfDensityGrid":
        return replace(self, values=np.asarray(values, dtype=complex).reshape(self.shape),
                       t=self.t if t is None else t)

    def same_grid(self, other: "HalfDensityGrid") -> bool:
        return self.axes == other.axes and self.bc == other.bc

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "y"][: 1 + self.dim] + ["re_rho", "im_rho"])
        mesh = [m.ravel() for m in self.mesh()]
        vals = self.values.ravel()
        ts = format_float(self.t)
        for k in range(vals.size):
            w.writerow([ts] + [format_float(m[k]) for m in mesh]
                       + [format_float(vals[k].real), format_float(vals[k].imag)])
        return buf.getvalue()


def gaussian(axes: Sequence[Axis], center: Sequence[float] = (0.0,), width: float = 1.0,
             momentum: Sequence[float] = (0.0,), bc: str = "periodic", t: float = 0.0) -> HalfDensityGrid:
    """Normalised Gaussian ``π^{-d/4} w^{-d/2} exp(-|x-c|²/2w² + i k·x)``."""
    d = len(axes)
    center = list(center) + [0.0] * (d - len(center))
    momentum = list(momentum) + [0.0] * (d - len(momentum))

    def fn(*xs):
        out = np.ones_like(xs[0], dtype=complex)
        for x, c, k in zip(xs, center, momentum):
            out = out * np.exp(-((x - c) ** 2) / (2 * width**2) + 1j * k * x)
        return out * (np.pi * width**2) ** (-d / 4)

    return HalfDensityGrid.from_function(axes, fn, bc, t)


# ---------------------------------------------------------------------------
# operators


def _grid_symbols(dim: int) -> list[Sym]:
    return [sx.t] + [sx.q(i) for i in range(1, dim + 1)]


def _derivative_1d(axis: Axis, bc: str) -> sp.csr_matrix:
    n, h = axis.n, axis.dx
    up = np.full(n - 1, 1.0 / (2 * h))
    m = sp.diags([up, -up], [1, -1], shape=(n, n), format="lil")
    if bc == "periodic":
        m[n - 1, 0] = 1.0 / (2 * h)
        m[0, n - 1] = -1.0 / (2 * h)
    return m.tocsr()


def _derivative(axes: Sequence[Axis], bc: str, k: int) -> sp.csr_matrix:
    mats = [sp.identity(a.n, format="csr") for a in axes]
    mats[k] = _derivative_1d(axes[k], bc)
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return out


def _node_values(e: Expr, grid: HalfDensityGrid, t: float) -> np.ndarray:
    mesh = grid.mesh()
    fn = sx.lambdify(e, _grid_symbols(grid.dim), backend="numpy")
    vals = fn(np.full(grid.shape, float(t)), *mesh).ravel()
    if not np.all(np.isfinite(vals)):
        raise NumericalError(f"coefficient {e} is not finite on the grid at t = {t}")
    return vals


@dataclass(frozen=True)
class GridOperator:
    """Linear combination of products of multiplication and derivative factors.

    ``terms`` is a tuple of ``(scalar, factors)`` with each factor either
    ``("mul", expr)`` (multiplication by ``expr(t, q)``) or ``("d", k)``
    (centered derivative along axis ``k``).  Factors act right to left.
    """

    terms: tuple = ()
    label: str = ""

    def __post_init__(self):
        for _, factors in self.terms:
            for kind, val in factors:
                if kind == "mul":
                    bad = sorted(s.name for s in sx.free_symbols(val) if s.kind not in ("t", "q"))
                    if bad:
                        raise QuantizationError(f"operator coefficient may depend on (t, q) only; found {', '.join(bad)}")
                elif kind != "d":
                    raise QuantizationError(f"unknown factor kind {kind!r}")

    @classmethod
    def multiplication(cls, e: Expr | float, label: str = "") -> "GridOperator":
        return cls(((1.0, (("mul", sx.as_expr(e)),)),), label)

    @classmethod
    def derivative(cls, k: int) -> "GridOperator":
        return cls(((1.0, (("d", k),)),), f"D{k + 1}")

    @classmethod
    def zero(cls) -> "GridOperator":
        return cls((), "0")

    @property
    def time_dependent(self) -> bool:
        return any(kind == "mul" and sx.t in sx.free_symbols(v)
                   for _, fs in self.terms for kind, v in fs)

    def __add__(self, other: "GridOperator") -> "GridOperator":
        return GridOperator(self.terms + other.terms)

    def __sub__(self, other: "GridOperator") -> "GridOperator":
        return self + (-1.0) * other

    def __neg__(self) -> "GridOperator":
        return (-1.0) * self

    def __rmul__(self, c: complex) -> "GridOperator":
        return GridOperator(tuple((c * s, fs) for s, fs in self.terms))

    def __matmul__(self, other: "GridOperator") -> "GridOperator":
        return GridOperator(tuple((s1 * s2, f1 + f2) for s1, f1 in self.terms for s2, f2 in other.terms))

    def matrix(self, grid: HalfDensityGrid, t: float | None = None) -> sp.csr_matrix:
        t = grid.t if t is None else t
        size = int(np.prod(grid.shape))
        total = sp.csr_matrix((size, size), dtype=complex)
        dmats: dict[int, sp.csr_matrix] = {}
        for scalar, factors in self.terms:
            if scalar == 0:
                continue
            m = sp.identity(size, dtype=complex, format="csr")
            for kind, val in factors:
                if kind == "mul":
                    f = sp.diags(_node_values(val, grid, t))
                else:
                    if val >= grid.dim:
                        raise GridError(f"derivative along axis {val + 1} on a {grid.dim}D grid")
                    if val not in dmats:
                        dmats[val] = _derivative(grid.axes, grid.bc, val)
                    f = dmats[val]
                m = m @ f
            total = total + scalar * m
        return total.tocsr()

    def apply(self, rho: HalfDensityGrid, t: float | None = None) -> HalfDensityGrid:
        return rho.with_values(self.matrix(rho, t) @ rho.values.ravel())

    def describe(self) -> str:
        parts = []
        for s, fs in self.terms:
            body = " ".join(f"[{v}]" if k == "mul" else f"D{v + 1}" for k, v in fs)
            parts.append(f"{_scalar_text(s)}*{body or '1'}")
        return " + ".join(parts) if parts else "0"


def _scalar_text(s: complex) -> str:
    s = complex(s)
    if s.imag == 0:
        return f"{s.real:.6g}"
    if s.real == 0:
        return f"{s.imag:.6g}i"
    return f"({s.real:.6g}{s.imag:+.6g}i)"


def commutator(a: GridOperator, b: GridOperator) -> GridOperator:
    return a @ b - b @ a


def position_operator(k: int = 0) -> GridOperator:
    """Multiplication by ``q^{k+1}`` (physics sign)."""
    return GridOperator.multiplication(sx.q(k + 1), f"q{k + 1}")


@dataclass(frozen=True)
class AffineObservable:
    """``f = a0 p0 + a^k p_k + b`` with coefficients depending on (t, q)."""

    a: tuple
    b: Expr = sx.ZERO
    a0: Expr = sx.ZERO

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(sx.as_expr(e) for e in self.a))
        object.__setattr__(self, "b", sx.as_expr(self.b))
        object.__setattr__(self, "a0", sx.as_expr(self.a0))
        for e in self.a + (self.b, self.a0):
            bad = sorted(s.name for s in sx.free_symbols(e) if s.kind not in ("t", "q"))
            if bad:
                raise QuantizationError(f"affine coefficients may depend on (t, q) only; found {', '.join(bad)}")

    @property
    def n(self) -> int:
        return len(self.a)

    @classmethod
    def from_expr(cls, f: Expr, n: int) -> "AffineObservable":
        f = sx.as_expr(f)
        a = tuple(sx.simplify(sx.diff(f, sx.p(k))) for k in range(1, n + 1))
        a0 = sx.simplify(sx.diff(f, sx.p0))
        zero = {sx.p(k): sx.ZERO for k in range(0, n + 1)}
        b = sx.simplify(sx.substitute(f, zero))
        for c in a + (a0,):
            if any(s.kind == "p" for s in sx.free_symbols(c)):
                raise QuantizationError(f"{f} is not affine in the momenta")
        bad = sorted(s.name for s in sx.free_symbols(f) if s.kind == "p" and s.index > n)
        if bad:
            raise QuantizationError(f"momenta beyond dimension {n}: {', '.join(bad)}")
        return cls(a, b, a0)

    def to_expr(self) -> Expr:
        return sx.add(self.a0 * sx.p0, *(c * sx.p(k) for k, c in enumerate(self.a, start=1)), self.b)


def _first_order(a: Sequence[Expr], scheme: str) -> GridOperator:
    """``-i a^k ∂_k - (i/2) ∂_k a^k`` on the grid."""
    if scheme not in SCHEMES:
        raise QuantizationError(f"unknown scheme {scheme!r}")
    terms = []
    for k, c in enumerate(a):
        c = sx.simplify(c)
        if c == sx.ZERO:
            continue
        if not sx.free_symbols(c) or scheme == "literal":
            terms.append((-1j, (("mul", c), ("d", k))))
            div = sx.simplify(sx.diff(c, sx.q(k + 1)))
            if div != sx.ZERO:
                terms.append((-0.5j, (("mul", div),)))
        else:
            terms.append((-0.5j, (("mul", c), ("d", k))))
            terms.append((-0.5j, (("d", k), ("mul", c))))
    return GridOperator(tuple(terms))


def quantize(f: AffineObservable, scheme: str = "symmetric") -> GridOperator:
    """``f̂ = -i a^k ∂_k - (i/2) ∂_k a^k - b``."""
    if sx.simplify(f.a0) != sx.ZERO:
        raise QuantizationError("observables with a p0 term act through the evolution stepper only")
    op = _first_order(f.a, scheme)
    b = sx.simplify(f.b)
    if b != sx.ZERO:
        op = op + GridOperator(((-1.0, (("mul", b),)),))
    return replace(op, label=str(f.to_expr()))


def _momentum_polynomial(h: Expr, n: int) -> tuple[list[list[Expr]], list[Expr], Expr]:
    """Split ``h`` as ``C^{kj} p_k p_j + a^k p_k + b`` (C symmetric)."""
    ps = [sx.p(k) for k in range(1, n + 1)]
    for s in sx.free_symbols(h):
        if s.kind in ("qt", "qtt") or s == sx.p0 or (s.kind == "p" and s.index > n):
            raise QuantizationError(f"Hamiltonian contains {s.name}")
    zero = {pk: sx.ZERO for pk in ps}
    second = [[sx.simplify(sx.diff(sx.diff(h, pk), pj)) for pj in ps] for pk in ps]
    for row in second:
        for c in row:
            for pl in ps:
                third = sx.simplify(sx.diff(c, pl))
                if third != sx.ZERO:
                    raise QuantizationError("Hamiltonian must be a polynomial of degree <= 2 in the momenta")
    C = [[sx.simplify(sx.substitute(c, zero) / 2) for c in row] for row in second]
    a = [sx.simplify(sx.substitute(sx.diff(h, pk), zero)) for pk in ps]
    b = sx.simplify(sx.substitute(h, zero))
    return C, a, b


def quantize_quadratic(H: HamiltonianSystem, scheme: str = "symmetric") -> GridOperator:
    """Hamilton operator of ``H`` (degree <= 2 in momenta) by symmetrized products."""
    n = H.n
    C, a, b = _momentum_polynomial(H.hamiltonian, n)
    op = GridOperator()
    for k in range(n):
        for j in range(n):
            if C[k][j] == sx.ZERO:
                continue
            ak = [sx.ZERO] * n
            ak[k] = C[k][j]
            bj = [sx.ZERO] * n
            bj[j] = sx.ONE
            A = _first_order(ak, scheme)
            B = _first_order(bj, scheme)
            op = op + 0.5 * (A @ B + B @ A)
    op = op + _first_order(a, scheme)
    if b != sx.ZERO:
        op = op + GridOperator.multiplication(b)
    return replace(op, label=str(H.hamiltonian))


@dataclass(frozen=True)
class HamiltonOperator:
    """Spatial parts of ``Ĥ* = -i∂_t + Ĥ`` split along a frame.

    ``frame_part`` is the spatial part of ``Ĥ*_Γ`` and ``energy`` is ``Ê_Γ``;
    ``frame_part + energy == full``.  The ``-i∂_t`` term is carried by
    :func:`schrodinger_evolve`.
    """

    full: GridOperator
    frame_part: GridOperator
    energy: GridOperator


def hamilton_operator(H: HamiltonianSystem, frame=None, scheme: str = "symmetric") -> HamiltonOperator:
    full = quantize_quadratic(H, scheme)
    if frame is None:
        frame_part = GridOperator.zero()
    else:
        if frame.n != H.n:
            raise QuantizationError("frame and Hamiltonian dimensions differ")
        frame_part = _first_order(frame.components, scheme)
    return HamiltonOperator(full, frame_part, full - frame_part)


# ---------------------------------------------------------------------------
# Hilbert-module structure


def _check_same(rho: HalfDensityGrid, sigma: HalfDensityGrid) -> None:
    if not rho.same_grid(sigma):
        raise GridError("half-densities live on different grids")


def inner_product(rho: HalfDensityGrid, sigma: HalfDensityGrid) -> complex:
    """``Σ conj(ρ_j) σ_j Δx^n``."""
    _check_same(rho, sigma)
    return complex(np.vdot(rho.values.ravel(), sigma.values.ravel()) * rho.cell)


def norm(rho: HalfDensityGrid) -> float:
    return float(np.sqrt(np.sum(np.abs(rho.values) ** 2) * rho.cell))


def expectation(op: GridOperator, rho: HalfDensityGrid) -> complex:
    return inner_product(rho, op.apply(rho)) / inner_product(rho, rho)


# ---------------------------------------------------------------------------
# evolution


@dataclass
class Evolution:
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    norms: list = field(default_factory=list)
    observables: dict = field(default_factory=dict)
    max_step_drift: float = 0.0
    final: HalfDensityGrid | None = None

    def observables_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = list(self.observables)
        w.writerow(["t", "norm"] + [f"{part}_{nm}" for nm in names for part in ("re", "im")])
        for k, tk in enumerate(self.times):
            row = [format_float(tk), format_float(self.norms[k])]
            for nm in names:
                v = self.observables[nm][k]
                row += [format_float(v.real), format_float(v.imag)]
            w.writerow(row)
        return buf.getvalue()


def schrodinger_evolve(rho: HalfDensityGrid, H: HamiltonianSystem | GridOperator,
                       t_span: tuple[float, float], dt: float, record_every: int | None = None,
                       observables: Mapping[str, GridOperator] | None = None,
                       scheme: str = "symmetric") -> Evolution:
    """Crank-Nicolson solution of ``∂_t ρ = -i Ĥ(t) ρ``.

    Coefficients are evaluated at step midpoints.  ``record_every`` controls
    how often snapshots and observables are stored (first and last step are
    always stored).
    """
    op = H if isinstance(H, GridOperator) else quantize_quadratic(H, scheme)
    t0, t1 = t_span
    n_steps, h = step_count(t0, t1, dt)
    record_every = n_steps if record_every is None else max(1, int(record_every))
    observables = dict(observables or {})
    size = rho.values.size
    eye = sp.identity(size, dtype=complex, format="csc")

    cached = None
    if not op.time_dependent:
        hm = op.matrix(rho, t0)
        lhs = (eye + 0.5j * h * hm).tocsc()
        cached = (spla.splu(lhs), (eye - 0.5j * h * hm).tocsr(), lhs)

    out = Evolution(observables={k: [] for k in observables})
    state = rho.with_values(rho.values, t=t0)

    def record(s: HalfDensityGrid):
        out.times.append(s.t)
        out.snapshots.append(s)
        out.norms.append(norm(s))
        for k, o in observables.items():
            out.observables[k].append(expectation(o, s))

    record(state)
    vec = state.values.ravel().copy()
    prev_norm = norm(state)
    for step in range(n_steps):
        t_mid = t0 + (step + 0.5) * h
        if cached is None:
            hm = op.matrix(rho, t_mid)
            lhs = (eye + 0.5j * h * hm).tocsc()
            solver, rhs_m = spla.splu(lhs), (eye - 0.5j * h * hm).tocsr()
        else:
            solver, rhs_m, lhs = cached
        b = rhs_m @ vec
        new = solver.solve(b)
        scale = max(np.linalg.norm(b), 1e-300)
        residual = np.linalg.norm(lhs @ new - b) / scale
        if residual > 1e-10 or not np.all(np.isfinite(new)):
            raise NumericalError(f"Crank-Nicolson solve failed at t = {t_mid:.6g} (residual {residual:.3g})")
        vec = new
        t_new = t0 + (step + 1) * h if step + 1 < n_steps else t1
        cur_norm = float(np.sqrt(np.sum(np.abs(vec) ** 2) * rho.cell))
        out.max_step_drift = max(out.max_step_drift, abs(cur_norm - prev_norm))
        prev_norm = cur_norm
        if (step + 1) % record_every == 0 or step + 1 == n_steps:
            record(rho.with_values(vec, t=t_new))
    out.final = out.snapshots[-1]
    return out


# ---------------------------------------------------------------------------
# half-density transformation


def _interp_axis(values: np.ndarray, axis: int, src: Axis, x: np.ndarray, periodic: bool) -> np.ndarray:
    xp = src.nodes()
    moved = np.moveaxis(values, axis, -1)
    out = np.empty(moved.shape[:-1] + (len(x),), dtype=complex)
    for idx in np.ndindex(moved.shape[:-1]):
        row = moved[idx]
        if periodic:
            xq = src.x_min + np.mod(x - src.x_min, src.length)
            xpp = np.append(xp, src.x_max)
            rp = np.append(row, row[0])
            out[idx] = np.interp(xq, xpp, rp.real) + 1j * np.interp(xq, xpp, rp.imag)
        else:
            out[idx] = (np.interp(x, xp, row.real, left=0.0, right=0.0)
                        + 1j * np.interp(x, xp, row.imag, left=0.0, right=0.0))
    return np.moveaxis(out, -1, axis)


def transform_half_density(rho: HalfDensityGrid, tr: ChartTransform,
                           target_axes: Sequence[Axis] | None = None) -> HalfDensityGrid:
    """``ρ'(q') = ρ(g(q')) |∂g/∂q'|^{1/2}`` at fixed time, resampled linearly.

    ``tr`` maps the grid's chart to the target chart; its inverse ``g`` must be
    monotone along each axis and, in 2D, factorized (``g^i`` depends on
    ``q'^i`` only).
    """
    if tr.n != rho.dim:
        raise GridError("transform and grid dimensions differ")
    axes = tuple(target_axes) if target_axes is not None else rho.axes
    n = rho.dim
    for i, g in enumerate(tr.inverse):
        for j in range(n):
            if j != i and sx.simplify(sx.diff(g, sx.q(j + 1))) != sx.ZERO:
                raise GridError("only factorized transforms can be applied to grids")
    values = rho.values
    jac = np.ones(tuple(a.n for a in axes))
    for i, g in enumerate(tr.inverse):
        x_new = axes[i].nodes()
        pt_syms = [sx.t, sx.q(i + 1)]
        gi = sx.lambdify(g, pt_syms, backend="numpy")(np.full_like(x_new, rho.t), x_new)
        dg = sx.lambdify(sx.diff(g, sx.q(i + 1)), pt_syms, backend="numpy")(np.full_like(x_new, rho.t), x_new)
        if not (np.all(np.diff(gi) > 0) or np.all(np.diff(gi) < 0)):
            raise GridError(f"inverse map component {i + 1} is not monotone on the grid")
        values = _interp_axis(values, i, rho.axes[i], gi, rho.bc == "periodic")
        shape = [1] * n
        shape[i] = len(x_new)
        jac = jac * np.abs(dg).reshape(shape)
    return HalfDensityGrid(axes, values * np.sqrt(jac), rho.bc, rho.t)


# ---------------------------------------------------------------------------
# Dirac's condition


def dirac_defect(f: AffineObservable, g: AffineObservable, rho: HalfDensityGrid,
                 margin: float = 0.0, scheme: str = "symmetric") -> float:
    """``‖([f̂, ĝ] + i·quantize({f, g}_V)) ρ‖ / ‖ρ‖`` over nodes at least
    ``margin`` away from the boundary."""
    n = rho.dim
    bracket = AffineObservable.from_expr(poisson_bracket(f.to_expr(), g.to_expr()), n)
    fo, go = quantize(f, scheme), quantize(g, scheme)
    defect = commutator(fo, go) + 1j * quantize(bracket, scheme)
    res = defect.apply(rho).values
    mask = np.ones(rho.shape, dtype=bool)
    for m, a in zip(rho.mesh(), rho.axes):
        mask &= (m >= a.x_min + margin) & (m <= a.x_max - a.dx - margin)
    num = np.sqrt(np.sum(np.abs(res[mask]) ** 2) * rho.cell)
    return float(num / norm(rho))
