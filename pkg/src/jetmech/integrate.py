"""Fixed-step RK4 integration and trajectory containers."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import symexpr as sx

__all__ = ["NumericalError", "Trajectory", "step_count", "rk4", "format_float"]


class NumericalError(RuntimeError):
    """Raised for singular solves and non-finite states."""


def format_float(x: float) -> str:
    """Shortest repr that round-trips the double exactly."""
    return repr(float(x))


def step_count(t0: float, t1: float, dt: float) -> tuple[int, float]:
    """Number of uniform steps covering ``[t0, t1]`` with step at most ``dt``.

    Returns ``(n_steps, h)`` with ``h = (t1 - t0) / n_steps``.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not t1 > t0:
        raise ValueError(f"t1 must exceed t0 (got t0={t0}, t1={t1})")
    ratio = (t1 - t0) / dt
    n = max(1, int(math.ceil(ratio - 1e-9 * max(1.0, ratio))))
    return n, (t1 - t0) / n


def rk4(rhs: Callable[[float, np.ndarray], np.ndarray], y0: np.ndarray,
        t0: float, t1: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Classical fourth-order Runge-Kutta with constant step."""
    n, h = step_count(t0, t1, dt)
    ts = t0 + h * np.arange(n + 1)
    ys = np.empty((n + 1, len(y0)))
    y = np.asarray(y0, dtype=float).copy()
    ys[0] = y
    # overflow shows up as a non-finite state, reported below
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n):
            tk = ts[k]
            k1 = rhs(tk, y)
            k2 = rhs(tk + h / 2, y + h / 2 * k1)
            k3 = rhs(tk + h / 2, y + h / 2 * k2)
            k4 = rhs(tk + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(y)):
                raise NumericalError(f"non-finite state at t = {ts[k + 1]:.6g}")
            ys[k + 1] = y
    ts[-1] = t1
    return ts, ys


@dataclass
class Trajectory:
    """Uniform-time samples of a motion.

    ``kind`` is ``"lagrange"`` (state ``q, qt``) or ``"hamilton"`` (state ``q, p``).
    """

    kind: str
    times: np.ndarray
    q: np.ndarray
    second: np.ndarray
    dt: float
    monitors: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.q.shape[1]

    @property
    def qt(self) -> np.ndarray:
        if self.kind != "lagrange":
            raise AttributeError("Hamiltonian trajectories carry momenta, not velocities")
        return self.second

    @property
    def p(self) -> np.ndarray:
        if self.kind != "hamilton":
            raise AttributeError("Lagrangian trajectories carry velocities, not momenta")
        return self.second

    def state_symbols(self) -> list[sx.Sym]:
        kind = "qt" if self.kind == "lagrange" else "p"
        return ([sx.t] + [sx.q(i) for i in range(1, self.n + 1)]
                + [sx.Sym(kind, i) for i in range(1, self.n + 1)])

    def columns(self) -> np.ndarray:
        return np.column_stack([self.times, self.q, self.second])

    def evaluate(self, e: sx.Expr) -> np.ndarray:
        """Values of ``e`` along the trajectory."""
        fn = sx.lambdify(e, self.state_symbols(), backend="numpy")
        cols = self.columns()
        return fn(*cols.T)

    def add_monitors(self, monitors: Mapping[str, sx.Expr]) -> None:
        for name, e in monitors.items():
            self.monitors[name] = self.evaluate(e)

    def header(self) -> list[str]:
        second = "qt" if self.kind == "lagrange" else "p"
        return (["t"] + [f"q{i}" for i in range(1, self.n + 1)]
                + [f"{second}{i}" for i in range(1, self.n + 1)] + list(self.monitors))

    def to_csv(self, target: str | Path | io.TextIOBase | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        data = self.columns()
        extra = [self.monitors[k] for k in self.monitors]
        for r in range(len(self.times)):
            row = [format_float(v) for v in data[r]] + [format_float(m[r]) for m in extra]
            w.writerow(row)
        text = buf.getvalue()
        if isinstance(target, (str, Path)):
            Path(target).write_text(text)
        elif target is not None:
            target.write(text)
        return text

    @classmethod
    def from_csv(cls, source: str | Path, kind: str, n: int) -> "Trajectory":
        rows = list(csv.reader(Path(source).read_text().splitlines()))
        header, body = rows[0], np.array([[float(v) for v in r] for r in rows[1:]])
        monitors = {name: body[:, 1 + 2 * n + k] for k, name in enumerate(header[1 + 2 * n:])}
        dt = float(body[1, 0] - body[0, 0]) if len(body) > 1 else 0.0
        return cls(kind, body[:, 0], body[:, 1:1 + n], body[:, 1 + n:1 + 2 * n], dt, monitors)


def initial_state(ic: Mapping[sx.Sym, float], kinds: Sequence[str], n: int) -> tuple[float, np.ndarray]:
    """Extract ``(t0, state vector)`` from a point assignment."""
    missing = [s.name for s in [sx.t] + [sx.Sym(k, i) for k in kinds for i in range(1, n + 1)] if s not in ic]
    if missing:
        raise sx.UnassignedSymbolError(f"initial condition lacks {', '.join(missing)}")
    y = [ic[sx.Sym(k, i)] for k in kinds for i in range(1, n + 1)]
    return float(ic[sx.t]), np.array(y, dtype=float)
