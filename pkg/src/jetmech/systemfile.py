"""Declarative system definition files.

An INI-style file with named sections and ``key = value`` entries.
Expressions are double-quoted strings; lists are comma separated::

    [system]
    dimension = 2

    [lagrangian]
    expr = "1/2*(qt1^2 + qt2^2)"

    [frame:rotating]
    components = "-7/10*q2", "7/10*q1"

    [transform:rot]
    forward = "q1*cos(7/10*t) + q2*sin(7/10*t)", "-q1*sin(7/10*t) + q2*cos(7/10*t)"
    inverse = "q1*cos(7/10*t) - q2*sin(7/10*t)", "q1*sin(7/10*t) + q2*cos(7/10*t)"

    [symmetry:translation]
    time = 0
    components = "1", "0"

    [simulation]
    t0 = 0
    t1 = 1
    dt = 0.001
    q = 1, 0
    qt = 0, 0

    [monitors]
    energy = "energy:rest"

    [quantum]
    x_min = -10
    x_max = 10
    n = 512
"""

from __future__ import annotations

import configparser
import csv
from dataclasses import dataclass, field
from pathlib import Path

from . import symexpr as sx
from .bundle import ChartTransform, Frame, TransformError, VectorField, random_points
from .hamiltonian import HamiltonianError, HamiltonianSystem
from .lagrangian import LagrangianError, LagrangianSystem
from .quantum import AffineObservable, Axis, GridError, QuantizationError

__all__ = ["SystemFileError", "SystemFile", "SimulationConfig", "QuantumConfig", "load_system", "parse_system"]

KNOWN = ("system", "lagrangian", "hamiltonian", "simulation", "monitors", "quantum", "observables", "dirac")
PREFIXED = ("frame", "transform", "symmetry")


class SystemFileError(ValueError):
    def __init__(self, section: str, message: str):
        super().__init__(f"[{section}] {message}")
        self.section = section


def _split(value: str) -> list[str]:
    row = next(csv.reader([value], skipinitialspace=True))
    return [item.strip() for item in row if item.strip() != ""]


def _unquote(value: str) -> str:
    value = value.strip()
    if len(value) >= 2 and value[0] == value[-1] == '"':
        return value[1:-1]
    return value


@dataclass
class SimulationConfig:
    t0: float = 0.0
    t1: float = 1.0
    dt: float = 1e-3
    q: list = field(default_factory=list)
    qt: list = field(default_factory=list)
    p: list = field(default_factory=list)

    def initial_point(self, kind: str) -> dict:
        second = self.qt if kind == "lagrange" else self.p
        label = "qt" if kind == "lagrange" else "p"
        if not self.q or not second:
            raise SystemFileError("simulation", f"initial conditions q and {label} are required")
        if kind == "lagrange":
            return sx.point(t=self.t0, q=self.q, qt=self.qt)
        return sx.point(t=self.t0, q=self.q, p=self.p)


@dataclass
class QuantumConfig:
    x_min: list
    x_max: list
    n: list
    bc: str = "periodic"
    center: list = field(default_factory=lambda: [0.0])
    width: float = 1.0
    momentum: list = field(default_factory=lambda: [0.0])
    record_every: int = 100

    def axes(self) -> tuple:
        return tuple(Axis(a, b, int(n)) for a, b, n in zip(self.x_min, self.x_max, self.n))


@dataclass
class SystemFile:
    dimension: int
    lagrangian: LagrangianSystem | None = None
    hamiltonian: HamiltonianSystem | None = None
    frames: dict = field(default_factory=dict)
    transforms: dict = field(default_factory=dict)
    symmetries: dict = field(default_factory=dict)
    simulation: SimulationConfig | None = None
    monitors: dict = field(default_factory=dict)
    quantum: QuantumConfig | None = None
    observables: dict = field(default_factory=dict)
    dirac: dict = field(default_factory=dict)

    def frame(self, name: str | None) -> Frame:
        if name is None or name == "rest":
            return self.frames.get("rest", Frame.rest(self.dimension))
        if name not in self.frames:
            raise SystemFileError(f"frame:{name}", "no such frame declared")
        return self.frames[name]

    def transform(self, name: str) -> ChartTransform:
        if name not in self.transforms:
            raise SystemFileError(f"transform:{name}", "no such transform declared")
        return self.transforms[name]


def _expr(section: str, text: str, n: int) -> sx.Expr:
    try:
        return sx.parse(_unquote(text), n)
    except sx.ParseError as err:
        raise SystemFileError(section, f"parse error in {_unquote(text)!r}: {err}") from None


def _exprs(section: str, value: str, n: int) -> tuple:
    items = _split(value)
    if len(items) != n:
        raise SystemFileError(section, f"expected {n} expressions, got {len(items)}")
    return tuple(_expr(section, s, n) for s in items)


def _floats(section: str, value: str, key: str) -> list[float]:
    try:
        return [float(v) for v in _split(value)]
    except ValueError:
        raise SystemFileError(section, f"{key} must be a list of numbers") from None


def _number(section: str, sec, key: str, default=None, cast=float):
    if key not in sec:
        if default is None:
            raise SystemFileError(section, f"missing key {key!r}")
        return default
    try:
        return cast(_unquote(sec[key]))
    except ValueError:
        raise SystemFileError(section, f"{key} must be a number") from None


def parse_system(text: str) -> SystemFile:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as err:
        raise SystemFileError("file", str(err).splitlines()[0]) from None

    for name in cp.sections():
        head = name.split(":", 1)[0]
        if name not in KNOWN and not (":" in name and head in PREFIXED and name.split(":", 1)[1]):
            raise SystemFileError(name, "unknown section")

    if "system" not in cp or "dimension" not in cp["system"]:
        raise SystemFileError("system", "dimension is required")
    n = _number("system", cp["system"], "dimension", cast=int)
    if n < 1:
        raise SystemFileError("system", "dimension must be positive")
    sf = SystemFile(dimension=n)

    if "lagrangian" in cp:
        try:
            sf.lagrangian = LagrangianSystem(n, _expr("lagrangian", cp["lagrangian"].get("expr", ""), n))
        except LagrangianError as err:
            raise SystemFileError("lagrangian", str(err)) from None
    if "hamiltonian" in cp:
        try:
            sf.hamiltonian = HamiltonianSystem(n, _expr("hamiltonian", cp["hamiltonian"].get("expr", ""), n))
        except HamiltonianError as err:
            raise SystemFileError("hamiltonian", str(err)) from None

    for name in cp.sections():
        head, _, label = name.partition(":")
        sec = cp[name]
        try:
            if head == "frame" and label:
                if "components" not in sec:
                    raise SystemFileError(name, "missing key 'components'")
                sf.frames[label] = Frame(_exprs(name, sec["components"], n), label)
            elif head == "transform" and label:
                for key in ("forward", "inverse"):
                    if key not in sec:
                        raise SystemFileError(name, f"missing key {key!r}")
                tr = ChartTransform(_exprs(name, sec["forward"], n), _exprs(name, sec["inverse"], n), label)
                tr.verify(random_points(n, 10, kinds=("q",)))
                sf.transforms[label] = tr
            elif head == "symmetry" and label:
                if "components" not in sec:
                    raise SystemFileError(name, "missing key 'components'")
                ut = _number(name, sec, "time", default=0, cast=int)
                sf.symmetries[label] = VectorField(ut, _exprs(name, sec["components"], n), label)
        except (TransformError, sx.ExprError) as err:
            if isinstance(err, SystemFileError):
                raise
            raise SystemFileError(name, str(err)) from None

    if "simulation" in cp:
        sec = cp["simulation"]
        sim = SimulationConfig(
            t0=_number("simulation", sec, "t0", 0.0), t1=_number("simulation", sec, "t1"),
            dt=_number("simulation", sec, "dt"))
        for key in ("q", "qt", "p"):
            if key in sec:
                vals = _floats("simulation", sec[key], key)
                if len(vals) != n:
                    raise SystemFileError("simulation", f"{key} needs {n} values, got {len(vals)}")
                setattr(sim, key, vals)
        if not sim.dt > 0 or not sim.t1 > sim.t0:
            raise SystemFileError("simulation", "need dt > 0 and t1 > t0")
        sf.simulation = sim

    if "monitors" in cp:
        for key, val in cp["monitors"].items():
            raw = _unquote(val)
            if raw.startswith("energy:"):
                frame = raw.split(":", 1)[1]
                if frame != "rest" and frame not in sf.frames:
                    raise SystemFileError("monitors", f"monitor {key} refers to unknown frame {frame!r}")
                sf.monitors[key] = raw
            else:
                sf.monitors[key] = _expr("monitors", val, n)

    if "quantum" in cp:
        sec = cp["quantum"]
        try:
            qc = QuantumConfig(
                x_min=_floats("quantum", sec.get("x_min", ""), "x_min"),
                x_max=_floats("quantum", sec.get("x_max", ""), "x_max"),
                n=[int(v) for v in _floats("quantum", sec.get("n", ""), "n")],
                bc=_unquote(sec.get("bc", "periodic")),
                center=_floats("quantum", sec.get("center", "0"), "center"),
                width=_number("quantum", sec, "width", 1.0),
                momentum=_floats("quantum", sec.get("momentum", "0"), "momentum"),
                record_every=_number("quantum", sec, "record_every", 100, int))
            if not (len(qc.x_min) == len(qc.x_max) == len(qc.n) == n):
                raise SystemFileError("quantum", f"x_min, x_max and n need {n} entries each")
            if n > 2:
                raise SystemFileError("quantum", "grids support at most 2 dimensions")
            if qc.bc not in ("periodic", "dirichlet"):
                raise SystemFileError("quantum", f"unknown boundary condition {qc.bc!r}")
            qc.axes()
        except GridError as err:
            raise SystemFileError("quantum", str(err)) from None
        sf.quantum = qc

    if "observables" in cp:
        for key, val in cp["observables"].items():
            try:
                sf.observables[key] = HamiltonianSystem(n, _expr("observables", val, n))
            except HamiltonianError as err:
                raise SystemFileError("observables", f"observable {key}: {err}") from None

    if "dirac" in cp:
        for key, val in cp["dirac"].items():
            items = _split(val)
            if len(items) != 2:
                raise SystemFileError("dirac", f"pair {key} needs exactly two observables")
            try:
                sf.dirac[key] = tuple(AffineObservable.from_expr(_expr("dirac", s, n), n) for s in items)
            except QuantizationError as err:
                raise SystemFileError("dirac", f"pair {key}: {err}") from None
    return sf


def load_system(path: str | Path) -> SystemFile:
    p = Path(path)
    if not p.is_file():
        raise SystemFileError("file", f"cannot read {p}")
    return parse_system(p.read_text())
