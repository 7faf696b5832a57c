from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from jetmech import symexpr as sx
from jetmech.bundle import ChartTransform

settings.register_profile(
    "repo", derandomize=True, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

SYSTEMS = Path(__file__).resolve().parents[1] / "scripts" / "systems"
FIXTURES = Path(__file__).resolve().parent / "fixtures"

LEAVES = [sx.t, sx.q(1), sx.q(2), sx.qt(1), sx.qt(2)]


def _unary(name):
    # keep log/sqrt away from their domain boundary
    if name in ("log", "sqrt"):
        return lambda a: sx.func(name, 2 + a * a)
    return lambda a: sx.func(name, a)


leaves = st.one_of(
    st.sampled_from(LEAVES),
    st.integers(-3, 3).map(sx.const),
    st.fractions(min_value=-2, max_value=2, max_denominator=5).map(sx.const),
)


def _extend(children):
    return st.one_of(
        st.tuples(children, children).map(lambda ab: ab[0] + ab[1]),
        st.tuples(children, children).map(lambda ab: ab[0] * ab[1]),
        st.tuples(children, st.integers(2, 3)).map(lambda ab: ab[0] ** ab[1]),
        st.tuples(st.sampled_from(["sin", "cos", "exp", "log", "sqrt"]), children).map(lambda fa: _unary(fa[0])(fa[1])),
        children.map(lambda a: 1 / (2 + sx.sin(a))),
    )


expressions = st.recursive(leaves, _extend, max_leaves=12)
coords = st.floats(-1, 1, allow_nan=False)
jet_points = st.tuples(*(coords for _ in LEAVES)).map(lambda vs: dict(zip(LEAVES, vs)))


def central_fd(e, v, pt, h=1e-5):
    up, dn = dict(pt), dict(pt)
    up[v] += h
    dn[v] -= h
    return (sx.evaluate(e, up) - sx.evaluate(e, dn)) / (2 * h)


def close(a, b, rel=1e-12):
    return abs(a - b) <= rel * (1 + max(abs(a), abs(b)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


OMEGA = Fraction(7, 10)


def rotation(omega=OMEGA) -> ChartTransform:
    c, s = sx.cos(omega * sx.t), sx.sin(omega * sx.t)
    q1, q2 = sx.q(1), sx.q(2)
    return ChartTransform((q1 * c + q2 * s, -q1 * s + q2 * c), (q1 * c - q2 * s, q1 * s + q2 * c), "rot")


def boost(v=2) -> ChartTransform:
    return ChartTransform((sx.q(1) - v * sx.t,), (sx.q(1) + v * sx.t,), "boost")


def shear() -> ChartTransform:
    """Nonlinear time-dependent 2D transform with a polynomial inverse."""
    q1, q2, t = sx.q(1), sx.q(2), sx.t
    return ChartTransform((q1 + t * q2**2, q2 + sx.sin(t)), (q1 - t * (q2 - sx.sin(t)) ** 2, q2 - sx.sin(t)), "shear")


def stretch() -> ChartTransform:
    return ChartTransform((sx.q(1) * sx.exp(sx.t),), (sx.q(1) * sx.exp(-sx.t),), "stretch")


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
