import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jetmech import symexpr as sx
from jetmech.bundle import (ChartTransform, Frame, TransformError, VectorField, frame_of_chart,
                            prolong_transform, prolong_vector_field, random_points, relative_velocity,
                            transform_expression)
from conftest import OMEGA, boost, rotation, shear, stretch

t, q1, q2, qt1, qt2, p1, p2 = sx.t, sx.q(1), sx.q(2), sx.qt(1), sx.qt(2), sx.p(1), sx.p(2)
W = float(OMEGA)
TRANSFORMS = [rotation(), shear(), boost(), stretch()]


def ev(e, pt):
    return sx.evaluate(e, pt)


class TestChartTransform:
    def test_verify_accepts_true_inverse(self):
        for tr in TRANSFORMS:
            assert tr.verify(random_points(tr.n, 20, kinds=("q",))) < 1e-9

    def test_verify_rejects_wrong_inverse(self):
        tr = ChartTransform((q1 * 2,), (q1 / 3,))
        with pytest.raises(TransformError):
            tr.verify(random_points(1, 5, kinds=("q",)))

    def test_singular_jacobian(self):
        tr = ChartTransform((q1**3,), (q1 ** Fraction(1, 3),))
        with pytest.raises(TransformError):
            tr.check_at({t: 0.0, q1: 0.0})

    def test_rejects_velocity_dependence(self):
        with pytest.raises(TransformError):
            ChartTransform((q1 + qt1,), (q1,))


class TestProlongation:
    def test_identity(self):
        pr = prolong_transform(ChartTransform.identity(1))
        assert pr.velocity == (qt1,) and pr.momentum == (p1,)

    def test_boost(self):
        pr = prolong_transform(boost(3))
        assert sx.simplify(pr.velocity[0] - (qt1 - 3)) == sx.ZERO
        assert pr.momentum == (p1,)

    def test_rotation_velocity(self):
        pr = prolong_transform(rotation())
        c, s = sx.cos(OMEGA * t), sx.sin(OMEGA * t)
        ref = qt1 * c + qt2 * s + OMEGA * (-q1 * s + q2 * c)
        pts = random_points(2, 30)
        assert max(abs(ev(pr.velocity[0] - ref, pt)) for pt in pts) < 1e-12

    @pytest.mark.parametrize("tr", TRANSFORMS, ids=lambda tr: tr.name)
    def test_contact_preservation(self, tr):
        # along q(s) = (sin s, cos 2s)[:n], d/ds of the image equals the prolonged velocity
        path = [lambda s: math.sin(1.3 * s), lambda s: math.cos(2 * s) / 2]
        dpath = [lambda s: 1.3 * math.cos(1.3 * s), lambda s: -math.sin(2 * s)]
        pr = prolong_transform(tr)
        h = 1e-5
        for s in (0.1, 0.5, 0.9):
            def at(s):
                return {t: s, **{sx.q(i + 1): path[i](s) for i in range(tr.n)},
                        **{sx.qt(i + 1): dpath[i](s) for i in range(tr.n)}}
            for i in range(tr.n):
                fd = (ev(tr.forward[i], at(s + h)) - ev(tr.forward[i], at(s - h))) / (2 * h)
                assert abs(fd - ev(pr.velocity[i], at(s))) < 1e-5

    @pytest.mark.parametrize("tr", [rotation(), shear(), stretch()], ids=lambda tr: tr.name)
    def test_momentum_covariance(self, tr):
        # p_i dq^i is invariant: p'_i dq'^i = p_i dq^i for vertical tangent vectors dq
        pr = prolong_transform(tr)
        jac = tr.jacobian()
        rng = np.random.default_rng(5)
        for pt in random_points(tr.n, 20, rng, kinds=("q", "p")):
            dq = rng.normal(size=tr.n)
            dq_img = np.array([[ev(e, pt) for e in row] for row in jac]) @ dq
            mom = np.array([ev(m, pt) for m in pr.momentum])
            ps = np.array([pt[sx.p(i + 1)] for i in range(tr.n)])
            assert abs(mom @ dq_img - ps @ dq) < 1e-9

    def test_energy_momentum_makes_liouville_form_invariant(self):
        # p'0 dt + p' dq' = p0 dt + p dq for the full tangent vector (dt, dq)
        tr = rotation()
        pr = prolong_transform(tr)
        rng = np.random.default_rng(9)
        for pt in random_points(2, 10, rng, kinds=("q", "p")):
            pt[sx.p0] = float(rng.normal())
            dt, dq = 0.7, rng.normal(size=2)
            img = [dt * ev(sx.diff(f, t), pt) + sum(ev(sx.diff(f, sx.q(j + 1)), pt) * dq[j] for j in range(2))
                   for f in tr.forward]
            lhs = ev(pr.energy_momentum, pt) * dt + sum(ev(m, pt) * d for m, d in zip(pr.momentum, img))
            rhs = pt[sx.p0] * dt + pt[p1] * dq[0] + pt[p2] * dq[1]
            assert abs(lhs - rhs) < 1e-9


class TestTransformExpression:
    def test_position_value_preserved(self):
        tr = boost(2)
        e = transform_expression(q1, tr)
        assert abs(ev(e, {t: 1.0, q1: 3.0 - 2.0}) - 3.0) < 1e-15

    def test_kinetic_under_boost(self):
        e = transform_expression(Fraction(1, 2) * qt1**2, boost(2))
        assert sx.simplify(e - (qt1 + 2) ** 2 / 2) == sx.ZERO

    def test_momentum_under_rotation(self):
        tr = rotation()
        e = transform_expression(p1, tr)
        c, s = sx.cos(OMEGA * t), sx.sin(OMEGA * t)
        ref = c * p1 - s * p2
        pts = random_points(2, 20, kinds=("q", "p"))
        assert max(abs(ev(e - ref, pt)) for pt in pts) < 1e-12

    @pytest.mark.parametrize("tr", TRANSFORMS, ids=lambda tr: tr.name)
    @settings(max_examples=25)
    @given(seed=st.integers(0, 10**6))
    def test_round_trip(self, tr, seed):
        rng = np.random.default_rng(seed)
        n = tr.n
        terms = [sx.q(i) * sx.qt(j) for i in range(1, n + 1) for j in range(1, n + 1)] + [sx.p(1), t]
        coeffs = rng.integers(-3, 4, len(terms))
        e = sx.add(*(int(c) * term for c, term in zip(coeffs, terms))) + sx.sin(sx.q(n)) * sx.qt(1) ** 2
        back = transform_expression(transform_expression(e, tr, "forward"), tr, "inverse")
        for pt in random_points(n, 5, rng, kinds=("q", "qt", "p")):
            a, b = ev(e, pt), ev(back, pt)
            assert abs(a - b) <= 1e-9 * (1 + abs(a))

    def test_bad_direction(self):
        with pytest.raises(ValueError):
            transform_expression(q1, boost(), "sideways")


class TestFrames:
    def test_identity_chart_is_rest(self):
        assert all(c == sx.ZERO for c in frame_of_chart(ChartTransform.identity(3)).components)

    def test_boost_frame(self):
        assert frame_of_chart(boost(2)).components == (sx.const(2),)

    def test_rotation_frame(self):
        comps = frame_of_chart(rotation()).components
        pts = random_points(2, 20, kinds=("q",))
        assert max(abs(ev(comps[0] + OMEGA * q2, pt)) + abs(ev(comps[1] - OMEGA * q1, pt)) for pt in pts) < 1e-12

    def test_frame_transform_to_own_chart_is_rest(self):
        # the frame at rest in chart f has zero components once written in that chart
        for tr in TRANSFORMS:
            moved = frame_of_chart(tr).transform(tr)
            pts = random_points(tr.n, 10, kinds=("q",))
            assert max(abs(ev(c, pt)) for c in moved.components for pt in pts) < 1e-12

    def test_relative_velocity(self):
        assert relative_velocity(Frame.rest(1), {t: 0.0, q1: 0.0, qt1: 2.0})[0] == 2.0
        assert relative_velocity(Frame((sx.const(2),)), {t: 0.0, q1: 0.0, qt1: 2.0})[0] == 0.0
        rv = relative_velocity(frame_of_chart(rotation()), sx.point(t=0, q=(1, 0), qt=(0, 0)))
        assert np.allclose(rv, [0.0, -W], atol=1e-15)

    def test_relative_velocity_needs_velocity(self):
        with pytest.raises(sx.UnassignedSymbolError):
            relative_velocity(Frame.rest(1), {t: 0.0, q1: 0.0})


class TestVectorFields:
    def test_translation(self):
        ju = prolong_vector_field(VectorField(0, (sx.ONE,)))
        assert ju.velocity == (sx.ZERO,)

    def test_time_translation(self):
        ju = prolong_vector_field(VectorField(1, (sx.ZERO,)))
        assert ju.ut == 1 and ju.velocity == (sx.ZERO,)

    def test_galilean(self):
        ju = prolong_vector_field(VectorField(0, (t,)))
        assert ju.velocity == (sx.ONE,)

    @pytest.mark.parametrize("ut", [2, -1, True])
    def test_time_component_restricted(self, ut):
        with pytest.raises(TransformError):
            VectorField(ut, (sx.ONE,))
