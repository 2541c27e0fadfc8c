import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssfinsler import jets
from ssfinsler.errors import JetDivisionError, ShapeError
from ssfinsler.jets import Jet2, JetShape
from ssfinsler.oracle import fd_derivative

SHAPE = JetShape(2, 5)
coef = st.floats(-2, 2, allow_nan=False)
base = st.tuples(st.floats(0.5, 2), st.floats(-0.4, 0.4))


def random_jet(rng, at, shape=SHAPE):
    return Jet2(rng.uniform(-1, 1, size=(shape.r_order + 1, shape.s_order + 1)), at)


def close(a: Jet2, b: Jet2, tol=1e-12):
    return np.allclose(a.coeffs, b.coeffs, rtol=tol, atol=tol)


# ----------------------------------------------------------- seeds and consts
def test_const_and_seeds():
    c = jets.jet_const(1, (2, 0.5), JetShape(1, 6))
    assert c.coeffs[0, 0] == 1 and np.count_nonzero(c.coeffs) == 1
    assert not np.any(jets.jet_const(0, (2, 0.5)).coeffs)
    assert jets.jet_const(3.141592653589793, (2, 0.5)).coeffs[0, 0] == 3.141592653589793
    r = jets.jet_var_r(2, 0.5)
    assert r.coeffs[0, 0] == 2 and r.coeffs[1, 0] == 1 and np.count_nonzero(r.coeffs) == 2
    s = jets.jet_var_s(2, 0.5)
    assert s.coeffs[0, 0] == 0.5 and s.coeffs[0, 1] == 1 and np.count_nonzero(s.coeffs) == 2
    s0 = jets.jet_var_s(0, 0)
    assert s0.coeffs[0, 0] == 0 and s0.coeffs[0, 1] == 1


def test_polynomial_examples():
    s = jets.jet_var_s(0, 0)
    sq = (1 + s) * (1 + s)
    assert sq.coeffs[0, :3].tolist() == [1, 2, 1] and not np.any(sq.coeffs[0, 3:])
    assert not np.any((s * jets.jet_const(0, (0, 0))).coeffs)
    shape = JetShape(2, 2)
    r = jets.jet_var_r(1, 0.5, shape)
    s = jets.jet_var_s(1, 0.5, shape)
    w = r * r - s * s
    assert w.coeffs[0, 0] == 0.75 and w.coeffs[1, 0] == 2 and w.coeffs[2, 0] == 1
    assert w.coeffs[0, 1] == -1 and w.coeffs[0, 2] == -1


def test_extract_examples():
    s = jets.jet_var_s(1, 0.3)
    assert (s * s).extract(0, 2) == 2
    assert jets.jet_const(5, (1, 0.3)).extract(1, 0) == 0
    r = jets.jet_var_r(1, 0.3)
    assert (r * s).extract(1, 1) == 1
    with pytest.raises(ShapeError):
        s.extract(2, 0)


def test_division_and_sqrt_examples():
    s = jets.jet_var_s(0, 0)
    geo = 1 / (1 - s)
    assert np.allclose(geo.coeffs[0], 1.0)
    assert close(jets.jet_sqrt(jets.jet_const(4, (1, 0))), jets.jet_const(2, (1, 0)))
    root = jets.jet_sqrt(1 + s)
    assert np.allclose(root.coeffs[0, :3], [1, 0.5, -0.125])
    e = jets.jet_exp(jets.jet_const(0, (1, 0)))
    assert close(e, jets.jet_const(1, (1, 0)))
    e = jets.jet_exp(s)
    assert np.allclose(e.coeffs[0], [1 / math.factorial(k) for k in range(7)])


def test_affine_outer_composition():
    r = jets.jet_var_r(1, 0.5)
    s = jets.jet_var_s(1, 0.5)
    v = s * s / (r * r)
    composed = jets.jet_compose([1 + v.value, 1] + [0] * 6, v)
    assert close(composed, 1 + v)


@pytest.mark.parametrize(
    "name,build,f",
    [
        ("inverse", lambda r, s: 1 / (r * r - s * s), lambda p: 1 / (p[0] ** 2 - p[1] ** 2)),
        ("sqrt", lambda r, s: jets.jet_sqrt(r * r - s * s), lambda p: mpmath.sqrt(p[0] ** 2 - p[1] ** 2)),
    ],
)
def test_table_against_finite_differences(name, build, f):
    shape = JetShape(1, 3)
    r = jets.jet_var_r(1, 0.5, shape)
    s = jets.jet_var_s(1, 0.5, shape)
    j = build(r, s)
    if name == "inverse":
        assert j.value == pytest.approx(4 / 3, rel=1e-15)
    else:
        assert j.value == pytest.approx(math.sqrt(0.75), rel=1e-15)
    for i in range(2):
        for k in range(4):
            if i + k == 0:
                continue
            with mpmath.workdps(40):
                point = (mpmath.mpf(1), mpmath.mpf("0.5"))
                fd = float(fd_derivative(f, point, (i, k), mpmath.mpf("1e-4"), levels=2))
            assert j.extract(i, k) == pytest.approx(fd, rel=1e-10, abs=1e-10), (i, k)


def test_elementary_functions_against_sympy():
    sp = pytest.importorskip("sympy")
    R, S = sp.symbols("r s")
    r0, s0 = 1.3, 0.4
    shape = JetShape(1, 4)
    r = jets.jet_var_r(r0, s0, shape)
    s = jets.jet_var_s(r0, s0, shape)
    cases = [
        (jets.jet_sin(r * s), sp.sin(R * S)),
        (jets.jet_cos(s / r), sp.cos(S / R)),
        (jets.jet_tan(s), sp.tan(S)),
        (jets.jet_sinh(r - s), sp.sinh(R - S)),
        (jets.jet_cosh(s * s), sp.cosh(S**2)),
        (jets.jet_atan(r * s), sp.atan(R * S)),
        (jets.jet_log(r + s), sp.log(R + S)),
        (jets.jet_exp(s / r), sp.exp(S / R)),
        (jets.jet_pow(r + s, 2.5), (R + S) ** sp.Rational(5, 2)),
        (jets.jet_pow(r - s, -3), (R - S) ** -3),
    ]
    for j, expr in cases:
        for i in range(2):
            for k in range(5):
                exact = float(sp.diff(expr, R, i, S, k).subs({R: r0, S: s0}))
                assert j.extract(i, k) == pytest.approx(exact, rel=1e-11, abs=1e-11), (expr, i, k)


def test_two_hundred_polynomials_against_numpy():
    rng = np.random.default_rng(7)
    shape = JetShape(1, 6)
    for _ in range(200):
        r0, s0 = rng.uniform(0.5, 2), rng.uniform(-1, 1)
        cr = rng.uniform(-1, 1, size=3)
        cs = rng.uniform(-1, 1, size=rng.integers(1, 8))
        r = jets.jet_var_r(r0, s0, shape)
        s = jets.jet_var_s(r0, s0, shape)
        # p(r, s) = a(r) * b(s) with a quadratic, b of random degree
        a = cr[0] + cr[1] * r + cr[2] * r * r
        b = jets.jet_const(0.0, (r0, s0), shape)
        for c in cs[::-1]:
            b = b * s + c
        j = a * b
        pa = np.polynomial.Polynomial(cr)
        pb = np.polynomial.Polynomial(cs)
        for i in range(2):
            for k in range(7):
                expect = pa.deriv(i)(r0) * pb.deriv(k)(s0)
                assert j.extract(i, k) == pytest.approx(expect, rel=1e-12, abs=1e-12)


def test_division_by_near_zero_raises():
    s = jets.jet_var_s(1, 0.0)
    with pytest.raises(JetDivisionError):
        jets.jet_div(jets.jet_const(1, (1, 0.0)), s)


def test_shape_mismatch_raises():
    a = jets.jet_var_s(1, 0.2, JetShape(1, 3))
    b = jets.jet_var_s(1, 0.2, JetShape(1, 4))
    with pytest.raises(ShapeError):
        a + b


def test_derivative_of_jet():
    r = jets.jet_var_r(1.5, 0.2)
    s = jets.jet_var_s(1.5, 0.2)
    j = r * r * s * s * s
    assert j.d_s().extract(0, 0) == pytest.approx(3 * 1.5**2 * 0.2**2)
    assert j.d_r().extract(0, 1) == pytest.approx(2 * 1.5 * 3 * 0.2**2)


# ------------------------------------------------------------- ring axioms
@settings(max_examples=60, deadline=None)
@given(at=base, seed=st.integers(0, 2**32 - 1))
def test_ring_axioms(at, seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_jet(rng, at) for _ in range(3))
    one = jets.jet_const(1, at, SHAPE)
    zero = jets.jet_const(0, at, SHAPE)
    assert close(a + b, b + a)
    assert close(a * b, b * a)
    assert close((a + b) + c, a + (b + c))
    assert close((a * b) * c, a * (b * c), 1e-11)
    assert close(a * (b + c), a * b + a * c, 1e-11)
    assert close(a * one, a)
    assert close(a + zero, a)
    assert close(a - a, zero)
    assert close(-(-a), a)


@settings(max_examples=60, deadline=None)
@given(at=base, seed=st.integers(0, 2**32 - 1), shift=st.floats(1.5, 4))
def test_division_round_trip(at, seed, shift):
    rng = np.random.default_rng(seed)
    a = random_jet(rng, at)
    b = random_jet(rng, at) + shift  # keep the constant term away from zero
    assert close((a / b) * b, a, 1e-10)
    assert close(b / b, jets.jet_const(1, at, SHAPE), 1e-12)


@settings(max_examples=60, deadline=None)
@given(at=base, seed=st.integers(0, 2**32 - 1), shift=st.floats(1.5, 4))
def test_sqrt_round_trip(at, seed, shift):
    rng = np.random.default_rng(seed)
    a = random_jet(rng, at) + shift
    root = jets.jet_sqrt(a)
    assert close(root * root, a, 1e-10)
    assert close(jets.jet_exp(jets.jet_log(a)), a, 1e-10)
