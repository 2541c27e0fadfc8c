import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssfinsler.errors import DomainError, FitError
from ssfinsler.families import (
    FAMILIES,
    LC2_COEFFICIENTS,
    CoefFns,
    GridSpec,
    berwald_pq_n3,
    berwald_pq_surface,
    c1_denominator,
    chebyshev_nodes,
    classify,
    family_pq,
    fit_family,
    fit_model,
    landsberg_pq_n3,
    lc2_contradiction,
    riemannian_residual,
    sample_pq,
    trace_E_landsberg,
)
from ssfinsler.geometry import scalar_HK
from ssfinsler.models import Euclidean, Expression, Homogeneous, PsiFamily, Riemannian

RANDERS = Expression("sqrt(1+s^2)*(1+r^2)+s/4")
W75 = math.sqrt(0.75)


# ---------------------------------------------------------------- generators
def test_landsberg_examples():
    pq = landsberg_pq_n3({"c0": 0, "c1": 0, "c2": 1, "c3": 0}, 1.0, 0.5)
    assert pq.dP(0) == pytest.approx(W75, rel=1e-15)
    assert pq.dQ(0) == pytest.approx(-0.5 * W75, rel=1e-15)
    zero = landsberg_pq_n3({}, 1.3, 0.2)
    assert not np.any(zero.P.coeffs) and not np.any(zero.Q.coeffs)


def test_landsberg_without_c2_is_berwald_form():
    c = {"c0": 0.7, "c1": -0.3, "c2": 0.0, "c3": 1.1}
    a = landsberg_pq_n3(c, 1.4, 0.6)
    b = berwald_pq_n3({"f1": -0.3, "f2": 0.35, "f3": 1.1}, 1.4, 0.6)
    assert np.allclose(a.P.coeffs, b.P.coeffs, atol=1e-15)
    assert np.allclose(a.Q.coeffs, b.Q.coeffs, atol=1e-15)


def test_surface_examples():
    zero = berwald_pq_surface({}, 1.0, 0.5)
    assert not np.any(zero.P.coeffs) and not np.any(zero.Q.coeffs)
    pq = berwald_pq_surface({"b2": 1}, 1.0, 0.5)
    assert pq.dP(0) == pytest.approx(1 / W75, rel=1e-15)
    assert pq.dQ(0) == pytest.approx(0.25 / W75, rel=1e-15)


def test_berwald_n3_examples():
    pq = berwald_pq_n3({"f1": 1}, 1.2, 0.3)
    assert pq.dP(0) == pytest.approx(0.3) and pq.dP(1) == 1 and pq.dQ(0) == 0


def test_coefficient_functions():
    c = CoefFns("berwald_surface", {"b1": "-1/r^2", "b2": 2.5})
    assert c.at(2.0) == {"a": 0.0, "b0": 0.0, "b1": -0.25, "b2": 2.5, "b3": 0.0}
    with pytest.raises(KeyError):
        CoefFns("berwald_surface", {"c2": 1})
    with pytest.raises(KeyError):
        CoefFns("nope")
    with pytest.raises(DomainError):
        c.at(0.0)
    with pytest.raises(DomainError):
        berwald_pq_surface(c, 1.0, 1.0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_surface_family_h_identity(seed):
    rng = np.random.default_rng(seed)
    coefs = {k: float(v) for k, v in zip(("a", "b0", "b1", "b2", "b3"), rng.uniform(-1, 1, 5))}
    for r in np.linspace(0.5, 2.5, 6):
        for f in np.linspace(-0.85, 0.85, 6):
            s = f * r
            sc = scalar_HK(berwald_pq_surface(coefs, r, s), 2)
            val = s * sc.H.value - (r * r - s * s) * sc.H.extract(0, 1)
            assert abs(val) <= 1e-8


# ------------------------------------------------------------------- fitting
def test_fit_recovers_landsberg_generator():
    r = 1.3
    c = {"c0": 1.0, "c1": 2.0, "c2": 3.0, "c3": 4.0}
    rows = []
    for s in chebyshev_nodes(r, 16):
        pq = landsberg_pq_n3(c, r, float(s), order=1)
        rows.append((s, pq.dP(0), pq.dQ(0)))
    res = fit_family(r, rows, "landsberg_n3")
    for k, v in c.items():
        assert res.coefficients[k][0] == pytest.approx(v, abs=1e-8)
    assert res.residual <= 1e-10 and res.verdict == "member"


def test_fit_rejects_non_member():
    res = fit_model(RANDERS, "landsberg_n3", [1.0, 2.0])
    assert res.residual > res.tol and res.verdict == "non-member"
    res = fit_model(RANDERS, "berwald_n3", [1.0, 2.0])
    assert res.verdict == "non-member"


def test_riemannian_example_fits_berwald_form():
    # phi^2 = (1+s^2)(1+r^2)^2 is affine in s^2, so this metric is Riemannian
    # and its spray has the quadratic form
    res = fit_model(Expression("sqrt(1+s^2)*(1+r^2)"), "berwald_n3", [0.8, 1.6])
    assert res.member


def test_fit_homogeneous_spray():
    rs = [0.6, 1.2, 2.4]
    res = fit_model(Homogeneous("1/(1+v^2)"), "berwald_n3", rs)
    assert res.member
    for i, r in enumerate(rs):
        assert res.coefficients["f1"][i] == pytest.approx(-1 / r**2, abs=1e-8)
        assert res.coefficients["f2"][i] == pytest.approx(0.0, abs=1e-8)
        assert res.coefficients["f3"][i] == pytest.approx(1 / (2 * r * r), abs=1e-8)


def test_fit_euclidean_is_zero():
    res = fit_model(Euclidean(), "landsberg_n3", [1.0, 2.0])
    assert res.member
    assert all(abs(v) < 1e-14 for vals in res.coefficients.values() for v in vals)


def test_fit_errors():
    rows = np.array([(s, 0.0, 0.0) for s in chebyshev_nodes(1.0, 4)])
    with pytest.raises(FitError, match="at least"):
        fit_family(1.0, rows, "landsberg_n3")
    rows = np.array([(0.5, 0.0, 0.0)] * 10)
    with pytest.raises(FitError, match="degenerate"):
        fit_family(1.0, rows, "berwald_n3")
    with pytest.raises(FitError):
        fit_family(1.0, np.array([(0.95, 0, 0)] * 10), "berwald_n3")
    with pytest.raises(ValueError):
        fit_family(1.0, np.zeros((10, 2)), "berwald_n3")


def test_sample_pq_skips_singular_nodes():
    rows = sample_pq(PsiFamily("1+v", "0"), 1.0, 16)
    assert rows.shape == (16, 3)  # an even Chebyshev count avoids s = 0
    assert np.all(np.abs(rows[:, 0]) > 0)


@settings(max_examples=30, deadline=None)
@given(family=st.sampled_from(sorted(FAMILIES)), seed=st.integers(0, 2**31), r=st.floats(0.4, 2.8))
def test_fit_round_trip(family, seed, r):
    rng = np.random.default_rng(seed)
    names = FAMILIES[family].coefficients
    c = dict(zip(names, rng.uniform(-2, 2, len(names)).tolist()))
    rows = []
    for s in chebyshev_nodes(r, 16):
        pq = family_pq(family, c, r, float(s), order=1)
        rows.append((s, pq.dP(0), pq.dQ(0)))
    res = fit_family(r, rows, family)
    assert res.member
    for k in names:
        assert res.coefficients[k][0] == pytest.approx(c[k], abs=1e-8)


# ------------------------------------------------------- Riemannian residual
def test_riemannian_residual_examples():
    grid = np.linspace(-0.9, 0.9, 8)
    assert riemannian_residual(Riemannian(), 1.2, grid * 1.2) <= 1e-10
    assert riemannian_residual(Euclidean(), 1.2, grid * 1.2) == pytest.approx(0, abs=1e-14)
    assert riemannian_residual(PsiFamily("1+v", "0"), 1.2, grid * 1.2) > 1e-7
    with pytest.raises(ValueError):
        riemannian_residual(Euclidean(), 1.0, [0.1, 0.1, 0.2])


def test_trace_formula():
    assert trace_E_landsberg(1.0, 3, 1.0, 0.5) == pytest.approx(3 / W75)
    assert trace_E_landsberg(2.0, 4, 1.0, 0.5, u=2.0) == pytest.approx(8 / W75)
    assert trace_E_landsberg(1.0, 2, 1.0, 0.5) == 0


# ------------------------------------------------------------ classification
GRID = GridSpec()


def test_classify_euclidean():
    c = classify(Euclidean(), 3, GRID)
    assert c.flags == {"riemannian": "holds", "berwald": "holds", "landsberg": "holds"}
    assert c.consistent and not c.errors


def test_classify_homogeneous_surface():
    c = classify(Homogeneous("1/(1+v^2)"), 2, GRID)
    assert c.flags["berwald"] == "holds"
    assert c.flags["landsberg"] == "holds"


def test_classify_psi_family():
    c = classify(PsiFamily("1+v", "0"), 3, GRID)
    assert c.flags["berwald"] == "holds"
    assert c.flags["riemannian"] == "fails"
    assert c.family is not None and c.family.family == "berwald_n3"


def test_classify_riemannian():
    c = classify(Riemannian(), 3, GRID)
    assert c.flags["riemannian"] == "holds" and c.flags["berwald"] == "holds"


@pytest.mark.parametrize("n", [2, 3])
def test_classify_randers(n):
    c = classify(RANDERS, n, GRID)
    assert c.flags["berwald"] == "fails" and c.flags["landsberg"] == "fails"
    assert c.residuals["berwald"] > 1e-3


def test_grid_spec():
    g = GridSpec.parse("0.5:1.5:3,-0.5:0.5:2", n=2, seed=4)
    assert g.points() == [(0.5, -0.25), (0.5, 0.25), (1.0, -0.5), (1.0, 0.5), (1.5, -0.75), (1.5, 0.75)]
    assert g.to_dict() == {"r_range": [0.5, 1.5, 3], "s_fraction_range": [-0.5, 0.5, 2], "n": 2, "seed": 4}
    with pytest.raises(ValueError):
        GridSpec.parse("1:2")
    with pytest.raises(DomainError):
        GridSpec((0.5, 4.0, 3)).validate(3.0, 0.95)
    with pytest.raises(DomainError):
        GridSpec(s_fraction_range=(-1.0, 1.0, 3)).validate(3.0, 0.95)


# --------------------------------------------------- the surface counterexample
@pytest.mark.parametrize("r,s", [(1.0, 0.5), (1.0, -0.5), (2.0, 0.1)])
def test_lc2_closed_form_examples(r, s):
    lhs, closed = lc2_contradiction(r, s)
    assert closed != 0 and lhs != 0
    assert lhs == pytest.approx(closed, abs=1e-9)


def test_lc2_domain():
    with pytest.raises(DomainError):
        lc2_contradiction(1.0, 0.0)
    with pytest.raises(DomainError):
        lc2_contradiction(1.0, 1.0)


def test_c1_denominator_examples():
    assert c1_denominator({}, 1.3, 0.4) == 1
    assert c1_denominator({"b1": "-1/r^2"}, 1.0, 0.5) == pytest.approx(1.5)
    vals = [
        abs(c1_denominator(LC2_COEFFICIENTS, r, f * r))
        for r in np.linspace(0.5, 2, 16)
        for f in np.concatenate([np.linspace(-0.8, -0.1, 8), np.linspace(0.1, 0.8, 8)])
    ]
    assert min(vals) > 0.1
