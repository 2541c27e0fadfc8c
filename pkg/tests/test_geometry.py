import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssfinsler import jets
from ssfinsler.checks import random_config, random_configs, random_poly_spray
from ssfinsler.errors import DomainError, SingularMetricError
from ssfinsler.families import berwald_pq_n3, landsberg_pq_n3
from ssfinsler.geometry import (
    Config,
    SprayJets,
    berwald_curvature,
    berwald_trace,
    compatibility_residuals,
    hs_over_s,
    inverse_metric,
    landsberg_surface_residual,
    landsberg_surface_residual_hk,
    mean_berwald_direct,
    mean_berwald_H,
    metric,
    scalar_HK,
    spray_coeffs,
    spray_pq,
    tensor_bundle,
)
from ssfinsler.jets import JetShape
from ssfinsler.models import Euclidean, Expression, Homogeneous, PsiFamily, Riemannian, default_catalog
from ssfinsler.oracle import FDScheme, fd_spray_pq

CATALOG = default_catalog()


def test_euclidean_spray_vanishes():
    pq = spray_pq(Euclidean().jet(1.3, 0.2))
    assert not np.any(pq.P.coeffs) and not np.any(pq.Q.coeffs)


def test_homogeneous_spray_values():
    pq = spray_pq(Homogeneous("1").jet(2.0, 0.5))
    assert pq.dP(0) == pytest.approx(-0.125, rel=1e-14)
    assert pq.dQ(0) == pytest.approx(0.125, rel=1e-14)


def test_spray_against_fd_oracle():
    model = Expression("sqrt(1+s^2)")
    pq = spray_pq(model.jet(1.0, 0.3))
    P, Q = fd_spray_pq(model, 1.0, 0.3)
    assert pq.dP(0) == pytest.approx(P, rel=1e-6, abs=1e-8)  # P vanishes here
    assert pq.dQ(0) == pytest.approx(Q, rel=1e-6, abs=1e-8)


def test_metric_examples():
    cfg = Config([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    assert np.array_equal(metric(Euclidean().jet(cfg.r, cfg.s), cfg), np.eye(3))
    assert np.array_equal(inverse_metric(Euclidean().jet(cfg.r, cfg.s), cfg), np.eye(3))
    g = metric(Expression("sqrt(1+s^2)").jet(cfg.r, cfg.s), cfg)
    assert np.allclose(g, np.diag([2.0, 1.0, 1.0]), atol=1e-15)


def test_riemannian_inverse_instance():
    model = Riemannian("1", 1.0, 0.0)
    rng = np.random.default_rng(11)
    for cfg in random_configs(model, 4, 20, rng):
        phi = model.jet(cfg.r, cfg.s)
        assert np.allclose(inverse_metric(phi, cfg) @ metric(phi, cfg), np.eye(4), atol=1e-10)


@pytest.mark.parametrize("model", CATALOG, ids=lambda m: m.kind)
def test_metric_symmetry_and_inverse(model):
    rng = np.random.default_rng(5)
    for cfg in random_configs(model, 3, 100, rng):
        phi = model.jet(cfg.r, cfg.s)
        g = metric(phi, cfg)
        assert np.array_equal(g, g.T)
        assert np.max(np.abs(inverse_metric(phi, cfg) @ g - np.eye(3))) < 1e-9


def test_spray_coeffs_zero_and_homogeneity():
    cfg = Config([2.0, 0.0], [0.3, 1.0])
    zero = SprayJets(jets.jet_const(0, (cfg.r, cfg.s), JetShape(0, 3)), jets.jet_const(0, (cfg.r, cfg.s), JetShape(0, 3)), cfg.r, cfg.s)
    assert not np.any(spray_coeffs(zero, cfg))
    model = Homogeneous("1")
    G = spray_coeffs(spray_pq(model.jet(cfg.r, cfg.s)), cfg)
    big = cfg.scaled(2.0)
    G2 = spray_coeffs(spray_pq(model.jet(big.r, big.s)), big)
    assert np.allclose(G2, 4 * G, rtol=1e-10, atol=0)


def test_spray_coeffs_against_fd_reconstruction():
    model = Expression("sqrt(1+s^2)*(1+r^2)+s/4")
    rng = np.random.default_rng(2)
    for cfg in random_configs(model, 3, 5, rng, r_range=(0.5, 2.0), frac=0.7):
        G = spray_coeffs(spray_pq(model.jet(cfg.r, cfg.s)), cfg)
        P, Q = fd_spray_pq(model, cfg.r, cfg.s, FDScheme(digits=30))
        assert np.allclose(G, cfg.u * P * cfg.y + cfg.u**2 * Q * cfg.x, rtol=1e-10, atol=1e-12)


def test_berwald_family_and_euclidean_curvature_vanish():
    rng = np.random.default_rng(0)
    for n in (3, 4):
        for _ in range(20):
            r = rng.uniform(0.5, 2.5)
            s = rng.uniform(-0.9, 0.9) * r
            cfg = random_config(rng, n, r, s)
            f = dict(zip(("f1", "f2", "f3"), rng.uniform(-2, 2, 3).tolist()))
            pq = berwald_pq_n3(f, r, s)
            assert np.max(np.abs(berwald_curvature(pq, cfg))) <= 1e-12
            assert np.max(np.abs(mean_berwald_direct(pq, cfg))) <= 1e-12
            sc = scalar_HK(pq, n)
            assert abs(sc.H.value) <= 1e-12 and abs(sc.K.value) <= 1e-12
            assert np.max(np.abs(mean_berwald_H(sc, cfg))) <= 1e-12
    cfg = Config.from_rs(1.0, 0.4, 3)
    assert not np.any(berwald_curvature(spray_pq(Euclidean().jet(1.0, 0.4)), cfg))


@pytest.mark.parametrize("n", [2, 3, 4])
def test_landsberg_family_trace_and_H(n):
    r, s = 1.3, 0.45
    rng = np.random.default_rng(n)
    cfg = random_config(rng, n, r, s, u=1.7)
    pq = landsberg_pq_n3({"c2": 1.0}, r, s)
    E = mean_berwald_direct(pq, cfg)
    expect = n * (n - 2) / (cfg.u * math.sqrt(r * r - s * s))
    if n == 2:
        assert abs(np.trace(E)) <= 1e-10
    else:
        assert np.trace(E) == pytest.approx(expect, rel=1e-10)
    sc = scalar_HK(pq, n)
    assert sc.H.value == pytest.approx(n / math.sqrt(r * r - s * s), rel=1e-12)
    assert np.allclose(mean_berwald_H(sc, cfg), E, rtol=1e-10, atol=1e-12)
    assert np.allclose(berwald_trace(berwald_curvature(pq, cfg)), E, rtol=1e-10, atol=1e-12)


def test_trace_identity_on_random_polynomial_sprays():
    rng = np.random.default_rng(9)
    for _ in range(50):
        n = int(rng.integers(2, 6))
        r = rng.uniform(0.5, 2.5)
        s = rng.uniform(-0.9, 0.9) * r
        cfg = random_config(rng, n, r, s)
        pq = random_poly_spray(rng, r, s)
        a = berwald_trace(berwald_curvature(pq, cfg))
        b = mean_berwald_direct(pq, cfg)
        assert np.max(np.abs(a - b)) <= 1e-8 * max(1.0, np.max(np.abs(b)))


def test_berwald_tensor_symmetry():
    rng = np.random.default_rng(4)
    cfg = random_config(rng, 3, 1.5, 0.6)
    b = berwald_curvature(random_poly_spray(rng, 1.5, 0.6), cfg)
    for perm in [(0, 2, 1, 3), (0, 1, 3, 2), (0, 3, 2, 1)]:
        assert np.allclose(b, b.transpose(perm), atol=1e-13)


@settings(max_examples=40, deadline=None)
@given(
    lam=st.sampled_from([0.5, 2.0, 7.0]),
    which=st.integers(0, len(CATALOG) - 1),
    n=st.integers(2, 4),
    seed=st.integers(0, 2**31),
)
def test_homogeneity_in_y(lam, which, n, seed):
    model = CATALOG[which]
    rng = np.random.default_rng(seed)
    (cfg,) = random_configs(model, n, 1, rng)
    a = tensor_bundle(model, cfg)
    b = tensor_bundle(model, cfg.scaled(lam))
    scale = lambda t: max(1.0, float(np.max(np.abs(t))))  # noqa: E731
    assert np.max(np.abs(b.g - a.g)) <= 1e-10 * scale(a.g)
    assert np.max(np.abs(b.G - lam**2 * a.G)) <= 1e-10 * scale(lam**2 * a.G)
    assert np.max(np.abs(b.berwald - a.berwald / lam)) <= 1e-9 * scale(a.berwald / lam)
    assert np.max(np.abs(b.E - a.E / lam)) <= 1e-9 * scale(a.E / lam)


def test_rotation_equivariance():
    model = Expression("sqrt(1+s^2)*(1+r^2)+s/4")
    rng = np.random.default_rng(8)
    (cfg,) = random_configs(model, 3, 1, rng)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    rot = Config(q @ cfg.x, q @ cfg.y)
    a = tensor_bundle(model, cfg)
    b = tensor_bundle(model, rot)
    assert np.allclose(b.G, q @ a.G, atol=1e-12)
    assert np.allclose(b.g, q @ a.g @ q.T, atol=1e-12)
    turned = np.einsum("ai,bj,ck,dl,ijkl->abcd", q, q, q, q, a.berwald)
    assert np.allclose(b.berwald, turned, atol=1e-10)


def test_landsberg_surface_residual_examples():
    phi = Euclidean().jet(1.2, 0.3)
    assert landsberg_surface_residual(phi, spray_pq(phi)) == 0
    for r, s in [(2.0, 0.5), (1.0, -0.3), (0.7, 0.6)]:
        phi = Homogeneous("1").jet(r, s)
        assert abs(landsberg_surface_residual(phi, spray_pq(phi))) <= 1e-10
    for model in (Expression("sqrt(1+s^2)*(1+r^2)"), Expression("sqrt(1+s^2)*(1+r^2)+s/4")):
        for r, s in [(1.0, 0.5), (1.8, -0.7)]:
            phi = model.jet(r, s)
            pq = spray_pq(phi)
            a = landsberg_surface_residual(phi, pq)
            b = landsberg_surface_residual_hk(phi, pq)
            assert a == pytest.approx(b, rel=1e-9, abs=1e-12)
    # a non-Landsberg example has a clearly nonzero residual
    phi = Expression("sqrt(1+s^2)*(1+r^2)+s/4").jet(1.0, 0.5)
    assert abs(landsberg_surface_residual(phi, spray_pq(phi))) > 1e-3


def test_hk_form_is_undefined_at_zero():
    phi = Expression("sqrt(1+s^2)").jet(1.0, 0.0)
    with pytest.raises(DomainError):
        landsberg_surface_residual_hk(phi, spray_pq(phi))


def test_psi_family_compatibility_with_stated_spray():
    model = PsiFamily("1+v", "0")
    for r, s in [(1.0, 0.5), (2.2, -0.8), (0.6, 0.2)]:
        shape = JetShape(0, 4)
        S = jets.jet_var_s(r, s, shape)
        pq = SprayJets(-S / r**2, jets.jet_const(1 / (2 * r * r), (r, s), shape), r, s)
        c = compatibility_residuals(model.jet(r, s), pq)
        assert abs(c.C2) <= 1e-9
        assert abs(c.C1) <= 1e-14


@pytest.mark.parametrize("model", CATALOG, ids=lambda m: m.kind)
def test_compatibility_of_own_spray(model):
    rng = np.random.default_rng(1)
    for cfg in random_configs(model, 2, 50, rng):
        phi = model.jet(cfg.r, cfg.s)
        c = compatibility_residuals(phi, spray_pq(phi))
        assert abs(c.C1) <= 1e-9 and abs(c.C2) <= 1e-9


def test_hs_over_s_limit():
    # H = 1 + s^2 has H_s / s = 2 everywhere, including the limit at 0
    for s0 in (0.5, 1e-4, 0.0):
        S = jets.jet_var_s(1.0, s0, JetShape(0, 4))
        ratio, defect = hs_over_s(1 + S * S)
        assert ratio == pytest.approx(2.0, rel=1e-12)
        assert defect <= 1e-12
    # H = s has no finite limit; the defect reports |H_s(0)| = 1
    S = jets.jet_var_s(1.0, 1e-5, JetShape(0, 4))
    _, defect = hs_over_s(S)
    assert defect == pytest.approx(1.0)


def test_e_form_near_zero_uses_limit():
    model = Expression("sqrt(1+s^2)*(1+r^2)+s/4")
    cfg = Config.from_rs(1.2, 1e-6, 3)
    bundle = tensor_bundle(model, cfg)
    assert np.allclose(bundle.E_H, bundle.E, rtol=1e-6, atol=1e-6)


def test_singular_metric_is_reported():
    model = PsiFamily("1+v", "0")
    with pytest.raises(SingularMetricError):
        spray_pq(model.jet(1.0, 0.0))
