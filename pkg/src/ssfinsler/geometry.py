"""Geometric objects of a spherically symmetric metric F = u * phi(r, s).

Conventions: ``r = |x|``, ``u = |y|``, ``s = <x, y>/u``.  Indices are lowered
with the Euclidean metric, so ``x_i = x^i`` and ``y_i = y^i``.  All tensors are
dense numpy arrays; rank-4 tables are indexed ``[i, j, k, l]`` for
``G^i_{jkl}``.

Derivatives of P and Q in s always come from jets, never from finite
differences.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import jets
from .errors import DomainError, ShapeError, SingularMetricError
from .jets import DIV_EPSILON, Jet2, JetShape
from .models import PhiModel

__all__ = [
    "Config",
    "MetricScalars",
    "InverseScalars",
    "SprayJets",
    "ScalarJets",
    "CompatResiduals",
    "TensorBundle",
    "N_MAX",
    "S_JET_SWITCH",
    "spray_pq",
    "metric_scalars",
    "inverse_scalars",
    "metric",
    "inverse_metric",
    "spray_coeffs",
    "berwald_curvature",
    "mean_berwald_direct",
    "mean_berwald_H",
    "hs_over_s",
    "scalar_HK",
    "landsberg_surface_residual",
    "landsberg_surface_residual_hk",
    "compatibility_residuals",
    "berwald_trace",
    "tensor_bundle",
]

log = logging.getLogger(__name__)

N_MAX = 8
S_JET_SWITCH = 1e-3
# H_s/s at |s| < S_JET_SWITCH needs a deep H-jet; s_order 9 leaves H_s of order 4.
LIMIT_SHAPE = JetShape(1, 9)


@dataclass(frozen=True)
class Config:
    """A point (x, y) of the slit tangent bundle of R^n."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(-1)
        y = np.array(self.y, dtype=float).reshape(-1)
        if x.shape != y.shape:
            raise ValueError(f"x and y must have the same length, got {x.size} and {y.size}")
        if not 2 <= x.size <= N_MAX:
            raise ValueError(f"dimension must lie in [2, {N_MAX}], got {x.size}")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise ValueError("x and y must be finite")
        if np.linalg.norm(y) == 0:
            raise DomainError("y must be nonzero")
        if np.linalg.norm(x) == 0:
            raise DomainError("x must be nonzero (r > 0)")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def r(self) -> float:
        return float(np.linalg.norm(self.x))

    @property
    def u(self) -> float:
        return float(np.linalg.norm(self.y))

    @property
    def s(self) -> float:
        return float(self.x @ self.y) / self.u

    def scaled(self, lam: float) -> Config:
        return Config(self.x, lam * self.y)

    @classmethod
    def from_rs(cls, r: float, s: float, n: int, u: float = 1.0) -> Config:
        """Canonical configuration with x along e1 and y in the (e1, e2)-plane."""
        if abs(s) > r:
            raise DomainError(f"|s|={abs(s)} exceeds r={r}")
        x = np.zeros(n)
        y = np.zeros(n)
        x[0] = r
        y[0] = u * s / r
        y[1] = u * np.sqrt(max(0.0, 1.0 - (s / r) ** 2))
        return cls(x, y)


class MetricScalars(NamedTuple):
    sigma0: float
    sigma1: float
    sigma2: float
    sigma3: float


class InverseScalars(NamedTuple):
    rho0: float
    rho1: float
    rho2: float
    rho3: float


@dataclass(frozen=True)
class SprayJets:
    """P and Q as s-jets (r_order 0) at the point (r, s)."""

    P: Jet2
    Q: Jet2
    r: float
    s: float

    def dP(self, k: int) -> float:
        return self.P.extract(0, k)

    def dQ(self, k: int) -> float:
        return self.Q.extract(0, k)

    def derivs(self, order: int = 3) -> tuple[list[float], list[float]]:
        return [self.dP(k) for k in range(order + 1)], [self.dQ(k) for k in range(order + 1)]


@dataclass(frozen=True)
class ScalarJets:
    H: Jet2
    K: Jet2
    r: float
    s: float
    n: int


class CompatResiduals(NamedTuple):
    C1: float
    C2: float


def _phi_parts(phi: Jet2):
    """phi, phi_r, phi_s, phi_ss, phi_rs as s-jets of a common shape."""
    R, S = phi.shape
    if R < 1 or S < 2:
        raise ShapeError(f"phi jet needs r_order >= 1 and s_order >= 2, got {tuple(phi.shape)}")
    target = JetShape(0, S - 2)
    p0 = phi.truncate(JetShape(0, S))
    pr = phi.d_r().truncate(JetShape(0, S))
    ps = p0.d_s()
    return (
        p0.truncate(target),
        pr.truncate(target),
        ps.truncate(target),
        ps.d_s(),
        pr.d_s().truncate(target),
    )


def _s_var(r0: float, s0: float, shape: JetShape) -> Jet2:
    if shape.s_order == 0:
        return jets.jet_const(s0, (r0, s0), shape)
    return jets.jet_var_s(r0, s0, shape)


def spray_pq(phi: Jet2, epsilon: float = DIV_EPSILON) -> SprayJets:
    """Spray functions P, Q of F = u phi as s-jets at the base point of ``phi``.

    The s-order of the result is two less than that of ``phi``.
    """
    r0, s0 = phi.base
    f, fr, fs, fss, frs = _phi_parts(phi)
    s = _s_var(r0, s0, f.shape)
    w = r0 * r0 - s * s
    den = f - s * fs + w * fss
    if abs(f.value) <= epsilon or abs(den.value) <= epsilon:
        raise SingularMetricError(
            f"spray is singular at (r, s)=({r0}, {s0}): phi={f.value!r}, "
            f"phi - s phi_s + (r^2-s^2) phi_ss={den.value!r}"
        )
    Q = (-fr + s * frs + r0 * fss) / (2 * r0 * den)
    P = -Q / f * (s * f + w * fs) + (s * fr + r0 * fs) / (2 * r0 * f)
    return SprayJets(P, Q, r0, s0)


def _check_point(phi: Jet2, cfg: Config) -> None:
    r0, s0 = phi.base
    if abs(r0 - cfg.r) > 1e-10 * max(1.0, r0) or abs(s0 - cfg.s) > 1e-10 * max(1.0, r0):
        raise ValueError(f"jet base ({r0}, {s0}) does not match configuration (r, s)=({cfg.r}, {cfg.s})")


def _check_pq(pq: SprayJets, cfg: Config) -> None:
    if abs(pq.r - cfg.r) > 1e-10 * max(1.0, pq.r) or abs(pq.s - cfg.s) > 1e-10 * max(1.0, pq.r):
        raise ValueError(f"spray base ({pq.r}, {pq.s}) does not match configuration (r, s)=({cfg.r}, {cfg.s})")


def metric_scalars(phi: Jet2) -> MetricScalars:
    _, s = phi.base
    f, fs, fss = phi.extract(0, 0), phi.extract(0, 1), phi.extract(0, 2)
    a1 = f - s * fs
    return MetricScalars(
        f * a1,
        fs * fs + f * fss,
        a1 * fs - s * f * fss,
        s * s * f * fss - s * a1 * fs,
    )


def _regular_denominators(phi: Jet2, epsilon: float = DIV_EPSILON) -> tuple[float, float, float]:
    r, s = phi.base
    f, fs, fss = phi.extract(0, 0), phi.extract(0, 1), phi.extract(0, 2)
    a1 = f - s * fs
    a2 = a1 + (r * r - s * s) * fss
    if min(abs(f), abs(a1), abs(a2)) <= epsilon:
        raise SingularMetricError(f"metric singular at (r, s)=({r}, {s}): phi={f}, a1={a1}, a2={a2}")
    return f, a1, a2


def inverse_scalars(phi: Jet2, epsilon: float = DIV_EPSILON) -> InverseScalars:
    r, s = phi.base
    f, a1, a2 = _regular_denominators(phi, epsilon)
    fs, fss = phi.extract(0, 1), phi.extract(0, 2)
    common = f * fs - s * fs * fs - s * f * fss
    return InverseScalars(
        1.0 / (f * a1),
        (s * f + (r * r - s * s) * fs) * common / (f**3 * a1 * a2),
        -common / (f * f * a1 * a2),
        -fss / (f * a1 * a2),
    )


def metric(phi: Jet2, cfg: Config) -> np.ndarray:
    _check_point(phi, cfg)
    _regular_denominators(phi)
    sg = metric_scalars(phi)
    x, y, u = cfg.x, cfg.y, cfg.u
    return (
        sg.sigma0 * np.eye(cfg.n)
        + sg.sigma1 * np.outer(x, x)
        + sg.sigma2 / u * (np.outer(x, y) + np.outer(y, x))
        + sg.sigma3 / u**2 * np.outer(y, y)
    )


def inverse_metric(phi: Jet2, cfg: Config) -> np.ndarray:
    _check_point(phi, cfg)
    rho = inverse_scalars(phi)
    x, y, u = cfg.x, cfg.y, cfg.u
    return (
        rho.rho0 * np.eye(cfg.n)
        + rho.rho1 / u**2 * np.outer(y, y)
        + rho.rho2 / u * (np.outer(x, y) + np.outer(y, x))
        + rho.rho3 * np.outer(x, x)
    )


def spray_coeffs(pq: SprayJets, cfg: Config) -> np.ndarray:
    """G^i = u P y^i + u^2 Q x^i."""
    _check_pq(pq, cfg)
    u = cfg.u
    return u * pq.dP(0) * cfg.y + u * u * pq.dQ(0) * cfg.x


def _sym3(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """a_j b_k c_l summed over the three distinct placements of ``a``.

    Used with two equal vectors, e.g. ``_sym3(y, x, x) = y_j x_k x_l +
    y_k x_j x_l + y_l x_j x_k``.
    """
    return (
        np.einsum("j,k,l->jkl", a, b, c)
        + np.einsum("k,j,l->jkl", a, b, c)
        + np.einsum("l,j,k->jkl", a, b, c)
    )


def berwald_curvature(pq: SprayJets, cfg: Config) -> np.ndarray:
    """Berwald curvature G^i_{jkl} = d^3 G^i / dy^j dy^k dy^l, shape (n, n, n, n)."""
    _check_pq(pq, cfg)
    (P, Ps, Pss, Psss), (Q, Qs, Qss, Qsss) = pq.derivs(3)
    n, x, y, u, s = cfg.n, cfg.x, cfg.y, cfg.u, cfg.s
    d = np.eye(n)

    # delta^i_j a_k b_l + delta^i_k a_j b_l + delta^i_l a_j b_k, symmetrised in (a, b)
    def dmix(a, b):
        t = (
            np.einsum("ij,k,l->ijkl", d, a, b)
            + np.einsum("ik,j,l->ijkl", d, a, b)
            + np.einsum("il,j,k->ijkl", d, a, b)
        )
        if a is b:
            return t
        return t + (
            np.einsum("ij,k,l->ijkl", d, b, a)
            + np.einsum("ik,j,l->ijkl", d, b, a)
            + np.einsum("il,j,k->ijkl", d, b, a)
        )

    ddd = np.einsum("ij,kl->ijkl", d, d) + np.einsum("ik,jl->ijkl", d, d) + np.einsum("il,jk->ijkl", d, d)
    # delta_{jk} a_l + delta_{jl} a_k + delta_{kl} a_j
    def dvec(a):
        return np.einsum("jk,l->jkl", d, a) + np.einsum("jl,k->jkl", d, a) + np.einsum("kl,j->jkl", d, a)

    xxx = np.einsum("j,k,l->jkl", x, x, x)
    yyy = np.einsum("j,k,l->jkl", y, y, y)
    yxx = _sym3(y, x, x)
    xyy = _sym3(x, y, y)
    up = lambda vec, low: np.einsum("i,jkl->ijkl", vec, low)  # noqa: E731

    G = Pss / u * dmix(x, x)
    G += (P - s * Ps) / u * ddd
    G -= s * Pss / u**2 * dmix(x, y)
    G -= s * Pss / u**2 * up(y, dvec(x))
    G += (Qs - s * Qss) / u * up(x, dvec(x))
    G += (s * s * Pss + s * Ps - P) / u**3 * (dmix(y, y) + up(y, dvec(y)))
    G += (3 * P - s**3 * Psss - 6 * s * s * Pss - 3 * s * Ps) / u**5 * up(y, yyy)
    G += Psss / u**2 * up(y, xxx)
    G += (s * s * Psss + 3 * s * Pss) / u**4 * up(y, xyy)
    G -= (Pss + s * Psss) / u**3 * up(y, yxx)
    G += Qsss / u * up(x, xxx)
    G += (s * s * Qsss + s * Qss - Qs) / u**3 * up(x, xyy)
    G -= s * Qsss / u**2 * up(x, yxx)
    G += (3 * s * Qs - 3 * s * s * Qss - s**3 * Qsss) / u**4 * up(x, yyy)
    G += (s * s * Qss - s * Qs) / u**2 * up(x, dvec(y))
    return G


def mean_berwald_direct(pq: SprayJets, cfg: Config) -> np.ndarray:
    """E_ij from the explicit four-term expression."""
    _check_pq(pq, cfg)
    (P, Ps, Pss, Psss), (Q, Qs, Qss, Qsss) = pq.derivs(3)
    n, x, y, u, s, r = cfg.n, cfg.x, cfg.y, cfg.u, cfg.s, cfg.r
    w = r * r - s * s
    c_delta = (n + 1) * (P - s * Ps) + w * (Qs - s * Qss)
    c_yy = (
        (n + 1) * (s * s * Pss + s * Ps - P)
        + r * r * (s * s * Qsss + s * Qss - Qs)
        + 3 * s * s * Qs
        - 3 * s**3 * Qss
        - s**4 * Qsss
    )
    c_x = (n + 1) * Pss + 2 * (Qs - s * Qss) + w * Qsss
    return (
        c_delta / u * np.eye(n)
        + c_yy / u**3 * np.outer(y, y)
        + c_x / u * np.outer(x, x)
        - s * c_x / u**2 * (np.outer(x, y) + np.outer(y, x))
    )


def scalar_HK(pq: SprayJets, n: int) -> ScalarJets:
    """H = (n+1)(P - s P_s) + (r^2 - s^2)(Q_s - s Q_ss) and K = P_ss - Q_s + s Q_ss."""
    Sq = pq.Q.shape.s_order
    Sp = pq.P.shape.s_order
    order = min(Sp, Sq) - 2
    if order < 1:
        raise ShapeError(f"P, Q jets of s-order {Sp}, {Sq} are too shallow for H and K")
    target = JetShape(0, order)
    P = pq.P.truncate(JetShape(0, order + 2))
    Q = pq.Q.truncate(JetShape(0, order + 2))
    Ps, Qs = P.d_s(), Q.d_s()
    Pss, Qss = Ps.d_s(), Qs.d_s()
    s = jets.jet_var_s(pq.r, pq.s, target)
    P, Ps, Qs = P.truncate(target), Ps.truncate(target), Qs.truncate(target)
    H = (n + 1) * (P - s * Ps) + (pq.r**2 - s * s) * (Qs - s * Qss)
    K = Pss - Qs + s * Qss
    return ScalarJets(H, K, pq.r, pq.s, n)


def hs_over_s(H: Jet2, s_jet_switch: float = S_JET_SWITCH) -> tuple[float, float]:
    """Return (H_s/s, limit defect) at the base point of the s-jet ``H``.

    Away from s = 0 this is a plain quotient and the defect is 0.  For
    ``|s| < s_jet_switch`` the quotient is (H_s(s) - H_s(0))/s from the Taylor
    coefficients of H_s, which assumes the singularity is removable; the
    defect is the extrapolated |H_s(0)|, nonzero when it is not.
    """
    s0 = H.base[1]
    Hs = H.d_s()
    if abs(s0) >= s_jet_switch:
        return Hs.value / s0, 0.0
    d = Hs.coeffs[0]
    powers = (-s0) ** np.arange(d.size)
    defect = float(d @ powers)
    # H_s(s0) - H_s(0) = sum_{k>=1} d_k (-1)^(k+1) s0^k with d_k the Taylor coefficients about s0
    quotient = float(sum(d[k] * (-1) ** (k + 1) * s0 ** (k - 1) for k in range(1, d.size)))
    return quotient, abs(defect)


def mean_berwald_H(scalars: ScalarJets, cfg: Config, s_jet_switch: float = S_JET_SWITCH) -> np.ndarray:
    """E_ij from H: (H/u) delta - (s H_s + H) y y / u^3 + (H_s/(s u^2)) (s(x y + y x) - u x x)."""
    if abs(scalars.r - cfg.r) > 1e-10 * max(1.0, cfg.r) or abs(scalars.s - cfg.s) > 1e-10 * max(1.0, cfg.r):
        raise ValueError("scalar jets do not match configuration")
    if scalars.n != cfg.n:
        raise ValueError(f"H was built for n={scalars.n}, configuration has n={cfg.n}")
    x, y, u, s = cfg.x, cfg.y, cfg.u, cfg.s
    H = scalars.H.value
    Hs = scalars.H.extract(0, 1)
    ratio, defect = hs_over_s(scalars.H, s_jet_switch)
    if defect > 1e-8 * max(1.0, abs(H)):
        log.warning("H_s/s has no finite limit at s=0 (|H_s(r,0)| ~ %.3g)", defect)
    return (
        H / u * np.eye(cfg.n)
        - (s * Hs + H) / u**3 * np.outer(y, y)
        + ratio / u**2 * (s * (np.outer(x, y) + np.outer(y, x)) - u * np.outer(x, x))
    )


def _phi_vals(phi: Jet2) -> tuple[float, float]:
    return phi.extract(0, 0), phi.extract(0, 1)


def landsberg_surface_residual(phi: Jet2, pq: SprayJets) -> float:
    """(r^2 - s^2) L1 + 3 L2 written through phi, phi_s and the s-derivatives of P, Q."""
    f, fs = _phi_vals(phi)
    r, s = pq.r, pq.s
    (P, Ps, Pss, Psss), (Q, Qs, Qss, Qsss) = pq.derivs(3)
    w = r * r - s * s
    c_fs = w * (w * Qsss + 3 * (Qs - s * Qss) + 3 * Pss) + 3 * (P - s * Ps)
    c_f = w * (s * Qsss + Psss) + 3 * s * (Qs - s * Qss) - 3 * s * Pss
    return c_fs * fs + c_f * f


def landsberg_surface_residual_hk(phi: Jet2, pq: SprayJets) -> float:
    """Same residual in the form (1/s)(s H - (r^2 - s^2) H_s) phi_s + ((r^2 - s^2) K_s - 3 s K) phi, n = 2."""
    f, fs = _phi_vals(phi)
    sc = scalar_HK(pq, 2)
    r, s = pq.r, pq.s
    w = r * r - s * s
    H, Hs = sc.H.value, sc.H.extract(0, 1)
    K, Ks = sc.K.value, sc.K.extract(0, 1)
    if s == 0:
        raise DomainError("the H/K form of the Landsberg residual is undefined at s = 0")
    return (s * H - w * Hs) / s * fs + (w * Ks - 3 * s * K) * f


def compatibility_residuals(phi: Jet2, pq: SprayJets) -> CompatResiduals:
    f, fs = _phi_vals(phi)
    fr = phi.extract(1, 0)
    r, s = pq.r, pq.s
    P, Ps = pq.dP(0), pq.dP(1)
    Q, Qs = pq.dQ(0), pq.dQ(1)
    w = r * r - s * s
    C1 = (1 + s * P - w * (2 * Q - s * Qs)) * fs + (s * Ps - 2 * P - s * (2 * Q - s * Qs)) * f
    C2 = fr / r - (P + Qs * w) * fs - (Ps + s * Qs) * f
    return CompatResiduals(C1, C2)


def berwald_trace(b: np.ndarray) -> np.ndarray:
    """E_jk = G^h_{jkh}."""
    return np.einsum("hjkh->jk", b)


@dataclass(frozen=True)
class TensorBundle:
    """All geometric objects of a model at one configuration."""

    cfg: Config
    phi: Jet2
    pq: SprayJets
    scalars: ScalarJets
    g: np.ndarray
    g_inv: np.ndarray
    G: np.ndarray
    berwald: np.ndarray
    E: np.ndarray
    E_H: np.ndarray
    hs_limit_defect: float


def tensor_bundle(model: PhiModel, cfg: Config, shape: JetShape | None = None) -> TensorBundle:
    """Evaluate every object at ``cfg``; deeper jets are used next to s = 0."""
    r, s = cfg.r, cfg.s
    if shape is None:
        shape = LIMIT_SHAPE if abs(s) < S_JET_SWITCH else jets.DEFAULT_SHAPE
    phi = model.jet(r, s, shape)
    pq = spray_pq(phi)
    sc = scalar_HK(pq, cfg.n)
    _, defect = hs_over_s(sc.H)
    return TensorBundle(
        cfg=cfg,
        phi=phi,
        pq=pq,
        scalars=sc,
        g=metric(phi, cfg),
        g_inv=inverse_metric(phi, cfg),
        G=spray_coeffs(pq, cfg),
        berwald=berwald_curvature(pq, cfg),
        E=mean_berwald_direct(pq, cfg),
        E_H=mean_berwald_H(sc, cfg),
        hs_limit_defect=defect,
    )
