"""Named verification checks run by ``ssfinsler verify`` and the acceptance suite.

Every check returns one or more measured parts.  A part is either an upper
bound (``max``: the measured error must not exceed the tolerance) or a lower
bound (``min``: the measured quantity must stay above the threshold).  A
global tolerance override replaces the tolerance of upper-bound parts only.
"""

from __future__ import annotations

import math
import time
import zlib
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import jets
from .families import (
    FAMILIES,
    CoefFns,
    GridSpec,
    LC2_COEFFICIENTS,
    berwald_pq_n3,
    berwald_pq_surface,
    c1_denominator,
    chebyshev_nodes,
    classify,
    family_pq,
    fit_family,
    landsberg_pq_n3,
    lc2_contradiction,
    trace_E_landsberg,
)
from .geometry import (
    LIMIT_SHAPE,
    Config,
    SprayJets,
    berwald_curvature,
    berwald_trace,
    compatibility_residuals,
    inverse_metric,
    mean_berwald_direct,
    mean_berwald_H,
    metric,
    scalar_HK,
    spray_pq,
)
from .jets import DEFAULT_SHAPE, JetShape
from .models import Homogeneous, PhiModel, PsiFamily, default_catalog
from .oracle import FDScheme, compare, fd_berwald, fd_phi_derivs

__all__ = [
    "Part",
    "CheckResult",
    "CHECKS",
    "check_names",
    "run_check",
    "run_checks",
    "random_config",
    "random_configs",
    "random_poly_spray",
    "HOMOGENEOUS_PROFILES",
]

HOMOGENEOUS_PROFILES = ("1", "sqrt(1+v^2)", "1/(1+v^2)", "exp(v/2)", "cosh(v)+v/3")


@dataclass
class Part:
    label: str
    value: float
    tol: float
    kind: str = "max"

    @property
    def passed(self) -> bool:
        if not np.isfinite(self.value):
            return False
        return self.value <= self.tol if self.kind == "max" else self.value > self.tol

    def to_dict(self) -> dict:
        return {"label": self.label, "value": self.value, "tol": self.tol, "kind": self.kind, "passed": self.passed}


@dataclass
class CheckResult:
    name: str
    description: str
    parts: list[Part] = field(default_factory=list)
    error: str | None = None
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.error is None and bool(self.parts) and all(p.passed for p in self.parts)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        if self.error:
            return f"{status} {self.name}: error: {self.error}"
        parts = "; ".join(
            f"{p.label} = {p.value:.3g} ({'max' if p.kind == 'max' else 'must exceed'} {p.tol:g})" for p in self.parts
        )
        return f"{status} {self.name}: {parts}"

    def to_dict(self, meta: bool = True) -> dict:
        out = {
            "name": self.name,
            "description": self.description,
            "passed": self.passed,
            "parts": [p.to_dict() for p in self.parts],
            "error": self.error,
        }
        if meta:
            out["seconds"] = self.seconds
        return out


@dataclass(frozen=True)
class _Check:
    name: str
    description: str
    fn: Callable[["_Ctx"], list[Part]]


class _Ctx:
    """What a check function sees: a seeded generator and the tolerance rule."""

    def __init__(self, name: str, seed: int, tol_override: float | None):
        self.rng = np.random.default_rng([seed, zlib.crc32(name.encode())])
        self.tol_override = tol_override

    def upper(self, label: str, value: float, tol: float) -> Part:
        return Part(label, float(value), self.tol_override if self.tol_override is not None else tol, "max")

    def lower(self, label: str, value: float, threshold: float) -> Part:
        return Part(label, float(value), threshold, "min")


CHECKS: dict[str, _Check] = {}


def _check(name: str, description: str):
    def deco(fn):
        CHECKS[name] = _Check(name, description, fn)
        return fn

    return deco


def check_names() -> list[str]:
    return list(CHECKS)


# ------------------------------------------------------------- random inputs
def random_config(rng: np.random.Generator, n: int, r: float, s: float, u: float | None = None) -> Config:
    """A configuration with |x| = r and <x, y>/|y| = s in a random orientation."""
    u = float(rng.uniform(0.5, 2.0)) if u is None else u
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    e1, e2 = q[:, 0], q[:, 1]
    f = s / r
    x = r * e1
    y = u * (f * e1 + math.sqrt(max(0.0, 1 - f * f)) * e2)
    return Config(x, y)


def _well_conditioned(model: PhiModel, r: float, s: float, floor: float = 0.1) -> bool:
    """Reject points where phi or the spray denominator nearly vanish.

    phi is compared with r |phi_s| as well, which catches models such as the
    psi-family whose phi passes through zero at s = 0.
    """
    try:
        j = model.jet(r, s, JetShape(1, 2))
    except Exception:
        return False
    phi, ps, pss = j.extract(0, 0), j.extract(0, 1), j.extract(0, 2)
    a2 = phi - s * ps + (r * r - s * s) * pss
    scale = max(1.0, abs(phi))
    return abs(phi) > floor * scale and abs(a2) > floor * scale and abs(phi) > 0.1 * r * abs(ps)


def random_configs(
    model: PhiModel | None,
    n: int,
    count: int,
    rng: np.random.Generator,
    r_range: tuple[float, float] | None = None,
    frac: float = 0.9,
    s_abs_range: tuple[float, float] | None = None,
) -> list[Config]:
    """Random admissible configurations; points where the metric degenerates are redrawn."""
    if r_range is None:
        r_max = model.r_max if model is not None else 3.0
        r_range = (0.15 * r_max, 0.9 * r_max)
    safety = model.s_safety if model is not None else 0.95
    out = []
    tries = 0
    while len(out) < count:
        tries += 1
        if tries > 200 * count:
            raise RuntimeError("could not draw well-conditioned configurations")
        r = float(rng.uniform(*r_range))
        if s_abs_range is not None:
            s = float(rng.uniform(*s_abs_range)) * (1 if rng.random() < 0.5 else -1)
        else:
            s = float(rng.uniform(-1, 1)) * min(frac, safety) * r
        if abs(s) > safety * r:
            continue
        if model is not None and not _well_conditioned(model, r, s):
            continue
        out.append(random_config(rng, n, r, s))
    return out


def random_poly_spray(rng: np.random.Generator, r: float, s: float, degree: int = 5, shape: JetShape = DEFAULT_SHAPE):
    """P and Q random polynomials in s with r-dependent coefficients, as s-jets."""
    S = jets.jet_var_s(r, s, JetShape(0, shape.s_order))
    out = []
    for _ in range(2):
        coef = rng.uniform(-1, 1, size=(degree + 1, 2))
        acc = jets.jet_const(0.0, (r, s), JetShape(0, shape.s_order))
        for k in range(degree, -1, -1):
            acc = acc * S + (coef[k, 0] + coef[k, 1] * r)
        out.append(acc)
    return SprayJets(out[0], out[1], r, s)


def _random_coef_exprs(rng: np.random.Generator, names: Iterable[str]) -> dict[str, str]:
    """Smooth random coefficient functions a + b r + c/r."""
    out = {}
    for k in names:
        a, b, c = (float(v) for v in rng.uniform(-1, 1, size=3))
        out[k] = f"{a!r} + {b!r}*r + {c!r}/r"
    return out


def _rel(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = max(1.0, float(np.max(np.abs(b))))
    return float(np.max(np.abs(a - b))) / scale


# --------------------------------------------------------------------- checks
@_check("inverse-metric", "g^ik g_kj = delta for every catalog model, n = 2, 3, 4, 100 configurations each")
def _inverse_metric(ctx: _Ctx) -> list[Part]:
    worst = 0.0
    for model in default_catalog():
        for n in (2, 3, 4):
            for cfg in random_configs(model, n, 100, ctx.rng):
                phi = model.jet(cfg.r, cfg.s, JetShape(1, 2))
                prod = inverse_metric(phi, cfg) @ metric(phi, cfg)
                worst = max(worst, float(np.max(np.abs(prod - np.eye(n)))))
    return [ctx.upper("max |g^-1 g - I|", worst, 1e-9)]


@_check("trace-identity", "trace of the Berwald curvature equals the direct mean Berwald curvature")
def _trace_identity(ctx: _Ctx) -> list[Part]:
    worst = 0.0
    for k in range(200):
        n = 2 + k % 3
        r = float(ctx.rng.uniform(0.3, 2.5))
        s = float(ctx.rng.uniform(-0.9, 0.9)) * r
        cfg = random_config(ctx.rng, n, r, s)
        pq = random_poly_spray(ctx.rng, r, s)
        worst = max(worst, _rel(berwald_trace(berwald_curvature(pq, cfg)), mean_berwald_direct(pq, cfg)))
    for model in default_catalog():
        for n in (2, 3, 4):
            for cfg in random_configs(model, n, 10, ctx.rng):
                pq = spray_pq(model.jet(cfg.r, cfg.s))
                worst = max(worst, _rel(berwald_trace(berwald_curvature(pq, cfg)), mean_berwald_direct(pq, cfg)))
    return [ctx.upper("relative trace mismatch", worst, 1e-8)]


@_check("e-form", "direct mean Berwald curvature equals its H form; jet-limit path next to s = 0")
def _e_form(ctx: _Ctx) -> list[Part]:
    away = 0.0
    near = 0.0
    for model in default_catalog():
        for n in (2, 3, 4):
            for cfg in random_configs(model, n, 20, ctx.rng, s_abs_range=None):
                if abs(cfg.s) < 0.05 * cfg.r:
                    continue
                pq = spray_pq(model.jet(cfg.r, cfg.s))
                away = max(away, _rel(mean_berwald_H(scalar_HK(pq, n), cfg), mean_berwald_direct(pq, cfg)))
            if isinstance(model, PsiFamily):
                continue  # phi vanishes at s = 0 for this family
            for cfg in random_configs(model, n, 10, ctx.rng, s_abs_range=(1e-9, 5e-4)):
                pq = spray_pq(model.jet(cfg.r, cfg.s, LIMIT_SHAPE))
                near = max(near, _rel(mean_berwald_H(scalar_HK(pq, n), cfg), mean_berwald_direct(pq, cfg)))
    for _ in range(30):
        n = int(ctx.rng.integers(2, 5))
        r = float(ctx.rng.uniform(0.3, 2.5))
        s = float(ctx.rng.uniform(1e-9, 5e-4)) * ctx.rng.choice([-1, 1])
        cfg = random_config(ctx.rng, n, r, s)
        pq = random_poly_spray(ctx.rng, r, s, shape=LIMIT_SHAPE)
        near = max(near, _rel(mean_berwald_H(scalar_HK(pq, n), cfg), mean_berwald_direct(pq, cfg)))
    return [ctx.upper("away from s=0", away, 1e-8), ctx.upper("jet limit near s=0", near, 1e-6)]


@_check("compatibility", "C1 and C2 vanish for the spray of every catalog model")
def _compat(ctx: _Ctx) -> list[Part]:
    worst = 0.0
    for model in default_catalog():
        for cfg in random_configs(model, 2, 100, ctx.rng):
            phi = model.jet(cfg.r, cfg.s)
            c = compatibility_residuals(phi, spray_pq(phi))
            worst = max(worst, abs(c.C1), abs(c.C2))
    return [ctx.upper("max |C1|, |C2|", worst, 1e-9)]


@_check("berwald-family-flat", "P = f1 s, Q = f2 s^2 + f3 have vanishing Berwald curvature for n = 3, 4")
def _berwald_flat(ctx: _Ctx) -> list[Part]:
    worst = 0.0
    for _ in range(3):
        f = CoefFns("berwald_n3", _random_coef_exprs(ctx.rng, ("f1", "f2", "f3")))
        for n in (3, 4):
            for cfg in random_configs(None, n, 100, ctx.rng, r_range=(0.3, 2.5)):
                worst = max(worst, float(np.max(np.abs(berwald_curvature(berwald_pq_n3(f, cfg.r, cfg.s), cfg)))))
    return [ctx.upper("max |G^i_jkl|", worst, 1e-12)]


@_check("homogeneous-spray", "degree -1 homogeneous metrics: P = -s/r^2, Q = 1/(2r^2), flat by jets and by FD")
def _homogeneous(ctx: _Ctx) -> list[Part]:
    pq_err = compat = flat_jet = flat_fd = 0.0
    for h in HOMOGENEOUS_PROFILES:
        model = Homogeneous(h)
        for i, cfg in enumerate(random_configs(model, 3, 100, ctx.rng)):
            r, s = cfg.r, cfg.s
            phi = model.jet(r, s)
            pq = spray_pq(phi)
            pq_err = max(pq_err, abs(pq.dP(0) + s / r**2), abs(pq.dQ(0) - 1 / (2 * r * r)))
            c = compatibility_residuals(phi, pq)
            compat = max(compat, abs(c.C1), abs(c.C2))
            flat_jet = max(flat_jet, float(np.max(np.abs(berwald_curvature(pq, cfg)))))
            if i < 4:
                flat_fd = max(flat_fd, float(np.max(np.abs(fd_berwald(model, cfg)))))
    return [
        ctx.upper("(P, Q) deviation", pq_err, 1e-10),
        ctx.upper("compatibility", compat, 1e-9),
        # rounding in the third s-derivatives of P, Q grows like 1/a2^4 where the
        # metric is poorly conditioned; 1e-8 leaves room for that
        ctx.upper("jet |G^i_jkl|", flat_jet, 1e-8),
        ctx.upper("FD |G^i_jkl|", flat_fd, 1e-5),
    ]


@_check("landsberg-trace", "trace of E for the Landsberg family is n(n-2) c2 / (u sqrt(r^2-s^2))")
def _landsberg_trace(ctx: _Ctx) -> list[Part]:
    rel = 0.0
    two = 0.0
    smallest = math.inf
    for _ in range(10):
        c = {k: float(v) for k, v in zip(("c0", "c1", "c2", "c3"), ctx.rng.uniform(-1, 1, size=4))}
        c["c2"] = float(np.sign(c["c2"]) * (0.2 + abs(c["c2"])))
        for n in (2, 3, 4):
            for cfg in random_configs(None, n, 10, ctx.rng, r_range=(0.3, 2.5)):
                pq = landsberg_pq_n3(c, cfg.r, cfg.s)
                tr = float(np.trace(mean_berwald_direct(pq, cfg)))
                expect = trace_E_landsberg(c["c2"], n, cfg.r, cfg.s, cfg.u)
                if n == 2:
                    two = max(two, abs(tr))
                else:
                    rel = max(rel, abs(tr - expect) / abs(expect))
                    smallest = min(smallest, abs(tr))
    return [
        ctx.upper("relative mismatch, n = 3, 4", rel, 1e-8),
        ctx.upper("|trace|, n = 2", two, 1e-10),
        ctx.lower("min |trace|, n = 3, 4", smallest, 0.0),
    ]


@_check("psi-family", "psi = 1 + v, c0 = 0: C2 against P = -s/r^2, Q = 1/(2r^2); Berwald, not Riemannian")
def _psi(ctx: _Ctx) -> list[Part]:
    model = PsiFamily("1+v", "0")
    f = {"f1": "-1/r^2", "f2": "0", "f3": "1/(2*r^2)"}
    worst = 0.0
    for cfg in random_configs(model, 3, 100, ctx.rng):
        phi = model.jet(cfg.r, cfg.s)
        worst = max(worst, abs(compatibility_residuals(phi, berwald_pq_n3(f, cfg.r, cfg.s)).C2))
    cls = classify(model, 3, GridSpec(n=3))
    verdict = float(cls.flags["berwald"] == "holds" and cls.flags["riemannian"] == "fails")
    return [ctx.upper("max |C2|", worst, 1e-9), ctx.lower("berwald holds and riemannian fails", verdict, 0.5)]


@_check("surface-berwald-scalar", "s H - (r^2 - s^2) H_s = 0 for the Berwald surface family")
def _surface(ctx: _Ctx) -> list[Part]:
    worst = 0.0
    rs = np.linspace(0.5, 2.5, 20)
    fr = np.linspace(-0.9, 0.9, 20)
    for _ in range(20):
        b = CoefFns("berwald_surface", _random_coef_exprs(ctx.rng, FAMILIES["berwald_surface"].coefficients))
        for r in rs:
            for f in fr:
                s = float(f * r)
                sc = scalar_HK(berwald_pq_surface(b, float(r), s), 2)
                worst = max(worst, abs(s * sc.H.value - (r * r - s * s) * sc.H.extract(0, 1)))
    return [ctx.upper("max |s H - (r^2-s^2) H_s|", worst, 1e-8)]


def _lc2_grid():
    for r in np.linspace(0.5, 2.0, 16):
        for f in np.linspace(0.1, 0.8, 15):
            for sign in (1, -1):
                yield float(r), float(sign * f * r)


@_check("lc2-closed-form", "surface counterexample: left side equals the quoted closed form")
def _lc2_closed(ctx: _Ctx) -> list[Part]:
    worst = 0.0
    for r, s in _lc2_grid():
        lhs, closed = lc2_contradiction(r, s)
        worst = max(worst, abs(lhs - closed))
    return [ctx.upper("max |lhs - closed form|", worst, 1e-9)]


@_check("lc2-nonvanishing", "surface counterexample: the quoted closed form stays away from zero")
def _lc2_nonzero(ctx: _Ctx) -> list[Part]:
    smallest = min(abs(lc2_contradiction(r, s)[1]) for r, s in _lc2_grid())
    return [ctx.lower("min |closed form|", smallest, 1e-3)]


@_check("c1-denominator", "surface counterexample: the phi_s/phi denominator stays away from zero")
def _c1_den(ctx: _Ctx) -> list[Part]:
    smallest = min(abs(c1_denominator(LC2_COEFFICIENTS, r, s)) for r, s in _lc2_grid())
    return [ctx.lower("min |denominator|", smallest, 0.1)]


@_check("oracle-concordance", "jet vs finite-difference Berwald curvature, catalog, n = 2, 3, 20 configs")
def _concordance(ctx: _Ctx) -> list[Part]:
    worst = 0.0
    where = ""
    for model in default_catalog():
        for n in (2, 3):
            for cfg in random_configs(model, n, 20, ctx.rng, frac=0.8):
                pq = spray_pq(model.jet(cfg.r, cfg.s))
                rep = compare(berwald_curvature(pq, cfg), fd_berwald(model, cfg), 1e-4)
                if rep.max_rel_err > worst:
                    worst, where = rep.max_rel_err, model.kind
    return [ctx.upper(f"max relative error ({where or 'none'})", worst, 1e-4)]


_SELF_TEST = [
    # (expression, derivative order in s, exact derivative at s)
    ("s^6 - 2*s^3 + s", 3, lambda s: 120 * s**3 - 12),
    ("s^5", 2, lambda s: 20 * s**3),
    ("exp(s)", 3, math.exp),
    ("exp(2*s)", 1, lambda s: 2 * math.exp(2 * s)),
    ("sqrt(1+s^2)", 2, lambda s: (1 + s * s) ** -1.5),
    ("sqrt(1+s^2)*exp(s)", 1, lambda s: math.exp(s) * (math.sqrt(1 + s * s) + s / math.sqrt(1 + s * s))),
]


@_check("oracle-self-test", "finite differences reproduce known derivatives")
def _self_test(ctx: _Ctx) -> list[Part]:
    from .models import Expression

    worst = 0.0
    for src, k, exact in _SELF_TEST:
        model = Expression(src, r_max=5.0)
        for s in (-0.5, 0.2, 0.7):
            est = fd_phi_derivs(model, 2.0, s, 0, k)
            ref = exact(s)
            worst = max(worst, abs(est - ref) / max(1.0, abs(ref)))
    return [ctx.upper("relative error", worst, 1e-7)]


@_check("jet-fd-agreement", "phi-jet derivatives vs extended-precision finite differences, whole catalog")
def _jet_fd(ctx: _Ctx) -> list[Part]:
    scheme = FDScheme(digits=40)
    worst = 0.0
    for model in default_catalog():
        for cfg in random_configs(model, 2, 3, ctx.rng, frac=0.8):
            j = model.jet(cfg.r, cfg.s)
            for i in (0, 1):
                for k in range(6):
                    if i + k == 0:
                        continue
                    ref = j.extract(i, k)
                    est = fd_phi_derivs(model, cfg.r, cfg.s, i, k, scheme)
                    worst = max(worst, abs(est - ref) / max(1.0, abs(ref)))
    return [ctx.upper("relative error, orders up to (1, 5)", worst, 1e-6)]


@_check("fit-roundtrip", "fitting a family's own spray recovers its coefficients")
def _fit_roundtrip(ctx: _Ctx) -> list[Part]:
    coef_err = 0.0
    resid = 0.0
    for fam, spec in FAMILIES.items():
        for _ in range(50):
            c = {k: float(v) for k, v in zip(spec.coefficients, ctx.rng.uniform(-2, 2, size=len(spec.coefficients)))}
            r = float(ctx.rng.uniform(0.5, 2.5))
            rows = []
            for s in chebyshev_nodes(r, 16):
                pq = family_pq(fam, c, r, float(s), order=2)
                rows.append((float(s), pq.dP(0), pq.dQ(0)))
            res = fit_family(r, rows, fam)
            coef_err = max(coef_err, max(abs(res.coefficients[k][0] - c[k]) for k in c))
            resid = max(resid, res.residual)
    return [ctx.upper("coefficient error", coef_err, 1e-8), ctx.upper("fit residual", resid, 1e-10)]


# ----------------------------------------------------------------- running
def run_check(name: str, seed: int = 0, tol: float | None = None) -> CheckResult:
    chk = CHECKS[name]
    ctx = _Ctx(name, seed, tol)
    t0 = time.perf_counter()
    try:
        parts = chk.fn(ctx)
        err = None
    except Exception as exc:  # a crashing check is a failed check
        parts, err = [], f"{type(exc).__name__}: {exc}"
    return CheckResult(name, chk.description, parts, err, time.perf_counter() - t0)


def run_checks(names: Iterable[str] | None = None, seed: int = 0, tol: float | None = None) -> list[CheckResult]:
    names = list(CHECKS) if names is None else list(names)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown check(s) {unknown}; available: {', '.join(CHECKS)}")
    return [run_check(n, seed, tol) for n in names]
