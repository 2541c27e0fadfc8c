"""Canonical spray families, family fitting and the metric classification.

Three families of (P, Q) are built in as s-jets:

* ``landsberg_n3``     P = c1 s + c2 w/r^2,  Q = c0 s^2/2 - c2 s w/r^4 + c3
* ``berwald_surface``  the five-coefficient surface family in a, b0..b3
* ``berwald_n3``       P = f1 s,  Q = f2 s^2 + f3

with ``w = sqrt(r^2 - s^2)`` and every coefficient a function of r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import jets
from .errors import DomainError, FinslerError, FitError
from .expr import Node, evaluate, parse_expr, pretty
from .geometry import (
    Config,
    SprayJets,
    berwald_curvature,
    berwald_trace,
    landsberg_surface_residual,
    mean_berwald_direct,
    scalar_HK,
    spray_pq,
)
from .jets import DEFAULT_SHAPE, DIV_EPSILON, JetShape
from .models import PhiModel

__all__ = [
    "FAMILIES",
    "CoefFns",
    "FamilySpec",
    "FitResult",
    "GridSpec",
    "Classification",
    "landsberg_pq_n3",
    "berwald_pq_surface",
    "berwald_pq_n3",
    "family_pq",
    "fit_family",
    "fit_model",
    "sample_pq",
    "chebyshev_nodes",
    "riemannian_residual",
    "trace_E_landsberg",
    "classify",
    "lc2_contradiction",
    "c1_denominator",
    "LC2_COEFFICIENTS",
]

FIT_TOL = 1e-7
SPRAY_ORDER = DEFAULT_SHAPE.s_order


class CoefFns:
    """Named coefficient functions of r, given as expressions in r or constants.

    Names not supplied default to zero.
    """

    def __init__(self, family: str, values: Mapping[str, object] | None = None):
        if family not in FAMILIES:
            raise KeyError(f"unknown family {family!r}; choose from {sorted(FAMILIES)}")
        names = FAMILIES[family].coefficients
        values = dict(values or {})
        unknown = set(values) - set(names)
        if unknown:
            raise KeyError(f"family {family!r} has no coefficient(s) {sorted(unknown)}; expected {names}")
        self.family = family
        self.exprs: dict[str, Node] = {}
        for name in names:
            v = values.get(name, 0.0)
            if isinstance(v, Node):
                self.exprs[name] = v
            elif isinstance(v, (int, float)):
                self.exprs[name] = parse_expr(repr(float(v)), ("r",))
            else:
                self.exprs[name] = parse_expr(str(v), ("r",))

    def at(self, r: float) -> dict[str, float]:
        if not r > 0:
            raise DomainError(f"coefficient functions need r > 0, got {r!r}")
        return {k: float(evaluate(e, {"r": r})) for k, e in self.exprs.items()}

    def describe(self) -> dict[str, str]:
        return {k: pretty(e) for k, e in self.exprs.items()}

    def __repr__(self):
        return f"CoefFns({self.family!r}, {self.describe()!r})"


def _s_jets(r: float, s0: float, order: int):
    if not abs(s0) < r:
        raise DomainError(f"family sprays need |s| < r, got r={r!r}, s={s0!r}")
    shape = JetShape(0, order)
    S = jets.jet_var_s(r, s0, shape)
    W = jets.jet_sqrt(r * r - S * S)
    return S, W


def _coefs(c, family: str, r: float) -> dict[str, float]:
    if isinstance(c, CoefFns):
        return c.at(r)
    return CoefFns(family, c).at(r)


def landsberg_pq_n3(c, r: float, s0: float, order: int = SPRAY_ORDER) -> SprayJets:
    k = _coefs(c, "landsberg_n3", r)
    S, W = _s_jets(r, s0, order)
    P = k["c1"] * S + k["c2"] / r**2 * W
    Q = 0.5 * k["c0"] * S * S - k["c2"] / r**4 * S * W + k["c3"]
    return SprayJets(P, Q, r, s0)


def berwald_pq_surface(b, r: float, s0: float, order: int = SPRAY_ORDER) -> SprayJets:
    """Surface family; the b3 term of Q enters with a plus sign, the sign for which
    s H - (r^2 - s^2) H_s vanishes identically."""
    k = _coefs(b, "berwald_surface", r)
    S, W = _s_jets(r, s0, order)
    U = r * r - 2 * S * S
    P = k["b1"] * S + k["b2"] / W + k["b3"] * U / W
    Q = (
        k["b0"] * S * S
        + 0.5 * k["b1"]
        + k["b2"] * S * U / (r**4 * W)
        + k["b3"] * S * (3 * r * r - 2 * S * S) / (r**2 * W)
        - k["a"] / r**2 * S * W
    )
    return SprayJets(P, Q, r, s0)


def berwald_pq_n3(f, r: float, s0: float, order: int = SPRAY_ORDER) -> SprayJets:
    k = _coefs(f, "berwald_n3", r)
    S, _ = _s_jets(r, s0, order)
    P = k["f1"] * S
    Q = k["f2"] * S * S + k["f3"]
    return SprayJets(P, Q, r, s0)


# ------------------------------------------------------------------- bases
Basis = Callable[[float, np.ndarray], np.ndarray]


def _w(r, s):
    return np.sqrt(r * r - s * s)


@dataclass(frozen=True)
class FamilySpec:
    """Linear structure of a family: P and Q columns keyed by coefficient name.

    ``joint`` fits P and Q in one stacked system; otherwise they are fitted
    separately and coefficients appearing in both are cross-checked.
    """

    name: str
    coefficients: tuple[str, ...]
    p_basis: dict[str, tuple[str, Basis]]
    q_basis: dict[str, tuple[str, Basis]]
    generator: Callable
    joint: bool = False


FAMILIES: dict[str, FamilySpec] = {
    "landsberg_n3": FamilySpec(
        "landsberg_n3",
        ("c0", "c1", "c2", "c3"),
        p_basis={
            "c1": ("s", lambda r, s: s),
            "c2": ("sqrt(r^2-s^2)/r^2", lambda r, s: _w(r, s) / r**2),
        },
        q_basis={
            "c0": ("s^2/2", lambda r, s: s * s / 2),
            "c2": ("-s*sqrt(r^2-s^2)/r^4", lambda r, s: -s * _w(r, s) / r**4),
            "c3": ("1", lambda r, s: np.ones_like(s)),
        },
        generator=landsberg_pq_n3,
    ),
    "berwald_surface": FamilySpec(
        "berwald_surface",
        ("a", "b0", "b1", "b2", "b3"),
        p_basis={
            "b1": ("s", lambda r, s: s),
            "b2": ("1/sqrt(r^2-s^2)", lambda r, s: 1 / _w(r, s)),
            "b3": ("(r^2-2*s^2)/sqrt(r^2-s^2)", lambda r, s: (r * r - 2 * s * s) / _w(r, s)),
        },
        q_basis={
            "b0": ("s^2", lambda r, s: s * s),
            "b1": ("1/2", lambda r, s: np.full_like(s, 0.5)),
            "b2": ("s*(r^2-2*s^2)/(r^4*sqrt(r^2-s^2))", lambda r, s: s * (r * r - 2 * s * s) / (r**4 * _w(r, s))),
            "b3": (
                "s*(3*r^2-2*s^2)/(r^2*sqrt(r^2-s^2))",
                lambda r, s: s * (3 * r * r - 2 * s * s) / (r**2 * _w(r, s)),
            ),
            "a": ("-s*sqrt(r^2-s^2)/r^2", lambda r, s: -s * _w(r, s) / r**2),
        },
        generator=berwald_pq_surface,
        joint=True,
    ),
    "berwald_n3": FamilySpec(
        "berwald_n3",
        ("f1", "f2", "f3"),
        p_basis={"f1": ("s", lambda r, s: s)},
        q_basis={
            "f2": ("s^2", lambda r, s: s * s),
            "f3": ("1", lambda r, s: np.ones_like(s)),
        },
        generator=berwald_pq_n3,
    ),
}


def family_pq(family: str, coefs, r: float, s0: float, order: int = SPRAY_ORDER) -> SprayJets:
    return FAMILIES[family].generator(coefs, r, s0, order)


# ------------------------------------------------------------------ fitting
def chebyshev_nodes(r: float, count: int, fraction: float = 0.9) -> np.ndarray:
    """Chebyshev points on [-fraction*r, fraction*r]; an even count avoids s = 0."""
    k = np.arange(count)
    return fraction * r * np.cos((2 * k + 1) * np.pi / (2 * count))[::-1]


def sample_pq(model: PhiModel, r: float, count: int = 16, fraction: float = 0.9) -> np.ndarray:
    """Rows (s, P, Q) of the model's spray at Chebyshev nodes; singular nodes are skipped."""
    rows = []
    for s in chebyshev_nodes(r, count, fraction):
        try:
            pq = spray_pq(model.jet(r, float(s), JetShape(1, 2), check=False))
        except FinslerError:
            continue
        rows.append((float(s), pq.dP(0), pq.dQ(0)))
    return np.array(rows, dtype=float).reshape(-1, 3)


def _design(r: float, s: np.ndarray, basis: dict[str, tuple[str, Basis]]) -> tuple[list[str], np.ndarray]:
    names = list(basis)
    return names, np.column_stack([np.asarray(basis[k][1](r, s), dtype=float) for k in names])


def _check_rank(A: np.ndarray, labels: list[str], family: str) -> None:
    """Raise FitError naming the first column lying in the span of the earlier ones."""
    rank = np.linalg.matrix_rank(A)
    if rank == A.shape[1]:
        return
    for j in range(1, A.shape[1] + 1):
        if np.linalg.matrix_rank(A[:, :j]) < j:
            raise FitError(f"{family}: design matrix is rank deficient; basis {labels[j - 1]!r} is degenerate")
    raise FitError(f"{family}: design matrix is rank deficient")  # pragma: no cover


@dataclass
class FitResult:
    """Coefficient estimates at each sampled r, the worst residual and the verdict."""

    family: str
    r_values: list[float]
    coefficients: dict[str, list[float]]
    residual: float
    tol: float
    cross_check: dict[str, float] = field(default_factory=dict)

    @property
    def member(self) -> bool:
        return bool(self.residual <= self.tol)

    @property
    def verdict(self) -> str:
        return "member" if self.member else "non-member"

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "r": list(self.r_values),
            "coefficients": {k: list(v) for k, v in self.coefficients.items()},
            "residual": self.residual,
            "tol": self.tol,
            "verdict": self.verdict,
            "cross_check": dict(self.cross_check),
        }


def fit_family(r: float, samples, family: str, tol: float = FIT_TOL) -> FitResult:
    """Least-squares fit of sampled (s, P, Q) rows at fixed r against a family.

    The residual is the largest absolute deviation of the fitted P or Q, or the
    disagreement of a coefficient estimated from both P and Q, whichever is larger.
    """
    spec = FAMILIES[family]
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 3:
        raise ValueError("samples must be rows of (s, P, Q)")
    s, P, Q = samples.T
    nbasis = len(spec.coefficients)
    if s.size < 2 * nbasis:
        raise FitError(f"{family}: need at least {2 * nbasis} samples, got {s.size}")
    if np.any(np.abs(s) > 0.9 * r * (1 + 1e-12)):
        raise FitError(f"{family}: samples must satisfy |s| <= 0.9 r")
    pn, Ap = _design(r, s, spec.p_basis)
    qn, Aq = _design(r, s, spec.q_basis)
    plabels = [f"P:{spec.p_basis[k][0]}" for k in pn]
    qlabels = [f"Q:{spec.q_basis[k][0]}" for k in qn]
    est: dict[str, float] = {}
    cross: dict[str, float] = {}
    if spec.joint:
        names = list(spec.coefficients)
        A = np.zeros((2 * s.size, len(names)))
        for j, k in enumerate(names):
            if k in spec.p_basis:
                A[: s.size, j] = Ap[:, pn.index(k)]
            if k in spec.q_basis:
                A[s.size :, j] = Aq[:, qn.index(k)]
        _check_rank(A, names, family)
        x, *_ = np.linalg.lstsq(A, np.concatenate([P, Q]), rcond=None)
        est = dict(zip(names, x.tolist()))
        residual = float(np.max(np.abs(A @ x - np.concatenate([P, Q]))))
    else:
        _check_rank(Ap, plabels, family)
        _check_rank(Aq, qlabels, family)
        xp, *_ = np.linalg.lstsq(Ap, P, rcond=None)
        xq, *_ = np.linalg.lstsq(Aq, Q, rcond=None)
        residual = float(max(np.max(np.abs(Ap @ xp - P)), np.max(np.abs(Aq @ xq - Q))))
        from_p = dict(zip(pn, xp.tolist()))
        from_q = dict(zip(qn, xq.tolist()))
        for k in spec.coefficients:
            if k in from_p and k in from_q:
                cross[k] = abs(from_p[k] - from_q[k])
                residual = max(residual, cross[k])
                est[k] = from_p[k]
            else:
                est[k] = from_p.get(k, from_q.get(k))
    coefs = {k: [est[k]] for k in spec.coefficients}
    return FitResult(family, [float(r)], coefs, residual, tol, cross)


def fit_model(model: PhiModel, family: str, r_values, count: int = 16, tol: float = FIT_TOL) -> FitResult:
    """Fit the model's spray at each r and merge the results into coefficient tables."""
    spec = FAMILIES[family]
    coefs: dict[str, list[float]] = {k: [] for k in spec.coefficients}
    cross: dict[str, float] = {}
    residual = 0.0
    rs = [float(r) for r in r_values]
    for r in rs:
        res = fit_family(r, sample_pq(model, r, count), family, tol)
        for k in spec.coefficients:
            coefs[k].extend(res.coefficients[k])
        for k, v in res.cross_check.items():
            cross[k] = max(cross.get(k, 0.0), v)
        residual = max(residual, res.residual)
    return FitResult(family, rs, coefs, residual, tol, cross)


def riemannian_residual(model: PhiModel, r: float, s_grid) -> float:
    """Worst deviation of phi^2 from its least-squares fit in {1, s^2} at fixed r."""
    s = np.asarray(s_grid, dtype=float)
    if np.unique(s).size < 4:
        raise ValueError("riemannian_residual needs at least 4 distinct s values")
    y = np.array([model.value(r, float(v)) ** 2 for v in s])
    A = np.column_stack([np.ones_like(s), s * s])
    x, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(np.max(np.abs(A @ x - y)))


def trace_E_landsberg(c2: float, n: int, r: float, s: float, u: float = 1.0) -> float:
    """delta-trace of the mean Berwald curvature of the Landsberg family: n (n-2) c2 / (u sqrt(r^2 - s^2))."""
    return n * (n - 2) * c2 / (u * math.sqrt(r * r - s * s))


# ----------------------------------------------------------- classification
@dataclass(frozen=True)
class GridSpec:
    """Grid of (r, s = fraction * r) points; ``seed`` drives random configurations."""

    r_range: tuple[float, float, int] = (0.5, 2.5, 5)
    s_fraction_range: tuple[float, float, int] = (-0.8, 0.8, 6)
    n: int = 3
    seed: int = 0

    def validate(self, r_max: float = math.inf, s_safety: float = 1.0) -> None:
        lo, hi, cnt = self.r_range
        flo, fhi, fcnt = self.s_fraction_range
        if cnt < 1 or fcnt < 1:
            raise DomainError("grid counts must be >= 1")
        if not (0 < lo <= hi < r_max) or (cnt > 1 and lo == hi):
            raise DomainError(f"r range ({lo}, {hi}) must satisfy 0 < lo < hi < r_max={r_max}")
        if max(abs(flo), abs(fhi)) > s_safety:
            raise DomainError(f"s fractions must satisfy |fraction| <= s_safety={s_safety}")
        if self.n < 2:
            raise DomainError("dimension n must be >= 2")

    def r_values(self) -> list[float]:
        lo, hi, cnt = self.r_range
        return [float(v) for v in np.linspace(lo, hi, int(cnt))]

    def fractions(self) -> list[float]:
        lo, hi, cnt = self.s_fraction_range
        return [float(v) for v in np.linspace(lo, hi, int(cnt))]

    def points(self) -> list[tuple[float, float]]:
        return [(r, f * r) for r in self.r_values() for f in self.fractions()]

    @classmethod
    def parse(cls, text: str, n: int = 3, seed: int = 0) -> GridSpec:
        """Parse ``"rlo:rhi:count,flo:fhi:count"``."""
        try:
            rpart, fpart = text.split(",")
            rl, rh, rc = rpart.split(":")
            fl, fh, fc = fpart.split(":")
            return cls((float(rl), float(rh), int(rc)), (float(fl), float(fh), int(fc)), n, seed)
        except ValueError as exc:
            raise ValueError(f"grid spec {text!r} must look like 'rlo:rhi:count,flo:fhi:count'") from exc

    def to_dict(self) -> dict:
        return {"r_range": list(self.r_range), "s_fraction_range": list(self.s_fraction_range), "n": self.n, "seed": self.seed}


def _flag(residual: float | None, tol: float) -> str:
    if residual is None or not np.isfinite(residual):
        return "fails"
    if residual <= tol:
        return "holds"
    if residual <= 10 * tol:
        return "boundary"
    return "fails"


@dataclass
class Classification:
    flags: dict[str, str]
    residuals: dict[str, float | None]
    tol: float
    n: int
    family: FitResult | None = None
    info: dict[str, float | None] = field(default_factory=dict)
    errors: list[dict] = field(default_factory=list)
    consistent: bool = True

    def to_dict(self) -> dict:
        return {
            "flags": dict(self.flags),
            "residuals": dict(self.residuals),
            "tol": self.tol,
            "n": self.n,
            "family": None if self.family is None else self.family.to_dict(),
            "info": dict(self.info),
            "errors": list(self.errors),
            "berwald_implies_landsberg": self.consistent,
        }


def _max(values: list[float]) -> float | None:
    return max(values) if values else None


def classify(model: PhiModel, n: int, grid: GridSpec, tol: float = FIT_TOL) -> Classification:
    """Riemannian / Berwald / Landsberg verdicts of a model on a grid.

    Berwald: max-norm of the Berwald curvature at u = 1.  Landsberg: the
    surface residual for n = 2; for n >= 3 the model is Landsberg exactly when
    it is Riemannian or its spray fits the ``landsberg_n3`` family, and the
    delta-trace of E is reported alongside.  Per-point evaluation errors are
    collected, not raised.
    """
    grid.validate(model.r_max, model.s_safety)
    berw, lands, trace = [], [], []
    errors: list[dict] = []
    for idx, (r, s) in enumerate(grid.points()):
        try:
            cfg = Config.from_rs(r, s, n)
            pq = spray_pq(model.jet(r, s))
            B = berwald_curvature(pq, cfg)
            berw.append(float(np.max(np.abs(B))))
            trace.append(float(np.abs(np.trace(mean_berwald_direct(pq, cfg)))))
            if n == 2:
                lands.append(abs(landsberg_surface_residual(model.jet(r, s), pq)))
        except FinslerError as exc:
            errors.append({"index": idx, "r": r, "s": s, "error": f"{type(exc).__name__}: {exc}"})

    rres = []
    s_fracs = [f for f in np.linspace(-0.9, 0.9, 8)]
    for r in grid.r_values():
        try:
            rres.append(riemannian_residual(model, r, [f * r for f in s_fracs]))
        except FinslerError as exc:
            errors.append({"index": None, "r": r, "s": None, "error": f"{type(exc).__name__}: {exc}"})

    residuals: dict[str, float | None] = {"riemannian": _max(rres), "berwald": _max(berw)}
    info: dict[str, float | None] = {"trace_E": _max(trace)}

    fitted: FitResult | None = None
    candidates = ["berwald_surface"] if n == 2 else ["berwald_n3", "landsberg_n3"]
    fits: dict[str, FitResult] = {}
    for fam in candidates:
        try:
            fits[fam] = fit_model(model, fam, grid.r_values(), tol=tol)
        except FinslerError as exc:
            errors.append({"index": None, "r": None, "s": None, "error": f"{fam} fit: {type(exc).__name__}: {exc}"})
            continue
        info[f"fit_{fam}"] = fits[fam].residual
        if fitted is None and fits[fam].member:
            fitted = fits[fam]

    if n == 2:
        residuals["landsberg"] = _max(lands)
    else:
        options = [v for v in (residuals["riemannian"],) if v is not None]
        if "landsberg_n3" in fits:
            options.append(fits["landsberg_n3"].residual)
        residuals["landsberg"] = min(options) if options else None

    flags = {k: _flag(v, tol) for k, v in residuals.items()}
    consistent = True
    if flags["berwald"] == "holds":
        lr = residuals["landsberg"]
        consistent = lr is not None and lr <= 10 * tol
    return Classification(flags, residuals, tol, n, fitted, info, errors, consistent)


# ------------------------------------------------- the surface counterexample
LC2_COEFFICIENTS = {"a": "0", "b0": "0", "b1": "-1/r^2", "b2": "r^2", "b3": "0"}


def _phi_s_ratio(k: Mapping[str, float], r: float, s: float, epsilon: float) -> float:
    w = math.sqrt(r * r - s * s)
    num = 2 * k["b1"] * s * w - k["a"] * s * s + 2 * k["b3"] * r * r - 4 * k["b3"] * s * s + 2 * k["b2"]
    den = 1 - k["b1"] * r * r + 2 * k["b1"] * s * s + s * w * (k["a"] + 4 * k["b3"])
    if abs(den) <= epsilon:
        raise DomainError(f"the phi_s/phi ratio is singular at (r, s)=({r}, {s})")
    return num / (w * den)


def lc2_contradiction(r: float, s: float, b=None, epsilon: float = DIV_EPSILON) -> tuple[float, float]:
    """Left side of the divided surface Landsberg condition and the quoted closed form.

    The left side uses the surface-family spray with coefficients ``b``
    (default a = 0, b1 = -1/r^2, b2 = r^2, b3 = 0) and the phi_s/phi ratio
    that family prescribes.  Both values are returned; agreement is for the
    caller to judge.
    """
    if not 0 < abs(s) < r:
        raise DomainError(f"need 0 < |s| < r, got r={r!r}, s={s!r}")
    coefs = CoefFns("berwald_surface", LC2_COEFFICIENTS if b is None else b)
    k = coefs.at(r)
    pq = berwald_pq_surface(coefs, r, s, order=3)
    ratio = _phi_s_ratio(k, r, s, epsilon)
    (P, Ps, Pss, Psss), (Q, Qs, Qss, Qsss) = pq.derivs(3)
    w2 = r * r - s * s
    den = w2 * Qsss + 3 * (Qs - s * Qss)
    if abs(den) <= epsilon:
        raise DomainError(f"(r^2-s^2) Q_sss + 3(Q_s - s Q_ss) vanishes at ({r}, {s})")
    bracket = (w2 * Psss - 3 * s * Pss) + (3 * w2 * Pss + 3 * (P - s * Ps)) * ratio
    lhs = (2 * Q - s * Qs) * bracket / den + (1 + s * P) * ratio + (s * Ps - 2 * P)
    w = math.sqrt(w2)
    closed = (s * (w2**2 * (1 + r * r) + r**8) - r**6 * w * (w2 + 1)) / (r * r * w2**2)
    return float(lhs), float(closed)


def c1_denominator(b, r: float, s: float) -> float:
    """1 - b1 r^2 + 2 b1 s^2 + s sqrt(r^2 - s^2) (a + 4 b3)."""
    if abs(s) > r:
        raise DomainError(f"need |s| <= r, got r={r!r}, s={s!r}")
    k = _coefs(b, "berwald_surface", r)
    return 1 - k["b1"] * r * r + 2 * k["b1"] * s * s + s * math.sqrt(r * r - s * s) * (k["a"] + 4 * k["b3"])
