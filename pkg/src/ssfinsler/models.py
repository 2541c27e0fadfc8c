"""Sources of phi-jets: parsed expressions and the built-in metric families.

Every model describes a spherically symmetric metric ``F = u * phi(r, s)`` on
a ball of radius ``r_max`` and offers two independent evaluation paths:

* :meth:`PhiModel.jet` -- the Taylor jet of phi, used by the geometry code;
* :meth:`PhiModel.value` -- a plain float evaluation, used by the
  finite-difference oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import ClassVar, NamedTuple

import mpmath
from scipy import integrate

from . import jets
from .errors import DomainError, FinslerError
from .expr import Node, evaluate, is_literal_zero, parse_expr, parse_phi, pretty
from .jets import DEFAULT_SHAPE, Jet2, JetShape

__all__ = [
    "PhiModel",
    "Euclidean",
    "Riemannian",
    "Homogeneous",
    "PsiFamily",
    "Expression",
    "RegularityReport",
    "CATALOG",
    "catalog_list",
    "make_model",
    "default_catalog",
    "eval_phi_jet",
    "regularity_check",
]

R_MAX = 3.0
S_SAFETY = 0.95


def _as_expr(src, variables) -> Node:
    if isinstance(src, Node):
        return src
    if isinstance(src, (int, float)):
        return parse_expr(repr(float(src)), variables)
    return parse_expr(str(src), variables)


@dataclass(frozen=True)
class PhiModel:
    """Base class; subclasses implement ``_jet`` and ``_value``."""

    r_max: float = field(default=R_MAX, kw_only=True)
    s_safety: float = field(default=S_SAFETY, kw_only=True)

    kind: ClassVar[str] = ""

    def __post_init__(self):
        if not self.r_max > 0:
            raise ValueError("r_max must be positive")
        if not 0 < self.s_safety < 1:
            raise ValueError("s_safety must lie in (0, 1)")

    def check_admissible(self, r: float, s: float) -> None:
        if not 0 < r < self.r_max:
            raise DomainError(f"r={r!r} outside (0, {self.r_max})")
        if abs(s) > self.s_safety * r * (1 + 1e-12):
            raise DomainError(f"|s|={abs(s)!r} exceeds s_safety*r={self.s_safety * r!r}")

    def jet(self, r: float, s: float, shape: JetShape = DEFAULT_SHAPE, check: bool = True) -> Jet2:
        if check:
            self.check_admissible(r, s)
        return self._jet(r, s, shape)

    def value(self, r, s):
        """Value of phi; only requires 0 < r < r_max and |s| < r.

        Plain floats in, float out.  ``mpmath.mpf`` arguments are evaluated in
        the current mpmath precision (used by the finite-difference oracle).
        """
        if not 0 < r < self.r_max or not abs(s) < r:
            raise DomainError(f"({r!r}, {s!r}) outside the model domain")
        out = self._value(r, s)
        if isinstance(r, mpmath.mpf) or isinstance(s, mpmath.mpf):
            return mpmath.mpf(out)
        return float(out)

    def params(self) -> dict:
        return {}

    def describe(self) -> dict:
        return {"kind": self.kind, "params": self.params(), "r_max": self.r_max, "s_safety": self.s_safety}

    def _jet(self, r, s, shape):  # pragma: no cover - abstract
        raise NotImplementedError

    def _value(self, r, s):  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True)
class Euclidean(PhiModel):
    kind: ClassVar[str] = "euclidean"

    def _jet(self, r, s, shape):
        return jets.jet_const(1.0, (r, s), shape)

    def _value(self, r, s):
        return 1.0


@dataclass(frozen=True)
class Expression(PhiModel):
    expr: Node = "sqrt(1+s^2)*(1+r^2)+s/4"
    kind: ClassVar[str] = "expression"

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "expr", _as_expr(self.expr, ("r", "s")))

    def _jet(self, r, s, shape):
        env = {"r": jets.jet_var_r(r, s, shape), "s": jets.jet_var_s(r, s, shape)}
        out = evaluate(self.expr, env)
        return out if isinstance(out, Jet2) else jets.jet_const(out, (r, s), shape)

    def _value(self, r, s):
        return evaluate(self.expr, {"r": r, "s": s})

    def params(self):
        return {"phi": pretty(self.expr)}


@dataclass(frozen=True)
class Riemannian(PhiModel):
    """phi = a(r) * sqrt((c1 + 2 c3) s^2 - 2 c3 r^2 + 1)."""

    a_fn: Node = "1/(1+r^2)"
    c1: float = 1.0
    c3: float = -0.1
    kind: ClassVar[str] = "riemannian"

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "a_fn", _as_expr(self.a_fn, ("r",)))

    def _jet(self, r, s, shape):
        R = jets.jet_var_r(r, s, shape)
        S = jets.jet_var_s(r, s, shape)
        a = evaluate(self.a_fn, {"r": R})
        root = jets.jet_sqrt((self.c1 + 2 * self.c3) * S * S - 2 * self.c3 * R * R + 1.0)
        return root * a

    def _value(self, r, s):
        inner = (self.c1 + 2 * self.c3) * s * s - 2 * self.c3 * r * r + 1.0
        if inner <= 0:
            raise DomainError("riemannian radicand is nonpositive")
        root = mpmath.sqrt(inner) if isinstance(inner, mpmath.mpf) else math.sqrt(inner)
        return evaluate(self.a_fn, {"r": r}) * root

    def params(self):
        return {"a": pretty(self.a_fn), "c1": self.c1, "c3": self.c3}


@dataclass(frozen=True)
class Homogeneous(PhiModel):
    """phi = h(s/r) / r, homogeneous of degree -1 in (r, s)."""

    h: Node = "sqrt(1+v^2)"
    kind: ClassVar[str] = "homogeneous"

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "h", _as_expr(self.h, ("v",)))

    def _jet(self, r, s, shape):
        R = jets.jet_var_r(r, s, shape)
        S = jets.jet_var_s(r, s, shape)
        hv = evaluate(self.h, {"v": S / R})
        if not isinstance(hv, Jet2):
            hv = jets.jet_const(hv, (r, s), shape)
        return hv / R

    def _value(self, r, s):
        return evaluate(self.h, {"v": s / r}) / r

    def params(self):
        return {"h": pretty(self.h)}


@dataclass(frozen=True)
class PsiFamily(PhiModel):
    """phi = s psi(s^2 / (g + s^2 I)) exp(-B), the non-Riemannian Berwald family.

    With ``A(r) = 2 log r - int_{ra}^r 4 t^3 c0 dt`` and
    ``B(r) = 2 log r - int_{ra}^r 2 t^3 c0 dt`` the factors are ``g = exp(A)``
    and ``I(r) = int_{ra}^r 4 t c0(t) g(t) dt``, anchored at ``ra = r_max/2``.
    Integration constants are immaterial: they rescale or shift the first
    integral ``s^2/(g + s^2 I)``.  For ``c0 = 0`` this is g = r^2, exp(-B) = r^-2, I = 0.
    """

    psi: Node = "1+v"
    c0: Node = "0"
    kind: ClassVar[str] = "psi_family"
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "psi", _as_expr(self.psi, ("v",)))
        object.__setattr__(self, "c0", _as_expr(self.c0, ("r",)))

    @property
    def anchor(self) -> float:
        return self.r_max / 2

    def _c0(self, t: float) -> float:
        return float(evaluate(self.c0, {"r": t}))

    def _quad(self, f, r: float) -> float:
        val, _ = integrate.quad(f, self.anchor, r, epsabs=1e-14, epsrel=1e-13, limit=200)
        return val

    def integrals(self, r: float) -> tuple[float, float, float]:
        """Return (int 4t^3 c0, int 2t^3 c0, I(r)) from the anchor to r."""
        if is_literal_zero(self.c0):
            return 0.0, 0.0, 0.0
        key = float(r)
        hit = self._cache.get(key)
        if hit is None:
            a4 = self._quad(lambda t: 4 * t**3 * self._c0(t), r)
            a2 = a4 / 2
            hit = (a4, a2, self._quad(lambda t: 4 * t * self._c0(t) * self._g(t), r))
            self._cache[key] = hit
        return hit

    def _g(self, t: float) -> float:
        a4 = self._quad(lambda q: 4 * q**3 * self._c0(q), t)
        return t * t * math.exp(-a4)

    def _jet(self, r, s, shape):
        R = jets.jet_var_r(r, s, shape)
        S = jets.jet_var_s(r, s, shape)
        a4, a2, ival = self.integrals(r)
        logR = jets.jet_log(R)
        c0 = evaluate(self.c0, {"r": R})
        if not isinstance(c0, Jet2):
            c0 = jets.jet_const(c0, (r, s), shape)
        A = 2 * logR - (4 * R * R * R * c0).antiderivative_r(a4)
        B = 2 * logR - (2 * R * R * R * c0).antiderivative_r(a2)
        g = jets.jet_exp(A)
        I = (4 * R * c0 * g).antiderivative_r(ival)
        W = g + S * S * I
        psi = evaluate(self.psi, {"v": S * S / W})
        if not isinstance(psi, Jet2):
            psi = jets.jet_const(psi, (r, s), shape)
        return S * psi * jets.jet_exp(-B)

    def _value(self, r, s):
        # quadrature runs in double precision even for mpmath arguments
        a4, a2, ival = self.integrals(float(r))
        g = r * r * math.exp(-a4)
        W = g + s * s * ival
        if W == 0:
            raise DomainError("psi-family denominator g + s^2 I vanishes")
        return s * evaluate(self.psi, {"v": s * s / W}) * math.exp(a2) / (r * r)

    def params(self):
        return {"psi": pretty(self.psi), "c0": pretty(self.c0)}


class CatalogEntry(NamedTuple):
    name: str
    params: dict
    description: str


CATALOG: dict[str, CatalogEntry] = {
    "euclidean": CatalogEntry("euclidean", {}, "phi = 1"),
    "riemannian": CatalogEntry(
        "riemannian",
        {"a": "expression in r", "c1": "real", "c3": "real"},
        "phi = a(r) sqrt((c1 + 2 c3) s^2 - 2 c3 r^2 + 1)",
    ),
    "homogeneous": CatalogEntry(
        "homogeneous", {"h": "expression in v"}, "phi = h(s/r)/r, homogeneous of degree -1"
    ),
    "psi_family": CatalogEntry(
        "psi_family",
        {"psi": "expression in v", "c0": "expression in r"},
        "phi = s psi(s^2/(g + s^2 int 4 r c0 g dr)) exp(-int (2/r - 2 r^3 c0) dr)",
    ),
    "expression": CatalogEntry("expression", {"phi": "expression in r, s"}, "phi given explicitly"),
}

_KINDS = {
    "euclidean": Euclidean,
    "riemannian": Riemannian,
    "homogeneous": Homogeneous,
    "psi_family": PsiFamily,
    "expression": Expression,
}

DEFAULT_EXPRESSION = "sqrt(1+s^2)*(1+r^2)+s/4"


def catalog_list() -> list[tuple[str, dict]]:
    return [(e.name, dict(e.params)) for e in CATALOG.values()]


def make_model(kind: str, *, r_max: float = R_MAX, s_safety: float = S_SAFETY, **params) -> PhiModel:
    """Build a catalog model from its name and (string or numeric) parameters."""
    if kind not in _KINDS:
        raise FinslerError(f"unknown metric kind {kind!r}; choose from {sorted(_KINDS)}")
    params = {k: v for k, v in params.items() if v is not None}
    if kind == "riemannian":
        if "a" in params:
            params["a_fn"] = params.pop("a")
        for key in ("c1", "c3"):
            if key in params:
                params[key] = float(params[key])
    if kind == "expression":
        params = {"expr": params.get("phi", DEFAULT_EXPRESSION)}
    allowed = {
        "euclidean": set(),
        "riemannian": {"a_fn", "c1", "c3"},
        "homogeneous": {"h"},
        "psi_family": {"psi", "c0"},
        "expression": {"expr"},
    }[kind]
    extra = set(params) - allowed
    if extra:
        raise FinslerError(f"metric {kind!r} does not take parameters {sorted(extra)}")
    return _KINDS[kind](r_max=r_max, s_safety=s_safety, **params)


def default_catalog() -> list[PhiModel]:
    """One representative model per catalog entry, with default parameters."""
    return [make_model(name) for name in CATALOG]


def eval_phi_jet(model: PhiModel, r: float, s: float, shape: JetShape = DEFAULT_SHAPE) -> Jet2:
    return model.jet(r, s, shape)


class RegularityReport(NamedTuple):
    phi: float
    a1: float
    a2: float
    regular_nD: bool
    regular_2D: bool


def regularity_check(model: PhiModel, r: float, s: float) -> RegularityReport:
    j = model.jet(r, s, JetShape(1, 2))
    phi, phi_s, phi_ss = j.extract(0, 0), j.extract(0, 1), j.extract(0, 2)
    a1 = phi - s * phi_s
    a2 = a1 + (r * r - s * s) * phi_ss
    return RegularityReport(phi, a1, a2, phi > 0 and a1 > 0 and a2 > 0, a2 > 0)


def parse_model_expr(src: str) -> Expression:
    return Expression(parse_phi(src))
