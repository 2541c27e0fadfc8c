"""Finite-difference oracle, independent of the jet machinery.

phi is sampled through :meth:`PhiModel.value` (plain float evaluation) and
differentiated with central differences plus Richardson extrapolation.  The
Berwald curvature is obtained literally as third y-derivatives of
G^i = u P y^i + u^2 Q x^i.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, NamedTuple

import mpmath
import numpy as np

from .errors import DomainError
from .geometry import Config, spray_pq
from .jets import JetShape
from .models import PhiModel

__all__ = [
    "FDScheme",
    "ComparisonReport",
    "central_weights",
    "fd_derivative",
    "fd_phi_derivs",
    "fd_spray_pq",
    "fd_berwald",
    "compare",
    "model_pq_values",
]

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class FDScheme:
    """Central-difference scheme.

    ``h`` fixes the base step (scaled by the coordinate magnitude); when left
    as ``None`` the step for an order-k derivative is eps**(1/(k + 2L)) with
    L the number of Richardson levels, i.e. the balance point between
    rounding error and the O(h**(2L)) extrapolated truncation error.

    ``digits > 0`` samples phi in mpmath arithmetic at that many decimal
    digits, with eps = 10**-digits.  Double precision cannot resolve fourth
    and fifth derivatives much below 1e-5; extended precision can.
    """

    h: float | None = None
    richardson_levels: int = 2
    digits: int = 0

    def __post_init__(self):
        if self.h is not None and not self.h > 0:
            raise ValueError("step h must be positive")
        if self.richardson_levels < 1:
            raise ValueError("richardson_levels must be >= 1")
        if self.digits < 0:
            raise ValueError("digits must be >= 0")

    @property
    def eps(self) -> float:
        return 10.0 ** (-self.digits) if self.digits else float(EPS)

    def step(self, order: int, scale: float = 1.0) -> float:
        scale = max(1.0, abs(scale))
        if self.h is not None:
            return self.h * np.sqrt(max(order, 1)) * scale
        return self.eps ** (1.0 / (order + 2 * self.richardson_levels)) * scale


def _solve_exact(A: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    n = len(b)
    M = [row[:] + [rhs] for row, rhs in zip(A, b)]
    for c in range(n):
        piv = next(i for i in range(c, n) if M[i][c] != 0)
        M[c], M[piv] = M[piv], M[c]
        for i in range(n):
            if i != c and M[i][c] != 0:
                f = M[i][c] / M[c][c]
                M[i] = [a - f * b_ for a, b_ in zip(M[i], M[c])]
    return [M[i][n] / M[i][i] for i in range(n)]


@lru_cache(maxsize=None)
def central_weights(order: int) -> tuple[tuple[int, Fraction], ...]:
    """(offset, weight) pairs of the minimal central stencil for d^order/dx^order.

    Weights are exact rationals so that extended-precision sampling is not
    spoiled by rounded coefficients.
    """
    if order == 0:
        return ((0, Fraction(1)),)
    p = (order + 1) // 2
    offsets = range(-p, p + 1)
    A = [[Fraction(o) ** row for o in offsets] for row in range(2 * p + 1)]
    rhs = [Fraction(math.factorial(order)) if row == order else Fraction(0) for row in range(2 * p + 1)]
    w = _solve_exact(A, rhs)
    return tuple((o, c) for o, c in zip(offsets, w) if c != 0)


def _scaled(weight: Fraction, value):
    if isinstance(value, mpmath.mpf):
        return value * weight.numerator / weight.denominator
    return float(weight) * value


def _richardson(estimates: list[float | np.ndarray]) -> float | np.ndarray:
    """Extrapolate estimates at h, h/2, h/4, ... with even-power error terms."""
    table = list(estimates)
    for level in range(1, len(table)):
        factor = 4.0**level
        table = [(factor * table[i + 1] - table[i]) / (factor - 1) for i in range(len(table) - 1)]
    return table[0]


def fd_derivative(f: Callable, point, orders, h: float, levels: int = 2):
    """Mixed partial derivative of ``f`` at ``point``; ``orders[d]`` is the order in coordinate d.

    ``point`` may hold floats or mpmath numbers; ``f`` receives a tuple of
    coordinates of the same kind.
    """
    point = tuple(point)
    stencils = [central_weights(o) for o in orders]
    total = sum(orders)
    estimates = []
    for lev in range(levels):
        hl = h / 2**lev
        acc = 0.0
        for combo in itertools.product(*stencils):
            weight = Fraction(1)
            node = list(point)
            for d, (o, w) in enumerate(combo):
                weight *= w
                if o:
                    node[d] = point[d] + o * hl
            acc = acc + _scaled(weight, f(tuple(node)))
        estimates.append(acc / hl**total)
    return _richardson(estimates)


def _stencil_reach(orders) -> int:
    return max(((o + 1) // 2 for o in orders), default=0)


def fd_phi_derivs(model: PhiModel, r: float, s: float, i: int, k: int, scheme: FDScheme = FDScheme()) -> float:
    """Central-difference estimate of d_r^i d_s^k phi(r, s)."""
    if i > 1 or k > 5 or i < 0 or k < 0:
        raise ValueError("fd_phi_derivs supports i <= 1 and k <= 5")
    if i == 0 and k == 0:
        return model.value(r, s)
    h = scheme.step(i + k, max(abs(r), abs(s)))
    reach = _stencil_reach((i, k)) * h
    if not (r - reach > 0 and r + reach < model.r_max and abs(s) + reach < r - reach):
        raise DomainError(f"finite-difference stencil of width {reach:g} leaves the domain at ({r}, {s})")
    f = lambda p: model.value(p[0], p[1])  # noqa: E731
    if not scheme.digits:
        return float(fd_derivative(f, (r, s), (i, k), h, scheme.richardson_levels))
    with mpmath.workdps(scheme.digits + 10):
        point = (mpmath.mpf(r), mpmath.mpf(s))
        return float(fd_derivative(f, point, (i, k), mpmath.mpf(h), scheme.richardson_levels))


def fd_spray_pq(model: PhiModel, r: float, s: float, scheme: FDScheme = FDScheme()) -> tuple[float, float]:
    """P and Q from finite-difference derivatives of phi."""
    f = model.value(r, s)
    fr = fd_phi_derivs(model, r, s, 1, 0, scheme)
    fs = fd_phi_derivs(model, r, s, 0, 1, scheme)
    fss = fd_phi_derivs(model, r, s, 0, 2, scheme)
    frs = fd_phi_derivs(model, r, s, 1, 1, scheme)
    Q = (-fr + s * frs + r * fss) / (2 * r * (f - s * fs + (r * r - s * s) * fss))
    P = -Q / f * (s * f + (r * r - s * s) * fs) + (s * fr + r * fs) / (2 * r * f)
    return P, Q


def model_pq_values(model: PhiModel) -> Callable[[float, float], tuple[float, float]]:
    """(r, s) -> (P, Q) values of a model, from shallow jets."""

    def pq(r: float, s: float) -> tuple[float, float]:
        sp = spray_pq(model.jet(r, s, JetShape(1, 2), check=False))
        return sp.dP(0), sp.dQ(0)

    return pq


# Third differences of G are rounding-limited; a coarse base step keeps the
# noise of an identically vanishing tensor below the 1e-8 comparison floor.
BERWALD_SCHEME = FDScheme(h=0.03, richardson_levels=3)
_MAX_HALVINGS = 4


def fd_berwald(source, cfg: Config, scheme: FDScheme = BERWALD_SCHEME) -> np.ndarray:
    """Third y-derivatives of the spray coefficients by nested central differences.

    ``source`` is a :class:`PhiModel` or a callable ``(r, s) -> (P, Q)``.  If a
    stencil node leaves the admissible region the step is halved (at most
    four times) before giving up with :class:`DomainError`.
    """
    h = scheme.step(3, cfg.u)
    for attempt in range(_MAX_HALVINGS + 1):
        try:
            return _fd_berwald(source, cfg, h, scheme.richardson_levels)
        except DomainError:
            if attempt == _MAX_HALVINGS:
                raise
            h /= 2


def _fd_berwald(source, cfg: Config, h: float, levels: int) -> np.ndarray:
    if isinstance(source, PhiModel):
        pq_at = model_pq_values(source)
        r_max, safety = source.r_max, source.s_safety
    else:
        pq_at = source
        r_max, safety = np.inf, 1.0
    x = cfg.x
    r = cfg.r
    if not r < r_max:
        raise DomainError(f"r={r} outside the model ball")
    n = cfg.n
    cache: dict[tuple, np.ndarray] = {}

    def G(y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        key = tuple(np.round(y, 15))
        hit = cache.get(key)
        if hit is None:
            u = float(np.linalg.norm(y))
            s = float(x @ y) / u
            if u <= 0 or abs(s) > safety * r * (1 + 1e-12):
                raise DomainError(f"stencil node leaves the admissible region (s={s}, r={r})")
            P, Q = pq_at(r, s)
            hit = u * P * y + u * u * Q * x
            cache[key] = hit
        return hit

    out = np.zeros((n, n, n, n))
    for j, k, l in itertools.combinations_with_replacement(range(n), 3):
        orders = [0] * n
        for idx in (j, k, l):
            orders[idx] += 1
        vec = fd_derivative(G, cfg.y, orders, h, levels)
        for perm in set(itertools.permutations((j, k, l))):
            out[(slice(None),) + perm] = vec
    return out


class ComparisonReport(NamedTuple):
    max_abs_err: float
    max_rel_err: float
    worst_index: tuple[int, ...]
    passed: bool


def compare(a, b, tol: float, abs_floor: float = 1e-8) -> ComparisonReport:
    """Compare ``a`` against the reference ``b``.

    The relative error is measured against the scale of the two tensors (the
    largest entry of either).  When both are below ``abs_floor`` -- e.g. a
    vanishing Berwald curvature seen through finite-difference noise -- the
    absolute error is reported instead.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    diff = np.abs(a - b)
    if diff.size == 0:
        return ComparisonReport(0.0, 0.0, (), True)
    worst = np.unravel_index(int(np.argmax(diff)), diff.shape)
    max_abs = float(diff[worst])
    scale = max(float(np.max(np.abs(b))), float(np.max(np.abs(a))))
    rel = max_abs / scale if scale >= abs_floor else max_abs
    return ComparisonReport(max_abs, rel, tuple(int(i) for i in worst), bool(rel <= tol))
