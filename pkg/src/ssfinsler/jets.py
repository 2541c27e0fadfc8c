"""Truncated bivariate Taylor series ("jets") in the variables (r, s).

A :class:`Jet2` stores the Taylor coefficients ``c[i, k]`` of a scalar
function about a base point ``(r0, s0)``::

    f(r, s) ~ sum_{i <= R, k <= S} c[i, k] (r - r0)**i (s - s0)**k

so that ``d^i/dr^i d^k/ds^k f(r0, s0) = i! k! c[i, k]``.  Arithmetic on jets
propagates these coefficients exactly (up to floating point rounding), which
gives the high-order derivatives the geometric formulas need without any
finite differencing.

Jets are immutable; every operation returns a new jet.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DomainError, JetDivisionError, ShapeError

__all__ = [
    "JetShape",
    "Jet2",
    "DEFAULT_SHAPE",
    "DIV_EPSILON",
    "jet_const",
    "jet_var_r",
    "jet_var_s",
    "jet_add",
    "jet_sub",
    "jet_mul",
    "jet_neg",
    "jet_div",
    "jet_sqrt",
    "jet_pow",
    "jet_compose",
    "jet_extract",
    "jet_exp",
    "jet_log",
    "jet_sin",
    "jet_cos",
    "jet_tan",
    "jet_sinh",
    "jet_cosh",
    "jet_atan",
]

DIV_EPSILON = 1e-12


class JetShape(NamedTuple):
    """Highest retained derivative order in r and in s."""

    r_order: int
    s_order: int


# Q_sss needs d_r d_s^4 phi and d_s^5 phi; H_s / s needs one more s-order.
DEFAULT_SHAPE = JetShape(1, 6)


class Jet2:
    """Truncated Taylor expansion of a scalar function of (r, s)."""

    __slots__ = ("_c", "base")

    def __init__(self, coeffs, base: tuple[float, float]):
        c = np.array(coeffs, dtype=float)
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise ShapeError(f"jet coefficient table must be 2-d and non-empty, got shape {c.shape}")
        c.flags.writeable = False
        self._c = c
        self.base = (float(base[0]), float(base[1]))

    # ------------------------------------------------------------------ access
    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    @property
    def shape(self) -> JetShape:
        return JetShape(self._c.shape[0] - 1, self._c.shape[1] - 1)

    @property
    def value(self) -> float:
        return float(self._c[0, 0])

    def extract(self, i: int, k: int) -> float:
        """Return the mixed partial derivative d_r^i d_s^k at the base point."""
        R, S = self.shape
        if i < 0 or k < 0 or i > R or k > S:
            raise ShapeError(f"derivative order ({i}, {k}) not retained by jet of shape {tuple(self.shape)}")
        return math.factorial(i) * math.factorial(k) * float(self._c[i, k])

    def d_r(self) -> Jet2:
        """Jet of the r-derivative (one r-order is lost)."""
        R, _ = self.shape
        if R < 1:
            raise ShapeError("cannot differentiate in r a jet with r_order 0")
        factors = np.arange(1, R + 1, dtype=float)[:, None]
        return Jet2(self._c[1:] * factors, self.base)

    def d_s(self) -> Jet2:
        """Jet of the s-derivative (one s-order is lost)."""
        _, S = self.shape
        if S < 1:
            raise ShapeError("cannot differentiate in s a jet with s_order 0")
        factors = np.arange(1, S + 1, dtype=float)[None, :]
        return Jet2(self._c[:, 1:] * factors, self.base)

    def truncate(self, shape: JetShape) -> Jet2:
        R, S = self.shape
        if shape[0] > R or shape[1] > S or shape[0] < 0 or shape[1] < 0:
            raise ShapeError(f"cannot truncate jet of shape {tuple(self.shape)} to {tuple(shape)}")
        return Jet2(self._c[: shape[0] + 1, : shape[1] + 1], self.base)

    def antiderivative_r(self, value: float) -> Jet2:
        """Jet of F with dF/dr = self and F(r0, s0) = value.

        Only meaningful for functions of r alone; the s-columns other than the
        first must vanish.  The top r-coefficient of ``self`` is dropped so the
        result keeps the same shape.
        """
        R, S = self.shape
        out = np.zeros((R + 1, S + 1))
        out[0, 0] = value
        if R:
            out[1:, :] = self._c[:-1, :] / np.arange(1, R + 1, dtype=float)[:, None]
        return Jet2(out, self.base)

    def __repr__(self) -> str:
        return f"Jet2(base={self.base}, shape={tuple(self.shape)}, value={self.value!r})"

    # -------------------------------------------------------------- arithmetic
    def _coerce(self, other) -> Jet2:
        if isinstance(other, Jet2):
            if other.base != self.base or other._c.shape != self._c.shape:
                raise ShapeError(
                    f"jet mismatch: base {self.base} shape {tuple(self.shape)} vs "
                    f"base {other.base} shape {tuple(other.shape)}"
                )
            return other
        return jet_const(float(other), self.base, self.shape)

    def __add__(self, other):
        if isinstance(other, Jet2):
            return Jet2(self._c + self._coerce(other)._c, self.base)
        c = self._c.copy()
        c[0, 0] += float(other)
        return Jet2(c, self.base)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Jet2):
            return Jet2(self._c - self._coerce(other)._c, self.base)
        c = self._c.copy()
        c[0, 0] -= float(other)
        return Jet2(c, self.base)

    def __rsub__(self, other):
        c = -self._c
        c[0, 0] += float(other)
        return Jet2(c, self.base)

    def __neg__(self):
        return Jet2(-self._c, self.base)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if isinstance(other, Jet2):
            return Jet2(_mul_table(self._c, self._coerce(other)._c), self.base)
        return Jet2(self._c * float(other), self.base)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet2):
            return jet_div(self, other)
        other = float(other)
        if abs(other) <= DIV_EPSILON:
            raise JetDivisionError(other, DIV_EPSILON)
        return Jet2(self._c / other, self.base)

    def __rtruediv__(self, other):
        return jet_div(jet_const(float(other), self.base, self.shape), self)

    def __pow__(self, exponent):
        return jet_pow(self, exponent)


def _mul_table(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    R1, S1 = a.shape
    out = np.zeros_like(a)
    for i in range(R1):
        for j in range(R1 - i):
            out[i + j] += np.convolve(a[i], b[j])[:S1]
    return out


# ---------------------------------------------------------------- constructors
def jet_const(c: float, at: tuple[float, float], shape: JetShape = DEFAULT_SHAPE) -> Jet2:
    table = np.zeros((shape[0] + 1, shape[1] + 1))
    table[0, 0] = c
    return Jet2(table, at)


def jet_var_r(r0: float, s0: float, shape: JetShape = DEFAULT_SHAPE) -> Jet2:
    if shape[0] < 1:
        raise ShapeError("jet_var_r needs r_order >= 1")
    table = np.zeros((shape[0] + 1, shape[1] + 1))
    table[0, 0] = r0
    table[1, 0] = 1.0
    return Jet2(table, (r0, s0))


def jet_var_s(r0: float, s0: float, shape: JetShape = DEFAULT_SHAPE) -> Jet2:
    if shape[1] < 1:
        raise ShapeError("jet_var_s needs s_order >= 1")
    table = np.zeros((shape[0] + 1, shape[1] + 1))
    table[0, 0] = s0
    table[0, 1] = 1.0
    return Jet2(table, (r0, s0))


# ------------------------------------------------------------ ring operations
def jet_add(a: Jet2, b: Jet2) -> Jet2:
    return a + a._coerce(b)


def jet_sub(a: Jet2, b: Jet2) -> Jet2:
    return a - a._coerce(b)


def jet_mul(a: Jet2, b: Jet2) -> Jet2:
    return a * a._coerce(b)


def jet_neg(a: Jet2) -> Jet2:
    return -a


def jet_extract(a: Jet2, i: int, k: int) -> float:
    return a.extract(i, k)


# ------------------------------------------------------------------ composition
def _nilpotency(inner: Jet2) -> int:
    R, S = inner.shape
    return R + S


def _compose_taylor(taylor: Sequence[float], inner: Jet2) -> Jet2:
    """Evaluate sum_k taylor[k] * N**k with N = inner - inner(base), by Horner."""
    m = _nilpotency(inner)
    if len(taylor) < m + 1:
        raise ShapeError(f"composition needs {m + 1} outer derivatives, got {len(taylor)}")
    nil = inner._c.copy()
    nil[0, 0] = 0.0
    acc = np.zeros_like(nil)
    acc[0, 0] = taylor[m]
    for k in range(m - 1, -1, -1):
        acc = _mul_table(acc, nil)
        acc[0, 0] += taylor[k]
    return Jet2(acc, inner.base)


def jet_compose(outer: Sequence[float], inner: Jet2) -> Jet2:
    """Compose an outer scalar function with a jet (Faa di Bruno, truncated).

    ``outer`` lists f(a), f'(a), f''(a), ... at ``a = inner.value``; at least
    ``1 + r_order + s_order`` entries are required.
    """
    taylor = [float(d) / math.factorial(k) for k, d in enumerate(outer)]
    return _compose_taylor(taylor, inner)


def _power_taylor(a: float, p: float, m: int) -> list[float]:
    # binom(p, k) * a**(p - k)
    out = []
    coef = 1.0
    for k in range(m + 1):
        out.append(coef * a ** (p - k))
        coef *= (p - k) / (k + 1)
    return out


def jet_div(a: Jet2, b: Jet2, epsilon: float = DIV_EPSILON) -> Jet2:
    b = a._coerce(b)
    b0 = b.value
    if not abs(b0) > epsilon:
        raise JetDivisionError(b0, epsilon)
    m = _nilpotency(b)
    recip = _compose_taylor([(-1.0) ** k / b0 ** (k + 1) for k in range(m + 1)], b)
    return a * recip


def jet_sqrt(a: Jet2) -> Jet2:
    a0 = a.value
    if not a0 > 0.0:
        raise DomainError(f"sqrt of jet with nonpositive constant term {a0!r}")
    return _compose_taylor(_power_taylor(a0, 0.5, _nilpotency(a)), a)


def jet_pow(a: Jet2, exponent) -> Jet2:
    """Raise a jet to a rational power.

    Integer exponents are computed by repeated multiplication (any sign of the
    base, nonzero base for negative exponents); other exponents need a
    positive constant term.
    """
    p = Fraction(exponent).limit_denominator(10**9) if not isinstance(exponent, Fraction) else exponent
    if p.denominator == 1:
        e = int(p)
        if e == 0:
            return jet_const(1.0, a.base, a.shape)
        base = a if e > 0 else jet_div(jet_const(1.0, a.base, a.shape), a)
        return _int_power(base, abs(e))
    a0 = a.value
    if not a0 > 0.0:
        raise DomainError(f"non-integer power {p} of jet with nonpositive constant term {a0!r}")
    return _compose_taylor(_power_taylor(a0, float(p), _nilpotency(a)), a)


def _int_power(a: Jet2, e: int) -> Jet2:
    result = None
    sq = a
    while e:
        if e & 1:
            result = sq if result is None else result * sq
        e >>= 1
        if e:
            sq = sq * sq
    return result


# ------------------------------------------------------------- elementary maps
def jet_exp(a: Jet2) -> Jet2:
    m = _nilpotency(a)
    e = math.exp(a.value)
    return _compose_taylor([e / math.factorial(k) for k in range(m + 1)], a)


def jet_log(a: Jet2) -> Jet2:
    a0 = a.value
    if not a0 > 0.0:
        raise DomainError(f"log of jet with nonpositive constant term {a0!r}")
    m = _nilpotency(a)
    taylor = [math.log(a0)] + [(-1.0) ** (k - 1) / (k * a0**k) for k in range(1, m + 1)]
    return _compose_taylor(taylor, a)


def _cyclic(values: Sequence[float], m: int) -> list[float]:
    return [values[k % 4] / math.factorial(k) for k in range(m + 1)]


def jet_sin(a: Jet2) -> Jet2:
    s, c = math.sin(a.value), math.cos(a.value)
    return _compose_taylor(_cyclic((s, c, -s, -c), _nilpotency(a)), a)


def jet_cos(a: Jet2) -> Jet2:
    s, c = math.sin(a.value), math.cos(a.value)
    return _compose_taylor(_cyclic((c, -s, -c, s), _nilpotency(a)), a)


def jet_tan(a: Jet2) -> Jet2:
    return jet_div(jet_sin(a), jet_cos(a))


def jet_sinh(a: Jet2) -> Jet2:
    sh, ch = math.sinh(a.value), math.cosh(a.value)
    return _compose_taylor(_cyclic((sh, ch, sh, ch), _nilpotency(a)), a)


def jet_cosh(a: Jet2) -> Jet2:
    sh, ch = math.sinh(a.value), math.cosh(a.value)
    return _compose_taylor(_cyclic((ch, sh, ch, sh), _nilpotency(a)), a)


def jet_atan(a: Jet2) -> Jet2:
    m = _nilpotency(a)
    a0 = a.value
    # Taylor series of atan' = 1/(1+t^2) about a0, integrated term by term.
    t = jet_var_s(0.0, a0, JetShape(0, max(m - 1, 1)))
    dseries = (1.0 / (1.0 + t * t)).coeffs[0]
    taylor = [math.atan(a0)] + [dseries[k - 1] / k for k in range(1, m + 1)]
    return _compose_taylor(taylor, a)
