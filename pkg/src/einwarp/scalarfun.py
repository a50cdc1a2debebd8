"""Exact one-variable function algebra.

Closed-form expression trees over a single real variable, with symbolic
differentiation.  Nodes: constant, variable, sum, product, quotient,
integer power, sin, cos, sinh, cosh, exp.  Evaluation is numpy-vectorized;
derivatives are built as trees, so second derivatives carry no
discretization noise.

Also provides the closed-form solver for the energy-constraint ODE

    (f')^2 + (rho/(n-1)) f^2 = (n-3)/(n-2),

whose solutions are the warping profiles certified elsewhere in the
package (sinusoidal for rho > 0, linear for rho = 0, hyperbolic-sine for
rho < 0).

Trees serialize to/from JSON objects of the form {"op": ..., "args": [...]}.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConstraintError, DomainError

__all__ = [
    "IntervalDomain",
    "SmoothFn",
    "Constant",
    "Variable",
    "const",
    "variable",
    "sin",
    "cos",
    "sinh",
    "cosh",
    "exp",
    "eval_with_derivatives",
    "solve_f_ode",
    "ode_residual",
    "fn_to_json",
    "fn_from_json",
]

MAX_DERIVATIVE_ORDER = 2


@dataclass(frozen=True)
class IntervalDomain:
    """Open or closed interval with nonempty interior."""

    t_min: float
    t_max: float
    open: bool = True

    def __post_init__(self):
        if not self.t_min < self.t_max:
            raise ConstraintError(f"empty interval [{self.t_min}, {self.t_max}]")

    def contains(self, t) -> np.ndarray:
        t = np.asarray(t)
        if self.open:
            return (t > self.t_min) & (t < self.t_max)
        return (t >= self.t_min) & (t <= self.t_max)

    def intersect(self, other: "IntervalDomain | None") -> "IntervalDomain":
        if other is None:
            return self
        return IntervalDomain(
            max(self.t_min, other.t_min),
            min(self.t_max, other.t_max),
            self.open or other.open,
        )

    def interior_samples(self, n: int, shrink: float = 0.05) -> np.ndarray:
        """n points strictly inside, insetting infinite ends to a finite window."""
        lo = self.t_min if math.isfinite(self.t_min) else min(self.t_max - 10.0, -10.0)
        hi = self.t_max if math.isfinite(self.t_max) else max(lo + 10.0, 10.0)
        pad = shrink * (hi - lo)
        return np.linspace(lo + pad, hi - pad, n)

    def to_json(self) -> dict:
        return {"min": self.t_min, "max": self.t_max, "open": self.open}

    @staticmethod
    def from_json(obj: dict) -> "IntervalDomain":
        return IntervalDomain(float(obj["min"]), float(obj["max"]), bool(obj.get("open", True)))


def _intersect(a: IntervalDomain | None, b: IntervalDomain | None) -> IntervalDomain | None:
    if a is None:
        return b
    return a.intersect(b)


class SmoothFn:
    """Base expression node.  Subclasses implement _eval and _diff."""

    def __init__(self, domain: IntervalDomain | None = None):
        self.domain = domain
        self._derivative: SmoothFn | None = None

    # -- evaluation ---------------------------------------------------------

    def __call__(self, t):
        return self._eval(np.asarray(t, dtype=float))

    def _eval(self, t):
        raise NotImplementedError

    def derivative(self) -> "SmoothFn":
        if self._derivative is None:
            d = self._diff()
            d.domain = self.domain
            self._derivative = d
        return self._derivative

    def _diff(self) -> "SmoothFn":
        raise NotImplementedError

    # -- algebra ------------------------------------------------------------

    @staticmethod
    def _coerce(value) -> "SmoothFn":
        if isinstance(value, SmoothFn):
            return value
        return Constant(float(value))

    def __add__(self, other):
        return Add(self, self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Add(self, Mul(Constant(-1.0), self._coerce(other)))

    def __rsub__(self, other):
        return Add(self._coerce(other), Mul(Constant(-1.0), self))

    def __mul__(self, other):
        return Mul(self, self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Div(self, self._coerce(other))

    def __rtruediv__(self, other):
        return Div(self._coerce(other), self)

    def __pow__(self, n):
        return Pow(self, int(n))

    def __neg__(self):
        return Mul(Constant(-1.0), self)

    def with_domain(self, domain: IntervalDomain) -> "SmoothFn":
        clone = self._clone()
        clone.domain = domain
        return clone

    def _clone(self) -> "SmoothFn":
        clone = copy.copy(self)
        clone._derivative = None
        return clone

    def to_json(self) -> dict:
        obj = self._json_node()
        if self.domain is not None:
            obj["domain"] = self.domain.to_json()
        return obj

    def _json_node(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self._json_node()})"


class Constant(SmoothFn):
    def __init__(self, value: float, domain=None):
        super().__init__(domain)
        self.value = float(value)

    def _eval(self, t):
        return np.broadcast_to(np.float64(self.value), t.shape).copy() if t.ndim else self.value

    def _diff(self):
        return Constant(0.0)

    def _json_node(self):
        return {"op": "const", "args": [self.value]}


class Variable(SmoothFn):
    def _eval(self, t):
        return t if t.ndim else float(t)

    def _diff(self):
        return Constant(1.0)

    def _json_node(self):
        return {"op": "t", "args": []}


class Add(SmoothFn):
    def __init__(self, left: SmoothFn, right: SmoothFn, domain=None):
        super().__init__(domain if domain is not None else _intersect(left.domain, right.domain))
        self.left, self.right = left, right

    def _eval(self, t):
        return self.left._eval(t) + self.right._eval(t)

    def _diff(self):
        return Add(self.left.derivative(), self.right.derivative())

    def _json_node(self):
        return {"op": "add", "args": [self.left.to_json(), self.right.to_json()]}


class Mul(SmoothFn):
    def __init__(self, left: SmoothFn, right: SmoothFn, domain=None):
        super().__init__(domain if domain is not None else _intersect(left.domain, right.domain))
        self.left, self.right = left, right

    def _eval(self, t):
        return self.left._eval(t) * self.right._eval(t)

    def _diff(self):
        return Add(
            Mul(self.left.derivative(), self.right),
            Mul(self.left, self.right.derivative()),
        )

    def _json_node(self):
        return {"op": "mul", "args": [self.left.to_json(), self.right.to_json()]}


class Div(SmoothFn):
    def __init__(self, num: SmoothFn, den: SmoothFn, domain=None):
        super().__init__(domain if domain is not None else _intersect(num.domain, den.domain))
        self.num, self.den = num, den

    def _eval(self, t):
        return self.num._eval(t) / self.den._eval(t)

    def _diff(self):
        # (u/v)' = (u'v - uv') / v^2
        numer = Add(
            Mul(self.num.derivative(), self.den),
            Mul(Constant(-1.0), Mul(self.num, self.den.derivative())),
        )
        return Div(numer, Pow(self.den, 2))

    def _json_node(self):
        return {"op": "div", "args": [self.num.to_json(), self.den.to_json()]}


class Pow(SmoothFn):
    """Integer power of a subexpression."""

    def __init__(self, base: SmoothFn, exponent: int, domain=None):
        super().__init__(domain if domain is not None else base.domain)
        if exponent != int(exponent):
            raise ConstraintError(f"power exponent must be an integer, got {exponent}")
        self.base, self.exponent = base, int(exponent)

    def _eval(self, t):
        return self.base._eval(t) ** self.exponent

    def _diff(self):
        if self.exponent == 0:
            return Constant(0.0)
        return Mul(
            Mul(Constant(float(self.exponent)), Pow(self.base, self.exponent - 1)),
            self.base.derivative(),
        )

    def _json_node(self):
        return {"op": "pow", "args": [self.base.to_json(), self.exponent]}


class _Unary(SmoothFn):
    _np_fn = None

    def __init__(self, arg: SmoothFn, domain=None):
        super().__init__(domain if domain is not None else arg.domain)
        self.arg = arg

    def _eval(self, t):
        return type(self)._np_fn(self.arg._eval(t))

    def _json_node(self):
        return {"op": type(self).__name__.lower(), "args": [self.arg.to_json()]}


class Sin(_Unary):
    _np_fn = staticmethod(np.sin)

    def _diff(self):
        return Mul(Cos(self.arg), self.arg.derivative())


class Cos(_Unary):
    _np_fn = staticmethod(np.cos)

    def _diff(self):
        return Mul(Mul(Constant(-1.0), Sin(self.arg)), self.arg.derivative())


class Sinh(_Unary):
    _np_fn = staticmethod(np.sinh)

    def _diff(self):
        return Mul(Cosh(self.arg), self.arg.derivative())


class Cosh(_Unary):
    _np_fn = staticmethod(np.cosh)

    def _diff(self):
        return Mul(Sinh(self.arg), self.arg.derivative())


class Exp(_Unary):
    _np_fn = staticmethod(np.exp)

    def _diff(self):
        return Mul(Exp(self.arg), self.arg.derivative())


# ---------------------------------------------------------------------------
# convenience constructors
# ---------------------------------------------------------------------------

def const(value: float) -> Constant:
    return Constant(value)


def variable() -> Variable:
    return Variable()


def sin(arg) -> Sin:
    return Sin(SmoothFn._coerce(arg))


def cos(arg) -> Cos:
    return Cos(SmoothFn._coerce(arg))


def sinh(arg) -> Sinh:
    return Sinh(SmoothFn._coerce(arg))


def cosh(arg) -> Cosh:
    return Cosh(SmoothFn._coerce(arg))


def exp(arg) -> Exp:
    return Exp(SmoothFn._coerce(arg))


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def eval_with_derivatives(fn: SmoothFn, t: float, order: int = 2) -> list[float]:
    """Evaluate fn and its first `order` derivatives at t.

    Raises DomainError if t lies outside the declared domain of fn, and
    ConstraintError for order > 2 (no formula here needs more).
    """
    if order < 0 or order > MAX_DERIVATIVE_ORDER:
        raise ConstraintError(f"derivative order {order} unsupported (max {MAX_DERIVATIVE_ORDER})")
    if fn.domain is not None and not np.all(fn.domain.contains(t)):
        raise DomainError(f"t = {t} outside domain ({fn.domain.t_min}, {fn.domain.t_max})")
    values = [float(fn(t))]
    g = fn
    for _ in range(order):
        g = g.derivative()
        values.append(float(g(t)))
    return values


def solve_f_ode(n: int, rho: float, branch: str = "increasing") -> SmoothFn:
    """Closed-form positive solution of (f')^2 + (rho/(n-1)) f^2 = (n-3)/(n-2).

    The returned function carries its maximal positivity interval as domain:
      rho > 0: f = C sin(w t) on (0, pi/w), normalized by f(0) = 0, C > 0;
      rho = 0: f = sqrt((n-3)/(n-2)) t on (0, inf);
      rho < 0: f = C sinh(w t) on (0, inf); only sinh-type solutions exist
               since the right-hand side is positive.  `branch` picks the
               increasing (t > 0) or decreasing (t < 0) ray.

    Requires n >= 5 (two fibers of dimension >= 2 force it).
    """
    if n <= 4:
        raise ConstraintError(f"n = {n}: the three-curvature construction needs n >= 5")
    if branch not in ("increasing", "decreasing"):
        raise ConstraintError(f"unknown branch {branch!r}")
    energy = (n - 3) / (n - 2)
    if rho > 0:
        w = math.sqrt(rho / (n - 1))
        amp = math.sqrt(energy) / w
        fn = Mul(Constant(amp), Sin(Mul(Constant(w), Variable())))
        return fn.with_domain(IntervalDomain(0.0, math.pi / w))
    if rho == 0:
        slope = math.sqrt(energy)
        fn = Mul(Constant(slope), Variable())
        return fn.with_domain(IntervalDomain(0.0, math.inf))
    w = math.sqrt(-rho / (n - 1))
    amp = math.sqrt(energy) / w
    sign = 1.0 if branch == "increasing" else -1.0
    fn = Mul(Constant(sign * amp), Sinh(Mul(Constant(w), Variable())))
    if branch == "increasing":
        return fn.with_domain(IntervalDomain(0.0, math.inf))
    return fn.with_domain(IntervalDomain(-math.inf, 0.0))


def ode_residual(fn: SmoothFn, n: int, rho: float, t) -> np.ndarray:
    """|(f')^2 + rho/(n-1) f^2 - (n-3)/(n-2)| at the given sample points."""
    f = fn(np.asarray(t, dtype=float))
    fp = fn.derivative()(np.asarray(t, dtype=float))
    return np.abs(fp**2 + rho / (n - 1) * f**2 - (n - 3) / (n - 2))


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------

_UNARY_OPS = {"sin": Sin, "cos": Cos, "sinh": Sinh, "cosh": Cosh, "exp": Exp}


def fn_to_json(fn: SmoothFn) -> dict:
    return fn.to_json()


def fn_from_json(obj) -> SmoothFn:
    """Parse {"op": ..., "args": [...]} (bare numbers coerce to constants)."""
    if isinstance(obj, (int, float)):
        return Constant(float(obj))
    if not isinstance(obj, dict) or "op" not in obj:
        raise ConstraintError(f"not a function node: {obj!r}")
    op = obj["op"]
    args = obj.get("args", [])
    if op == "const":
        fn = Constant(float(args[0]))
    elif op == "t":
        fn = Variable()
    elif op == "add":
        fn = Add(fn_from_json(args[0]), fn_from_json(args[1]))
    elif op == "mul":
        fn = Mul(fn_from_json(args[0]), fn_from_json(args[1]))
    elif op == "div":
        fn = Div(fn_from_json(args[0]), fn_from_json(args[1]))
    elif op == "pow":
        fn = Pow(fn_from_json(args[0]), int(args[1]))
    elif op in _UNARY_OPS:
        fn = _UNARY_OPS[op](fn_from_json(args[0]))
    else:
        raise ConstraintError(f"unknown op {op!r}")
    if "domain" in obj:
        fn = fn.with_domain(IntervalDomain.from_json(obj["domain"]))
    return fn
