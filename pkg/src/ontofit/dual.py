"""Forward-mode automatic differentiation with dense partials vectors.

A :class:`Dual` carries a batch of values (shape ``(m,)``) together with the
partial derivatives of every entry with respect to ``k`` active parameters
(shape ``(k, m)``).  Scalars are the ``m = 1`` case.  Mixing a scalar dual
with a batch dual relies on numpy broadcasting, so a parameter-dependent
quantity can be combined with per-point data at no extra cost.

Template formulas are written against the module-level math functions
(:func:`sqrt`, :func:`maximum`, ...) which dispatch on argument type, so the
same code runs on plain numpy inputs when no gradient is needed.
"""

from __future__ import annotations

import numpy as np

from .errors import EvaluationError

_SQRT_FLOOR = 1e-300


class Dual:
    """Value batch plus partial derivatives w.r.t. the active parameters."""

    __slots__ = ("value", "partials")

    # keep numpy from absorbing us into object arrays; reflected ops run instead
    __array_ufunc__ = None

    def __init__(self, value: np.ndarray, partials: np.ndarray):
        self.value = value
        self.partials = partials

    # -- construction -----------------------------------------------------

    @staticmethod
    def constant(x, n_params: int) -> "Dual":
        v = np.atleast_1d(np.asarray(x, dtype=float))
        return Dual(v, np.zeros((n_params, 1)))

    def __repr__(self) -> str:
        return f"Dual(value={self.value!r}, partials=<{self.partials.shape}>)"

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value + other.value, self.partials + other.partials)
        return Dual(self.value + other, self.partials)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value - other.value, self.partials - other.partials)
        return Dual(self.value - other, self.partials)

    def __rsub__(self, other):
        return Dual(other - self.value, -self.partials)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(
                self.value * other.value,
                self.partials * other.value + other.partials * self.value,
            )
        return Dual(self.value * other, self.partials * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.value
            return Dual(
                self.value * inv,
                (self.partials - other.partials * (self.value * inv)) * inv,
            )
        return Dual(self.value / other, self.partials / other)

    def __rtruediv__(self, other):
        inv = 1.0 / self.value
        v = other * inv
        return Dual(v, self.partials * (-v * inv))

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise TypeError("dual exponent must be a plain number")
        v = self.value ** exponent
        return Dual(v, self.partials * (exponent * self.value ** (exponent - 1)))

    def __neg__(self):
        return Dual(-self.value, -self.partials)

    # comparisons operate on values only (used for branch selection)
    def __lt__(self, other):
        return self.value < _value(other)

    def __le__(self, other):
        return self.value <= _value(other)

    def __gt__(self, other):
        return self.value > _value(other)

    def __ge__(self, other):
        return self.value >= _value(other)


def _value(x):
    return x.value if isinstance(x, Dual) else x


def value_of(x):
    """Plain numpy value of a dual (or pass-through for non-duals)."""
    return x.value if isinstance(x, Dual) else x


def seed(values) -> list[Dual]:
    """Lift a parameter vector into duals with unit partials e_i."""
    values = np.asarray(values, dtype=float)
    k = values.shape[0]
    out = []
    for i, v in enumerate(values):
        p = np.zeros((k, 1))
        p[i, 0] = 1.0
        out.append(Dual(np.array([v]), p))
    return out


def gradient(x: Dual) -> np.ndarray:
    """Extract the gradient of a scalar dual as a flat ``(k,)`` array."""
    if x.value.shape[0] != 1:
        raise ValueError("gradient is defined for scalar duals only")
    return x.partials[:, 0].copy()


# -- math functions (dispatch on Dual vs plain numpy) ------------------------


def sqrt(x):
    if isinstance(x, Dual):
        v = np.sqrt(x.value)
        # guarded: at v == 0 the incoming partials are zero away from kinks,
        # so dividing by the floor keeps the result an exact 0 there
        return Dual(v, x.partials * (0.5 / np.maximum(v, _SQRT_FLOOR)))
    return np.sqrt(x)


def absolute(x):
    if isinstance(x, Dual):
        s = np.where(x.value >= 0.0, 1.0, -1.0)
        return Dual(x.value * s, x.partials * s)
    return np.abs(x)


def sin(x):
    if isinstance(x, Dual):
        return Dual(np.sin(x.value), x.partials * np.cos(x.value))
    return np.sin(x)


def cos(x):
    if isinstance(x, Dual):
        return Dual(np.cos(x.value), x.partials * (-np.sin(x.value)))
    return np.cos(x)


def exp(x):
    if isinstance(x, Dual):
        v = np.exp(x.value)
        return Dual(v, x.partials * v)
    return np.exp(x)


def log(x):
    if isinstance(x, Dual):
        return Dual(np.log(x.value), x.partials / x.value)
    return np.log(x)


def maximum(a, b):
    """Elementwise max; ties select the first argument's partials."""
    if isinstance(a, Dual) or isinstance(b, Dual):
        av, bv = _value(a), _value(b)
        mask = av >= bv
        ap = a.partials if isinstance(a, Dual) else 0.0
        bp = b.partials if isinstance(b, Dual) else 0.0
        return Dual(np.where(mask, av, bv), np.where(mask, ap, bp))
    return np.maximum(a, b)


def minimum(a, b):
    """Elementwise min; ties select the first argument's partials."""
    if isinstance(a, Dual) or isinstance(b, Dual):
        av, bv = _value(a), _value(b)
        mask = av <= bv
        ap = a.partials if isinstance(a, Dual) else 0.0
        bp = b.partials if isinstance(b, Dual) else 0.0
        return Dual(np.where(mask, av, bv), np.where(mask, ap, bp))
    return np.minimum(a, b)


def where(mask, a, b):
    """Select per element with a plain boolean mask."""
    if isinstance(a, Dual) or isinstance(b, Dual):
        av, bv = _value(a), _value(b)
        ap = a.partials if isinstance(a, Dual) else 0.0
        bp = b.partials if isinstance(b, Dual) else 0.0
        return Dual(np.where(mask, av, bv), np.where(mask, ap, bp))
    return np.where(mask, a, b)


def hypot2(x, y):
    """sqrt(x**2 + y**2) with the guarded square root."""
    return sqrt(x * x + y * y)


def total(x):
    """Sum over the batch axis, returning a scalar dual (or float)."""
    if isinstance(x, Dual):
        m = x.value.shape[0]
        p = x.partials
        if p.shape[1] != m:
            p = np.broadcast_to(p, (p.shape[0], m))
        return Dual(
            np.array([float(np.sum(x.value))]),
            p.sum(axis=1, keepdims=True),
        )
    return float(np.sum(x))


def mean(x):
    """Mean over the batch axis, returning a scalar dual (or float)."""
    if isinstance(x, Dual):
        m = x.value.shape[0]
        t = total(x)
        return Dual(t.value / m, t.partials / m)
    return float(np.mean(x))


# -- verification -------------------------------------------------------------


def grad_check(f, x, h: float = 1e-5) -> float:
    """Compare the dual gradient of ``f`` at ``x`` against central differences.

    ``f`` receives its parameters as a sequence (duals for the AD pass, plain
    floats for the finite-difference evaluations) and returns a scalar.
    Returns the max over parameters of
    ``|dual - central| / (|central| + 1e-12)``.
    """
    x = np.asarray(x, dtype=float)
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    out = f(seed(x))
    v = float(value_of(out)[0]) if isinstance(out, Dual) else float(out)
    if not np.isfinite(v):
        raise EvaluationError(f"objective is non-finite at {x!r}")
    g = gradient(out) if isinstance(out, Dual) else np.zeros(x.shape[0])

    worst = 0.0
    for i in range(x.shape[0]):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        fp = float(np.asarray(value_of(f(list(xp)))).reshape(-1)[0])
        fm = float(np.asarray(value_of(f(list(xm)))).reshape(-1)[0])
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise EvaluationError(f"objective is non-finite near {x!r}")
        central = (fp - fm) / (2.0 * h)
        rel = abs(g[i] - central) / (abs(central) + 1e-12)
        worst = max(worst, rel)
    return worst
