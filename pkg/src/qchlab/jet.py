"""Second-order forward differentiation on 4-dimensional coordinate charts.

A :class:`Jet2` carries the value, gradient and Hessian of a scalar with
respect to the chart coordinates.  Arithmetic and the elementary functions
in this module propagate all three, so any field written as a composition of
``+ - * /``, powers, :func:`sqrt`, :func:`exp`, :func:`log`, :func:`sin` and
:func:`cos` is differentiated exactly (up to rounding).

The coefficients of a jet may themselves be jets.  Evaluating a function on
such nested jets yields fourth derivatives, which is how metrics defined by
Kahler potentials are differentiated twice more for curvature.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, NonFiniteError

DIM = 4
DEFAULT_STEP = 1e-4
MIN_STEP = 1e-6


def _map(op, arr):
    out = np.empty(arr.shape, dtype=object)
    for idx in np.ndindex(arr.shape):
        out[idx] = op(arr[idx])
    return out


class Jet2:
    """Truncated second-order Taylor expansion of a scalar."""

    __slots__ = ("value", "grad", "hess")
    # keep numpy from broadcasting over us; binary ops defer to our reflected methods
    __array_ufunc__ = None

    def __init__(self, value, grad, hess):
        self.value = value
        self.grad = grad
        self.hess = hess

    @classmethod
    def constant(cls, value, n: int = DIM) -> "Jet2":
        return cls(value, np.zeros(n), np.zeros((n, n)))

    @classmethod
    def variable(cls, value, index: int, n: int = DIM) -> "Jet2":
        grad = np.zeros(n)
        grad[index] = 1.0
        return cls(value, grad, np.zeros((n, n)))

    def __repr__(self):
        return f"Jet2(value={self.value!r}, grad={self.grad!r})"

    # arithmetic -------------------------------------------------------
    def __neg__(self):
        return Jet2(-self.value, -self.grad, -self.hess)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Jet2):
            return Jet2(self.value + other.value, self.grad + other.grad, self.hess + other.hess)
        if isinstance(other, np.ndarray):
            return _map(lambda o: self + o, other)
        return Jet2(self.value + other, self.grad, self.hess)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Jet2):
            return Jet2(self.value - other.value, self.grad - other.grad, self.hess - other.hess)
        if isinstance(other, np.ndarray):
            return _map(lambda o: self - o, other)
        return Jet2(self.value - other, self.grad, self.hess)

    def __rsub__(self, other):
        if isinstance(other, np.ndarray):
            return _map(lambda o: o - self, other)
        return Jet2(other - self.value, -self.grad, -self.hess)

    def __mul__(self, other):
        if isinstance(other, Jet2):
            a, b = self, other
            cross = np.multiply.outer(a.grad, b.grad)
            return Jet2(
                a.value * b.value,
                a.value * b.grad + b.value * a.grad,
                a.value * b.hess + b.value * a.hess + cross + cross.T,
            )
        if isinstance(other, np.ndarray):
            return _map(lambda o: self * o, other)
        return Jet2(self.value * other, self.grad * other, self.hess * other)

    __rmul__ = __mul__

    def reciprocal(self):
        r = 1.0 / self.value
        r2 = r * r
        return _compose(self, r, -r2, 2.0 * r2 * r)

    def __truediv__(self, other):
        if isinstance(other, Jet2):
            return self * other.reciprocal()
        if isinstance(other, np.ndarray):
            return _map(lambda o: self / o, other)
        return Jet2(self.value / other, self.grad / other, self.hess / other)

    def __rtruediv__(self, other):
        if isinstance(other, np.ndarray):
            return _map(lambda o: o / self, other)
        return other * self.reciprocal()

    def __pow__(self, n):
        if isinstance(n, Jet2):
            return exp(n * log(self))
        if n == 0:
            return Jet2.constant(1.0, len(self.grad))
        if n == 1:
            return self
        if n == 2:
            return self * self
        v = self.value
        return _compose(self, v**n, n * v ** (n - 1), n * (n - 1) * v ** (n - 2))


def _compose(x: Jet2, f0, f1, f2) -> Jet2:
    """Chain rule for a univariate function with derivatives ``f0, f1, f2`` at ``x.value``."""
    return Jet2(f0, f1 * x.grad, f1 * x.hess + f2 * np.multiply.outer(x.grad, x.grad))


def sqrt(x):
    if isinstance(x, Jet2):
        s = sqrt(x.value)
        return _compose(x, s, 0.5 / s, -0.25 / (s * x.value))
    if isinstance(x, np.ndarray) and x.dtype == object:
        return _map(sqrt, x)
    return np.sqrt(x)


def exp(x):
    if isinstance(x, Jet2):
        e = exp(x.value)
        return _compose(x, e, e, e)
    if isinstance(x, np.ndarray) and x.dtype == object:
        return _map(exp, x)
    return np.exp(x)


def log(x):
    if isinstance(x, Jet2):
        r = 1.0 / x.value
        return _compose(x, log(x.value), r, -r * r)
    if isinstance(x, np.ndarray) and x.dtype == object:
        return _map(log, x)
    return np.log(x)


def sin(x):
    if isinstance(x, Jet2):
        s, c = sin(x.value), cos(x.value)
        return _compose(x, s, c, -s)
    return np.sin(x)


def cos(x):
    if isinstance(x, Jet2):
        s, c = sin(x.value), cos(x.value)
        return _compose(x, c, -s, -c)
    return np.cos(x)


# charts and fields -----------------------------------------------------


@dataclass(frozen=True)
class Chart:
    """Open coordinate box, optionally cut down further by a predicate.

    ``predicate`` returns True on admissible points; use it to exclude
    singular loci such as ``z = 0`` or ``xi = eta``.
    """

    lower: tuple
    upper: tuple
    predicate: Optional[Callable[[np.ndarray], bool]] = None
    names: tuple = ("x0", "x1", "x2", "x3")

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        if p.shape != (DIM,) or not np.all(np.isfinite(p)):
            return False
        if np.any(p <= np.asarray(self.lower)) or np.any(p >= np.asarray(self.upper)):
            return False
        return True if self.predicate is None else bool(self.predicate(p))

    def shrunk(self, margin: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
        """Box bounds pulled in by ``margin`` times the side length on each side."""
        lo, hi = np.asarray(self.lower, float), np.asarray(self.upper, float)
        pad = margin * (hi - lo)
        return lo + pad, hi - pad

    def sample(self, rng: np.random.Generator, n: int, margin: float = 0.1, max_tries: int = 1000) -> np.ndarray:
        """Uniform rejection sampling inside the shrunk box."""
        lo, hi = self.shrunk(margin)
        pts = []
        tries = 0
        while len(pts) < n:
            if tries >= max_tries * max(n, 1):
                raise DomainError("chart predicate rejects (almost) every point of the box")
            tries += 1
            p = rng.uniform(lo, hi)
            if self.contains(p):
                pts.append(p)
        return np.array(pts).reshape(n, DIM)


WHOLE_SPACE = Chart((-np.inf,) * DIM, (np.inf,) * DIM)


def as_point(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (DIM,):
        raise DomainError(f"expected {DIM} coordinates, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise DomainError(f"non-finite coordinates {p}")
    return p


@dataclass(frozen=True)
class ScalarField:
    """A scalar function of the four chart coordinates.

    ``fn`` receives a sequence of four coordinates which are either floats or
    :class:`Jet2` seeds, and must only use operations from this module (or
    plain arithmetic) so it works for both.
    """

    fn: Callable[[Sequence[Any]], Any]
    domain: Chart = field(default=WHOLE_SPACE)
    name: str = ""

    def __call__(self, p) -> "Jet2":
        return evaluate(self, p)


def seed(p) -> list[Jet2]:
    return [Jet2.variable(float(c), i) for i, c in enumerate(p)]


def lift(value) -> Jet2:
    """Promote a constant (or a 0-d result) to a float jet."""
    if isinstance(value, Jet2):
        return value
    return Jet2.constant(float(value))


def _check_finite(jet: Jet2, where) -> Jet2:
    if not (np.isfinite(jet.value) and np.all(np.isfinite(jet.grad)) and np.all(np.isfinite(jet.hess))):
        raise NonFiniteError(f"non-finite jet at {where}")
    return jet


def evaluate(f: ScalarField, p) -> Jet2:
    """Exact value, gradient and Hessian of ``f`` at ``p``."""
    p = as_point(p)
    if not f.domain.contains(p):
        raise DomainError(f"point {p} outside domain of {f.name or 'field'}")
    try:
        with np.errstate(all="ignore"):
            jet = lift(f.fn(seed(p)))
    except (ZeroDivisionError, OverflowError) as exc:
        raise NonFiniteError(f"{exc} at {p}") from exc
    jet = Jet2(float(jet.value), np.asarray(jet.grad, float), np.asarray(jet.hess, float))
    jet.hess = 0.5 * (jet.hess + jet.hess.T)
    return _check_finite(jet, p)


def _stencil_step(contains, p, step):
    h = step
    while h >= MIN_STEP:
        corners = [p + h * np.array(s) for s in _stencil_offsets()]
        if all(contains(q) for q in corners):
            return h
        h *= 0.5
    raise DomainError(f"finite-difference stencil at {p} leaves the domain even at step {MIN_STEP}")


def _stencil_offsets():
    eye = np.eye(DIM)
    out = []
    for i in range(DIM):
        out += [eye[i], -eye[i]]
        for j in range(i + 1, DIM):
            out += [eye[i] + eye[j], eye[i] - eye[j], -eye[i] + eye[j], -eye[i] - eye[j]]
    return out


def fd_derivatives(fn: Callable[[np.ndarray], Any], p, step: float = DEFAULT_STEP, contains=None):
    """Central-difference value, gradient and Hessian of an array-valued float function.

    Returns ``(v, d, dd)`` with ``d[..., k] = d/dx_k`` and ``dd[..., k, l]``.
    The step is halved until the stencil fits inside ``contains`` (floor 1e-6).
    """
    p = as_point(p)
    if step <= 0:
        raise ValueError("step must be positive")
    h = step if contains is None else _stencil_step(contains, p, step)
    eye = np.eye(DIM)
    v = np.asarray(fn(p), dtype=float)
    d = np.zeros(v.shape + (DIM,))
    dd = np.zeros(v.shape + (DIM, DIM))
    plus = [np.asarray(fn(p + h * eye[i]), float) for i in range(DIM)]
    minus = [np.asarray(fn(p - h * eye[i]), float) for i in range(DIM)]
    for i in range(DIM):
        d[..., i] = (plus[i] - minus[i]) / (2 * h)
        dd[..., i, i] = (plus[i] - 2 * v + minus[i]) / (h * h)
        for j in range(i + 1, DIM):
            pp = np.asarray(fn(p + h * (eye[i] + eye[j])), float)
            pm = np.asarray(fn(p + h * (eye[i] - eye[j])), float)
            mp = np.asarray(fn(p + h * (-eye[i] + eye[j])), float)
            mm = np.asarray(fn(p - h * (eye[i] + eye[j])), float)
            dd[..., i, j] = dd[..., j, i] = (pp - pm - mp + mm) / (4 * h * h)
    return v, d, dd


def finite_difference_jet(f: ScalarField, p, step: float = DEFAULT_STEP) -> Jet2:
    """Central-difference oracle for :func:`evaluate` (no Taylor arithmetic)."""
    p = as_point(p)
    if not f.domain.contains(p):
        raise DomainError(f"point {p} outside domain of {f.name or 'field'}")

    def plain(q):
        with np.errstate(all="ignore"):
            return float(f.fn([float(c) for c in q]))

    v, d, dd = fd_derivatives(plain, p, step, f.domain.contains)
    return _check_finite(Jet2(float(v), d, dd), p)


def jet_array(fn: Callable[[Sequence[Any]], Any], p):
    """Evaluate an array-valued field on jet seeds.

    Returns ``(v, d, dd)`` shaped like :func:`fd_derivatives`.  Entries the
    field returns as plain numbers are treated as constants.
    """
    p = as_point(p)
    try:
        with np.errstate(all="ignore"):
            out = np.asarray(fn(seed(p)), dtype=object)
    except (ZeroDivisionError, OverflowError) as exc:
        raise NonFiniteError(f"{exc} at {p}") from exc
    v = np.zeros(out.shape)
    d = np.zeros(out.shape + (DIM,))
    dd = np.zeros(out.shape + (DIM, DIM))
    for idx in np.ndindex(out.shape):
        e = out[idx]
        if isinstance(e, Jet2):
            v[idx] = float(e.value)
            d[idx] = np.asarray(e.grad, float)
            dd[idx] = np.asarray(e.hess, float)
        else:
            v[idx] = float(e)
    dd = 0.5 * (dd + np.swapaxes(dd, -1, -2))
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(d)) and np.all(np.isfinite(dd))):
        raise NonFiniteError(f"non-finite jet at {p}")
    return v, d, dd


def float_array(fn: Callable[[Sequence[Any]], Any], p) -> np.ndarray:
    """Plain-float evaluation of an array-valued field (no jets)."""
    with np.errstate(all="ignore"):
        return np.asarray(fn([float(c) for c in p]), dtype=float)


def hessian_jets(potential: Callable[[Sequence[Any]], Any], x: Sequence[Any]) -> np.ndarray:
    """Hessian of ``potential`` at ``x`` where ``x`` may itself be jets.

    With float ``x`` this is an ordinary Hessian.  With jet ``x`` each entry is
    a jet, i.e. the Hessian comes back differentiable to second order.
    """
    n = len(x)
    inner = [Jet2(xi, np.eye(n)[i], np.zeros((n, n))) for i, xi in enumerate(x)]
    out = potential(inner)
    if not isinstance(out, Jet2):
        return np.zeros((n, n))
    return np.asarray(out.hess, dtype=object)
