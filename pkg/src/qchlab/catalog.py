"""Closed-form Kahler surfaces used as test beds.

Polynomials (``V``, ``F``, ``G``) are coefficient lists in increasing degree:
``[1, 0, 1]`` is ``1 + z^2``.

Charts
------
``space_form``   (x1, y1, x2, y2), potential ``4/c0 log(1 + c0 |z|^2 / 4)``
``product``      (x1, y1, x2, y2), each factor ``4|dz|^2 / (1 + k|z|^2)^2``
``calabi``       (x, y, z, t), ``g = z g_S + z/V dz^2 + V/z (dt + alpha)^2``
``orthotoric``   (xi, eta, z, t)
``kowalski``     (x, y, u, v), the proper 3-symmetric metric
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Any, Optional, Sequence

import numpy as np

from . import tensor as T
from .curvature import MetricField, curvature_data
from .errors import BadParameterError, SignatureError, SingularMetricError
from .jet import Chart, as_point, cos, log, sin, sqrt
from .kahler import (
    STANDARD_J,
    ComplexStructureField,
    DistributionField,
    eigen_structure,
    hermitian_data_at,
    kahler_nullity,
    kahler_residual,
    potential_metric,
)

FAMILIES = ("space_form", "product", "calabi", "orthotoric", "kowalski")


def polyval(coeffs: Sequence[float], x):
    """Horner evaluation, increasing-degree coefficients; works on jets."""
    out = 0.0
    for c in reversed(list(coeffs)):
        out = out * x + c
    return out


def polyder(coeffs: Sequence[float], order: int = 1) -> list:
    c = list(coeffs)
    for _ in range(order):
        c = [k * c[k] for k in range(1, len(c))] or [0.0]
    return c


# family specifications -----------------------------------------------------


@dataclass(frozen=True)
class SpaceForm:
    c0: float = 4.0


@dataclass(frozen=True)
class ProductSurfaces:
    k1: float = 1.0
    k2: float = 1.0


@dataclass(frozen=True)
class CalabiType:
    V: tuple = (1.0, 0.0, 1.0)
    sigma_curvature: float = 0.0


@dataclass(frozen=True)
class Orthotoric:
    F: tuple = (1.0, 0.0, 0.0, 1.0)
    G: tuple = (-1.0, 0.0, 0.0, 1.0)


@dataclass(frozen=True)
class Kowalski:
    pass


_SPECS = {
    "space_form": SpaceForm,
    "product": ProductSurfaces,
    "calabi": CalabiType,
    "orthotoric": Orthotoric,
    "kowalski": Kowalski,
}


def family_spec(name: str, params: Optional[dict] = None):
    """Build a family spec from a name and a parameter mapping."""
    try:
        cls = _SPECS[name]
    except KeyError:
        raise BadParameterError(f"unknown family {name!r}; choose from {', '.join(FAMILIES)}") from None
    params = dict(params or {})
    for key in ("V", "F", "G"):
        if key in params:
            params[key] = tuple(float(v) for v in params[key])
    try:
        return cls(**params)
    except TypeError as exc:
        raise BadParameterError(str(exc)) from None


def spec_name(spec) -> str:
    for name, cls in _SPECS.items():
        if isinstance(spec, cls):
            return name
    raise BadParameterError(f"not a family spec: {spec!r}")


@dataclass(frozen=True)
class RecoveryDirective:
    """Complex structure to be recovered from the Weyl tensor in ``orientation``."""

    orientation: int


@dataclass
class FamilyInstance:
    """A metric family ready for pointwise verification.

    ``complex_structure`` is a field, or a :class:`RecoveryDirective` for the
    Kowalski metric.  ``jbar`` is the opposite structure when the family
    supplies it in closed form; otherwise it is ``J (p_D - p_E)``.
    ``extras`` holds family-specific callables (delta formulas, conformal
    Kahler metrics, Killing fields).  ``tolerance_floor`` is the smallest
    tolerance the family's identities can be held to.
    """

    name: str
    spec: Any
    metric: MetricField
    complex_structure: Any
    distribution: DistributionField
    chart: Chart
    jbar: Optional[ComplexStructureField] = None
    expected: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    tolerance_floor: float = 0.0

    def J_at(self, p) -> np.ndarray:
        if isinstance(self.complex_structure, RecoveryDirective):
            return eigen_structure(self.metric, p, self.complex_structure.orientation)
        return self.complex_structure.value(p)

    def hermitian_at(self, p, J=None):
        p = as_point(p)
        J = self.J_at(p) if J is None else J
        return hermitian_data_at(self.metric.value(p), J, self.distribution(p))

    def jbar_at(self, p, hd=None) -> np.ndarray:
        if self.jbar is not None:
            return self.jbar.value(p)
        hd = self.hermitian_at(p) if hd is None else hd
        return hd.Jbar

    def sample(self, n: int, seed: int = 0, margin: float = 0.1) -> np.ndarray:
        return self.chart.sample(np.random.default_rng(seed), n, margin)


def _grid(chart: Chart, n: int, margin: float = 0.1):
    lo, hi = chart.shrunk(margin)
    axes = [np.linspace(l, h, n) for l, h in zip(lo, hi)]
    for p in itertools.product(*axes):
        p = np.array(p)
        if chart.contains(p):
            yield p


def probe(instance: FamilyInstance, n_metric: int = 5, n_kahler: int = 3, tol: float = 1e-8):
    """Instantiation checks: Riemannian signature on a grid, Kahler where J is explicit."""
    grid = list(_grid(instance.chart, n_metric))
    if not grid:
        raise BadParameterError(f"{instance.name}: no probe point lies inside the chart")
    for p in grid:
        try:
            instance.metric.value(p)
        except SingularMetricError as exc:
            raise SignatureError(f"{instance.name}: metric is not Riemannian at {p}") from exc
    worst = 0.0
    if isinstance(instance.complex_structure, ComplexStructureField):
        for p in _grid(instance.chart, n_kahler):
            worst = max(worst, kahler_residual(instance.metric, instance.complex_structure, p))
        if worst > tol:
            raise BadParameterError(f"{instance.name}: complex structure is not Kahler (|nabla J| = {worst:.3g})")
    return worst


# builders -----------------------------------------------------------------


def _coordinate_field(index: int):
    e = np.eye(4)[index]
    return lambda p: e


def _space_form(spec: SpaceForm) -> FamilyInstance:
    c0 = float(spec.c0)
    half = 0.5 if c0 >= 0 else min(0.5, 0.8 / np.sqrt(abs(c0)))
    if c0 == 0:
        potential = lambda x: x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3]
    else:
        potential = lambda x: (4.0 / c0) * log(1.0 + (c0 / 4.0) * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3]))
    chart = Chart((-half,) * 4, (half,) * 4, names=("x1", "y1", "x2", "y2"))
    metric = potential_metric(potential, chart, f"space_form(c0={c0})")
    J = ComplexStructureField.constant(STANDARD_J, "standard")
    D = DistributionField(lambda p: np.eye(4)[:, :2], "span(d/dx1, d/dy1)")
    return FamilyInstance(
        "space_form",
        spec,
        metric,
        J,
        D,
        chart,
        expected={"a": c0, "b": 0.0, "c": 0.0, "lambda": 1.5 * c0, "mu": 1.5 * c0},
        flags={"einstein": True, "self_dual": True, "product": False},
        extras={"potential": potential},
    )


def _surface_factor(k):
    def factor(u, v):
        return 4.0 / (1.0 + k * (u * u + v * v)) ** 2

    return factor


def _product(spec: ProductSurfaces) -> FamilyInstance:
    k1, k2 = float(spec.k1), float(spec.k2)
    worst = max(abs(k1), abs(k2), 1e-12)
    half = min(0.5, 0.6 / np.sqrt(worst))
    f1, f2 = _surface_factor(k1), _surface_factor(k2)

    def comps(x):
        s1 = f1(x[0], x[1])
        s2 = f2(x[2], x[3])
        return [[s1, 0.0, 0.0, 0.0], [0.0, s1, 0.0, 0.0], [0.0, 0.0, s2, 0.0], [0.0, 0.0, 0.0, s2]]

    chart = Chart((-half,) * 4, (half,) * 4, names=("x1", "y1", "x2", "y2"))
    metric = MetricField(comps, chart, f"product(k1={k1}, k2={k2})")
    J = ComplexStructureField.constant(STANDARD_J, "standard")
    D = DistributionField(lambda p: np.eye(4)[:, :2], "first factor")
    return FamilyInstance(
        "product",
        spec,
        metric,
        J,
        D,
        chart,
        expected={"a": k2, "b": -2 * k2, "c": k1 + k2, "lambda": k2, "mu": k1},
        flags={"einstein": k1 == k2, "self_dual": k1 + k2 == 0, "product": True},
    )


def _calabi(spec: CalabiType) -> FamilyInstance:
    V = tuple(float(v) for v in spec.V)
    k = float(spec.sigma_curvature)
    if not any(V):
        raise BadParameterError("V must be a non-zero polynomial")

    def sigma_data(x, y):
        # conformal factor of g_Sigma, and alpha with d(alpha) = omega_Sigma
        if k == 0:
            return 1.0, 0.0, x
        s = 1.0 + k * (x * x + y * y)
        return 4.0 / (s * s), -2.0 * y / s, 2.0 * x / s

    def pieces(x):
        X, Y, Z = x[0], x[1], x[2]
        sig, ax, ay = sigma_data(X, Y)
        v = polyval(V, Z)
        theta = [ax, ay, 0.0, 1.0]
        return sig, theta, v, Z

    def comps(x):
        sig, theta, v, z = pieces(x)
        w = v / z
        g = [[w * theta[i] * theta[j] for j in range(4)] for i in range(4)]
        g[0][0] = g[0][0] + z * sig
        g[1][1] = g[1][1] + z * sig
        g[2][2] = g[2][2] + z / v
        return g

    def kahler_form(sign):
        def form(x):
            sig, theta, v, z = pieces(x)
            w = [[0.0] * 4 for _ in range(4)]
            w[0][1] = z * sig
            w[1][0] = -z * sig
            for j in range(4):
                # dz ^ theta
                w[2][j] = w[2][j] + sign * theta[j]
                w[j][2] = w[j][2] - sign * theta[j]
            return w

        return form

    def inside(p):
        return p[2] > 0 and polyval(V, p[2]) > 0

    lo_xy = -1.0 if k >= 0 else -min(1.0, 0.6 / np.sqrt(abs(k)))
    chart = Chart((lo_xy, lo_xy, 0.5, -1.0), (-lo_xy, -lo_xy, 2.0, 1.0), inside, ("x", "y", "z", "t"))
    metric = MetricField(comps, chart, f"calabi(V={V}, k={k})")
    J = ComplexStructureField.from_form(kahler_form(+1), metric, "J")
    # I = J on span(xi, J xi) and -J on its complement; its Kahler form is
    # -(z omega_Sigma - dz ^ theta)
    def omega_I(x):
        return [[-c for c in row] for row in kahler_form(-1)(x)]

    I = ComplexStructureField.from_form(omega_I, metric, "I")
    D = DistributionField.j_closure(_coordinate_field(3), J, "span(xi, J xi)")
    tau_sigma = 2.0 * k

    def delta(p):
        z = p[2]
        dV = polyder(V)
        d2V = polyder(V, 2)
        # (V'/z^2)' z^2 = V'' - 2 V'/z
        inner = polyval(d2V, z) - 2.0 * polyval(dV, z) / z
        return -(tau_sigma + inner) / (4.0 * z)

    return FamilyInstance(
        "calabi",
        spec,
        metric,
        J,
        D,
        chart,
        jbar=I,
        flags={"einstein": False, "self_dual": False, "product": False},
        extras={
            "delta": delta,
            # Kahler for I; the inverse square of the momentum z is what works
            "conformal_metric": metric.conformal(lambda x: 1.0 / (x[2] * x[2]), "z^-2 g"),
            "killing": [lambda x: [0.0, 0.0, 0.0, 1.0]],
            "omega_I": omega_I,
            "omega_I_flipped": kahler_form(-1),
        },
    )


def _orthotoric(spec: Orthotoric) -> FamilyInstance:
    F = tuple(float(v) for v in spec.F)
    G = tuple(float(v) for v in spec.G)

    def comps(x):
        xi, eta = x[0], x[1]
        f, gg = polyval(F, xi), polyval(G, eta)
        d = xi - eta
        a = [eta, 1.0]  # dt + eta dz on (z, t)
        b = [xi, 1.0]  # dt + xi dz
        g = [[0.0] * 4 for _ in range(4)]
        g[0][0] = d / f
        g[1][1] = -d / gg
        for i in range(2):
            for j in range(2):
                g[2 + i][2 + j] = (f * a[i] * a[j] - gg * b[i] * b[j]) / d
        return g

    def kahler_form(sign):
        def form(x):
            xi, eta = x[0], x[1]
            w = [[0.0] * 4 for _ in range(4)]
            # d xi ^ (dt + eta dz) + sign d eta ^ (dt + xi dz)
            w[0][2], w[0][3] = eta, 1.0
            w[2][0], w[3][0] = -eta, -1.0
            w[1][2], w[1][3] = sign * xi, sign * 1.0
            w[2][1], w[3][1] = -sign * xi, -sign * 1.0
            return w

        return form

    def inside(p):
        return p[0] > p[1] and polyval(F, p[0]) > 0 and polyval(G, p[1]) < 0

    chart = Chart((1.1, -2.0, -1.0, -1.0), (2.0, -1.1, 1.0, 1.0), inside, ("xi", "eta", "z", "t"))
    metric = MetricField(comps, chart, f"orthotoric(F={F}, G={G})")
    J = ComplexStructureField.from_form(kahler_form(+1), metric, "J")
    Jbar = ComplexStructureField.from_form(kahler_form(-1), metric, "Jbar")
    D = DistributionField.kernel(J, Jbar, +1, "ker(J Jbar + Id)")

    def delta(p):
        xi, eta = p[0], p[1]
        d = xi - eta
        d1 = polyval(polyder(F), xi) - polyval(polyder(G), eta)
        d2 = polyval(polyder(F, 2), xi) + polyval(polyder(G, 2), eta)
        return d1 / (2.0 * d * d) - d2 / (4.0 * d)

    return FamilyInstance(
        "orthotoric",
        spec,
        metric,
        J,
        D,
        chart,
        jbar=Jbar,
        flags={"einstein": False, "self_dual": False, "product": False},
        extras={
            "delta": delta,
            # Kahler for Jbar; the inverse square of xi - eta is what works
            "conformal_metric": metric.conformal(lambda x: 1.0 / ((x[0] - x[1]) * (x[0] - x[1])), "(xi - eta)^-2 g"),
            "killing": [lambda x: [0.0, 0.0, 0.0, 1.0], lambda x: [0.0, 0.0, 1.0, 0.0]],
        },
    )


# orientation of the chart (x, y, u, v) in which the Kowalski metric is Kahler
KOWALSKI_KAHLER_ORIENTATION = 1


def kowalski_metric() -> MetricField:
    def comps(x):
        X, Y = x[0], x[1]
        r = 1.0 + X * X + Y * Y
        s = sqrt(r)
        g = [[0.0] * 4 for _ in range(4)]
        g[0][0] = (1.0 + Y * Y) / r
        g[1][1] = (1.0 + X * X) / r
        g[0][1] = g[1][0] = -X * Y / r
        g[2][2] = -X + s
        g[3][3] = X + s
        g[2][3] = g[3][2] = -Y
        return g

    chart = Chart((-1.0,) * 4, (1.0,) * 4, names=("x", "y", "u", "v"))
    return MetricField(comps, chart, "kowalski")


def _kowalski(spec: Kowalski) -> FamilyInstance:
    metric = kowalski_metric()
    orient = KOWALSKI_KAHLER_ORIENTATION

    def vectors(p):
        # D is the orthogonal complement of the Kahler nullity of Jbar
        nullity, _ = kahler_nullity(metric, p, -orient)
        g = metric.value(p)
        _, _, vt = np.linalg.svd(nullity.T @ g)
        return vt[2:].T

    D = DistributionField(vectors, "complement of the Kahler nullity of Jbar")
    return FamilyInstance(
        "kowalski",
        spec,
        metric,
        RecoveryDirective(orient),
        D,
        metric.domain,
        flags={"einstein": False, "self_dual": False, "product": False, "homogeneous": True},
        tolerance_floor=1e-5,
    )


_BUILDERS = {
    SpaceForm: _space_form,
    ProductSurfaces: _product,
    CalabiType: _calabi,
    Orthotoric: _orthotoric,
    Kowalski: _kowalski,
}


def instantiate(spec, check: bool = True) -> FamilyInstance:
    """Build a family instance; with ``check`` run the signature and Kahler probes."""
    try:
        builder = _BUILDERS[type(spec)]
    except KeyError:
        raise BadParameterError(f"not a family spec: {spec!r}") from None
    instance = builder(spec)
    if check:
        probe(instance)
    return instance


@lru_cache(maxsize=32)
def _cached(name: str, frozen_params: tuple) -> FamilyInstance:
    return instantiate(family_spec(name, dict(frozen_params)))


def make_family(name: str, params: Optional[dict] = None) -> FamilyInstance:
    """Instantiate by name; instances for identical parameters are shared."""
    params = dict(params or {})
    frozen = tuple(sorted((k, tuple(v) if isinstance(v, (list, tuple)) else v) for k, v in params.items()))
    return _cached(name, frozen)


def bump(x):
    """Smooth non-constant function used to spoil the Kahler condition."""
    return sin(2.0 * x[0] + x[1]) + cos(x[2] - 2.0 * x[3])


def perturbed(instance: FamilyInstance, eps: float = 1e-3) -> FamilyInstance:
    """Negative control: ``(1 + eps * bump) g``, still Hermitian for J but not Kahler.

    The closed-form ``jbar`` is dropped so ``J (p_D - p_E)`` is used instead.
    """
    if not isinstance(instance.complex_structure, ComplexStructureField):
        raise BadParameterError("perturbation needs a closed-form complex structure")
    metric = instance.metric.conformal(lambda x: 1.0 + eps * bump(x), f"{instance.metric.name} + bump")
    return replace(
        instance,
        name=f"{instance.name}+bump",
        metric=metric,
        jbar=None,
        expected={},
        flags={**instance.flags, "perturbed": True},
        extras={},
    )


def with_coordinate_distribution(instance: FamilyInstance, indices: Sequence[int]) -> FamilyInstance:
    """Replace D by the span of two coordinate vectors (generally not J-invariant)."""
    idx = [int(i) for i in indices]
    if len(idx) != 2 or len(set(idx)) != 2 or not all(0 <= i < 4 for i in idx):
        raise BadParameterError(f"distribution needs two distinct coordinate indices, got {indices!r}")
    vectors = np.eye(4)[:, idx]
    D = DistributionField(lambda p: vectors, f"span(e{idx[0]}, e{idx[1]})")
    return replace(instance, distribution=D, jbar=None, expected={})


# family-specific checks ----------------------------------------------------


def orthotoric_delta_check(instance: FamilyInstance, p) -> float:
    """Max-norm of ``rho0 - delta omega_bar`` with the closed-form ``delta``."""
    if instance.name != "orthotoric":
        raise BadParameterError("orthotoric_delta_check needs an orthotoric instance")
    p = as_point(p)
    cd = curvature_data(instance.metric, instance.complex_structure, p)
    wbar = T.endomorphism_to_form(instance.jbar.value(p), cd.g)
    return float(np.abs(cd.rho0 - instance.extras["delta"](p) * wbar).max())


def calabi_delta_check(instance: FamilyInstance, p) -> float:
    """Max-norm of ``rho0 - delta omega_I`` with the closed-form ``delta``."""
    if instance.name != "calabi":
        raise BadParameterError("calabi_delta_check needs a Calabi-type instance")
    p = as_point(p)
    cd = curvature_data(instance.metric, instance.complex_structure, p)
    w_I = np.asarray(instance.extras["omega_I"]([float(c) for c in p]), float)
    return float(np.abs(cd.rho0 - instance.extras["delta"](p) * w_I).max())
