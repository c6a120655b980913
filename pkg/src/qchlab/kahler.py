"""Complex structures, J-invariant distributions and Kahler checks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import tensor as T
from .curvature import (
    MetricField,
    christoffel,
    curvature_from_riemann,
    half_spectrum,
    riemann_from_connection,
    connection_from_derivatives,
)
from .errors import (
    DegenerateDistributionError,
    DistributionInvarianceError,
    NoSimpleEigenvalueError,
    NotComplexStructureError,
    NotPositiveError,
)
from .jet import WHOLE_SPACE, Chart, ScalarField, as_point, float_array, hessian_jets, jet_array, evaluate

STANDARD_J = np.array(
    [
        [0.0, -1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, -1.0],
        [0.0, 0.0, 1.0, 0.0],
    ]
)
"""Multiplication by i on the chart ``(x1, y1, x2, y2)``: ``J d/dx = d/dy``."""


class ComplexStructureField:
    """Almost complex structure on a chart, as mixed components ``J^i_j``.

    Build it either from the endomorphism directly or from a 2-form ``w`` and
    a metric via ``w(X, Y) = g(J X, Y)``.
    """

    def __init__(self, fn: Callable[[Sequence[Any]], Any], domain: Chart = WHOLE_SPACE, name: str = ""):
        self._fn = fn
        self._form = None
        self._metric = None
        self.domain = domain
        self.name = name

    @classmethod
    def constant(cls, J, name: str = "constant") -> "ComplexStructureField":
        J = np.array(J, dtype=float)
        return cls(lambda x: J, name=name)

    @classmethod
    def from_form(cls, form: Callable[[Sequence[Any]], Any], metric: MetricField, name: str = "") -> "ComplexStructureField":
        field = cls(None, metric.domain, name)
        field._form = form
        field._metric = metric
        return field

    def jet(self, p):
        """``(J, dJ)`` with ``dJ[i, j, k] = d_k J^i_j``."""
        p = as_point(p)
        if self._form is None:
            J, dJ, _ = jet_array(self._fn, p)
            return J, dJ
        g, dg, _ = self._metric.jet(p)
        w, dw, _ = jet_array(self._form, p)
        gi = np.linalg.inv(g)
        dgi = -np.einsum("ia,abk,bj->ijk", gi, dg, gi)
        J = -gi @ w
        dJ = -np.einsum("iak,aj->ijk", dgi, w) - np.einsum("ia,ajk->ijk", gi, dw)
        return J, dJ

    def value(self, p) -> np.ndarray:
        p = as_point(p)
        if self._form is None:
            return float_array(self._fn, p)
        return T.form_to_endomorphism(float_array(self._form, p), self._metric.value(p))

    def form(self, p) -> np.ndarray:
        if self._form is not None:
            return float_array(self._form, as_point(p))
        raise AttributeError("structure was not built from a form")


class DistributionField:
    """Rank-2 distribution given by two spanning vector fields.

    ``vectors(p)`` returns a 4x2 array whose columns span the distribution at
    ``p``.  No derivatives of the spanning fields are ever needed.
    """

    def __init__(self, vectors: Callable[[np.ndarray], np.ndarray], name: str = ""):
        self.vectors = vectors
        self.name = name

    def __call__(self, p) -> np.ndarray:
        return np.asarray(self.vectors(as_point(p)), float).reshape(4, 2)

    @classmethod
    def j_closure(cls, vector: Callable[[np.ndarray], np.ndarray], J: ComplexStructureField, name: str = "") -> "DistributionField":
        """``span(V, J V)`` for a single vector field ``V``."""

        def vectors(p):
            v = np.asarray(vector(p), float)
            return np.column_stack([v, J.value(p) @ v])

        return cls(vectors, name)

    @classmethod
    def kernel(cls, J, Jbar, sign: int = +1, name: str = "") -> "DistributionField":
        """``ker(J Jbar + sign Id)``; ``sign=+1`` is where ``Jbar = J``."""

        def vectors(p):
            return kernel_vectors(J.value(p), Jbar.value(p), sign)

        return cls(vectors, name)


def kernel_vectors(J, Jbar, sign: int = +1) -> np.ndarray:
    A = np.asarray(J, float) @ np.asarray(Jbar, float) + sign * np.eye(4)
    _, s, vt = np.linalg.svd(A)
    return vt[2:].T


def orthogonal_projector(vectors, g) -> np.ndarray:
    """g-orthogonal projector (as an endomorphism) onto the span of the columns."""
    V = np.asarray(vectors, float)
    gram = V.T @ g @ V
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e8:
        raise DegenerateDistributionError(f"spanning vectors are dependent (condition {cond:.3g})")
    return V @ np.linalg.solve(gram, V.T @ g)


@dataclass(frozen=True)
class HermitianData:
    """Pointwise data attached to ``(g, J, D)``; endomorphisms are mixed ``A^i_j``."""

    g: np.ndarray
    J: np.ndarray
    omega: np.ndarray
    p_D: np.ndarray
    p_E: np.ndarray
    h: np.ndarray
    m: np.ndarray
    h_J: np.ndarray
    m_J: np.ndarray
    Jbar: np.ndarray
    omega_bar: np.ndarray
    basis_D: np.ndarray
    basis_E: np.ndarray

    def swapped(self) -> "HermitianData":
        """The same data with the roles of D and E exchanged."""
        return hermitian_data_at(self.g, self.J, self.basis_E)


def _orthonormal_pair(vectors, g):
    out = []
    for v in np.asarray(vectors, float).T:
        for u in out:
            v = v - (u @ g @ v) * u
        out.append(v / np.sqrt(v @ g @ v))
    return np.column_stack(out)


def hermitian_data_at(g, J, vectors, invariance_tol: float = 1e-8) -> HermitianData:
    """Projectors, ``h``, ``m``, ``Jbar`` and the two Kahler forms at one point."""
    g = T.check_sym2(g)
    J = np.asarray(J, float)
    p_D = orthogonal_projector(vectors, g)
    p_E = np.eye(4) - p_D
    leak = np.abs(p_E @ J @ p_D).max()
    if leak > invariance_tol:
        raise DistributionInvarianceError(f"distribution is not J-invariant (leak {leak:.3g})")
    h = p_D.T @ g @ p_D
    m = p_E.T @ g @ p_E
    h, m = 0.5 * (h + h.T), 0.5 * (m + m.T)
    Jbar = J @ (p_D - p_E)
    basis_D = _orthonormal_pair(vectors, g)
    u = None
    for e in np.eye(4):
        w = p_E @ e
        if w @ g @ w > 1e-6:
            u = w / np.sqrt(w @ g @ w)
            break
    basis_E = np.column_stack([u, J @ u])
    return HermitianData(
        g=g,
        J=J,
        omega=T.endomorphism_to_form(J, g),
        p_D=p_D,
        p_E=p_E,
        h=h,
        m=m,
        h_J=J.T @ h,
        m_J=J.T @ m,
        Jbar=Jbar,
        omega_bar=T.endomorphism_to_form(Jbar, g),
        basis_D=basis_D,
        basis_E=basis_E,
    )


def hermitian_data(metric: MetricField, J: ComplexStructureField, D: DistributionField, p) -> HermitianData:
    p = as_point(p)
    return hermitian_data_at(metric.value(p), J.value(p), D(p))


# parallelism -------------------------------------------------------------


def covariant_derivative_endomorphism(gamma, J, dJ) -> np.ndarray:
    """``nabla J`` as ``[i, j, k] = (nabla_k J)^i_j``."""
    return dJ + np.einsum("ikl,lj->ijk", gamma, J) - np.einsum("lkj,il->ijk", gamma, J)


def endomorphism_derivative_norm(g, nJ) -> float:
    gi = np.linalg.inv(g)
    sq = np.einsum("ia,jb,kc,ijk,abc->", g, gi, gi, nJ, nJ)
    return float(np.sqrt(max(sq, 0.0)))


def kahler_residual(metric: MetricField, J: ComplexStructureField, p) -> float:
    """``|nabla J|`` at ``p``; zero exactly when ``(g, J)`` is Kahler there."""
    p = as_point(p)
    conn = christoffel(metric, p)
    Jm, dJ = J.jet(p)
    return endomorphism_derivative_norm(metric.value(p), covariant_derivative_endomorphism(conn.gamma, Jm, dJ))


def killing_residual(metric: MetricField, vector: Callable[[Sequence[Any]], Any], p) -> float:
    """Max-norm of ``L_X g`` for a vector field given by its components."""
    p = as_point(p)
    g, dg, _ = metric.jet(p)
    X, dX, _ = jet_array(vector, p)
    # (L_X g)_ij = X^k d_k g_ij + g_kj d_i X^k + g_ik d_j X^k
    lie = np.einsum("k,ijk->ij", X, dg) + np.einsum("kj,ki->ij", g, dX) + np.einsum("ik,kj->ij", g, dX)
    return float(np.abs(lie).max())


# curvature identities ------------------------------------------------------


def gray_g2_residual(R, Jb) -> float:
    """Max over all slots of ``R - R(Jb., Jb., ., .) - R(Jb., ., Jb., .) - R(Jb., ., ., Jb.)``."""
    R = T.check_tensor4(R)
    lhs = R - T.apply_endomorphism(T.apply_endomorphism(R, Jb, 0), Jb, 1)
    rhs = T.apply_endomorphism(T.apply_endomorphism(R, Jb, 0), Jb, 2) + T.apply_endomorphism(
        T.apply_endomorphism(R, Jb, 0), Jb, 3
    )
    return float(np.abs(lhs - rhs).max())


def ricci_j_invariance_residual(ric, Jb, norm: str = "max") -> float:
    """Size of ``Ric(Jb., Jb.) - Ric``; ``norm`` is ``"max"`` or ``"fro"``."""
    ric = np.asarray(ric, float)
    Jb = np.asarray(Jb, float)
    diff = Jb.T @ ric @ Jb - ric
    return float(np.abs(diff).max() if norm == "max" else np.linalg.norm(diff))


# potentials ---------------------------------------------------------------


def _complex_hessian_metric(H, J0=STANDARD_J):
    # Re of d d-bar K in real coordinates: g = (H + J0^T H J0) / 4
    return (H + J0.T.dot(H).dot(J0)) / 4.0


def metric_from_potential(K: ScalarField, p) -> tuple[np.ndarray, np.ndarray]:
    """Metric and complex structure at ``p`` from a Kahler potential on ``(x1, y1, x2, y2)``."""
    jet = evaluate(K, p)
    g = _complex_hessian_metric(jet.hess)
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveError(f"complex Hessian of the potential is not positive at {p}") from exc
    return g, STANDARD_J.copy()


def potential_metric(potential: Callable[[Sequence[Any]], Any], domain: Chart = WHOLE_SPACE, name: str = "") -> MetricField:
    """Metric field of a Kahler potential, differentiable to second order.

    Uses nested jets so the metric's own derivatives (third and fourth
    derivatives of the potential) are exact.
    """

    def comps(x):
        H = hessian_jets(potential, x)
        return _complex_hessian_metric(np.asarray(H, dtype=object))

    return MetricField(comps, domain, name or "potential")


# recovery of an unknown Kahler structure -----------------------------------


def _simple_eigenform(metric: MetricField, p, orientation: int):
    g, dg, ddg = metric.jet(p)
    R = riemann_from_connection(g, connection_from_derivatives(g, dg, ddg))
    cd = curvature_from_riemann(R, g, None, p)
    half = T.half_projection(cd.weyl, g, orientation, +1)
    spec = half_spectrum(half, g, T.lambda2_split(g, orientation).plus)
    if spec.simple_index is None:
        raise NoSimpleEigenvalueError(f"Weyl half of orientation {orientation:+d} has no simple eigenvalue at {p}")
    return g, spec.simple_form


def _canonical_sign(w):
    flat = w[np.triu_indices(4, 1)]
    k = int(np.argmax(np.abs(flat)))
    return w if flat[k] > 0 else -w


def eigen_structure(metric: MetricField, p, orientation: int, reference=None) -> np.ndarray:
    """Complex structure whose form is the simple Weyl eigenform at ``p``.

    The sign is aligned with ``reference`` when given, otherwise fixed by
    making the largest upper-triangular form component positive.
    """
    p = as_point(p)
    g, w = _simple_eigenform(metric, p, orientation)
    if reference is None:
        w = _canonical_sign(w)
    else:
        ref_w = T.endomorphism_to_form(reference, g)
        if T.form_inner(w, ref_w, g) < 0:
            w = -w
    J = T.form_to_endomorphism(w, g)
    if np.abs(J @ J + np.eye(4)).max() > 1e-6:
        raise NotComplexStructureError(f"recovered endomorphism does not square to -Id at {p}")
    return J


def structure_derivative_fd(metric: MetricField, p, orientation: int, J=None, step: float = 1e-4):
    """``(J, dJ)`` for the eigen-structure, ``dJ`` by central differences."""
    p = as_point(p)
    J = eigen_structure(metric, p, orientation) if J is None else J
    dJ = np.zeros((4, 4, 4))
    for k in range(4):
        e = np.eye(4)[k] * step
        Jp = eigen_structure(metric, p + e, orientation, reference=J)
        Jm = eigen_structure(metric, p - e, orientation, reference=J)
        dJ[:, :, k] = (Jp - Jm) / (2 * step)
    return J, dJ


def recover_kahler_structure(metric: MetricField, p, orientation: Optional[int] = None, step: float = 1e-4):
    """Recover a parallel complex structure from the Weyl tensor.

    Returns ``(J, residual)`` where ``residual`` is ``|nabla J|`` at ``p``.
    With ``orientation=None`` both orientations are tried and the one with
    the smaller residual wins.
    """
    p = as_point(p)
    if orientation is None:
        best, err = None, None
        for o in (1, -1):
            try:
                cand = recover_kahler_structure(metric, p, o, step)
            except NoSimpleEigenvalueError as exc:
                err = exc
                continue
            if best is None or cand[1] < best[1]:
                best = cand
        if best is None:
            raise err
        return best
    J, dJ = structure_derivative_fd(metric, p, orientation, step=step)
    conn = christoffel(metric, p)
    res = endomorphism_derivative_norm(metric.value(p), covariant_derivative_endomorphism(conn.gamma, J, dJ))
    return J, res


def kahler_nullity(metric: MetricField, p, orientation: int, J=None, step: float = 1e-4, rank: int = 2):
    """Basis (columns) of ``{X : nabla_X J = 0}`` for the eigen-structure of ``orientation``.

    Returns ``(vectors, singular_values)``; the kernel is taken as the span of
    the ``rank`` smallest right singular vectors of ``X -> nabla_X J``.
    """
    p = as_point(p)
    J, dJ = structure_derivative_fd(metric, p, orientation, J=J, step=step)
    conn = christoffel(metric, p)
    nJ = covariant_derivative_endomorphism(conn.gamma, J, dJ)
    A = nJ.reshape(16, 4)
    _, s, vt = np.linalg.svd(A)
    return vt[4 - rank :].T, s
