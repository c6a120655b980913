"""Metric to curvature: Christoffel symbols, Riemann, Ricci, Weyl and its halves.

Sign convention: ``R(X, Y)Z = [nabla_X, nabla_Y]Z - nabla_[X,Y] Z`` and
``R(X, Y, Z, U) = g(R(X, Y)Z, U)``, so ``R(X, Y, Y, X)`` is the sectional
curvature of the plane spanned by orthonormal ``X, Y`` (positive on spheres).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import tensor as T
from .errors import NoSimpleEigenvalueError, ShapeError, SingularMetricError
from .jet import DEFAULT_STEP, WHOLE_SPACE, Chart, as_point, fd_derivatives, float_array, jet_array


class MetricField:
    """Riemannian metric on a chart.

    ``components`` maps four coordinates (floats or jets) to a 4x4 array-like
    of covariant components ``g_ij``; computing all entries in one call lets
    them share subexpressions.
    """

    def __init__(self, components: Callable[[Sequence[Any]], Any], domain: Chart = WHOLE_SPACE, name: str = ""):
        self.components = components
        self.domain = domain
        self.name = name

    def __repr__(self):
        return f"MetricField({self.name!r})"

    def _check_point(self, p):
        from .errors import DomainError

        p = as_point(p)
        if not self.domain.contains(p):
            raise DomainError(f"point {p} outside the chart of {self.name or 'metric'}")
        return p

    @staticmethod
    def _check_metric(g, p):
        if np.abs(g - g.T).max() > 1e-12 * max(1.0, np.abs(g).max()):
            raise SingularMetricError(f"metric not symmetric at {p}")
        try:
            np.linalg.cholesky(g)
        except np.linalg.LinAlgError as exc:
            raise SingularMetricError(f"metric not positive-definite at {p}") from exc

    def value(self, p) -> np.ndarray:
        p = self._check_point(p)
        g = float_array(self.components, p)
        self._check_metric(g, p)
        return g

    def jet(self, p):
        """``(g, dg, ddg)`` with ``dg[i, j, k] = d_k g_ij`` and ``ddg[i, j, k, l]``."""
        p = self._check_point(p)
        g, dg, ddg = jet_array(self.components, p)
        self._check_metric(g, p)
        return g, dg, ddg

    def fd_jet(self, p, step: float = DEFAULT_STEP):
        """Finite-difference replacement for :meth:`jet` (plain float evaluation)."""
        p = self._check_point(p)
        g, dg, ddg = fd_derivatives(lambda q: float_array(self.components, q), p, step, self.domain.contains)
        self._check_metric(g, p)
        return g, dg, ddg

    def conformal(self, factor: Callable[[Sequence[Any]], Any], name: str = "") -> "MetricField":
        """The metric ``factor(x) * g``."""
        base = self.components

        def comps(x):
            f = factor(x)
            return [[f * gij for gij in row] for row in base(x)]

        return MetricField(comps, self.domain, name or f"conformal({self.name})")


@dataclass(frozen=True)
class ConnectionCoefficients:
    """``gamma[k, i, j] = Gamma^k_ij`` and ``dgamma[k, i, j, m] = d_m Gamma^k_ij``."""

    gamma: np.ndarray
    dgamma: np.ndarray


def connection_from_derivatives(g, dg, ddg) -> ConnectionCoefficients:
    gi = np.linalg.inv(g)
    # first kind: gamma_lij = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    first = 0.5 * (np.einsum("jli->lij", dg) + np.einsum("ilj->lij", dg) - np.einsum("ijl->lij", dg))
    dfirst = 0.5 * (
        np.einsum("jlim->lijm", ddg) + np.einsum("iljm->lijm", ddg) - np.einsum("ijlm->lijm", ddg)
    )
    gamma = np.einsum("kl,lij->kij", gi, first)
    dgi = -np.einsum("ka,abm,bl->klm", gi, dg, gi)
    dgamma = np.einsum("klm,lij->kijm", dgi, first) + np.einsum("kl,lijm->kijm", gi, dfirst)
    return ConnectionCoefficients(gamma, dgamma)


def christoffel(metric: MetricField, p) -> ConnectionCoefficients:
    """Levi-Civita connection coefficients and their first derivatives at ``p``."""
    return connection_from_derivatives(*metric.jet(p))


def riemann_from_connection(g, conn: ConnectionCoefficients) -> np.ndarray:
    G, dG = conn.gamma, conn.dgamma
    # R^l_{ijk}: R(d_i, d_j) d_k = R^l_{ijk} d_l
    up = (
        np.einsum("ljki->lijk", dG)
        - np.einsum("likj->lijk", dG)
        + np.einsum("lim,mjk->lijk", G, G)
        - np.einsum("ljm,mik->lijk", G, G)
    )
    return np.einsum("lm,mijk->ijkl", g, up)


def riemann(metric: MetricField, p) -> np.ndarray:
    """Fully covariant Riemann tensor at ``p``."""
    g, dg, ddg = metric.jet(p)
    return riemann_from_connection(g, connection_from_derivatives(g, dg, ddg))


def riemann_fd(metric: MetricField, p, step: float = DEFAULT_STEP) -> np.ndarray:
    """Riemann tensor from finite-difference metric derivatives only."""
    g, dg, ddg = metric.fd_jet(p, step)
    return riemann_from_connection(g, connection_from_derivatives(g, dg, ddg))


def weyl_tensor(R, g) -> np.ndarray:
    """Weyl part ``W = R + P (KN) g`` with Schouten tensor ``P = (Ric - tau/6 g) / 2``."""
    ric = T.ricci_contraction(R, g)
    tau = float(np.trace(np.linalg.solve(g, ric)))
    schouten = 0.5 * (ric - tau / 6.0 * g)
    return R + T.kulkarni_nomizu_sym(0.5 * (schouten + schouten.T), g)


@dataclass(frozen=True)
class CurvatureData:
    """Riemann tensor and everything derived from it at one point.

    ``rho`` and ``rho0`` are only populated when a complex structure is given;
    ``orientation`` is then the one making its Kahler form self-dual.
    """

    point: np.ndarray
    g: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    ricci0: np.ndarray
    tau: float
    weyl: np.ndarray
    wplus: np.ndarray
    wminus: np.ndarray
    orientation: int = 1
    J: Optional[np.ndarray] = None
    rho: Optional[np.ndarray] = None
    rho0: Optional[np.ndarray] = None


def _structure_at(J, p):
    if J is None:
        return None
    if hasattr(J, "value"):
        return J.value(p)
    return np.asarray(J, float)


def curvature_from_riemann(R, g, J=None, point=None) -> CurvatureData:
    ric = T.ricci_contraction(R, g)
    ric = 0.5 * (ric + ric.T)
    tau = float(np.trace(np.linalg.solve(g, ric)))
    ric0 = ric - tau / 4.0 * g
    W = weyl_tensor(R, g)
    rho = rho0 = None
    orientation = 1
    if J is not None:
        J = np.asarray(J, float)
        if np.abs(J.T @ g @ J - g).max() > 1e-8 * max(1.0, np.abs(g).max()):
            raise ShapeError("complex structure is not g-orthogonal")
        orientation = T.orientation_of(T.endomorphism_to_form(J, g))
        rho = J.T @ ric
        rho0 = J.T @ ric0
    wplus = T.half_projection(W, g, orientation, +1)
    wminus = T.half_projection(W, g, orientation, -1)
    return CurvatureData(
        point=None if point is None else np.asarray(point, float),
        g=g,
        riemann=R,
        ricci=ric,
        ricci0=ric0,
        tau=tau,
        weyl=W,
        wplus=wplus,
        wminus=wminus,
        orientation=orientation,
        J=J,
        rho=rho,
        rho0=rho0,
    )


def curvature_data(metric: MetricField, J=None, p=None) -> CurvatureData:
    """Full curvature data; ``J`` may be a complex-structure field or a 4x4 matrix."""
    p = as_point(p)
    g, dg, ddg = metric.jet(p)
    R = riemann_from_connection(g, connection_from_derivatives(g, dg, ddg))
    return curvature_from_riemann(R, g, _structure_at(J, p), p)


# spectra ----------------------------------------------------------------


def degeneracy_tolerance(matrix) -> float:
    return max(1e-8, 1e-6 * float(np.linalg.norm(matrix)))


@dataclass(frozen=True)
class HalfWeylSpectrum:
    """Eigen-decomposition of a Weyl half on its 3-dimensional form space.

    ``eigenforms[i]`` has squared norm 2; ``simple_index`` points at the
    unique simple eigenvalue when the other two coincide, else ``None``.
    """

    eigenvalues: np.ndarray
    eigenforms: np.ndarray
    degenerate: bool
    simple_index: Optional[int]
    matrix: np.ndarray

    @property
    def simple_form(self) -> np.ndarray:
        if self.simple_index is None:
            raise NoSimpleEigenvalueError("no simple eigenvalue")
        return self.eigenforms[self.simple_index]


def half_spectrum(W_half, g, forms) -> HalfWeylSpectrum:
    """Spectrum of a 4-tensor restricted to the span of three orthogonal forms."""
    basis = T.Lambda2Basis(np.concatenate([forms, forms]), g, 1)
    M = T.curvature_operator(W_half, g, basis)[:3, :3]
    M = 0.5 * (M + M.T)
    vals, vecs = np.linalg.eigh(M)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    eigenforms = np.einsum("ak,aij->kij", vecs, forms)
    tol = degeneracy_tolerance(M)
    close = [[abs(vals[i] - vals[j]) <= tol for j in range(3)] for i in range(3)]
    distinct = 3 - sum(close[i][i + 1] for i in range(2))
    if close[0][1] and close[1][2]:
        distinct = 1
    simple = None
    if distinct == 2:
        simple = 2 if close[0][1] else 0
    return HalfWeylSpectrum(vals, eigenforms, distinct <= 2, simple, M)


def wminus_spectrum(cd: CurvatureData, g=None, basis: Optional[T.Lambda2Basis] = None) -> HalfWeylSpectrum:
    """Eigenvalues (descending) and eigenforms of ``W-`` on the anti-self-dual forms."""
    g = cd.g if g is None else g
    if basis is None:
        basis = T.lambda2_split(g, cd.orientation)
    return half_spectrum(cd.wminus, g, basis.minus)


def _oriented_half(cd: CurvatureData, orientation: int):
    return cd.wplus if orientation == cd.orientation else cd.wminus


def wplus_blocks(cd: CurvatureData, J, p=None) -> tuple[float, float, float]:
    """``(kappa/6, |W2|, |W3|)`` for the Weyl half in which ``J``'s form is self-dual.

    ``kappa/6`` is the diagonal entry on ``omega / |omega|``, ``W2`` the
    off-diagonal block and ``W3`` the trace-free part of the remaining block.
    """
    Jm = J.value(p) if hasattr(J, "value") else np.asarray(J, float)
    g = cd.g
    w = T.endomorphism_to_form(Jm, g)
    orient = T.orientation_of(w)
    Wh = _oriented_half(cd, orient)
    plus = T.lambda2_split(g, orient).plus
    forms = [w * np.sqrt(2.0 / T.form_inner(w, w, g))]
    for f in plus:
        v = f.copy()
        for u in forms:
            v = v - T.form_inner(v, u, g) / 2.0 * u
        n2 = T.form_inner(v, v, g)
        if n2 > 1e-8:
            forms.append(v * np.sqrt(2.0 / n2))
        if len(forms) == 3:
            break
    forms = np.array(forms)
    basis = T.Lambda2Basis(np.concatenate([forms, forms]), g, orient)
    M = T.curvature_operator(Wh, g, basis)[:3, :3]
    kappa6 = float(M[0, 0])
    w2 = float(np.linalg.norm(M[1:, 0]))
    w3 = float(np.linalg.norm(M[1:, 1:] + kappa6 / 2.0 * np.eye(2)))
    return kappa6, w2, w3


def conformal_scalar_curvature(cd: CurvatureData, J) -> float:
    """``kappa`` of ``(g, J)``: six times the Weyl eigenvalue on its Kahler form."""
    return 6.0 * wplus_blocks(cd, J)[0]
