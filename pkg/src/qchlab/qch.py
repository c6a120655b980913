"""Quasi-constant holomorphic curvature: basis tensors, coefficients and identity checks.

A Kahler surface is QCH with respect to a J-invariant plane field ``D`` when
``R = a Pi + b Phi + c Psi``; equivalently the holomorphic sectional
curvature of a unit ``X`` is ``a + b t^2 + c t^4`` with ``t = |X_D|``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import tensor as T
from .curvature import CurvatureData, conformal_scalar_curvature, wminus_spectrum
from .errors import IllConditionedError, PreconditionError, ZeroVectorError
from .kahler import HermitianData, hermitian_data_at, kernel_vectors


@dataclass(frozen=True)
class QchBasisTensors:
    pi: np.ndarray
    phi: np.ndarray
    psi: np.ndarray

    def combine(self, a, b, c) -> np.ndarray:
        return a * self.pi + b * self.phi + c * self.psi

    @property
    def k_tensor(self) -> np.ndarray:
        """``Pi/6 - Phi + Psi``: the shape of ``W-`` on a QCH surface."""
        return self.pi / 6.0 - self.phi + self.psi


def build_basis(g, J, h) -> QchBasisTensors:
    """``Pi``, ``Phi``, ``Psi`` from their slot-by-slot definitions."""
    g = T.check_sym2(g)
    h = T.check_sym2(h)
    J = np.asarray(J, float)
    w = J.T @ g  # g(JX, Y)
    hJ = J.T @ h  # h(JX, Y)
    e = np.einsum
    pi = 0.25 * (
        e("yz,xu->xyzu", g, g)
        - e("xz,yu->xyzu", g, g)
        + e("yz,xu->xyzu", w, w)
        - e("xz,yu->xyzu", w, w)
        - 2 * e("xy,zu->xyzu", w, w)
    )
    phi = 0.125 * (
        e("yz,xu->xyzu", g, h)
        - e("xz,yu->xyzu", g, h)
        + e("xu,yz->xyzu", g, h)
        - e("yu,xz->xyzu", g, h)
        + e("yz,xu->xyzu", w, hJ)
        - e("xz,yu->xyzu", w, hJ)
        + e("xu,yz->xyzu", w, hJ)
        - e("yu,xz->xyzu", w, hJ)
        - 2 * e("xy,zu->xyzu", w, hJ)
        - 2 * e("zu,xy->xyzu", w, hJ)
    )
    psi = -e("xy,zu->xyzu", hJ, hJ)
    return QchBasisTensors(pi, phi, psi)


def build_basis_kn(g, J, h) -> QchBasisTensors:
    """The same tensors assembled from Kulkarni-Nomizu and tensor products."""
    J = np.asarray(J, float)
    w = J.T @ g
    hJ = J.T @ h
    pi = -0.25 * (0.5 * (T.kulkarni_nomizu_sym(g, g) + T.kulkarni_nomizu_form(w, w)) + 2 * T.tensor_product(w, w))
    phi = -0.125 * (
        T.kulkarni_nomizu_sym(h, g)
        + T.kulkarni_nomizu_form(hJ, w)
        + 2 * T.tensor_product(w, hJ)
        + 2 * T.tensor_product(hJ, w)
    )
    psi = -T.tensor_product(hJ, hJ)
    return QchBasisTensors(pi, phi, psi)


def basis_for(hd: HermitianData) -> QchBasisTensors:
    return build_basis(hd.g, hd.J, hd.h)


def kahler_type_residual(t, J) -> float:
    """Max of ``|T(JX, JY, Z, U) - T(X, Y, Z, U)|``."""
    tj = T.apply_endomorphism(T.apply_endomorphism(t, J, 0), J, 1)
    return float(np.abs(tj - t).max())


def holomorphic_sectional_curvature(R, g, J, X) -> float:
    """``R(X, JX, JX, X) / g(X, X)^2``."""
    X = np.asarray(X, float)
    n2 = float(X @ g @ X)
    if n2 <= 0 or not np.isfinite(n2):
        raise ZeroVectorError("holomorphic sectional curvature needs a non-zero vector")
    JX = np.asarray(J, float) @ X
    return float(np.einsum("abcd,a,b,c,d->", R, X, JX, JX, X)) / n2**2


@dataclass(frozen=True)
class QchCoefficients:
    """``(a, b, c)`` plus the quantities derived from them.

    ``fit_residual`` is the worst deviation of the sampled holomorphic
    sectional curvature from the fitted quartic (``nan`` when not measured).
    """

    a: float
    b: float
    c: float
    fit_residual: float = float("nan")

    @property
    def lam(self) -> float:
        """Ricci eigenvalue on E."""
        return 1.5 * self.a + 0.25 * self.b

    @property
    def mu(self) -> float:
        """Ricci eigenvalue on D."""
        return 1.5 * self.a + 1.25 * self.b + self.c

    @property
    def delta(self) -> float:
        return 0.5 * (self.b + self.c)

    @property
    def kappa(self) -> float:
        return 2.0 * self.c

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.a, self.b, self.c)

    def row(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "c": self.c,
            "lambda": self.lam,
            "mu": self.mu,
            "delta": self.delta,
            "kappa": self.kappa,
        }


def _unit_split(g, J, p_D):
    """A unit vector in D and one in E."""
    p_E = np.eye(4) - p_D
    picks = []
    for proj in (p_D, p_E):
        for e in np.eye(4):
            v = proj @ e
            if v @ g @ v > 1e-6:
                picks.append(v / np.sqrt(v @ g @ v))
                break
    return picks


def random_unit_vectors(g, n: int, rng: np.random.Generator) -> np.ndarray:
    X = rng.normal(size=(n, 4))
    norms = np.sqrt(np.einsum("ni,ij,nj->n", X, g, X))
    return X / norms[:, None]


def _phi_samples(R, g, J, p_D, X):
    t2 = np.array([float(x @ p_D.T @ g @ p_D @ x) for x in X])
    phi = np.array([holomorphic_sectional_curvature(R, g, J, x) for x in X])
    return t2, phi


def extract_coefficients(R, g, J, p_D, rng=None, n_random: int = 50) -> QchCoefficients:
    """Fit ``phi(t) = a + b t^2 + c t^4`` from three exact nodes ``t^2 = 0, 1/2, 1``.

    ``n_random`` further unit directions measure how far the curvature is
    from the quartic; that deviation is stored in ``fit_residual``.
    """
    g = np.asarray(g, float)
    p_D = np.asarray(p_D, float)
    eD, eE = _unit_split(g, J, p_D)
    nodes = [eE, (eD + eE) / np.sqrt(2.0), eD]
    t2 = np.array([0.0, 0.5, 1.0])
    phi = np.array([holomorphic_sectional_curvature(R, g, J, x) for x in nodes])
    V = np.vander(t2, 3, increasing=True)
    if np.linalg.cond(V) > 1e6:
        raise IllConditionedError("Vandermonde system is ill-conditioned")
    a, b, c = np.linalg.solve(V, phi)
    fit = float("nan")
    if n_random:
        rng = np.random.default_rng(0) if rng is None else rng
        X = random_unit_vectors(g, n_random, rng)
        ts, ph = _phi_samples(R, g, J, p_D, X)
        fit = float(np.abs(ph - (a + b * ts + c * ts**2)).max())
    return QchCoefficients(float(a), float(b), float(c), fit)


def extract_coefficients_lstsq(R, g, J, p_D, rng=None, n: int = 50) -> QchCoefficients:
    """Least-squares quartic fit over ``n`` random unit directions."""
    rng = np.random.default_rng(0) if rng is None else rng
    X = random_unit_vectors(np.asarray(g, float), n, rng)
    ts, ph = _phi_samples(R, g, J, p_D, X)
    A = np.column_stack([np.ones_like(ts), ts, ts**2])
    coef, *_ = np.linalg.lstsq(A, ph, rcond=None)
    fit = float(np.abs(A @ coef - ph).max())
    return QchCoefficients(float(coef[0]), float(coef[1]), float(coef[2]), fit)


def qch_residual(R, coeffs: QchCoefficients, basis: QchBasisTensors) -> float:
    """Max-norm of ``R - a Pi - b Phi - c Psi``."""
    return float(np.abs(R - basis.combine(coeffs.a, coeffs.b, coeffs.c)).max())


def complementary_coefficients(coeffs: QchCoefficients) -> QchCoefficients:
    """Coefficients of the same curvature with respect to the orthogonal complement."""
    a, b, c = coeffs.as_tuple()
    return QchCoefficients(a + b + c, -(b + 2 * c), c)


def ricci_eigen_check(cd: CurvatureData, hd: HermitianData, coeffs: QchCoefficients) -> dict:
    """``Ric = lambda m + mu h``, plus the eigen-distribution residuals."""
    ric = cd.ricci
    gi = np.linalg.inv(hd.g)
    ric_up = gi @ ric  # Ric as an endomorphism
    eigen_D = np.abs(ric_up @ hd.p_D - coeffs.mu * hd.p_D).max()
    eigen_E = np.abs(ric_up @ hd.p_E - coeffs.lam * hd.p_E).max()
    return {
        "ricci_eigen": float(np.abs(ric - coeffs.lam * hd.m - coeffs.mu * hd.h).max()),
        "eigen_D": float(eigen_D),
        "eigen_E": float(eigen_E),
    }


def alignment(form, reference, g) -> float:
    """``|<form, reference>| / 2`` for forms of squared norm 2."""
    return abs(T.form_inner(form, reference, g)) / 2.0


def wminus_structure_check(cd: CurvatureData, hd: HermitianData, coeffs: QchCoefficients, basis: QchBasisTensors) -> dict:
    """``W- = c (Pi/6 - Phi + Psi)``, degeneracy and the simple eigenform ``omega_bar``."""
    target = coeffs.c * basis.k_tensor
    spec = wminus_spectrum(cd)
    expected = np.sort(coeffs.c * np.array([1 / 3, -1 / 6, -1 / 6]))[::-1]
    out = {
        "wminus": float(np.abs(cd.wminus - target).max()),
        "spectrum": float(np.abs(spec.eigenvalues - expected).max()),
        "degenerate": bool(spec.degenerate),
        "alignment": float("nan"),
        "has_simple": spec.simple_index is not None,
    }
    if spec.simple_index is not None:
        out["alignment"] = alignment(spec.simple_form, hd.omega_bar, hd.g)
        out["simple_eigenvalue"] = float(spec.eigenvalues[spec.simple_index])
    return out


def full_decomposition_check(cd: CurvatureData, hd: HermitianData, kappa: Optional[float] = None, tol: float = 1e-6) -> dict:
    """Recover ``(a, b, c)`` from ``tau``, ``delta`` and ``kappa`` alone.

    ``delta`` is read off ``Ric0 = delta (h - m)``; a PreconditionError is
    raised when ``Ric0`` is not of that shape.  ``kappa`` defaults to the
    conformal scalar curvature of ``(g, Jbar)``.
    """
    hm = hd.h - hd.m
    gi = np.linalg.inv(hd.g)
    delta = float(np.einsum("ij,kl,ik,jl->", cd.ricci0, hm, gi, gi)) / 4.0
    shape_res = float(np.abs(cd.ricci0 - delta * hm).max())
    if shape_res > tol * max(1.0, np.abs(cd.ricci).max()):
        raise PreconditionError(f"trace-free Ricci is not delta (h - m): residual {shape_res:.3g}")
    if kappa is None:
        kappa = conformal_scalar_curvature(cd, hd.Jbar)
    tau = cd.tau
    coeffs = QchCoefficients(tau / 6 - delta + kappa / 12, 2 * delta - kappa / 2, kappa / 2)
    return {"coefficients": coeffs, "delta": delta, "kappa": float(kappa), "tau": tau, "ricci0_shape": shape_res}


def derivation_action(Q, t, g) -> np.ndarray:
    """``(Q.T)(X, Y; Z1..Z4) = -sum_i T(.., Q(X, Y) Z_i, ..)`` as a 6-index array."""
    gi = np.linalg.inv(g)
    op = np.einsum("xyzv,vw->xywz", Q, gi)  # op[x, y, w, z] = (Q(X, Y) Z)^w
    return -(
        np.einsum("wbcd,xywa->xyabcd", t, op)
        + np.einsum("awcd,xywb->xyabcd", t, op)
        + np.einsum("abwd,xywc->xyabcd", t, op)
        + np.einsum("abcw,xywd->xyabcd", t, op)
    )


def pseudosymmetry_residual(cd: CurvatureData, basis: QchBasisTensors, coeffs: QchCoefficients, factor: Optional[float] = None) -> float:
    """Max-norm of ``R.R - f Pi.R`` with ``f = (tau - kappa) / 6`` unless given.

    The 3-symmetric variant uses ``factor = -kappa / 3``.
    """
    R, g = cd.riemann, cd.g
    f = (cd.tau - coeffs.kappa) / 6.0 if factor is None else factor
    return float(np.abs(derivation_action(R, R, g) - f * derivation_action(basis.pi, R, g)).max())


def constant_ratio_fingerprint(coeffs: Sequence[QchCoefficients], kappas: Sequence[float], taus: Sequence[float]) -> dict:
    """Constant-coefficient fingerprint of a QCH surface.

    Case (a) is constant holomorphic curvature (``b = c = 0``); case (c) is
    the proper 3-symmetric space with ``a = -kappa/3, b = 0, c = kappa/2``
    and ``tau = -kappa``.
    """
    A = np.array([c.as_tuple() for c in coeffs])
    kappas = np.asarray(kappas, float)
    taus = np.asarray(taus, float)
    spread = float((A.max(axis=0) - A.min(axis=0)).max())
    a, b, c = A.mean(axis=0)
    kappa = float(kappas.mean())
    scale = max(abs(kappa), 1e-300)
    report = {
        "spread": spread,
        "kappa_spread": float(kappas.max() - kappas.min()),
        "a": float(a),
        "b": float(b),
        "c": float(c),
        "kappa": kappa,
        "tau": float(taus.mean()),
        "b_abs": float(np.abs(A[:, 1]).max()),
        "a_rel": float(np.abs(A[:, 0] + kappas / 3).max() / scale),
        "c_rel": float(np.abs(A[:, 2] - kappas / 2).max() / scale),
        "tau_rel": float(np.abs(taus + kappas).max() / scale),
    }
    tol = 1e-8 * max(1.0, float(np.abs(A).max()))
    if np.abs(A[:, 1:]).max() <= tol:
        report["case"] = "a"
        report["label"] = "constant holomorphic curvature"
    elif report["b_abs"] <= 1e-5 and report["a_rel"] <= 1e-4 and report["c_rel"] <= 1e-4:
        report["case"] = "c"
        report["label"] = "proper 3-symmetric"
    else:
        report["case"] = "other"
        report["label"] = "not a constant-coefficient case (a) or (c)"
    return report


def distribution_from_opposite(R, g, J, Jbar, rng=None) -> dict:
    """Try ``D = ker(J Jbar + Id)`` and ``D = ker(J Jbar - Id)``; keep the better QCH fit.

    Returns the kernel sign (``+1`` for ``J Jbar + Id``), the coefficients and
    the QCH residual for each candidate.
    """
    results = {}
    for sign in (+1, -1):
        vectors = kernel_vectors(J, Jbar, sign)
        hd = hermitian_data_at(g, J, vectors)
        coeffs = extract_coefficients(R, g, J, hd.p_D, rng=rng)
        results[sign] = (qch_residual(R, coeffs, basis_for(hd)), coeffs)
    best = min(results, key=lambda s: results[s][0])
    return {
        "sign": best,
        "coefficients": results[best][1],
        "residual": results[best][0],
        "residuals": {s: r for s, (r, _) in results.items()},
    }


@dataclass(frozen=True)
class IdentityResult:
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual) and self.residual <= self.tolerance)


@dataclass
class VerificationReport:
    """Per-point records of named residuals, with the family parameters and seed.

    Each record holds ``index``, ``point``, the coefficient row, ``tau``, a
    ``residuals`` map and an ``error`` string (``None`` when the point ran).
    """

    family: str
    params: dict
    seed: int
    tolerances: dict = field(default_factory=dict)
    records: list = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)

    def add(self, record: dict):
        self.records.append(record)

    def merge(self, other: "VerificationReport") -> "VerificationReport":
        out = VerificationReport(self.family, dict(self.params), self.seed, {**self.tolerances, **other.tolerances})
        out.records = sorted(self.records + other.records, key=lambda r: r["index"])
        return out

    def max_residuals(self) -> dict:
        out: dict = {}
        for rec in self.records:
            for name, value in rec["residuals"].items():
                out[name] = max(out.get(name, 0.0), value) if np.isfinite(value) else float("nan")
        for name, value in self.aggregate.get("residuals", {}).items():
            out[name] = value
        return out

    def failures(self) -> list:
        """``(index or None, identity, residual)`` for every failed check or errored point."""
        bad = []
        for rec in self.records:
            if rec.get("error"):
                bad.append((rec["index"], "error", rec["error"]))
            for name, value in rec["residuals"].items():
                if not IdentityResult(name, value, self.tolerances[name]).passed:
                    bad.append((rec["index"], name, value))
        for name, value in self.aggregate.get("residuals", {}).items():
            if not IdentityResult(name, value, self.tolerances[name]).passed:
                bad.append((None, name, value))
        return bad

    @property
    def passed(self) -> bool:
        return not self.failures()

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "params": self.params,
            "seed": self.seed,
            "tolerances": self.tolerances,
            "records": self.records,
            "aggregate": self.aggregate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VerificationReport":
        return cls(d["family"], d["params"], d["seed"], d["tolerances"], d["records"], d.get("aggregate", {}))
