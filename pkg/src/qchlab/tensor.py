"""Pointwise multilinear algebra on a 4-dimensional tangent space.

Conventions
-----------
* Symmetric 2-tensors, 2-forms and endomorphisms are 4x4 arrays.  An
  endomorphism ``A`` has mixed components ``A[i, j] = A^i_j`` so that
  ``(A X)^i = A[i, j] X^j``.
* 4-tensors are dense ``(4, 4, 4, 4)`` covariant arrays with slots ``(X, Y, Z, U)``.
* 2-forms carry the inner product ``<a, b> = 1/2 a_ij b^ij``; the Kahler form
  of a Hermitian structure then has squared norm 2.
* A 4-tensor ``T`` acts on 2-forms by ``g(T a, b) = -T(a, b)`` with
  ``T(a, b) = 1/4 T_ijkl a^ij b^kl``.  A round sphere of curvature ``k``
  becomes ``k`` times the identity.
* ``orientation`` is ``+1`` or ``-1`` relative to ``dx0 ^ dx1 ^ dx2 ^ dx3``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, SingularMetricError

SYM_TOL = 1e-10
# T(a, b) = OPERATOR_SCALE * T_ijkl a^ij b^kl; fixed by K(omega_bar) = omega_bar / 3
OPERATOR_SCALE = 0.25


def _levi_civita():
    eps = np.zeros((4, 4, 4, 4))
    for perm in itertools.permutations(range(4)):
        inversions = sum(1 for i in range(4) for j in range(i + 1, 4) if perm[i] > perm[j])
        eps[perm] = -1.0 if inversions % 2 else 1.0
    return eps


LEVI_CIVITA = _levi_civita()


# validation -------------------------------------------------------------


def _as_square(a, what):
    a = np.asarray(a, dtype=float)
    if a.shape != (4, 4):
        raise ShapeError(f"{what} must be 4x4, got {a.shape}")
    return a


def check_sym2(h, tol: float = SYM_TOL) -> np.ndarray:
    h = _as_square(h, "symmetric tensor")
    if np.abs(h - h.T).max() > tol * max(1.0, np.abs(h).max()):
        raise ShapeError("tensor is not symmetric")
    return h


def check_two_form(w, tol: float = SYM_TOL) -> np.ndarray:
    w = _as_square(w, "2-form")
    if np.abs(w + w.T).max() > tol * max(1.0, np.abs(w).max()):
        raise ShapeError("2-form is not antisymmetric")
    return w


def check_tensor4(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.shape != (4, 4, 4, 4):
        raise ShapeError(f"4-tensor must have shape (4, 4, 4, 4), got {t.shape}")
    return t


def inverse_metric(g) -> np.ndarray:
    g = check_sym2(g)
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise SingularMetricError("metric is not positive-definite") from exc
    return np.linalg.inv(g)


# products ---------------------------------------------------------------


def _kn(h, k):
    return (
        np.einsum("xz,yt->xyzt", h, k)
        + np.einsum("yt,xz->xyzt", h, k)
        - np.einsum("xt,yz->xyzt", h, k)
        - np.einsum("yz,xt->xyzt", h, k)
    )


def kulkarni_nomizu_sym(h, k) -> np.ndarray:
    """Kulkarni-Nomizu product of two symmetric 2-tensors."""
    return _kn(check_sym2(h), check_sym2(k))


def kulkarni_nomizu_form(w, e) -> np.ndarray:
    """The same bilinear combination applied to two 2-forms."""
    return _kn(check_two_form(w), check_two_form(e))


def tensor_product(a, b) -> np.ndarray:
    """``(a (x) b)(X, Y, Z, U) = a(X, Y) b(Z, U)``."""
    return np.einsum("xy,zu->xyzu", np.asarray(a, float), np.asarray(b, float))


def wedge(w, e) -> np.ndarray:
    """Wedge of two 2-forms as a 4-tensor (sum over the six (2,2)-shuffles)."""
    w, e = check_two_form(w), check_two_form(e)
    return (
        np.einsum("xy,zt->xyzt", w, e)
        - np.einsum("xz,yt->xyzt", w, e)
        + np.einsum("xt,yz->xyzt", w, e)
        + np.einsum("yz,xt->xyzt", w, e)
        - np.einsum("yt,xz->xyzt", w, e)
        + np.einsum("zt,xy->xyzt", w, e)
    )


def bianchi(t) -> np.ndarray:
    """Cyclic average over the first three slots."""
    t = check_tensor4(t)
    return (t + np.einsum("yzxu->xyzu", t) + np.einsum("zxyu->xyzu", t)) / 3.0


def ricci_contraction(t, g) -> np.ndarray:
    """``c(T)(Y, Z) = g^ij T(e_i, Y, Z, e_j)``."""
    return np.einsum("ij,iyzj->yz", inverse_metric(g), check_tensor4(t))


def apply_endomorphism(t, a, slot: int) -> np.ndarray:
    """Insert ``A X`` in place of ``X`` in the given slot of a 4-tensor."""
    t = check_tensor4(t)
    moved = np.moveaxis(t, slot, 0)
    out = np.einsum("a...,ai->i...", moved, np.asarray(a, float))
    return np.moveaxis(out, 0, slot)


def symmetry_residuals(t) -> dict:
    """Max-norm residuals of the algebraic curvature-tensor symmetries."""
    t = check_tensor4(t)
    return {
        "antisym_first_pair": float(np.abs(t + np.einsum("yxzu->xyzu", t)).max()),
        "antisym_second_pair": float(np.abs(t + np.einsum("xyuz->xyzu", t)).max()),
        "pair_exchange": float(np.abs(t - np.einsum("zuxy->xyzu", t)).max()),
        "first_bianchi": float(np.abs(bianchi(t)).max()),
    }


# two-forms and duality ---------------------------------------------------


def form_inner(a, b, g) -> float:
    gi = inverse_metric(g)
    return 0.5 * float(np.einsum("ij,kl,ik,jl->", a, b, gi, gi))


def orientation_of(w) -> int:
    """Orientation in which ``w ^ w`` is positive (sign of the Pfaffian)."""
    w = check_two_form(w)
    pf = w[0, 1] * w[2, 3] - w[0, 2] * w[1, 3] + w[0, 3] * w[1, 2]
    if pf == 0:
        raise ShapeError("2-form is degenerate; no orientation")
    return 1 if pf > 0 else -1


def hodge_star(phi, g, orientation: int = 1) -> np.ndarray:
    """Hodge star of a 2-form for the given metric and orientation."""
    phi = check_two_form(phi)
    gi = inverse_metric(g)
    vol = orientation * np.sqrt(np.linalg.det(g)) * LEVI_CIVITA
    return 0.5 * np.einsum("abcd,ce,df,ef->ab", vol, gi, gi, phi)


def _star_slots(t, g, orientation, first: bool):
    gi = inverse_metric(g)
    vol = orientation * np.sqrt(np.linalg.det(g)) * LEVI_CIVITA
    star = 0.5 * np.einsum("abcd,ce,df->abef", vol, gi, gi)
    if first:
        return np.einsum("abef,efzu->abzu", star, t)
    return np.einsum("abef,xyef->xyab", star, t)


def half_projection(t, g, orientation: int, sign: int) -> np.ndarray:
    """``P T P`` with ``P = (1 + sign * star) / 2`` acting on both slot pairs."""
    t = check_tensor4(t)
    left = 0.5 * (t + sign * _star_slots(t, g, orientation, first=True))
    return 0.5 * (left + sign * _star_slots(left, g, orientation, first=False))


def orthonormal_frame(g, orientation: int = 1) -> np.ndarray:
    """Gram-Schmidt frame of the coordinate basis; columns are the frame vectors.

    The last vector is flipped if needed so the frame has the requested
    orientation.
    """
    g = check_sym2(g)
    inverse_metric(g)
    frame = np.zeros((4, 4))
    for i in range(4):
        v = np.eye(4)[i].copy()
        for j in range(i):
            v -= (frame[:, j] @ g @ v) * frame[:, j]
        frame[:, i] = v / np.sqrt(v @ g @ v)
    if np.sign(np.linalg.det(frame)) != orientation:
        frame[:, 3] *= -1
    return frame


@dataclass(frozen=True)
class Lambda2Basis:
    """Orthogonal basis of 2-forms: three self-dual then three anti-self-dual.

    Each form has squared norm 2.  ``forms`` has shape ``(6, 4, 4)``.
    """

    forms: np.ndarray
    g: np.ndarray
    orientation: int

    @property
    def plus(self) -> np.ndarray:
        return self.forms[:3]

    @property
    def minus(self) -> np.ndarray:
        return self.forms[3:]

    def coefficients(self, phi) -> np.ndarray:
        """Components of ``phi`` in this basis."""
        return np.array([form_inner(phi, f, self.g) for f in self.forms]) / 2.0

    def combine(self, coeffs) -> np.ndarray:
        return np.einsum("a,aij->ij", np.asarray(coeffs, float), self.forms)


def lambda2_split(g, orientation: int = 1) -> Lambda2Basis:
    """Self-dual / anti-self-dual basis built from an oriented orthonormal coframe."""
    frame = orthonormal_frame(g, orientation)
    coframe = np.linalg.inv(frame)  # rows are the dual 1-forms

    def e(a, b):
        return np.outer(coframe[a], coframe[b]) - np.outer(coframe[b], coframe[a])

    pairs = [((0, 1), (2, 3)), ((0, 2), (3, 1)), ((0, 3), (1, 2))]
    plus = [e(*p) + e(*q) for p, q in pairs]
    minus = [e(*p) - e(*q) for p, q in pairs]
    return Lambda2Basis(np.array(plus + minus), np.asarray(g, float), orientation)


def form_pairing(t, a, b, g) -> float:
    """``T(a, b) = 1/4 T_ijkl a^ij b^kl``."""
    gi = inverse_metric(g)
    a_up = gi @ a @ gi
    b_up = gi @ b @ gi
    return OPERATOR_SCALE * float(np.einsum("ijkl,ij,kl->", t, a_up, b_up))


def curvature_operator(t, g, basis: Lambda2Basis) -> np.ndarray:
    """6x6 matrix of ``T`` acting on 2-forms in ``basis`` (column = image)."""
    t = check_tensor4(t)
    gi = inverse_metric(g)
    up = np.einsum("ij,aik,kl->ajl", gi, basis.forms, gi)
    pairing = OPERATOR_SCALE * np.einsum("ijkl,aij,bkl->ab", t, up, up)
    # g(T f_b, f_a) = -T(f_b, f_a) and every basis form has squared norm 2
    return -pairing.T / 2.0


def form_to_endomorphism(w, g) -> np.ndarray:
    """``J`` with ``w(X, Y) = g(J X, Y)``."""
    return -inverse_metric(g) @ check_two_form(w, tol=1e-8)


def endomorphism_to_form(a, g) -> np.ndarray:
    """``w(X, Y) = g(A X, Y)``."""
    return np.asarray(a, float).T @ np.asarray(g, float)
