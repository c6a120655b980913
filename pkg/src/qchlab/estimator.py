"""scikit-learn transformer mapping chart points to QCH coefficients."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .campaign import FamilyRequest, structure_at
from .curvature import curvature_data
from .qch import basis_for, extract_coefficients, qch_residual

FEATURES = ("a", "b", "c", "lambda", "mu", "delta", "kappa")


class QchCoefficientTransformer(TransformerMixin, BaseEstimator):
    """Map points of a family's chart to ``(a, b, c, lambda, mu, delta, kappa)``.

    Parameters
    ----------
    family : str
        Catalog family name.
    params : dict or None
        Family parameters, as accepted by :func:`qchlab.catalog.make_family`.
    n_directions : int
        Random unit directions used to measure the quartic fit residual.
    random_state : int
        Seed for those directions; row ``i`` uses ``(random_state, i)``.

    ``fit`` only validates the input and builds the family; nothing is
    learned from the data.
    """

    def __init__(self, family="space_form", params=None, n_directions=50, random_state=0):
        self.family = family
        self.params = params
        self.n_directions = n_directions
        self.random_state = random_state

    def _validate(self, X):
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 4:
            raise ValueError(f"expected 4 coordinates per point, got {X.shape[1]}")
        return X

    def fit(self, X, y=None):
        X = self._validate(X)
        if int(self.n_directions) < 0:
            raise ValueError("n_directions must be non-negative")
        self.instance_ = FamilyRequest.create(self.family, self.params).build()
        self.n_features_in_ = X.shape[1]
        return self

    def _rows(self, X):
        check_is_fitted(self, "instance_")
        X = self._validate(X)
        for i, p in enumerate(X):
            rng = np.random.default_rng([int(self.random_state), i])
            J, _ = structure_at(self.instance_, p)
            hd = self.instance_.hermitian_at(p, J)
            cd = curvature_data(self.instance_.metric, J, p)
            coeffs = extract_coefficients(cd.riemann, cd.g, J, hd.p_D, rng=rng, n_random=int(self.n_directions))
            yield coeffs, cd, hd

    def transform(self, X):
        out = [list(coeffs.row().values()) for coeffs, _, _ in self._rows(X)]
        return np.array(out, dtype=float).reshape(-1, len(FEATURES))

    def qch_residuals(self, X) -> np.ndarray:
        """``max |R - a Pi - b Phi - c Psi|`` at each point."""
        return np.array([qch_residual(cd.riemann, coeffs, basis_for(hd)) for coeffs, cd, hd in self._rows(X)])

    def get_feature_names_out(self, input_features=None):
        return np.array(FEATURES, dtype=object)
