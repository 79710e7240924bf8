"""Prior whitening u -> C^{-1/2} u as a scikit-learn transformer."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import ValidationError


class PriorWhitener(TransformerMixin, BaseEstimator):
    """Map parameters to coordinates in which the Gaussian prior is N(0, I).

    ``prior`` is a :class:`~dreamces.forward_models.GaussianMeasure`; fitting only
    checks the dimension, since the transform is fixed by the prior.
    """

    def __init__(self, prior=None):
        self.prior = prior

    def fit(self, X=None, y=None):
        if self.prior is None:
            raise ValidationError("PriorWhitener needs a prior measure")
        if X is not None:
            X = check_array(X)
            if X.shape[1] != self.prior.dim:
                raise ValidationError(f"expected {self.prior.dim} features, got {X.shape[1]}")
        self.n_features_in_ = self.prior.dim
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        return self.prior.invsqrt_apply(np.asarray(X, dtype=np.float64))

    def inverse_transform(self, X):
        check_is_fitted(self, "n_features_in_")
        return self.prior.sqrt_apply(np.asarray(X, dtype=np.float64))


def whiten(prior, u):
    return prior.invsqrt_apply(np.asarray(u, dtype=np.float64))


def unwhiten(prior, ut):
    return prior.sqrt_apply(np.asarray(ut, dtype=np.float64))
