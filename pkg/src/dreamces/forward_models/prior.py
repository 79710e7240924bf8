"""Centred Gaussian measures on discretised parameter spaces."""

import numpy as np

from .._validation import as_vector, check_positive, check_spd, make_rng
from ..exceptions import ValidationError


def grid_points(n):
    """Cell centres of an ``n x n`` grid on the unit square, row-major (row = y)."""
    c = (np.arange(n) + 0.5) / n
    yy, xx = np.meshgrid(c, c, indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel()])


def exponential_kernel(points, sigma, length):
    """``sigma**2 * exp(-|s - s'| / (2 * length))`` evaluated on all point pairs."""
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt(np.sum(diff**2, axis=-1))
    return sigma**2 * np.exp(-dist / (2.0 * length))


class GaussianMeasure:
    """N(0, C) with cached symmetric square root of C.

    Three covariance kinds are supported: ``"scalar"`` (sigma^2 I),
    ``"grid"`` (exponential kernel on cell centres of a square grid) and
    ``"matrix"`` (any SPD matrix).  Dense kinds are factorised once with a
    symmetric eigendecomposition so that square roots are exact.

    All ``*_apply`` methods act on the last axis, so a batch of vectors can be
    passed as an ``(n, d)`` array.
    """

    def __init__(self, dim, kind="scalar", sigma=1.0, cov=None, length=None, grid=None):
        self.dim = int(dim)
        if self.dim < 1:
            raise ValidationError("dimension must be >= 1")
        self.kind = kind
        self.sigma = float(sigma)
        self.length = length
        self.grid = grid
        if kind == "scalar":
            check_positive(self.sigma, "sigma")
            self._cov = None
        elif kind in ("grid", "matrix"):
            cov = check_spd(cov, "covariance")
            if cov.shape != (self.dim, self.dim):
                raise ValidationError(f"covariance shape {cov.shape} does not match dim {self.dim}")
            self._cov = cov
            evals, evecs = np.linalg.eigh(cov)
            if evals[0] <= 0:
                raise ValidationError("covariance is not positive definite")
            self._evals = evals
            self._evecs = evecs
            root = np.sqrt(evals)
            self._sqrt = (evecs * root) @ evecs.T
            self._isqrt = (evecs / root) @ evecs.T
            self._inv = (evecs / evals) @ evecs.T
        else:
            raise ValidationError(f"unknown covariance kind {kind!r}")

    @classmethod
    def scalar(cls, dim, sigma=1.0):
        return cls(dim, "scalar", sigma=sigma)

    @classmethod
    def exponential_grid(cls, n, sigma=1.25, length=0.0625):
        pts = grid_points(n)
        cov = exponential_kernel(pts, sigma, length)
        return cls(n * n, "grid", sigma=sigma, cov=cov, length=length, grid=(n, n))

    @classmethod
    def from_matrix(cls, cov):
        cov = np.asarray(cov, dtype=np.float64)
        return cls(cov.shape[0], "matrix", cov=cov)

    @property
    def covariance(self):
        if self._cov is None:
            return self.sigma**2 * np.eye(self.dim)
        return self._cov

    @property
    def variance(self):
        if self._cov is None:
            return np.full(self.dim, self.sigma**2)
        return np.diag(self._cov).copy()

    def _check(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise ValidationError(f"expected trailing dimension {self.dim}, got {x.shape}")
        return x

    def apply(self, x):
        """C x"""
        x = self._check(x)
        if self._cov is None:
            return self.sigma**2 * x
        return x @ self._cov

    def sqrt_apply(self, x):
        """C^{1/2} x"""
        x = self._check(x)
        if self._cov is None:
            return self.sigma * x
        return x @ self._sqrt

    def invsqrt_apply(self, x):
        """C^{-1/2} x"""
        x = self._check(x)
        if self._cov is None:
            return x / self.sigma
        return x @ self._isqrt

    def inv_apply(self, x):
        """C^{-1} x"""
        x = self._check(x)
        if self._cov is None:
            return x / self.sigma**2
        return x @ self._inv

    def sample(self, seed=None, size=None):
        """Draw from N(0, C); ``size`` adds a leading batch axis."""
        rng = make_rng(0 if seed is None else seed)
        shape = (self.dim,) if size is None else (int(size), self.dim)
        return self.sqrt_apply(rng.standard_normal(shape))

    def logpdf_unnormalized(self, u):
        u = as_vector(u, "u", self.dim)
        return -0.5 * float(u @ self.inv_apply(u))

    def __repr__(self):
        return f"GaussianMeasure(dim={self.dim}, kind={self.kind!r}, sigma={self.sigma:g})"
