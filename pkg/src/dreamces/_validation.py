"""Small input-checking helpers shared by the estimators and samplers."""

import numpy as np

from .exceptions import ValidationError


def as_vector(x, name="u", dim=None):
    """Return ``x`` as a finite 1-d float64 array, optionally of length ``dim``."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be 1-d, got shape {arr.shape}")
    if arr.size < 1:
        raise ValidationError(f"{name} must be non-empty")
    if dim is not None and arr.size != dim:
        raise ValidationError(f"{name} has length {arr.size}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


def as_matrix(x, name="X", n_cols=None, min_rows=1):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2-d, got shape {arr.shape}")
    if arr.shape[0] < min_rows:
        raise ValidationError(f"{name} needs at least {min_rows} rows, got {arr.shape[0]}")
    if n_cols is not None and arr.shape[1] != n_cols:
        raise ValidationError(f"{name} has {arr.shape[1]} columns, expected {n_cols}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


def check_spd(mat, name="matrix", rtol=1e-10):
    """Validate that ``mat`` is symmetric positive definite; returns it as float64."""
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {mat.shape}")
    scale = max(np.max(np.abs(mat)), 1.0)
    if not np.allclose(mat, mat.T, rtol=0.0, atol=rtol * scale):
        raise ValidationError(f"{name} is not symmetric")
    try:
        np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        raise ValidationError(f"{name} is not positive definite") from None
    return mat


def check_positive(value, name):
    if not np.isfinite(value) or value <= 0:
        raise ValidationError(f"{name} must be positive, got {value}")
    return float(value)


def make_rng(seed, *keys):
    """Counter-based generator; extra integer keys (chain/ensemble ids) fold into the seed."""
    if isinstance(seed, np.random.Generator):
        return seed
    entropy = [int(seed)] + [int(k) for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
