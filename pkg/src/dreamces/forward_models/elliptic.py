"""Cell-centred finite-volume solver for -div(exp(u) grad p) = f on the unit square.

No-flux boundary conditions leave p determined up to a constant; the constant is
fixed by requiring the boundary integral of p to vanish, imposed through one
Lagrange-multiplier row appended to the symmetric system.  Transmissivity at
interior faces is the harmonic mean of the two adjacent cells.
"""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from scipy.special import erf

from .._validation import as_vector
from ..exceptions import SolverFailure, ValidationError
from .models import ForwardModel
from .prior import grid_points

PLUME_CENTERS = ((0.3, 0.3), (0.7, 0.3), (0.7, 0.7), (0.3, 0.7))
PLUME_WEIGHTS = (2.0, -3.0, 3.0, -2.0)
PLUME_SD = 0.05


def lattice_sensors(k=5):
    """Centred ``k x k`` lattice of interior points, row-major."""
    c = (np.arange(k) + 0.5) / k
    yy, xx = np.meshgrid(c, c, indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel()])


def plume_forcing(n, centers=PLUME_CENTERS, weights=PLUME_WEIGHTS, sd=PLUME_SD):
    """Integral of the Gaussian-plume source over each cell (exact, via erf)."""
    edges = np.arange(n + 1) / n
    scale = sd * np.sqrt(2.0)
    total = np.zeros((n, n))
    for (cx, cy), w in zip(centers, weights):
        ix = sd * np.sqrt(np.pi / 2) * np.diff(erf((edges - cx) / scale))
        iy = sd * np.sqrt(np.pi / 2) * np.diff(erf((edges - cy) / scale))
        total += w * np.outer(iy, ix)
    return total.ravel()


def bilinear_observation(n, points):
    """Sparse operator interpolating cell-centre values at ``points``."""
    points = np.asarray(points, dtype=np.float64)
    rows, cols, vals = [], [], []
    for r, (sx, sy) in enumerate(points):
        fx, fy = sx * n - 0.5, sy * n - 0.5
        j0 = int(np.clip(np.floor(fx), 0, n - 2))
        i0 = int(np.clip(np.floor(fy), 0, n - 2))
        tx, ty = fx - j0, fy - i0
        for di, dj, wgt in ((0, 0, (1 - ty) * (1 - tx)), (0, 1, (1 - ty) * tx),
                            (1, 0, ty * (1 - tx)), (1, 1, ty * tx)):
            rows.append(r)
            cols.append((i0 + di) * n + (j0 + dj))
            vals.append(wgt)
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(points), n * n))


def two_bump_field(points, amplitudes=(1.5, -1.2), centers=((0.3, 0.7), (0.7, 0.3)), radius=0.25):
    """Synthetic log-transmissivity: two compactly supported cosine bumps, zero elsewhere."""
    points = np.asarray(points, dtype=np.float64)
    out = np.zeros(len(points))
    for amp, c in zip(amplitudes, centers):
        r = np.linalg.norm(points - np.asarray(c), axis=1) / radius
        out += np.where(r < 1.0, amp * np.cos(0.5 * np.pi * r) ** 2, 0.0)
    return out


class EllipticModel(ForwardModel):
    """Pressure observations of the elliptic problem with k = exp(u) on an ``n x n`` grid."""

    has_exact_gradient = True
    name = "elliptic"

    def __init__(self, n=16, sensors=None):
        if n < 2:
            raise ValidationError("grid needs at least 2 cells per side")
        self.n = int(n)
        self.sensors = lattice_sensors(5) if sensors is None else np.asarray(sensors, float)
        super().__init__(self.n**2, len(self.sensors))
        self.h = 1.0 / self.n
        self.points = grid_points(self.n)
        self.forcing = plume_forcing(self.n)
        self.observation = bilinear_observation(self.n, self.sensors)

        idx = np.arange(self.n**2).reshape(self.n, self.n)
        self._fa = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
        self._fb = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
        # boundary edge length per cell (corners carry two edges)
        sides = np.zeros((self.n, self.n))
        sides[0, :] += 1
        sides[-1, :] += 1
        sides[:, 0] += 1
        sides[:, -1] += 1
        self.boundary_weights = (sides * self.h).ravel()
        bnd = np.flatnonzero(self.boundary_weights)
        N = self.n**2
        self._rows = np.concatenate([self._fa, self._fb, self._fa, self._fb, bnd, np.full(bnd.size, N)])
        self._cols = np.concatenate([self._fa, self._fb, self._fb, self._fa, np.full(bnd.size, N), bnd])
        self._cdata = np.concatenate([self.boundary_weights[bnd]] * 2)

    def _transmissibility(self, k):
        ka, kb = k[self._fa], k[self._fb]
        return 2.0 * ka * kb / (ka + kb)

    def assemble(self, u):
        """Augmented (n^2 + 1) square system matrix for log-transmissivity ``u``."""
        with np.errstate(over="ignore"):
            k = np.exp(u)
        if not np.all(np.isfinite(k)) or np.any(k <= 0):
            raise SolverFailure("transmissivity overflow", u)
        t = self._transmissibility(k)
        data = np.concatenate([t, t, -t, -t, self._cdata])
        N = self.n**2 + 1
        return sp.csc_matrix((data, (self._rows, self._cols)), shape=(N, N))

    def _factor(self, u):
        try:
            lu = splu(self.assemble(u))
        except RuntimeError as exc:
            raise SolverFailure(f"singular elliptic system: {exc}", u) from exc
        return lu

    def _solve(self, lu, rhs, u):
        sol = lu.solve(rhs)
        if not np.all(np.isfinite(sol)):
            raise SolverFailure("non-finite elliptic solution", u)
        return sol

    def solve(self, u):
        """Pressure on cell centres (length n^2)."""
        u = as_vector(u, "u", self.d)
        self.n_solves += 1
        rhs = np.append(self.forcing, 0.0)
        return self._solve(self._factor(u), rhs, u)[:-1]

    def boundary_mean(self, p):
        return float(self.boundary_weights @ p / self.boundary_weights.sum())

    def _evaluate(self, u):
        rhs = np.append(self.forcing, 0.0)
        p = self._solve(self._factor(u), rhs, u)[:-1]
        return self.observation @ p

    def _adjoint_grad(self, u, lu, p, w):
        # d<w, O p>/du = -mu^T (dA/du) p  with  A mu = O^T w
        mu = self._solve(lu, np.append(self.observation.T @ w, 0.0), u)[:-1]
        k = np.exp(u)
        ka, kb = k[self._fa], k[self._fb]
        jump = (mu[self._fa] - mu[self._fb]) * (p[self._fa] - p[self._fb])
        denom = (ka + kb) ** 2
        ga = -jump * 2.0 * ka * kb**2 / denom
        gb = -jump * 2.0 * kb * ka**2 / denom
        grad = np.bincount(self._fa, ga, minlength=self.d)
        grad += np.bincount(self._fb, gb, minlength=self.d)
        return grad

    def vjp(self, u, w):
        u = as_vector(u, "u", self.d)
        w = as_vector(w, "w", self.m)
        self.n_solves += 2
        lu = self._factor(u)
        p = self._solve(lu, np.append(self.forcing, 0.0), u)[:-1]
        return self._adjoint_grad(u, lu, p, w)

    def potential_and_grad(self, u, obs):
        """Misfit and its gradient from one factorisation (forward + adjoint solve)."""
        u = as_vector(u, "u", self.d)
        self.n_solves += 2
        lu = self._factor(u)
        p = self._solve(lu, np.append(self.forcing, 0.0), u)[:-1]
        r = obs.y - self.observation @ p
        pr = obs.precision_apply(r)
        return 0.5 * float(r @ pr), self._adjoint_grad(u, lu, p, -pr)
