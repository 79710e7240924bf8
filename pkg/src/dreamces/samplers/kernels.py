"""pCN, infinity-MALA and infinity-HMC transitions for targets with a N(0, I) reference measure.

Each step draws its proposal noise first (``standard_normal(dim)``) and the
acceptance uniform last, so kernels that coincide structurally produce
identical proposals from identical generators.
"""

from dataclasses import dataclass

import numpy as np

from ..exceptions import ConfigError


@dataclass
class ChainState:
    x: np.ndarray
    phi: float
    grad: np.ndarray = None


@dataclass
class StepInfo:
    accepted: bool
    accept_prob: float
    divergent: bool = False


def rho_from_h(h):
    """Crank-Nicolson autocorrelation (1 - h/4) / (1 + h/4)."""
    if h < 0:
        raise ConfigError(f"step size h must be non-negative, got {h}")
    return (1.0 - h / 4.0) / (1.0 + h / 4.0)


def initial_state(target, x, need_grad=False):
    x = np.asarray(x, dtype=np.float64).copy()
    if need_grad:
        phi, g = target.potential_and_grad(x)
        return ChainState(x, phi, g)
    return ChainState(x, target.potential(x))


def _accept(log_a, rng):
    """Metropolis decision; non-finite log ratios count as divergent rejections."""
    if not np.isfinite(log_a):
        rng.uniform()
        return False, 0.0, True
    prob = float(np.exp(min(0.0, log_a)))
    return bool(np.log(rng.uniform()) < log_a), prob, False


def pcn_step(state, target, rho, rng):
    """One preconditioned Crank-Nicolson step with autocorrelation ``rho``."""
    if not 0.0 < rho <= 1.0:
        raise ConfigError(f"pCN rho must lie in (0, 1], got {rho}")
    xi = rng.standard_normal(target.dim)
    x_new = rho * state.x + np.sqrt(1.0 - rho * rho) * xi
    with np.errstate(over="ignore", invalid="ignore"):
        try:
            phi_new = target.potential(x_new)
        except ArithmeticError:
            phi_new = np.inf
        log_a = state.phi - phi_new + (target.log_volume(state.x, x_new) if np.isfinite(phi_new) else 0.0)
    ok, prob, div = _accept(log_a, rng)
    new = ChainState(x_new, phi_new) if ok else state
    return new, StepInfo(ok, prob, div)


def _log_kappa(phi, g, v, h, alpha):
    return -phi - alpha**2 * h / 8.0 * float(g @ g) - alpha * np.sqrt(h) / 2.0 * float(g @ v)


def inf_mala_step(state, target, h, alpha, rng):
    """One infinity-MALA step; ``alpha = 0`` gives exactly the pCN proposal."""
    if not target.has_gradient:
        raise ConfigError("infinity-MALA needs a target gradient")
    if h <= 0:
        raise ConfigError(f"step size h must be positive, got {h}")
    rho = rho_from_h(h)
    s = np.sqrt(1.0 - rho * rho)
    if state.grad is None:
        state = ChainState(state.x, *target.potential_and_grad(state.x))
    xi = rng.standard_normal(target.dim)
    v = xi - (alpha * np.sqrt(h) / 2.0) * state.grad
    x_new = rho * state.x + s * v
    with np.errstate(over="ignore", invalid="ignore"):
        try:
            phi_new, g_new = target.potential_and_grad(x_new)
            v_rev = (state.x - rho * x_new) / s
            log_a = (_log_kappa(phi_new, g_new, v_rev, h, alpha)
                     - _log_kappa(state.phi, state.grad, v, h, alpha))
            if np.isfinite(log_a):
                log_a += target.log_volume(state.x, x_new)
        except ArithmeticError:
            log_a = np.nan
    ok, prob, div = _accept(log_a, rng)
    new = ChainState(x_new, phi_new, g_new) if ok else state
    return new, StepInfo(ok, prob, div)


def leapfrog(x, v, grad, target, eps, alpha=1.0, rotation=None):
    """One kick-rotate-kick step for the Hamiltonian with a N(0, I) reference.

    ``grad`` is DPhi at ``x``.  Returns ``(x', v', phi', grad')``.  The
    rotation defaults to ``(cos eps, sin eps)``; passing another unit pair
    changes only the free flow (used to express infinity-MALA as one step).
    """
    c, s = (np.cos(eps), np.sin(eps)) if rotation is None else rotation
    v_half = v - (alpha * eps / 2.0) * grad
    x_new = c * x + s * v_half
    v_rot = -s * x + c * v_half
    phi_new, g_new = target.potential_and_grad(x_new)
    return x_new, v_rot - (alpha * eps / 2.0) * g_new, phi_new, g_new


def inf_hmc_step(state, target, eps, n_leapfrog, alpha, rng, rotation=None):
    """One infinity-HMC step with full velocity refresh.

    The energy change is accumulated along the trajectory:
    dH = Phi_I - Phi_0 - a^2 eps^2/8 (|g_I|^2 - |g_0|^2)
         - a eps/2 * sum_i (<v_i, g_i> + <v_{i+1}, g_{i+1}>).
    """
    if not target.has_gradient:
        raise ConfigError("infinity-HMC needs a target gradient")
    if eps <= 0 or n_leapfrog < 1:
        raise ConfigError("infinity-HMC needs eps > 0 and at least one leapfrog step")
    if state.grad is None:
        state = ChainState(state.x, *target.potential_and_grad(state.x))
    v = rng.standard_normal(target.dim)
    x, g, phi = state.x, state.grad, state.phi
    half = alpha * eps / 2.0
    dh = -phi + (alpha * eps) ** 2 / 8.0 * float(g @ g)
    with np.errstate(over="ignore", invalid="ignore"):
        try:
            for _ in range(n_leapfrog):
                dh -= half * float(v @ g)
                x, v, phi, g = leapfrog(x, v, g, target, eps, alpha, rotation)
                dh -= half * float(v @ g)
                if not np.isfinite(phi):
                    break
            dh += phi - (alpha * eps) ** 2 / 8.0 * float(g @ g)
            log_a = -dh
            if np.isfinite(log_a):
                log_a += target.log_volume(state.x, x)
        except ArithmeticError:
            log_a = np.nan
    ok, prob, div = _accept(log_a, rng)
    new = ChainState(x, phi, g) if ok else state
    return new, StepInfo(ok, prob, div)
