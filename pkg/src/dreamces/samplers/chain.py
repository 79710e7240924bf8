"""Chain driver, sampler configuration and step-size tuning."""

import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .._validation import make_rng
from ..exceptions import ConfigError
from .kernels import inf_hmc_step, inf_mala_step, initial_state, pcn_step, rho_from_h

KERNEL_ALIASES = {"pcn": "pcn", "mala": "mala", "inf_mala": "mala", "hmc": "hmc", "inf_hmc": "hmc"}
# keeps rho > 0 for pCN/MALA and the rotation angle below pi/2 for HMC
MAX_STEP = {"pcn": 3.9, "mala": 3.9, "hmc": 1.5}


@dataclass
class SamplerConfig:
    kernel: str = "pcn"
    step: float = 0.1
    n_leapfrog: int = 5
    alpha: float = 1.0
    iters: int = 1000
    burnin: int = 0
    seed: int = 0
    chain_id: int = 0
    tune: bool = False
    pilot: int = 500
    tune_window: int = 50
    target_accept: float = 0.65
    accept_band: tuple = (0.6, 0.7)
    tag: str = None

    def __post_init__(self):
        try:
            self.kernel = KERNEL_ALIASES[self.kernel]
        except KeyError:
            raise ConfigError(f"kernel must be one of {sorted(KERNEL_ALIASES)}, got {self.kernel!r}") from None
        if not self.step > 0:
            raise ConfigError(f"step size must be positive, got {self.step}")
        if self.step > MAX_STEP[self.kernel]:
            raise ConfigError(f"{self.kernel} step size must not exceed {MAX_STEP[self.kernel]}")
        if self.n_leapfrog < 1:
            raise ConfigError("need at least one leapfrog step")
        if self.iters < 0 or self.burnin < 0 or (self.iters > 0 and self.burnin >= self.iters):
            raise ConfigError("need 0 <= burnin < iters")
        if self.iters == 0 and self.burnin:
            raise ConfigError("a zero-iteration chain cannot have burn-in")
        lo, hi = self.accept_band
        if not 0 < lo < hi < 1:
            raise ConfigError("acceptance band must satisfy 0 < lo < hi < 1")
        self.accept_band = (float(lo), float(hi))

    def to_dict(self):
        out = asdict(self)
        out["accept_band"] = list(self.accept_band)
        return out


@dataclass
class ChainRecord:
    """Post burn-in samples in original coordinates plus per-iteration traces."""

    samples: np.ndarray
    potentials: np.ndarray
    accepted: np.ndarray
    accept_probs: np.ndarray
    times: np.ndarray
    n_solves: int = 0
    divergences: int = 0
    log_weights: np.ndarray = None
    tag: str = "chain"
    kernel: str = "pcn"
    space: str = "exact"
    step: float = 0.0
    burnin: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n_samples(self):
        return self.samples.shape[0]

    @property
    def acceptance_rate(self):
        kept = self.accepted[self.burnin:]
        return float(kept.mean()) if kept.size else float("nan")

    @property
    def seconds_per_iter(self):
        return float(self.times.mean()) if self.times.size else float("nan")

    @property
    def total_time(self):
        return float(self.times.sum())

    def weights(self):
        """Normalised importance weights (uniform unless the chain was reweighted)."""
        n = self.n_samples
        if self.log_weights is None or n == 0:
            return np.full(n, 1.0 / max(n, 1))
        w = np.exp(self.log_weights - self.log_weights.max())
        return w / w.sum()

    def mean(self):
        return self.weights() @ self.samples

    def std(self):
        w = self.weights()
        mu = w @ self.samples
        var = w @ (self.samples - mu) ** 2
        n = self.n_samples
        # unbiased for uniform weights
        return np.sqrt(var * n / max(n - 1, 1)) if self.log_weights is None else np.sqrt(var)


def _transition(kernel, state, target, step, cfg, rng):
    if kernel == "pcn":
        return pcn_step(state, target, rho_from_h(step), rng)
    if kernel == "mala":
        return inf_mala_step(state, target, step, cfg.alpha, rng)
    return inf_hmc_step(state, target, step, cfg.n_leapfrog, cfg.alpha, rng)


def _start(target, cfg, x0):
    x0 = np.zeros(target.dim) if x0 is None else np.asarray(x0, dtype=np.float64)
    if x0.shape != (target.dim,):
        raise ConfigError(f"initial state must have length {target.dim}")
    if cfg.kernel != "pcn" and not target.has_gradient:
        raise ConfigError(f"{cfg.kernel} needs a target gradient")
    return initial_state(target, x0, need_grad=cfg.kernel != "pcn")


def tune_step_size(target, cfg, pilot=None, x0=None):
    """Robbins-Monro adaptation of log step size toward ``cfg.target_accept``.

    The pilot runs in blocks of ``cfg.tune_window`` iterations at a fixed step.
    After each block the step is accepted if the block's mean acceptance
    probability lies in ``cfg.accept_band``; otherwise
    ``log step += gain_k * (mean - target)`` with ``gain_k = 2 / (k + 1)^0.6``.
    """
    pilot = cfg.pilot if pilot is None else int(pilot)
    if pilot < 100:
        raise ConfigError("tuning needs a pilot of at least 100 iterations")
    rng = make_rng(cfg.seed, cfg.chain_id, 1)
    state = _start(target, cfg, x0)
    log_step = np.log(cfg.step)
    cap = np.log(MAX_STEP[cfg.kernel])
    lo, hi = cfg.accept_band
    best, best_gap = cfg.step, np.inf
    window = max(1, min(cfg.tune_window, pilot))
    for k in range(pilot // window):
        step = float(np.exp(log_step))
        probs = np.empty(window)
        for i in range(window):
            state, info = _transition(cfg.kernel, state, target, step, cfg, rng)
            probs[i] = info.accept_prob
        mean = float(probs.mean())
        if lo <= mean <= hi:
            return step
        if abs(mean - cfg.target_accept) < best_gap:
            best, best_gap = step, abs(mean - cfg.target_accept)
        log_step = min(log_step + 2.0 / (k + 1) ** 0.6 * (mean - cfg.target_accept), cap)
    warnings.warn(f"step-size tuning did not reach the band {cfg.accept_band}; returning {best:.4g}",
                  RuntimeWarning, stacklevel=2)
    return best


def run_chain(target, cfg, x0=None):
    """Run ``cfg.iters`` transitions from ``x0`` (reference coordinates, default 0)."""
    step = tune_step_size(target, cfg, x0=x0) if cfg.tune and cfg.iters > 0 else cfg.step
    rng = make_rng(cfg.seed, cfg.chain_id)
    n = cfg.iters
    potentials = np.empty(n)
    accepted = np.zeros(n, dtype=bool)
    probs = np.empty(n)
    times = np.empty(n)
    kept = np.empty((n - cfg.burnin, target.dim))
    reweight = getattr(target, "volume_mode", "none") == "reweight"
    log_w = np.empty(n - cfg.burnin) if reweight else None
    divergences = 0
    solves0 = target.n_solves
    if n:
        state = _start(target, cfg, x0)
    last_w = None
    for t in range(n):
        tic = time.perf_counter()
        state, info = _transition(cfg.kernel, state, target, step, cfg, rng)
        times[t] = time.perf_counter() - tic
        potentials[t] = state.phi
        accepted[t] = info.accepted
        probs[t] = info.accept_prob
        divergences += info.divergent
        if t >= cfg.burnin:
            j = t - cfg.burnin
            kept[j] = state.x
            if reweight:
                if info.accepted or last_w is None:
                    last_w = target.log_weight(state.x)
                log_w[j] = last_w
    samples = target.to_original(kept) if len(kept) else np.empty((0, target.original_dim))
    tag = cfg.tag or f"{target.space}_{cfg.kernel}"
    return ChainRecord(samples, potentials, accepted, probs, times, target.n_solves - solves0, divergences,
                       log_w, tag, cfg.kernel, target.space, float(step), cfg.burnin,
                       {"config": cfg.to_dict(), "tuned_step": float(step)})
