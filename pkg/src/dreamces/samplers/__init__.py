from ..whitening import PriorWhitener, unwhiten, whiten
from .chain import ChainRecord, SamplerConfig, run_chain, tune_step_size
from .kernels import ChainState, StepInfo, inf_hmc_step, inf_mala_step, initial_state, leapfrog, pcn_step, rho_from_h
from .targets import (
    VOLUME_MODES,
    CallableTarget,
    EmulativeTarget,
    ExactTarget,
    LatentTarget,
    Target,
    make_target,
    zero_target,
)

__all__ = [
    "CallableTarget", "ChainRecord", "ChainState", "EmulativeTarget", "ExactTarget", "LatentTarget",
    "PriorWhitener", "SamplerConfig", "StepInfo", "Target", "VOLUME_MODES", "inf_hmc_step",
    "inf_mala_step", "initial_state", "leapfrog", "make_target", "pcn_step", "rho_from_h", "run_chain",
    "tune_step_size", "unwhiten", "whiten", "zero_target",
]
