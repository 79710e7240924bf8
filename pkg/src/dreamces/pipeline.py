"""Calibrate -> emulate -> autoencode -> sample -> diagnose, with persisted stage artifacts.

Artifact directory layout::

    config.yaml                 snapshot of the configuration used
    ensemble_params.tnsr        (N+1, J, d) calibration ensembles
    ensemble_outputs.tnsr       (N+1, J, m) forward values of the ensembles
    calibration.yaml            time steps, solve counts, timing
    emulator.net / .yaml        trained emulator and its training summary
    autoencoder.net / .yaml     trained autoencoder and its training summary
    chain_<tag>.tnsr            (n, d) post burn-in samples, original coordinates
    chain_<tag>_trace.tnsr      (iters, 4) potential, accepted, acceptance prob, seconds
    chain_<tag>_logw.tnsr       log weights (reweighted latent chains only)
    chain_<tag>.yaml            acceptance rate, timing, solve counts, configuration
    acf.csv misfit.csv kl.csv fields_mean.csv fields_sd.csv efficiency.csv
"""

import copy
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .autoencoder import Autoencoder
from .calibration import CalibrationHistory, run_calibration
from .diagnostics import write_diagnostics
from .emulation import NetworkRegressor, fit_emulator
from .exceptions import ConfigError, DreamError
from .forward_models import BENCHMARKS, make_benchmark
from .samplers import ChainRecord, SamplerConfig, make_target, run_chain

log = logging.getLogger("dreamces")

STAGES = ("calibrate", "emulate", "autoencode", "sample", "diagnose")
CHAIN_KEYS = {"tag", "space", "volume_mode"} | set(SamplerConfig.__dataclass_fields__)


@dataclass
class PipelineConfig:
    problem: dict
    calibration: dict
    emulation: dict = field(default_factory=dict)
    autoencoder: dict = field(default_factory=dict)
    sampling: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    output: str = None

    @classmethod
    def from_dict(cls, raw):
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a mapping")
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown configuration sections: {sorted(unknown)}")
        for section in ("problem", "calibration"):
            if section not in raw:
                raise ConfigError(f"configuration needs a '{section}' section")
        cfg = cls(**copy.deepcopy(raw))
        cfg.validate()
        return cfg

    def to_dict(self):
        return {k: copy.deepcopy(getattr(self, k)) for k in self.__dataclass_fields__}

    @property
    def chains(self):
        return self.sampling.get("chains", [])

    def validate(self):
        name = self.problem.get("name")
        if name not in BENCHMARKS:
            raise ConfigError(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}")
        cal = self.calibration
        if cal.get("method", "eks") not in ("eki", "eks"):
            raise ConfigError("calibration.method must be 'eki' or 'eks'")
        if int(cal.get("J", 100)) < 2 or int(cal.get("N", 50)) < 1:
            raise ConfigError("calibration needs J >= 2 and N >= 1")
        for section, block in (("calibration", cal), ("emulation", self.emulation),
                               ("autoencoder", self.autoencoder)):
            if block and "seed" not in block:
                raise ConfigError(f"{section}.seed must be given explicitly")
        try:
            NetworkRegressor(**self.emulation)
            Autoencoder(**self.autoencoder)
        except TypeError as exc:
            raise ConfigError(f"bad network parameters: {exc}") from exc
        if self.sampling.get("start", "ensemble_mean") not in ("ensemble_mean", "prior_mean"):
            raise ConfigError("sampling.start must be 'ensemble_mean' or 'prior_mean'")
        tags = set()
        for chain in self.chains:
            chain_config(chain)
            tag = chain_tag(chain)
            if tag in tags:
                raise ConfigError(f"duplicate chain tag {tag!r}")
            tags.add(tag)
        base = self.diagnostics.get("baseline")
        if base is not None and base not in tags:
            raise ConfigError(f"diagnostics.baseline {base!r} is not a chain tag")


def chain_tag(chain):
    return chain.get("tag") or f"{chain.get('space', 'exact')}_{chain.get('kernel', 'pcn')}"


def chain_config(chain):
    """Split a chain block into (SamplerConfig, space, volume_mode)."""
    unknown = set(chain) - CHAIN_KEYS
    if unknown:
        raise ConfigError(f"unknown chain keys: {sorted(unknown)}")
    if "seed" not in chain:
        raise ConfigError(f"chain {chain_tag(chain)!r} needs an explicit seed")
    space = chain.get("space", "exact")
    if space not in ("exact", "emulative", "dream"):
        raise ConfigError(f"chain space must be exact, emulative or dream, got {space!r}")
    mode = chain.get("volume_mode", "accept")
    if mode not in ("accept", "reweight", "none"):
        raise ConfigError(f"volume_mode must be accept, reweight or none, got {mode!r}")
    params = {k: v for k, v in chain.items() if k in SamplerConfig.__dataclass_fields__}
    params["tag"] = chain_tag(chain)
    if "accept_band" in params:
        params["accept_band"] = tuple(params["accept_band"])
    try:
        return SamplerConfig(**params), space, mode
    except TypeError as exc:
        raise ConfigError(f"bad chain parameters: {exc}") from exc


class Pipeline:
    """Stage runner bound to a configuration and an artifact directory.

    With ``resume=True`` a stage whose artifacts already exist is loaded
    instead of recomputed.  Stages named in ``reuse`` are loaded from disk
    when present even without ``resume`` (used when a single stage is run
    on top of earlier ones).
    """

    def __init__(self, config, out_dir=None, resume=False, reuse=()):
        self.config = config if isinstance(config, PipelineConfig) else PipelineConfig.from_dict(config)
        out = out_dir or self.config.output
        if out is None:
            raise ConfigError("no output directory given")
        self.out = Path(out)
        self.resume = resume
        self.reuse = set(reuse)
        self._benchmark = None
        self._history = None
        self._emulator = None
        self._ae = None

    def path(self, name):
        return self.out / name

    @property
    def benchmark(self):
        if self._benchmark is None:
            self._benchmark = make_benchmark(self.config.problem["name"], **self.config.problem.get("params", {}))
            d = self._benchmark.prior.dim
            latent = self.config.autoencoder.get("latent_dim")
            if latent is not None and not 1 <= int(latent) < d:
                raise ConfigError(f"autoencoder.latent_dim must lie in [1, {d - 1}], got {latent}")
        return self._benchmark

    def _have(self, stage, *names):
        return (self.resume or stage in self.reuse) and all(self.path(n).exists() for n in names)

    def _prepare(self):
        self.out.mkdir(parents=True, exist_ok=True)
        io.dump_config(self.config.to_dict(), self.path("config.yaml"))

    # stages

    def calibrate(self):
        if self._history is not None:
            return self._history
        files = ("ensemble_params.tnsr", "ensemble_outputs.tnsr")
        if self._have("calibrate", *files):
            meta = io.read_sidecar(self.path("calibration.yaml")) if self.path("calibration.yaml").exists() else {}
            self._history = CalibrationHistory.from_arrays(
                io.read_tensor(self.path(files[0])), io.read_tensor(self.path(files[1])),
                meta.get("timesteps", []), meta.get("method", "eks"))
            return self._history
        b, cal = self.benchmark, self.config.calibration
        self._prepare()
        solves0, tic = b.model.n_solves, time.perf_counter()
        hist = run_calibration(b.model, b.obs, b.prior, cal.get("method", "eks"), int(cal.get("J", 100)),
                               int(cal.get("N", 50)), int(cal["seed"]), cal.get("h"), cal.get("sigma", "zero"))
        io.write_tensor(self.path(files[0]), hist.params)
        io.write_tensor(self.path(files[1]), hist.outputs)
        io.write_sidecar(self.path("calibration.yaml"), {
            "method": hist.method, "J": int(hist.final.size), "N": len(hist.timesteps),
            "timesteps": [float(t) for t in hist.timesteps], "forward_solves": int(b.model.n_solves - solves0),
            "seconds": time.perf_counter() - tic})
        self._history = hist
        return hist

    def emulate(self):
        if self._emulator is not None:
            return self._emulator
        b = self.benchmark
        if self._have("emulate", "emulator.net"):
            self._emulator = io.load_emulator(self.path("emulator.net"), b.obs)
            return self._emulator
        hist = self.calibrate()
        params = dict(self.config.emulation)
        if params.get("architecture") == "conv" and params.get("grid") is None:
            params["grid"] = b.info.get("grid")
        for key in ("filters", "grid"):
            if params.get(key) is not None:
                params[key] = tuple(params[key])
        tic = time.perf_counter()
        em = fit_emulator(hist, b.prior, b.obs, NetworkRegressor(**params))
        self._prepare()
        io.save_emulator(self.path("emulator.net"), em)
        res = em.regressor.train_result_
        io.write_sidecar(self.path("emulator.yaml"), {
            "train_mse": float(res.final_train), "test_mse": float(res.final_test),
            "initial_train_mse": float(res.train_loss[0]), "n_train": res.n_train, "n_test": res.n_test,
            "n_params": int(em.regressor.network_.n_params), "seconds": time.perf_counter() - tic})
        self._emulator = em
        return em

    def autoencode(self):
        if self._ae is not None:
            return self._ae
        if self._have("autoencode", "autoencoder.net"):
            self._ae = io.load_autoencoder(self.path("autoencoder.net"))
            return self._ae
        b, hist = self.benchmark, self.calibrate()
        X, _ = hist.pairs()
        tic = time.perf_counter()
        ae = Autoencoder(**self.config.autoencoder).fit(b.prior.invsqrt_apply(X))
        self._prepare()
        io.save_autoencoder(self.path("autoencoder.net"), ae)
        res = ae.train_result_
        io.write_sidecar(self.path("autoencoder.yaml"), {
            "train_mse": float(res.final_train), "test_mse": float(res.final_test),
            "initial_train_mse": float(res.train_loss[0]), "latent_dim": int(ae.d_latent),
            "seconds": time.perf_counter() - tic})
        self._ae = ae
        return ae

    def start_point(self):
        """Initial state in original coordinates."""
        if self.config.sampling.get("start", "ensemble_mean") == "prior_mean":
            return np.zeros(self.benchmark.prior.dim)
        return self.calibrate().final.mean()

    def target(self, space, volume_mode="accept"):
        b = self.benchmark
        em = self.emulate() if space in ("emulative", "dream") else None
        ae = self.autoencode() if space == "dream" else None
        return make_target(space, b.prior, b.model, b.obs, em, ae, volume_mode)

    def sample_one(self, chain):
        cfg, space, mode = chain_config(chain)
        tag = cfg.tag
        if self._have("sample", f"chain_{tag}.tnsr", f"chain_{tag}_trace.tnsr", f"chain_{tag}.yaml"):
            return self.load_chain(tag)
        target = self.target(space, mode)
        x0 = target.from_original(self.start_point())
        rec = run_chain(target, cfg, x0)
        self._prepare()
        self.save_chain(rec, mode)
        return rec

    def sample(self, chains=None):
        return [self.sample_one(c) for c in (self.config.chains if chains is None else chains)]

    def save_chain(self, rec, volume_mode="accept"):
        io.write_tensor(self.path(f"chain_{rec.tag}.tnsr"), rec.samples)
        trace = np.column_stack([rec.potentials, rec.accepted.astype(float), rec.accept_probs, rec.times])
        io.write_tensor(self.path(f"chain_{rec.tag}_trace.tnsr"), trace.reshape(-1, 4))
        if rec.log_weights is not None:
            io.write_tensor(self.path(f"chain_{rec.tag}_logw.tnsr"), rec.log_weights)
        io.write_sidecar(self.path(f"chain_{rec.tag}.yaml"), {
            "tag": rec.tag, "kernel": rec.kernel, "space": rec.space, "step": float(rec.step),
            "volume_mode": volume_mode if rec.space == "dream" else "none",
            "iterations": int(rec.potentials.size), "burnin": int(rec.burnin), "samples": int(rec.n_samples),
            "acceptance_rate": float(rec.acceptance_rate), "seconds_per_iteration": float(rec.seconds_per_iter),
            "total_seconds": float(rec.total_time), "pde_solves": int(rec.n_solves),
            "divergences": int(rec.divergences), "config": rec.meta.get("config", {})})

    def load_chain(self, tag):
        meta = io.read_sidecar(self.path(f"chain_{tag}.yaml"))
        samples = io.read_tensor(self.path(f"chain_{tag}.tnsr"))
        trace = io.read_tensor(self.path(f"chain_{tag}_trace.tnsr"))
        logw_path = self.path(f"chain_{tag}_logw.tnsr")
        logw = io.read_tensor(logw_path) if logw_path.exists() else None
        return ChainRecord(samples, trace[:, 0], trace[:, 1].astype(bool), trace[:, 2], trace[:, 3],
                           meta["pde_solves"], meta["divergences"], logw, tag, meta["kernel"], meta["space"],
                           meta["step"], meta["burnin"], {"config": meta.get("config", {})})

    def diagnose(self, records=None):
        if records is None:
            tags = [chain_tag(c) for c in self.config.chains]
            missing = [t for t in tags if not self.path(f"chain_{t}.tnsr").exists()]
            if missing:
                raise ConfigError(f"no chain files for {missing}; run the sample stage first")
            records = [self.load_chain(t) for t in tags]
        b, dcfg = self.benchmark, self.config.diagnostics
        return write_diagnostics(self.out, records, b.model, b.obs, b.prior, dcfg.get("baseline"),
                                 dcfg.get("max_lag", 100), dcfg.get("kl_every", 10))

    def run_stage(self, name, **kwargs):
        if name not in STAGES:
            raise ConfigError(f"unknown stage {name!r}")
        log.info("stage %s", name)
        try:
            return getattr(self, name)(**kwargs)
        except DreamError as exc:
            exc.stage = name
            raise

    def run(self):
        out = {}
        for name in STAGES:
            if name == "emulate" and not self._needs("emulative", "dream"):
                continue
            if name == "autoencode" and not self._needs("dream"):
                continue
            if name in ("sample", "diagnose") and not self.config.chains:
                continue
            out[name] = self.run_stage(name)
        return out

    def _needs(self, *spaces):
        return not self.config.chains or any(c.get("space", "exact") in spaces for c in self.config.chains)


def run_pipeline(config, out_dir=None, resume=False):
    """Execute every stage and return the artifact directory."""
    pipe = Pipeline(config, out_dir, resume)
    pipe.run()
    return pipe.out
