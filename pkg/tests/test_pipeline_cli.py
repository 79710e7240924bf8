import subprocess
import sys
import time

import numpy as np
import pytest
import yaml

from dreamces.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, run
from dreamces.exceptions import ConfigError
from dreamces.io import read_sidecar, read_tensor
from dreamces.pipeline import Pipeline, PipelineConfig, chain_config, run_pipeline


def smoke_config(iters=500):
    return {
        "problem": {"name": "linear"},
        "calibration": {"method": "eks", "J": 20, "N": 5, "seed": 0},
        "emulation": {"n_layers": 2, "epochs": 30, "learning_rate": 3e-3, "seed": 0},
        "autoencoder": {"latent_dim": 2, "n_layers": 1, "activation": "linear", "epochs": 30, "seed": 0},
        "sampling": {"chains": [
            {"tag": "exact_pcn", "space": "exact", "kernel": "pcn", "step": 0.05, "iters": iters,
             "burnin": 100, "seed": 1, "tune": True, "pilot": 500},
            {"tag": "e_hmc", "space": "emulative", "kernel": "hmc", "step": 0.2, "n_leapfrog": 3,
             "iters": iters, "burnin": 100, "seed": 2, "tune": True, "pilot": 500},
            {"tag": "dream_mala", "space": "dream", "kernel": "mala", "step": 0.1, "iters": iters,
             "burnin": 100, "seed": 3, "tune": True, "pilot": 500},
        ]},
        "diagnostics": {"baseline": "exact_pcn", "max_lag": 20},
    }


def write_cfg(tmp_path, cfg, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return path


@pytest.fixture(scope="module")
def smoke_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("smoke")
    tic = time.perf_counter()
    run_pipeline(smoke_config(), out)
    return out, time.perf_counter() - tic


def test_smoke_pipeline_artifacts(smoke_run):
    out, seconds = smoke_run
    assert seconds < 60
    for name in ("config.yaml", "ensemble_params.tnsr", "ensemble_outputs.tnsr", "calibration.yaml",
                 "emulator.net", "emulator.yaml", "autoencoder.net", "autoencoder.yaml",
                 "acf.csv", "misfit.csv", "kl.csv", "fields_mean.csv", "fields_sd.csv", "efficiency.csv"):
        assert (out / name).exists(), name
    assert read_tensor(out / "ensemble_params.tnsr").shape == (6, 20, 3)
    for tag in ("exact_pcn", "e_hmc", "dream_mala"):
        assert read_tensor(out / f"chain_{tag}.tnsr").shape == (400, 3)
        assert read_tensor(out / f"chain_{tag}_trace.tnsr").shape == (500, 4)
    meta = {t: read_sidecar(out / f"chain_{t}.yaml") for t in ("exact_pcn", "e_hmc", "dream_mala")}
    assert meta["exact_pcn"]["pde_solves"] > 0
    assert meta["e_hmc"]["pde_solves"] == 0 and meta["dream_mala"]["pde_solves"] == 0
    assert read_sidecar(out / "calibration.yaml")["forward_solves"] == 20 * 6


def test_pipeline_is_deterministic(smoke_run, tmp_path):
    out, _ = smoke_run
    cfg = smoke_config()
    cfg["sampling"]["chains"] = cfg["sampling"]["chains"][2:]
    cfg["diagnostics"] = {}
    run_pipeline(cfg, tmp_path)
    for name in ("ensemble_params.tnsr", "chain_dream_mala.tnsr"):
        assert np.array_equal(read_tensor(tmp_path / name), read_tensor(out / name))


def test_resume_reuses_artifacts(smoke_run):
    out, _ = smoke_run
    before = {p.name: p.stat().st_mtime_ns for p in out.glob("*.tnsr")}
    pipe = Pipeline(smoke_config(), out, resume=True)
    pipe.run()
    after = {p.name: p.stat().st_mtime_ns for p in out.glob("*.tnsr")}
    assert before == after
    # only the diagnostics touch the exact model: one misfit per stored sample
    assert pipe.benchmark.model.n_solves == 3 * 400


def test_cli_stages_and_exit_ok(smoke_run, tmp_path, capsys):
    cfg_path = write_cfg(tmp_path, smoke_config(200))
    out = tmp_path / "out"
    assert run(["calibrate", "--config", str(cfg_path), "--out", str(out)]) == EXIT_OK
    assert run(["sample", "--config", str(cfg_path), "--out", str(out), "--space", "exact",
                "--kernel", "hmc", "--step", "0.1", "--iters", "50", "--burnin", "10", "--seed", "5"]) == EXIT_OK
    assert (out / "chain_exact_hmc.tnsr").exists()
    assert "exact_hmc: acceptance" in capsys.readouterr().out


def test_cli_config_errors(tmp_path, capsys):
    out = str(tmp_path / "o")
    bad = smoke_config()
    bad["problem"]["name"] = "heat"
    assert run(["pipeline", "--config", str(write_cfg(tmp_path, bad)), "--out", out]) == EXIT_CONFIG
    assert run(["pipeline", "--config", str(tmp_path / "missing.yaml"), "--out", out]) == EXIT_CONFIG
    noseed = smoke_config()
    del noseed["sampling"]["chains"][0]["seed"]
    assert run(["pipeline", "--config", str(write_cfg(tmp_path, noseed, "n.yaml")), "--out", out]) == EXIT_CONFIG
    with pytest.raises(SystemExit) as exc:
        run(["frobnicate"])
    assert exc.value.code == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_cli_numerical_failure(tmp_path, capsys):
    cfg = smoke_config()
    cfg["emulation"] = {"optimizer": "sgd", "learning_rate": 1e12, "epochs": 5, "seed": 0}
    cfg["sampling"]["chains"] = cfg["sampling"]["chains"][1:2]
    cfg["diagnostics"] = {}
    code = run(["pipeline", "--config", str(write_cfg(tmp_path, cfg)), "--out", str(tmp_path / "o")])
    assert code == EXIT_NUMERICAL
    assert "numerical failure in stage 'emulate'" in capsys.readouterr().err


def test_console_entry_point(tmp_path):
    cfg = smoke_config()
    cfg["sampling"] = {}
    cfg["diagnostics"] = {}
    cfg_path = write_cfg(tmp_path, cfg)
    proc = subprocess.run([sys.executable, "-m", "dreamces.cli", "calibrate", "--config", str(cfg_path),
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == EXIT_OK, proc.stderr
    assert (tmp_path / "o" / "ensemble_params.tnsr").exists()


def test_config_validation():
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"problem": {"name": "linear"}})
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({**smoke_config(), "extra": {}})
    dup = smoke_config()
    dup["sampling"]["chains"][1]["tag"] = "exact_pcn"
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict(dup)
    with pytest.raises(ConfigError):
        chain_config({"seed": 0, "space": "latent"})
    with pytest.raises(ConfigError):
        chain_config({"seed": 0, "thinning": 2})
    cfg, space, mode = chain_config({"seed": 0, "space": "dream", "kernel": "hmc"})
    assert cfg.tag == "dream_hmc" and space == "dream" and mode == "accept"
    with pytest.raises(ConfigError):
        Pipeline(smoke_config())
