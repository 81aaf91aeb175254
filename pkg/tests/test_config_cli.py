import functools
import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from radar_e2e import baseline, cli
from radar_e2e.cli import git_blob_sha1, main
from radar_e2e.config import (ConfigError, ExperimentConfig, dumps_config, loads_config,
                              make_init_waveform, read_waveform, stepped_frequency,
                              write_waveform)
from radar_e2e.evaluation import RocCurve
from radar_e2e.net import load_params

TINY_TRAIN = """
[train]
eta = 3.0
eta_tx = 1.0
Q_R = 300
Q_T = 400
rx_steps = 2
tx_steps = 2
outer_iters = 2
Q_val = 500

[eval]
N_per_hyp = 2000
n_points = 32
"""


class TestStepped:
    def test_k1(self):
        np.testing.assert_allclose(stepped_frequency(1), [1.0])

    @given(st.integers(1, 64))
    def test_unit_power(self, K):
        assert abs(np.linalg.norm(stepped_frequency(K)) ** 2 - 1) <= 1e-12

    def test_k8_phases(self):
        ph = np.mod(np.angle(stepped_frequency(8)), 2 * np.pi)
        expect = np.mod(np.pi * np.arange(8) ** 2 / 8, 2 * np.pi)
        d = np.angle(np.exp(1j * (ph - expect)))
        assert np.max(np.abs(d)) < 1e-12
        np.testing.assert_allclose(expect[:4], [0, np.pi / 8, 4 * np.pi / 8, 9 * np.pi / 8])

    def test_file_kind(self, tmp_path):
        y = np.array([1 + 2j, -0.5j, 3.0])
        write_waveform(tmp_path / "w.csv", y)
        np.testing.assert_array_equal(read_waveform(tmp_path / "w.csv"), y)
        np.testing.assert_array_equal(make_init_waveform("file", 3, tmp_path / "w.csv"), y)
        with pytest.raises(ConfigError):
            make_init_waveform("file", 4, tmp_path / "w.csv")

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            make_init_waveform("barker", 8)


class TestConfig:
    def test_empty_is_paper_default(self):
        cfg = loads_config("")
        assert (cfg.K, cfg.M) == (8, 10)
        assert cfg.policy.sigma_sq == 0.3
        assert (cfg.train.Q_R, cfg.train.Q_T) == (50_000, 400_000)
        env = cfg.test_env()
        assert env.sigma_alpha_sq == 50 and env.sigma_n_sq == 1 and env.rho == 0.4
        assert env.clutter_powers == (1 / 7,) * 14
        assert cfg.mode == "joint"

    def test_rho_rejected(self):
        with pytest.raises(ConfigError, match="rho"):
            loads_config("[env]\nrho = 1.2\n")

    def test_unknown_key_lists_valid(self):
        with pytest.raises(ConfigError) as ei:
            loads_config("[train]\nlearning_rate = 1\n")
        assert "eta" in str(ei.value) and "Q_R" in str(ei.value)

    def test_unknown_section(self):
        with pytest.raises(ConfigError):
            loads_config("[bogus]\nx = 1\n")

    def test_fraction_values(self):
        assert loads_config("[env]\nclutter_power = 1/7\n").envs["env"].clutter_power == 1 / 7

    def test_mixture(self):
        cfg = loads_config("[env.a]\nbeta = 0.5\nweight = 0.5\n[env.b]\nbeta = 1.3\n"
                           "weight = 0.5\n[eval]\nbeta_test = 0.5\n")
        envs = cfg.train_envs()
        assert [(e.shape_beta, w) for e, w in envs] == [(0.5, 0.5), (1.3, 0.5)]
        assert cfg.test_env().shape_beta == 0.5

    def test_weights_must_sum(self):
        with pytest.raises(ConfigError, match="weight"):
            loads_config("[env.a]\nweight = 0.5\n[env.b]\nweight = 0.4\n")

    def test_bad_mode(self):
        with pytest.raises(ConfigError, match="mode"):
            loads_config("[experiment]\nmode = fancy\n")

    def test_roundtrip(self):
        text = ("[experiment]\nK = 4\nseed = 9\nmode = rx_only\n"
                "[env.x]\nclutter_powers = 0.1, 0.2, 0.3, 0.3, 0.2, 0.1\nweight = 0.25\n"
                "[env.y]\nbeta = 0.7\nweight = 0.75\n" + TINY_TRAIN)
        cfg = loads_config(text)
        again = loads_config(dumps_config(cfg))
        assert again == cfg
        assert dumps_config(again) == dumps_config(cfg)

    def test_roundtrip_defaults(self):
        assert loads_config(dumps_config(ExperimentConfig())) == ExperimentConfig()

    def test_clutter_length(self):
        with pytest.raises(ConfigError):
            loads_config("[env]\nclutter_powers = 1, 2\n")


def write_cfg(tmp_path, body, name="c.ini"):
    p = tmp_path / name
    p.write_text(body)
    return str(p)


class TestCli:
    def test_baseline_run(self, tmp_path):
        cfg = write_cfg(tmp_path, "[eval]\nN_per_hyp = 20000\nn_points = 64\n")
        out = tmp_path / "out"
        assert main(["baseline", cfg, "--out", str(out), "--seed", "3"]) == 0
        man = json.loads((out / "manifest.json").read_text())
        assert man["mode"] == "baseline" and man["seed"] == 3 and man["converged"]
        for name, entry in man["files"].items():
            assert git_blob_sha1((out / name).read_bytes()) == entry["sha1"]
        roc = RocCurve.from_csv(out / "roc.csv")
        assert roc.pd_at(1e-1) == pytest.approx(man["theory_pd"]["0.1"], abs=0.03)
        assert man["init_waveform"]["kind"] == "stepped_frequency"

    def test_git_hash(self):
        # known value of `git hash-object` on "hello\n"
        assert git_blob_sha1(b"hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"

    def test_joint_then_eval(self, tmp_path):
        cfg = write_cfg(tmp_path, TINY_TRAIN)
        out = tmp_path / "run"
        assert main(["run", cfg, "--out", str(out)]) == 0
        for f in ("theta_T.bin", "theta_R.bin", "history.csv", "roc.csv", "waveform.csv",
                  "config.ini", "manifest.json"):
            assert (out / f).exists()
        assert load_params(out / "theta_R.bin").dims == [16, 10, 1]
        header = (out / "history.csv").read_text().splitlines()[0]
        assert header == "round,stage,mean_loss,heldout_loss,scnr"
        ev = tmp_path / "ev"
        assert main(["eval", cfg, "--weights", str(out), "--out", str(ev)]) == 0
        assert (ev / "roc.csv").read_bytes() == (out / "roc.csv").read_bytes()

    def test_same_seed_byte_identical(self, tmp_path):
        cfg = write_cfg(tmp_path, TINY_TRAIN)
        for d in ("a", "b"):
            assert main(["run", cfg, "--out", str(tmp_path / d)]) == 0
        for f in ("theta_T.bin", "theta_R.bin", "history.csv", "roc.csv", "waveform.csv"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_config_error_exit(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "[env]\nrho = 1.2\n")
        assert main(["run", cfg]) == 2
        assert "rho" in capsys.readouterr().err

    def test_numeric_failure_exit(self, tmp_path, capsys):
        zeros = tmp_path / "zero.csv"
        write_waveform(zeros, np.zeros(8))
        cfg = write_cfg(tmp_path, f"[init]\nkind = file\npath = {zeros}\n" + TINY_TRAIN)
        assert main(["run", cfg, "--out", str(tmp_path / "o")]) == 3
        assert "stage 'train'" in capsys.readouterr().err

    def test_strict_nonconvergence(self, tmp_path, monkeypatch):
        # a one-iteration search cannot converge
        monkeypatch.setattr(cli, "optimal_waveform",
                            functools.partial(baseline.optimal_waveform, max_iters=1))
        cfg = write_cfg(tmp_path, "[eval]\nN_per_hyp = 100\n")
        assert main(["baseline", cfg, "--out", str(tmp_path / "o"), "--strict"]) == 4
        assert main(["baseline", cfg, "--out", str(tmp_path / "o")]) == 0

    def test_console_entry(self, tmp_path):
        r = subprocess.run([sys.executable, "-m", "radar_e2e.cli", "--help"],
                           capture_output=True, text=True)
        assert r.returncode == 0 and "baseline" in r.stdout
