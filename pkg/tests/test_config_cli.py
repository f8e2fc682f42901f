import json

import pytest
from hypothesis import given, strategies as st

from beamsim.cli import main
from beamsim.config import ConfigError, ExperimentConfig, dump_config, load_config, preset


def write(path, text):
    path.write_text(text)
    return str(path)


def test_defaults_follow_simulation_setup():
    cfg = ExperimentConfig()
    assert (cfg.alpha, cfg.gamma, cfg.epsilon, cfg.c_u, cfg.c_l) == (0.5, 0.5, 0.1, 1.1, 0.9)
    assert cfg.n_x * cfg.n_y == 16 and cfg.n_followers == 3 and cfg.snr_db == 20
    assert cfg.n_trials == 1000 and cfg.n_initial_episodes == 30


@given(st.integers(1, 500), st.integers(0, 2**31), st.sampled_from(["online", "online_offline"]),
       st.lists(st.floats(0, 100, allow_nan=False), min_size=1, max_size=3), st.booleans())
def test_dump_load_round_trip(n_trials, seed, mode, variances, walk):
    cfg = preset("fig5", n_trials=n_trials, master_seed=seed, mode=mode,
                 sigma_lambda_sq=tuple(variances), walk_elevation=walk)
    import tempfile
    with tempfile.NamedTemporaryFile("w", suffix=".ini", delete=False) as fh:
        fh.write(dump_config(cfg))
    assert load_config(fh.name) == cfg


def test_load_overrides_base(tmp_path):
    path = write(tmp_path / "c.ini", "[experiment]\nn_trials = 7\n[channel]\nsigma_lambda_sq = 1, 2\n")
    cfg = load_config(path, preset("fig8"))
    assert cfg.name == "fig8" and cfg.n_trials == 7 and cfg.sigma_lambda_sq == (1.0, 2.0)
    assert cfg.mode == "online_offline"


@pytest.mark.parametrize("text", [
    "[experiment]\nbogus = 1\n",
    "[experiment]\nn_trials = many\n",
    "[learning]\nalpha = 1.5\n",
    "[tracking]\ntracker = oracle\n",
    "[channel]\nwalk_elevation = maybe\n",
    "[channel]\naoa_elevation_range_deg = 40, 10\n",
    "not an ini file",
])
def test_bad_configs_rejected(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path / "bad.ini", text))


def test_unknown_preset():
    with pytest.raises(ConfigError):
        preset("fig99")


def test_cli_run_writes_curves(tmp_path, capsys):
    cfg = write(tmp_path / "c.ini", "[experiment]\nn_total_episodes = 36\n[channel]\nsigma_lambda_sq = 4\n")
    out = tmp_path / "out"
    code = main(["run", "--config", cfg, "--preset", "fig6_7", "--trials", "2", "--seed", "3",
                 "--out", str(out)])
    assert code == 0
    files = sorted(p.name for p in out.iterdir())
    assert "manifest.json" in files
    assert "fig6_7_sum_power_db_online_var4.csv" in files
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["master_seed"] == 3 and manifest["config"]["n_trials"] == 2
    header = (out / "fig6_7_overhead_reduction_online_offline_var4.csv").read_text().splitlines()
    assert header[0] == "episode,value,stderr,n_trials" and len(header) == 37
    assert str(out) in capsys.readouterr().out


def test_cli_config_errors_exit_nonzero(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.ini")]) != 0
    assert "cannot read config" in capsys.readouterr().err
    bad = write(tmp_path / "bad.ini", "[experiment]\nbogus = 1\n")
    assert main(["run", "--config", bad]) != 0
    assert "bogus" in capsys.readouterr().err


def test_cli_io_error_exit_nonzero(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = write(tmp_path / "c.ini", "[experiment]\nn_total_episodes = 31\nn_trials = 1\n")
    assert main(["run", "--config", cfg, "--out", str(blocker / "sub")]) != 0
    assert "error" in capsys.readouterr().err


def test_cli_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--preset", "nope"])
    assert exc.value.code != 0


def test_cli_calibrate(tmp_path, capsys):
    out = tmp_path / "cal"
    assert main(["calibrate", "--snr", "20", "--samples", "10000", "--out", str(out)]) == 0
    result = json.loads((out / "thresholds.json").read_text())
    assert result["c_l"] < 1 < result["c_u"]
    assert (out / "exceed.csv").read_text().startswith("x,snr_db,c_u,prob,stderr")
    assert "c_u" in capsys.readouterr().out
