import csv
import json
import math
from fractions import Fraction

import pytest

from stein_poisson.cli import main
from stein_poisson.experiment import (CSV_COLUMNS, ConfigError, ExperimentConfig, read_rate_pairs,
                                      run_experiment)


def write_cfg(tmp_path, **kw):
    doc = {"dim": 1, "intensities": [64, 128], "replications": 60, "z_samples": 16,
           "batch_size": 20, "seed": 5, "kernel_samples": 20000, "out": str(tmp_path / "out")}
    doc.update(kw)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(doc))
    return p


def test_config_validation_messages():
    with pytest.raises(ConfigError, match="replications"):
        ExperimentConfig(replications=0)
    with pytest.raises(ConfigError, match="dim"):
        ExperimentConfig(dim=4)
    with pytest.raises(ConfigError, match="radius"):
        ExperimentConfig(radius_rule="fixed", radius=0.6)
    with pytest.raises(ConfigError, match="below 1/2"):
        ExperimentConfig(intensities=[2], gamma="1/4")
    with pytest.raises(ConfigError, match="unknown config keys"):
        ExperimentConfig.from_dict({"colour": "red"})
    with pytest.raises(ConfigError, match="rational"):
        ExperimentConfig(gamma="abc")


def test_config_regimes():
    cfg = ExperimentConfig(gamma="1/4")
    assert cfg.gamma == Fraction(1, 4)
    assert cfg.regime()["n_td_to_infinity"] and cfg.regime()["n_td3_to_infinity"]
    cfg = ExperimentConfig(gamma="2/5")
    assert cfg.regime()["n_td_to_infinity"] and not cfg.regime()["n_td3_to_infinity"]
    cfg = ExperimentConfig(dim=2, gamma="3/5", intensities=[100])
    assert not cfg.regime()["n_td_to_infinity"]


def test_missing_config_file(tmp_path, capsys):
    assert main(["bound", "--config", str(tmp_path / "nope.json")]) == 2
    assert "not found" in capsys.readouterr().err


def test_unknown_subcommand():
    with pytest.raises(SystemExit):
        main(["frobnicate"])


def test_run_writes_outputs(tmp_path):
    cfg = write_cfg(tmp_path, intensities=[64, 128, 256])
    assert main(["run", "--config", str(cfg), "--emit-plot-data"]) == 0
    out = tmp_path / "out"
    with open(out / "results.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 3 * 3
    summary = json.loads((out / "summary.json").read_text())
    assert {"rate_fit_phi", "rate_fit_w1", "constants", "regime"} <= set(summary)
    assert summary["config"]["gamma"] == "1/4"
    plot = (out / "plot_data.csv").read_text().splitlines()
    assert plot[0] == "log_n,log_phi,log_w1" and len(plot) == 4
    for r in summary["results"]:
        assert all(math.isfinite(v) for v in r.values() if isinstance(v, float))


def test_threads_do_not_change_csv(tmp_path):
    cfg = write_cfg(tmp_path)
    main(["run", "--config", str(cfg), "--threads", "1", "--out", str(tmp_path / "a")])
    main(["run", "--config", str(cfg), "--threads", "3", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a/results.csv").read_bytes() == (tmp_path / "b/results.csv").read_bytes()


def test_threads_env_default(tmp_path, monkeypatch):
    monkeypatch.setenv("STEIN_POISSON_THREADS", "2")
    cfg = write_cfg(tmp_path)
    assert main(["bound", "--config", str(cfg)]) == 0


def test_seed_override_changes_results(tmp_path):
    cfg = write_cfg(tmp_path)
    main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["simulate", "--config", str(cfg), "--seed", "6", "--out", str(tmp_path / "b")])
    a = (tmp_path / "a/simulate.csv").read_text()
    b = (tmp_path / "b/simulate.csv").read_text()
    assert a != b and a.splitlines()[0] == "n,t,replication,points,edges"


@pytest.mark.parametrize("cmd,name", [("bound", "bound.csv"), ("wasserstein", "wasserstein.csv"),
                                      ("constants", "constants.json")])
def test_subcommands_write(tmp_path, cmd, name):
    cfg = write_cfg(tmp_path)
    assert main([cmd, "--config", str(cfg)]) == 0
    assert (tmp_path / "out" / name).exists()


def test_rate_fit_trivial_triple(tmp_path, capsys):
    p = tmp_path / "triple.csv"
    p.write_text("n,value\n100,0.1\n400,0.05\n1600,0.025\n")
    assert main(["rate-fit", str(p)]) == 0
    assert json.loads(capsys.readouterr().out)["slope"] == pytest.approx(-0.5)


def test_rate_fit_on_results_csv(tmp_path):
    cfg = write_cfg(tmp_path, intensities=[64, 128, 256])
    main(["run", "--config", str(cfg)])
    pairs = read_rate_pairs(tmp_path / "out/results.csv")
    summary = json.loads((tmp_path / "out/summary.json").read_text())
    by_n = {r["n"]: r["phi"] for r in summary["results"]}
    for n, v in pairs:
        assert v == pytest.approx(by_n[n], rel=1e-12)
    assert main(["rate-fit", str(tmp_path / "out/results.csv")]) == 0


def test_selftest_exit_code():
    assert main(["selftest", "--quick"]) == 0


def test_single_point_mean(tmp_path):
    cfg = ExperimentConfig(intensities=[100], radius_rule="fixed", radius=0.01, replications=10_000,
                           out=str(tmp_path))
    (res,) = run_experiment(cfg, write=False, with_constants=False)
    assert abs(res.mean_F - 100) <= 3 * res.mean_F_stderr
    assert res.exact_mean == pytest.approx(100)


def test_grid_summary_slope(tmp_path):
    cfg = ExperimentConfig(intensities=[128, 256, 512, 1024], replications=1000, out=str(tmp_path))
    run_experiment(cfg)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert -0.6 <= summary["rate_fit_phi"]["slope"] <= -0.4


def test_monte_carlo_method_2d(tmp_path):
    cfg = ExperimentConfig(dim=2, intensities=[200], radius_rule="fixed", radius=0.1,
                           replications=40, z_samples=32, out=str(tmp_path))
    (res,) = run_experiment(cfg, write=False, with_constants=False)
    assert res.method == "monte_carlo" and res.phi > 0


def test_sine_density_run(tmp_path):
    cfg = ExperimentConfig(density="sine", density_params={"amplitude": 0.4}, intensities=[150],
                           radius_rule="fixed", radius=0.1, replications=40, z_samples=32,
                           kernel_samples=50_000, out=str(tmp_path))
    (res,) = run_experiment(cfg, write=False, with_constants=False)
    assert res.method == "monte_carlo" and math.isfinite(res.T_n)
