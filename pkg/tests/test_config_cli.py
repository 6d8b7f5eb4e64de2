import copy
import filecmp

import numpy as np
import pytest
import yaml

from etpc.cli import EXIT_CONFIG, EXIT_OK, EXIT_VIOLATION, main
from etpc.config import ConfigError, certify, example1_config_text, load_config, parse_config
from etpc.experiment import (
    batch_experiment,
    read_summary_csv,
    read_trace_csv,
    sample_sphere,
    write_summary_csv,
)
from etpc.sim import iet_stats, run_closed_loop


@pytest.fixture
def raw():
    return yaml.safe_load(example1_config_text())


def write_cfg(tmp_path, raw, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw))
    return path


def small(raw, count=2, N=10, steps=120):
    r = copy.deepcopy(raw)
    r["horizon"]["N"] = N
    r["run"]["sampling"]["count"] = count
    r["run"]["steps"] = steps
    r["run"]["events"] = 10
    return r


def test_bundled_config(cfg1):
    assert cfg1.N == 25 and cfg1.M == 2 and cfg1.p == 3
    assert cfg1.sampling.radius == pytest.approx(np.linalg.norm([2, 5, 6]))
    np.testing.assert_array_equal(cfg1.R, [[1.0]])
    np.testing.assert_allclose(cfg1.Q, 0.01 * np.eye(3))
    assert cfg1.D / cfg1.sigma == pytest.approx(1.0)


@pytest.mark.parametrize("path,key", [
    (("plant",), "A"),
    (("trigger",), "beta"),
    (("certificate",), "K"),
    (("horizon",), "M"),
])
def test_missing_field_named(raw, path, key):
    d = raw
    for p in path:
        d = d[p]
    del d[key]
    with pytest.raises(ConfigError) as exc:
        parse_config(raw)
    assert key in str(exc.value)
    assert exc.value.field.endswith(key)


def test_bad_values_rejected(raw):
    r = copy.deepcopy(raw)
    r["trigger"]["beta"] = 0.9
    with pytest.raises(ConfigError, match="trigger.beta"):
        parse_config(r)
    r = copy.deepcopy(raw)
    r["horizon"]["M"] = 40
    with pytest.raises(ConfigError, match="horizon.M"):
        parse_config(r)
    r = copy.deepcopy(raw)
    r["plant"]["D"] = 0.001
    with pytest.raises(ConfigError, match="disturbance"):
        parse_config(r)


def test_load_config_roundtrip(tmp_path, raw):
    cfg = load_config(write_cfg(tmp_path, raw))
    np.testing.assert_array_equal(cfg.A, np.array(raw["plant"]["A"]))


def test_certify_example(cfg1):
    rep = certify(cfg1)
    assert rep.ok
    assert rep.max_feasible_M == 8
    assert rep.sigma_bar >= 0.01
    assert rep.alpha_floor == pytest.approx(0.951744772452361, rel=1e-12)


def test_certify_low_alpha_warns(raw):
    r = copy.deepcopy(raw)
    r["trigger"]["alpha"] = 0.9
    rep = certify(parse_config(r))
    warn = [c for c in rep.checks if c.name == "alpha >= alpha floor"][0]
    assert not warn.passed and not warn.fatal
    assert "does not apply" in warn.detail


def test_certify_zero_disturbance(raw):
    r = copy.deepcopy(raw)
    r["plant"]["D"] = 0.0
    r["plant"]["disturbance"] = {"kind": "zero"}
    rep = certify(parse_config(r))
    assert rep.epsilon == 0.0
    assert any("D = 0" in c.detail for c in rep.checks)


def test_feasibility_command(tmp_path, raw, capsys):
    assert main(["feasibility", "--config", str(write_cfg(tmp_path, raw))]) == EXIT_OK
    out = capsys.readouterr().out
    assert "max feasible M    = 8" in out
    assert "sigma_bar" in out and "alpha floor" in out


def test_feasibility_unstable_gain(tmp_path, raw, capsys):
    raw["certificate"]["K"] = [[0.0, 0.0, 0.0]]
    assert main(["feasibility", "--config", str(write_cfg(tmp_path, raw))]) == EXIT_VIOLATION
    assert "not Schur stable" in capsys.readouterr().out


def test_simulate_reports_bound(tmp_path, raw, capsys):
    cfg = write_cfg(tmp_path, small(raw))
    rc = main(["simulate", "--config", str(cfg), "--out-dir", str(tmp_path / "o"), "--controllers", "clf"])
    out = capsys.readouterr().out
    assert rc == EXIT_OK
    assert "epsilon^2 = 1" in out
    assert (tmp_path / "o" / "trace_clf.csv").exists()


def test_simulate_missing_field_exit(tmp_path, raw, capsys):
    del raw["trigger"]["sigma"]
    rc = main(["simulate", "--config", str(write_cfg(tmp_path, raw))])
    assert rc == EXIT_CONFIG
    assert "trigger.sigma" in capsys.readouterr().err


def test_simulate_zero_disturbance(tmp_path, raw, capsys):
    r = small(raw)
    r["plant"]["D"] = 0.0
    r["plant"]["disturbance"] = {"kind": "zero"}
    rc = main(["simulate", "--config", str(write_cfg(tmp_path, r)), "--out-dir", str(tmp_path / "o"),
               "--controllers", "clf"])
    out = capsys.readouterr().out
    assert rc == EXIT_OK
    assert "epsilon^2 = 0" in out
    assert "D = 0" in out


def test_unknown_controller(tmp_path, raw, capsys):
    rc = main(["simulate", "--config", str(write_cfg(tmp_path, raw)), "--controllers", "mpc"])
    assert rc == EXIT_CONFIG


def test_batch_empty_sample(tmp_path, raw, capsys):
    raw["run"]["sampling"]["count"] = 0
    assert main(["batch", "--config", str(write_cfg(tmp_path, raw))]) == EXIT_CONFIG
    assert "empty sample" in capsys.readouterr().err
    with pytest.raises(ValueError, match="empty sample"):
        batch_experiment(parse_config(raw), count=0)


def test_env_out_dir(tmp_path, raw, monkeypatch, capsys):
    monkeypatch.setenv("ETPC_OUT_DIR", str(tmp_path / "env"))
    cfg = write_cfg(tmp_path, small(raw))
    assert main(["batch", "--config", str(cfg), "--controllers", "zoh"]) == EXIT_OK
    assert (tmp_path / "env" / "summary.csv").exists()


def test_batch_three_rows_ordering(tmp_path, raw, capsys):
    r = small(raw, count=2, N=30)
    r["run"]["events"] = 20
    cfg = write_cfg(tmp_path, r)
    assert main(["batch", "--config", str(cfg), "--out-dir", str(tmp_path / "b")]) == EXIT_OK
    rows = read_summary_csv(tmp_path / "b" / "summary.csv")
    assert [row.controller for row in rows] == ["clf", "emulation", "zoh"]
    aiet = {row.controller: row.avg_aiet for row in rows}
    assert aiet["clf"] > aiet["emulation"] > aiet["zoh"]


def test_sweep_grid_layout(raw):
    r = small(raw, count=1)
    r["sweep"] = {"N": [10, 20], "p": [2, 3]}
    res = batch_experiment(parse_config(r), controllers=("clf",))
    assert {(s.N, s.p) for s in res.summary} == {(10, 2), (20, 2), (10, 3), (20, 3)}


def test_single_deterministic_condition(raw):
    r = small(raw, count=1)
    res = batch_experiment(parse_config(r), controllers=("clf",), count=1)
    assert len(res.summary) == 1 and res.summary[0].conditions == 1


def test_sphere_sampling():
    X = sample_sphere(3.0, 50, 4, seed=7)
    np.testing.assert_allclose(np.linalg.norm(X, axis=1), 3.0, rtol=1e-14)
    np.testing.assert_array_equal(X, sample_sphere(3.0, 50, 4, seed=7))
    with pytest.raises(ValueError):
        sample_sphere(0.0, 5, 3, 0)


def test_summary_roundtrip(tmp_path, raw):
    res = batch_experiment(parse_config(small(raw)), controllers=("clf", "zoh"))
    path = write_summary_csv(res, tmp_path / "s.csv")
    back = read_summary_csv(path)
    assert back == res.summary


def test_trace_roundtrip_stats(tmp_path, raw, capsys):
    cfg = write_cfg(tmp_path, small(raw))
    main(["simulate", "--config", str(cfg), "--out-dir", str(tmp_path / "o"), "--controllers", "zoh"])
    parsed = read_trace_csv(tmp_path / "o" / "trace_zoh.csv")
    c = parse_config(small(raw))
    ctrl = c.controller("zoh")
    tr = run_closed_loop(c.model(), ctrl, c.trigger_config(ctrl.P), c.x0, T=c.steps)
    np.testing.assert_array_equal(parsed["V"], tr.V)
    np.testing.assert_array_equal(parsed["events"], tr.events)
    E = len(tr.events) - 1
    assert iet_stats(parsed["events"], E) == iet_stats(tr, E)


def test_bit_identical_outputs(tmp_path, raw, capsys):
    cfg = write_cfg(tmp_path, small(raw))
    for d in ("a", "b"):
        assert main(["simulate", "--config", str(cfg), "--out-dir", str(tmp_path / d)]) == EXIT_OK
        assert main(["batch", "--config", str(cfg), "--out-dir", str(tmp_path / d / "batch")]) == EXIT_OK
    for name in ("trace_clf.csv", "trace_emulation.csv", "trace_zoh.csv", "batch/summary.csv",
                 "batch/conditions.csv"):
        assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name, shallow=False), name


def test_threads_do_not_change_results(raw):
    c = parse_config(small(raw, count=3))
    one = batch_experiment(c, controllers=("zoh",), threads=1)
    two = batch_experiment(c, controllers=("zoh",), threads=2)
    assert one.conditions == two.conditions
    assert one.summary == two.summary


def test_seed_override_changes_sample(raw):
    c = parse_config(small(raw, count=2))
    a = batch_experiment(c, controllers=("zoh",), seed=1)
    b = batch_experiment(c, controllers=("zoh",), seed=2)
    assert not np.array_equal(a.initial_states, b.initial_states)
