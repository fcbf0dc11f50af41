"""Tests for the command-line harness: subcommands, config, exit codes."""

import numpy as np
import pytest

from fjordtwin.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, build_config, build_parser, main
from fjordtwin.scenario import load_scenario, save_scenario

from conftest import flat_scenario


def run_cli(*argv) -> int:
    return main(list(argv))


# --------------------------------------------------------------------------- #
# generate                                                                     #
# --------------------------------------------------------------------------- #

def test_generate_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run_cli("generate", "normal", "--seed", "1", "--out", str(a)) == EXIT_OK
    assert run_cli("generate", "normal", "--seed", "1", "--out", str(b)) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert a.with_suffix(".cfg").read_bytes() == b.with_suffix(".cfg").read_bytes()


def test_generate_high_passes_threshold_scan(tmp_path):
    out = tmp_path / "high.csv"
    assert run_cli("generate", "high", "--seed", "2", "--out", str(out)) == EXIT_OK
    sc = load_scenario(out)
    above = sc.sea_level.values > 0.25
    best = run = 0
    for v in above:
        run = run + 1 if v else 0
        best = max(best, run)
    assert (best - 1) * 10.0 > 24 * 60


def test_generate_rejects_unknown_kind(tmp_path):
    code = run_cli("generate", "storm", "--seed", "1", "--out", str(tmp_path / "x.csv"))
    assert code == EXIT_USAGE


# --------------------------------------------------------------------------- #
# learn                                                                        #
# --------------------------------------------------------------------------- #

def _write_config(path, **overrides):
    defaults = {
        "episodes": 25,
        "restarts": 1,
        "select_rollouts": 3,
        "eval_rollouts": 4,
        "seed": 3,
    }
    defaults.update(overrides)
    path.write_text("\n".join(f"{k} = {v}" for k, v in defaults.items()) + "\n")
    return path


def test_learn_smoke_and_determinism(tmp_path):
    cfg = _write_config(tmp_path / "exp.cfg")
    out_a, out_b = tmp_path / "a.json", tmp_path / "b.json"
    code = run_cli("learn", "--config", str(cfg), "--scenario", "normal",
                   "--out", str(out_a))
    assert code == EXIT_OK
    assert out_a.exists()
    log = out_a.with_suffix(".train_log.csv")
    assert log.exists()
    lines = log.read_text().splitlines()
    assert lines[0] == "episode,total_cost,leaves,epsilon"
    assert len(lines) == 1 + 25

    assert run_cli("learn", "--config", str(cfg), "--scenario", "normal",
                   "--out", str(out_b)) == EXIT_OK
    assert out_a.read_bytes() == out_b.read_bytes()

    from fjordtwin.control import load_strategy
    tree = load_strategy(out_a.read_text())
    assert tree.actions == (0, 1, 14)


def test_learn_rejects_zero_episodes(tmp_path):
    cfg = _write_config(tmp_path / "exp.cfg", episodes=0)
    code = run_cli("learn", "--config", str(cfg), "--scenario", "normal",
                   "--out", str(tmp_path / "s.json"))
    assert code == EXIT_USAGE
    assert not (tmp_path / "s.json").exists()


def test_unknown_config_key_rejected(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("episodess = 10\n")
    code = run_cli("learn", "--config", str(cfg), "--scenario", "normal",
                   "--out", str(tmp_path / "s.json"))
    assert code == EXIT_USAGE


# --------------------------------------------------------------------------- #
# evaluate                                                                     #
# --------------------------------------------------------------------------- #

def test_evaluate_degenerate_setup_has_zero_std(tmp_path):
    sc = flat_scenario(n_steps=432, sea=0.1, fjord=0.1)
    scenario_csv = tmp_path / "flat.csv"
    save_scenario(sc, scenario_csv)
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("boat_mean_interarrival_min = 0\neval_rollouts = 5\n")
    out = tmp_path / "res.csv"
    code = run_cli("evaluate", "--config", str(cfg), "--scenario", str(scenario_csv),
                   "--strategy", "baseline", "--out", str(out))
    assert code == EXIT_OK
    header, row = out.read_text().splitlines()
    cols = dict(zip(header.split(","), row.split(",")))
    assert cols["controller"] == "baseline"
    assert float(cols["max_wait_std"]) == 0.0
    assert float(cols["gate_ops_std"]) == 0.0
    assert float(cols["safety_pct"]) == 100.0


def test_evaluate_is_deterministic_and_ignores_forecast_seed(tmp_path):
    cfg_a = tmp_path / "a.cfg"
    cfg_a.write_text("eval_rollouts = 6\nforecast_seed = 1\n")
    cfg_b = tmp_path / "b.cfg"
    cfg_b.write_text("eval_rollouts = 6\nforecast_seed = 999\n")
    out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
    for cfg, out in ((cfg_a, out_a), (cfg_b, out_b)):
        code = run_cli("evaluate", "--config", str(cfg), "--scenario", "normal",
                       "--seed", "4", "--strategy", "baseline", "--out", str(out))
        assert code == EXIT_OK
    assert out_a.read_bytes() == out_b.read_bytes()


def test_evaluate_missing_strategy_file_is_usage_error(tmp_path):
    code = run_cli("evaluate", "--scenario", "normal",
                   "--strategy", str(tmp_path / "nope.json"))
    assert code == EXIT_USAGE


def test_evaluate_malformed_scenario_is_data_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("minutes,sea_level_m,wind_mps\n0,0.1,5\n25,0.1,5\n")
    (tmp_path / "bad.cfg").write_text(
        "start_date = 2018-01-01\ninitial_fjord_level_m = 0.05\nlabel = bad\n")
    code = run_cli("evaluate", "--scenario", str(bad), "--strategy", "baseline",
                   "--rollouts", "2")
    assert code == EXIT_RUNTIME


# --------------------------------------------------------------------------- #
# simulate                                                                     #
# --------------------------------------------------------------------------- #

def test_simulate_trace_shape(tmp_path):
    out = tmp_path / "trace.csv"
    code = run_cli("simulate", "--scenario", "normal", "--scenario-seed", "1",
                   "--strategy", "baseline", "--seed", "0", "--out", str(out))
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 432
    gates = {int(line.split(",")[4]) for line in lines[1:]}
    assert gates <= {0, 1, 14}

    from fjordtwin.scenario import make_tidal_scenario
    sc = make_tidal_scenario("normal", 1)
    h_s = np.array([float(line.split(",")[2]) for line in lines[1:]])
    assert np.array_equal(h_s, sc.sea_level.values[:432])


def test_simulate_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert run_cli("simulate", "--scenario", "low", "--strategy", "baseline",
                       "--seed", "7", "--out", str(out)) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


# --------------------------------------------------------------------------- #
# sweep                                                                        #
# --------------------------------------------------------------------------- #

def test_sweep_schema_and_row_count(tmp_path):
    cfg = _write_config(tmp_path / "exp.cfg", episodes=15, eval_rollouts=3)
    out = tmp_path / "sweep.csv"
    code = run_cli("sweep", "--config", str(cfg), "--w1", "10,1000",
                   "--kinds", "normal", "--controllers", "2", "--out", str(out))
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "w1,scenario,controller,gate_operations,no_migration_ratio,max_wait_min,unsafe_ratio"
    assert len(lines) == 1 + 2 * 1 * 2
    for line in lines[1:]:
        w1, scenario, controller, *metrics = line.split(",")
        assert w1 in ("10", "1000")
        assert scenario == "normal"
        assert controller in ("0", "1")
        assert len(metrics) == 4


def test_sweep_single_cell(tmp_path):
    cfg = _write_config(tmp_path / "exp.cfg", episodes=10, eval_rollouts=2)
    out = tmp_path / "one.csv"
    code = run_cli("sweep", "--config", str(cfg), "--w1", "1000000",
                   "--kinds", "high", "--controllers", "1", "--out", str(out))
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    assert len(lines) == 2
    assert lines[1].startswith("1e+06,high,0,")


def test_sweep_rejects_bad_kind(tmp_path):
    code = run_cli("sweep", "--kinds", "tsunami", "--out", str(tmp_path / "s.csv"))
    assert code == EXIT_USAGE


# --------------------------------------------------------------------------- #
# configuration plumbing                                                       #
# --------------------------------------------------------------------------- #

def test_cli_flags_override_config_file(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("episodes = 7\nseed = 1\nw1 = 5.0\n")
    parser = build_parser()
    args = parser.parse_args(["learn", "--config", str(cfg), "--episodes", "9",
                              "--out", "x.json"])
    built = build_config(args)
    assert built.episodes == 9   # flag wins
    assert built.seed == 1       # file wins over default
    assert built.w1 == 5.0


def test_config_type_errors_are_usage_errors(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("episodes = soon\n")
    code = run_cli("learn", "--config", str(cfg), "--out", str(tmp_path / "s.json"))
    assert code == EXIT_USAGE


def test_missing_config_file_is_usage_error(tmp_path):
    code = run_cli("learn", "--config", str(tmp_path / "none.cfg"),
                   "--out", str(tmp_path / "s.json"))
    assert code == EXIT_USAGE


def test_missing_subcommand_is_usage_error():
    assert run_cli() == EXIT_USAGE


def test_worker_processes_do_not_change_results(tmp_path, monkeypatch):
    cfg = _write_config(tmp_path / "exp.cfg", eval_rollouts=6)
    seq, par = tmp_path / "seq.csv", tmp_path / "par.csv"
    monkeypatch.delenv("FJORDTWIN_THREADS", raising=False)
    assert run_cli("evaluate", "--config", str(cfg), "--scenario", "normal",
                   "--strategy", "baseline", "--out", str(seq)) == EXIT_OK
    monkeypatch.setenv("FJORDTWIN_THREADS", "3")
    assert run_cli("evaluate", "--config", str(cfg), "--scenario", "normal",
                   "--strategy", "baseline", "--out", str(par)) == EXIT_OK
    assert seq.read_bytes() == par.read_bytes()
