import copy
from pathlib import Path

import numpy as np
import pytest
import yaml

from coadapt import cli
from coadapt import experiment as ex
from coadapt.config import CONFIG_ENV, ConfigError, load_config, parse_config
from coadapt.mixing import eta_bar_bruteforce, mixing_profile

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

MINIMAL = {
    "horizon": 5,
    "delta": 0.1,
    "alphabet": {"size": 2},
    "features": {"size": 2},
    "process": {"initial": [0.5, 0.5], "transition": [[0.9, 0.1], [0.1, 0.9]]},
    "loss": {"values": [[0, 1], [1, 0]]},
    "encoders": [[0, 1], [1, 0]],
    "decoders": [[0, 1]],
}


def with_(**changes):
    raw = copy.deepcopy(MINIMAL)
    raw.update(changes)
    return raw


def errors_of(raw):
    with pytest.raises(ConfigError) as exc:
        parse_config(raw)
    return exc.value.errors


def test_minimal_config_loads(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(MINIMAL))
    cfg = load_config(path)
    assert cfg.horizon == 5 and cfg.delta == 0.1 and cfg.trials == 1
    assert cfg.y_hat_0 == 0 and cfg.y_tilde_0 == 0
    assert len(cfg.encoders) == 2 and len(cfg.decoders) == 1
    assert cfg.lipschitz == 1.0


def test_delta_out_of_range():
    errs = errors_of(with_(delta=1.5))
    assert any(e.startswith("delta:") for e in errs)


def test_bad_transition_row_named():
    errs = errors_of(with_(process={"initial": [0.5, 0.5], "transition": [[0.5, 0.4], [0.1, 0.9]]}))
    assert any("transition[0]" in e and "0.9" in e for e in errs)


def test_unknown_keys_rejected():
    errs = errors_of(with_(colour="blue", loss={"values": [[0, 1], [1, 0]], "scale": 2}))
    assert "colour: unknown key" in errs
    assert "loss.scale: unknown key" in errs


def test_index_and_table_errors():
    errs = errors_of(with_(h_tilde=3, encoders=[[0, 2]], y_hat_0=4,
                           policies={"encoder": {"rule": "fixed", "index": 9}}))
    joined = "\n".join(errs)
    for path in ("h_tilde:", "encoders[0]:", "y_hat_0:", "policies.encoder.index:"):
        assert path in joined


def test_lipschitz_override_below_derived():
    errs = errors_of(with_(loss={"values": [[0, 1], [1, 0]], "lipschitz": 0.5}))
    assert any(e.startswith("loss.lipschitz") for e in errs)


def test_missing_required_and_parse_error(tmp_path):
    raw = dict(MINIMAL)
    del raw["loss"]
    assert "loss: required" in errors_of(raw)
    bad = tmp_path / "bad.yaml"
    bad.write_text("horizon: [1,\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_shipped_configs_load():
    for path in CONFIGS.glob("*.yaml"):
        load_config(path)


def test_trial_seeds_pure():
    assert ex.trial_seeds(3, 4) == ex.trial_seeds(3, 4)
    assert ex.trial_seeds(3, 4) != ex.trial_seeds(3, 5)
    assert ex.trial_seeds(3, 4) != ex.trial_seeds(4, 4)


def test_run_experiment_deterministic_and_parallel_consistent():
    cfg = load_config(CONFIGS / "flip_chain.yaml").replace(trials=12)
    a = ex.run_csv(ex.run_experiment(cfg))
    b = ex.run_csv(ex.run_experiment(cfg))
    c = ex.run_csv(ex.run_experiment(cfg, workers=2))
    assert a == b == c
    assert a.splitlines()[0] == ",".join(ex.RUN_COLUMNS)
    assert len(a.splitlines()) == 13


def test_trial_replays_in_isolation():
    cfg = load_config(CONFIGS / "flip_chain.yaml").replace(trials=5)
    report = ex.run_experiment(cfg)
    alone = ex.run_trial(cfg, 3, report.deviation)
    assert alone.regret == report.trials[3].regret


def test_singleton_classes_regret_zero():
    cfg = parse_config(with_(encoders=[[1, 0]], decoders=[[0, 1]], trials=20))
    report = ex.run_experiment(cfg)
    assert np.all(report.regrets == 0)


def test_deterministic_config_single_trial_bytes():
    raw = with_(process={"initial": [1, 0], "transition": [[0, 1], [1, 0]]},
                policies={"encoder": {"rule": "fixed", "index": 1}, "decoder": {"rule": "fixed"}})
    cfg = parse_config(raw)
    texts = {ex.run_csv(ex.run_experiment(cfg)) + ex.summary_text(ex.run_experiment(cfg))
             for _ in range(3)}
    assert len(texts) == 1


def test_sweep_single_value_equals_run():
    cfg = load_config(CONFIGS / "flip_chain.yaml").replace(trials=6)
    [(v, rep)] = ex.sweep(cfg, "delta", [cfg.delta])
    assert ex.run_csv(rep) == ex.run_csv(ex.run_experiment(cfg))


def test_sweep_delta_deviation_decreasing():
    cfg = load_config(CONFIGS / "flip_chain.yaml").replace(trials=3)
    res = ex.sweep(cfg, "delta", [0.05, 0.1, 0.3, 0.6, 1.0])
    devs = [r.deviation for _, r in res]
    assert all(a > b for a, b in zip(devs, devs[1:]))


def test_sweep_flip_p_matches_bruteforce_geometric_sum():
    cfg = load_config(CONFIGS / "flip_chain.yaml").replace(trials=2, horizon=6)
    ps = [0.1, 0.2, 0.3, 0.4, 0.5]
    res = ex.sweep(cfg, "transition-flip-p", ps)
    for p, (_, rep) in zip(ps, res):
        proc = ex.flip_chain(p)
        brute = 1 + sum(eta_bar_bruteforce(proc, 1, j, 6) for j in range(2, 7))
        geometric = sum(abs(1 - 2 * p) ** k for k in range(6))
        assert rep.mixing.m_T == pytest.approx(brute, abs=1e-9)
        assert rep.mixing.m_T == pytest.approx(geometric, abs=1e-9)


def test_sweep_rejects_unknown_parameter():
    cfg = load_config(CONFIGS / "flip_chain.yaml")
    with pytest.raises(ValueError):
        ex.sweep(cfg, "gamma", [1])


def test_sweep_learning_rate_applies_to_both_sides():
    cfg = load_config(CONFIGS / "flip_chain.yaml")
    new = ex._with_parameter(cfg, "learning-rate", 0.3)
    assert new.encoder_policy.learning_rate == new.decoder_policy.learning_rate == 0.3


# --- command line ---------------------------------------------------------

def test_cli_run_csv_bytes(tmp_path):
    cfgp = str(CONFIGS / "flip_chain.yaml")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["run", "--config", cfgp, "--trials", "4", "--seed", "3", "--csv", str(a), "--quiet"]) == 0
    assert cli.main(["run", "--config", cfgp, "--trials", "4", "--seed", "3", "--csv", str(b), "--quiet"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "trial,T,cumulative_loss,comparator_min,regret"


def test_cli_env_config(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(CONFIG_ENV, str(CONFIGS / "flip_chain.yaml"))
    out = tmp_path / "eta.csv"
    assert cli.main(["mixing", "--csv", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "i,j,eta"
    assert len(rows) == 1 + 20 * 19 // 2
    assert "M_T" in capsys.readouterr().out


def test_cli_mixing_brute_matches_exact(tmp_path):
    raw = with_(horizon=5)
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(raw))
    e, b = tmp_path / "e.csv", tmp_path / "b.csv"
    assert cli.main(["mixing", "--config", str(path), "--csv", str(e), "--quiet"]) == 0
    assert cli.main(["mixing", "--config", str(path), "--method", "brute", "--csv", str(b), "--quiet"]) == 0
    ev = np.loadtxt(e, delimiter=",", skiprows=1)
    bv = np.loadtxt(b, delimiter=",", skiprows=1)
    np.testing.assert_allclose(ev, bv, atol=1e-9)


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump(with_(delta=1.5)))
    assert cli.main(["run", "--config", str(bad), "--quiet"]) == 1
    assert cli.main(["run", "--config", str(tmp_path / "missing.yaml"), "--quiet"]) == 1
    # runtime failure: brute-force mixing beyond the enumeration guard
    big = tmp_path / "big.yaml"
    big.write_text(yaml.safe_dump(with_(horizon=25)))
    assert cli.main(["mixing", "--config", str(big), "--method", "brute", "--quiet"]) == 2


def test_cli_certify_writes_report(tmp_path, capsys):
    rep, eps = tmp_path / "cert.txt", tmp_path / "eps.csv"
    code = cli.main(["certify", "--config", str(CONFIGS / "certified.yaml"),
                     "--report", str(rep), "--csv", str(eps)])
    assert code == 0
    text = rep.read_text()
    assert "holds: true" in text
    assert text == capsys.readouterr().out
    lines = eps.read_text().splitlines()
    assert lines[0] == "t,eps,comparator_state,encoder,output"
    assert len(lines) == 101


def test_cli_validate_bound(tmp_path):
    out = tmp_path / "bound.csv"
    code = cli.main(["validate-bound", "--config", str(CONFIGS / "flip_chain.yaml"), "--trials", "500",
                     "--eps-grid", "1,2,4", "--csv", str(out), "--quiet"])
    assert code == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "eps,empirical_tail,bound,trials,std_error"
    assert len(rows) == 4
    assert cli.main(["validate-bound", "--config", str(CONFIGS / "flip_chain.yaml"),
                     "--eps-grid", "-1", "--quiet"]) == 1


def test_cli_sweep(tmp_path):
    out = tmp_path / "sweep.csv"
    code = cli.main(["sweep", "--config", str(CONFIGS / "flip_chain.yaml"), "--param", "T",
                     "--values", "5,10", "--csv", str(out), "--quiet", "--seed", "1"])
    assert code == 0
    rows = out.read_text().splitlines()
    assert rows[0] == ",".join(ex.SWEEP_COLUMNS)
    assert len(rows) == 3
