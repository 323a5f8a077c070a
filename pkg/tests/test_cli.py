import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qsasep.cli import main
from qsasep.config import ConfigError, ExperimentConfig, load_config, schedule_from_json, schedule_to_json
from qsasep.rates import Schedule


def _run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_config_round_trip_and_unknown_keys():
    d = {
        "model": {"N": 32, "family": "reversible", "rho_minus": {"segments": [
            {"t0": 0, "t1": 0.5, "shape": "linear", "v0": 0.2, "v1": 0.4},
            {"t0": 0.5, "t1": 1, "shape": "cosine", "v0": 0.4, "v1": 0.3}]}},
        "run": {"replicas": 3, "seed": 9},
        "sweep": {"rho_minus": [0.1, 0.9]},
    }
    cfg = ExperimentConfig.from_dict(d)
    again = ExperimentConfig.from_dict(json.loads(cfg.dumps()))
    assert again.to_dict() == cfg.to_dict()
    spec = cfg.model.to_spec()
    assert spec.boundary.rho_minus(0.75) == pytest.approx(0.35)
    for bad in ({"model": {"N": 3, "bogus": 1}}, {"nope": {}}, {"sweep": {"grid": []}},
                {"model": {"rho_minus": {"segments": [{"t0": 0, "t1": 1, "v0": 0.1, "extra": 2}]}}}):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(bad)


@given(st.floats(0, 1), st.floats(0, 1))
def test_schedule_json_round_trip(a, b):
    s = Schedule.linear(a, b, 2.0)
    back = schedule_from_json(schedule_to_json(s), 2.0)
    ts = np.linspace(0, 2, 9)
    assert np.allclose(back(ts), s(ts))
    assert schedule_to_json(Schedule.constant(a)) == a


def test_missing_config_exit_1(capsys, tmp_path):
    code, _, err = _run(capsys, ["simulate", "--config", str(tmp_path / "missing.json")])
    assert code == 1 and "config not found" in err
    json.loads(err.strip().splitlines()[-1])
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")


def test_invalid_model_exit_1(capsys, tmp_path):
    code, _, err = _run(capsys, ["simulate", "--pbar", "1.5", "-o", str(tmp_path)])
    assert code == 1 and "p_bar" in err


def test_phase_verb(capsys, tmp_path):
    code, out, _ = _run(capsys, ["phase", "--rho-minus", "0.8", "--rho-plus", "0.2", "--pbar", "1",
                                 "-o", str(tmp_path)])
    assert code == 0
    doc = json.loads(out.splitlines()[0])
    assert doc["label"] == "MaxCurrent" and doc["rho"] == 0.5 and doc["flux"] == 0.25


def test_oracle_verb(capsys, tmp_path):
    cfg = tmp_path / "balanced.json"
    cfg.write_text(json.dumps({"model": {"N": 5, "a": 0, "rho_minus": 0.3, "rho_plus": 0.3},
                               "run": {"output": str(tmp_path / "out")}}))
    code, out, _ = _run(capsys, ["oracle", "--n", "3", "--config", str(cfg)])
    assert code == 0
    doc = json.loads(out.splitlines()[0])
    pi = np.array(doc["stationary"])
    prod = np.array([0.7**(3 - bin(k).count("1")) * 0.3**bin(k).count("1") for k in range(8)])
    assert np.max(np.abs(pi - prod)) < 1e-10
    assert (tmp_path / "out" / "oracle.csv").read_text().startswith("state,configuration,stationary,product")


def test_emit_config_applies_overrides(capsys):
    code, out, _ = _run(capsys, ["sweep", "--emit-config", "--N", "100", "--grid-minus", "0.1,0.2"])
    assert code == 0
    doc = json.loads(out)
    assert doc["model"]["N"] == 100 and doc["sweep"]["rho_minus"] == [0.1, 0.2]


def test_simulate_outputs_are_reproducible(capsys, tmp_path):
    argv = ["simulate", "--N", "16", "--replicas", "2", "--T", "0.2", "--rho-minus", "0.3",
            "--rho-plus", "0.7", "--seed", "4"]
    assert _run(capsys, argv + ["-o", str(tmp_path / "a")])[0] == 0
    assert _run(capsys, argv + ["-o", str(tmp_path / "b")])[0] == 0
    names = ["snapshots.csv", "counts.csv", "density_profile.csv", "current.csv"]
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    headers = {
        "snapshots.csv": "replica,t,site,eta",
        "counts.csv": "replica,t,bond,h_plus,h_minus",
        "density_profile.csv": "t,x_cell,mean,stderr",
        "current.csv": "t_window,bond_group,flux,stderr",
    }
    for name, head in headers.items():
        assert (tmp_path / "a" / name).read_text().splitlines()[0] == head
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert {"config_hash", "seed", "versions", "wall_time_s"} <= set(man)


def test_worker_pool_gives_identical_files(capsys, tmp_path, monkeypatch):
    argv = ["simulate", "--N", "12", "--replicas", "3", "--T", "0.1"]
    assert _run(capsys, argv + ["-o", str(tmp_path / "serial")])[0] == 0
    monkeypatch.setenv("QSASEP_WORKERS", "2")
    assert _run(capsys, argv + ["-o", str(tmp_path / "pool")])[0] == 0
    for name in ("snapshots.csv", "counts.csv"):
        assert (tmp_path / "serial" / name).read_bytes() == (tmp_path / "pool" / name).read_bytes()


def test_sweep_excludes_critical_points(capsys, tmp_path):
    code, out, err = _run(capsys, ["sweep", "--N", "16", "--replicas", "2", "--T", "0.2",
                                   "--grid-minus", "0.3", "--grid-plus", "0.7,0.1", "-o", str(tmp_path)])
    assert code == 0
    assert "critical line" in err
    rows = (tmp_path / "sweep.csv").read_text().splitlines()
    assert len(rows) == 2 and rows[1].startswith("0.3,0.1,")


def test_couple_and_burgers_and_entropy_verbs(capsys, tmp_path):
    code, out, _ = _run(capsys, ["couple", "--N", "16", "--replicas", "2", "--T", "0.2",
                                 "--rho-minus", "0.2", "--upper-rho-minus", "0.5", "-o", str(tmp_path / "c")])
    assert code == 0 and "ordering=pass" in out and "identity=pass" in out
    assert (tmp_path / "c" / "coupling.csv").read_text().startswith("replica,t,site,eta_lower,eta_upper")
    code, out, _ = _run(capsys, ["couple", "--N", "16", "--rho-minus", "0.5",
                                 "--upper-rho-minus", "0.2", "-o", str(tmp_path / "c2")])
    assert code == 2
    code, _, _ = _run(capsys, ["burgers", "--rho-minus", "0.3", "--rho-plus", "0.6", "--epsilons",
                               "0.1", "--M", "20", "-o", str(tmp_path / "b")])
    assert code == 0
    assert (tmp_path / "b" / "burgers.csv").read_text().startswith("epsilon,t,cell,rho")
    assert (tmp_path / "b" / "burgers_flux.csv").read_text().startswith("epsilon,t,interface,flux")
    code, _, _ = _run(capsys, ["entropy", "--n-values", "16,24", "--replicas", "2", "--T", "0.2",
                               "-o", str(tmp_path / "e")])
    assert code == 0
    assert (tmp_path / "e" / "entropy.csv").read_text().startswith("N,pair,replica,X_value")
