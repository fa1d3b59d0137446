import json
import math
import os
import pathlib

import numpy as np
import pytest

import simgap

SOURCE = pathlib.Path(os.environ.get("SIMGAP_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))


def test_version_and_stages():
    assert simgap.__version__
    assert simgap.stages()[0] == "cover"
    assert simgap.stages()[-1] == "report"


def test_pendulum_step_matches_hand_value():
    f = simgap.NominalModel.pendulum()
    assert f.step([0.0, 0.0], [0.0]) == [0.0, 0.0]
    # torque u on the resting rod: x2' = 3 tau u / (m l^2)
    assert f.step([0.0, 0.0], [1.2])[1] == pytest.approx(0.018, abs=1e-15)


def test_identity_surrogate_has_no_gap():
    f = simgap.NominalModel.pendulum()
    box = simgap.StateBox([-0.2, -0.5], [0.2, 0.5])
    o = simgap.SurrogateOracle(f, "identity", box)
    assert o.query([0.1, 0.2], [0.3]) == f.step([0.1, 0.2], [0.3])
    with pytest.raises(simgap.DomainError):
        o.query([1.0, 0.0], [0.0])


def test_cover_counts():
    c = simgap.make_cover(simgap.StateBox([-0.2, -0.5], [0.2, 0.5]), 0.0022)
    assert c.counts == [129, 322]
    assert len(c) == 41538


def test_lp_hand_instance_agrees_with_oracle():
    g = np.array([[1, 0, -1], [1, 1, -1], [-1, 0, 0], [-1, -1, 0]], dtype=float)
    h = np.array([0, 0, -0.1, -0.3])
    c = np.array([0, 0, 1.0])
    got = simgap.solve_lp(g, h, c)
    ref = simgap.lp_oracle(g, h, c)
    assert got["status"] == "optimal"
    assert got["value"] == pytest.approx(0.3, abs=1e-12)
    assert ref["value"] == pytest.approx(got["value"], abs=1e-7)


def test_unknown_config_key_is_config_error():
    with pytest.raises(simgap.ConfigError):
        simgap.parse_config(json.dumps({"name": "x", "bogus": 1}))


def test_identity_pipeline_end_to_end(tmp_path):
    cfg = simgap.load_config(SOURCE / "configs" / "pendulum_identity.json")
    cfg.out_dir = tmp_path / "run"
    cfg.jobs = 1
    p = simgap.Pipeline(cfg)
    p.run()
    assert all(p.completed(s) for s in simgap.stages())
    gap = p.load_gap()
    assert max(gap.sup()) <= 1e-9
    assert gap.eval([0.0, 0.0], [0.0]) == [0.0, 0.0]
    assert p.winning(True) == p.winning(False)
    assert cfg.hash() in (tmp_path / "run" / "report.md").read_text()
    effective = json.loads(cfg.effective())
    assert effective["sampling"]["epsilon"] == cfg.epsilon
