import json
from importlib.resources import files

import numpy as np
import pytest

from lattice_rd.config import ConfigError
from lattice_rd.convergence import extend_history, resolve_study, run_convergence


def demo_study():
    return json.loads(files("lattice_rd").joinpath("data/converge_demo.json").read_text())


@pytest.fixture(scope="module")
def demo():
    return run_convergence(demo_study())


def test_levels_share_the_boundary_path(demo):
    fine_t = demo.trajectories[-1]
    for traj in demo.trajectories:
        assert np.array_equal(traj.times, demo.trajectories[0].times)
        # node 0 carries the common path on the shared snapshot grid
        assert np.array_equal(traj.s[:, 0], fine_t.s[:, 0])


def test_time_steps_scale_with_h_squared(demo):
    info = demo.level_info
    for a, b in zip(info, info[1:]):
        assert a["k"] / b["k"] == pytest.approx((a["h"] / b["h"]) ** 2, rel=1e-12)
        assert b["k"] <= b["k_max"]


def test_besov_distances_decrease(demo):
    rows = demo.rows
    assert len(rows) == 2
    assert rows[0]["besov_L2t"] > rows[1]["besov_L2t"] > 0
    assert rows[1]["ratio_besov_L2t"] >= 1.3


def test_level_diagnostics(demo):
    for lv in demo.level_info:
        assert lv["psi_bounded"] and lv["psi_clamps"] == 0
        assert lv["range_violations"] == 0
        assert lv["tail_ratio"] < 1e-8
    energy = [lv["energy"] for lv in demo.level_info]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(energy, energy[1:]))


def test_nodal_heat_reduction_order():
    # linear heat problem: injection onto coarse nodes converges at second order in h
    study = demo_study()
    study["base"] = {**study["base"], "lambda": 0.0,
                     "psi": {"source": "sine_ramp", "params": {"amp": 0.3}}}
    study["levels"] = [0.2, 0.1, 0.05, 0.025]
    res = run_convergence(study)
    assert res.rows[-1]["order_Linf_t_L2x_nodal"] >= 1.5


def test_reproducible(demo):
    again = run_convergence(demo_study())
    assert again.rows == demo.rows
    other = run_convergence(demo_study(), seed=5)
    assert other.rows != demo.rows


def test_study_validation():
    with pytest.raises(ConfigError):
        resolve_study({"base": {}})
    with pytest.raises(ConfigError):
        resolve_study({"base": {"L": 5.0}, "levels": [0.2, 0.15]})
    with pytest.raises(ConfigError):
        resolve_study({"base": {"L": 5.0}, "levels": [0.2]})
    with pytest.raises(ConfigError):
        resolve_study({"base": {"L": 5.0}, "level": [0.2, 0.1]})


def test_extend_history():
    v = np.array([[1.0, 2.0, 3.0]])
    assert np.array_equal(extend_history(v, 0.2, 0.1, 5), [[1, 1, 2, 2, 3]])
    with pytest.raises(ConfigError):
        extend_history(v, 0.2, 0.1, 7)
