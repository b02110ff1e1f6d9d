import json
import math

import numpy as np
import pytest

import ekick


def test_symmetries():
    assert ekick.symmetries() == ["p_x", "p_z", "d_z2", "d_xz", "d_x2y2"]


def test_pointlike_maxima():
    assert ekick.pointlike(2.0, backscatter=True)["p1"] == pytest.approx(0.5, abs=1e-12)
    assert ekick.pointlike(4.0, backscatter=False)["p1"] == pytest.approx(1.0, abs=1e-12)


def test_poisson_matches_closed_form():
    p = ekick.poisson(1.5, 6)
    expected = [math.exp(-1.5) * 1.5**j / math.factorial(j) for j in range(7)]
    assert np.allclose(p, expected, rtol=0, atol=1e-15)


def test_nonrecoil_unitarity_and_trajectory():
    r = ekick.nonrecoil("p_x", 0.2, 1.0, samples=101)
    assert r["p0"] + r["p1"] == pytest.approx(1.0, abs=1e-8)
    assert r["z"].shape == (101,)
    assert r["amplitudes"].shape == (101, 2)
    norms = np.sum(np.abs(r["amplitudes"]) ** 2, axis=1)
    assert np.max(np.abs(norms - 1.0)) < 1e-8


def test_nonrecoil_linear_regime():
    r = ekick.nonrecoil("d_xz", 0.7, 1e-4)
    assert r["p1"] / 1e-4 == pytest.approx(1.0, abs=1e-3)


def test_recoil_approaches_nonrecoil():
    nr = ekick.nonrecoil("p_x", 0.2, 1.0)["p1"]
    r = ekick.recoil("p_x", 0.2, 1.0, 100.0)
    assert abs(r["probabilities"][1] - nr) < 1e-3
    assert r["eps_conv"] < 1e-3
    assert r["backward"] == [0.0, 0.0]


def test_recoil_backward_channel():
    r = ekick.recoil("p_x", 0.2, 1.0, 1.5, grid_mode="symmetric-full")
    assert r["backward"][1] > 0.0
    assert sum(r["probabilities"]) == pytest.approx(1.0, abs=1e-4)


def test_boson_mean_equals_linear_probability():
    a = ekick.boson_nonrecoil("p_z", 0.5, 1.0, method="analytic", levels=10)
    o = ekick.boson_nonrecoil("p_z", 0.5, 1.0, method="ode", levels=10)
    assert a["mean"] == pytest.approx(1.0, abs=1e-10)
    assert o["mean"] == pytest.approx(1.0, abs=1e-6)
    assert np.allclose(a["occupations"], o["occupations"], atol=1e-6)


def test_invalid_input_raises_value_error():
    with pytest.raises(ValueError):
        ekick.nonrecoil("p_x", -1.0, 1.0)
    with pytest.raises(ValueError):
        ekick.recoil("f_xyz", 0.2, 1.0, 2.0)


def test_find_maximum_small_box():
    r = ekick.find_maximum("p_z", rho_min=0.4, rho_max=1.2, p1lin_min=1.0, p1lin_max=5.0,
                           rho_count=6, p1lin_count=6)
    assert r["p1"] > 0.999
    assert 0.4 <= r["rho"] <= 1.2


def test_cli_in_process():
    code, out, err = ekick.run_cli(["recoil", "--energy-ratio", "3", "--format", "json"])
    assert code == 0, err
    doc = json.loads(out)
    assert doc["metadata"]["tool"] == "ekick"

    code, _, err = ekick.run_cli(["nonrecoil", "--rho", "-1"])
    assert code == 2
    assert "rho" in err


def test_convergence_error_type():
    assert issubclass(ekick.ConvergenceError, RuntimeError)
