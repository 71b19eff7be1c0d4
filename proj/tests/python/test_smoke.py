import json
import math

import numpy as np
import pytest

import arnqs

RNN = {"arch": "rnn", "sites": 6, "hidden": 4}
ATF = {"arch": "atf", "sites": 6, "d_emb": 4, "heads": 2, "attention": "circulant"}


def test_version_and_canonical_spec():
    assert arnqs.__version__
    spec = arnqs.canonical_spec({"sites": 4})
    assert spec["g"] == "softmax" and spec["hidden"] == 1


def test_bad_spec_raises_value_error():
    with pytest.raises(ValueError, match="d_emb not divisible by heads"):
        arnqs.canonical_spec({"arch": "atf", "d_emb": 21, "heads": 2})


@pytest.mark.parametrize("spec", [RNN, ATF])
def test_state_is_normalized_and_matches_samples(spec):
    params = arnqs.init_gaussian(spec, 0.7, 3)
    psi = arnqs.state_vector(spec, params)
    assert psi.shape == (64,)
    assert abs(np.sum(np.abs(psi) ** 2) - 1.0) < 1e-10
    configs, log_mod, phase = arnqs.sample(spec, params, 200, 9)
    assert configs.shape == (200, 6)
    idx = configs.astype(np.int64) @ (1 << np.arange(5, -1, -1))
    assert np.allclose(np.exp(log_mod), np.abs(psi[idx]) ** 2)


def test_product_state_at_zero_width():
    params = arnqs.init_gaussian(RNN, 0.0, 1)
    assert arnqs.renyi2_exact(RNN, params) == 0.0
    cond, _ = arnqs.conditionals(RNN, params, [0, 1, 1, 0, 0, 1])
    assert np.all(cond == 0.5)


def test_swap_agrees_with_exact():
    params = arnqs.init_gaussian(RNN, 0.5, 4)
    exact = arnqs.renyi2_exact(RNN, params)
    rep = arnqs.renyi2_swap(RNN, params, 20000, 5)
    assert abs(rep["s2"] - exact) <= 5 * rep["s2_stderr"] + 1e-9


def test_parameters_round_trip():
    params = arnqs.init_gaussian(RNN, 0.3, 2)
    values = params.values()
    other = arnqs.init_gaussian(RNN, 0.0, 2)
    other.set_values(values)
    assert other == params
    assert params.size == len(values) and params.names


def test_entropy_grid_zero_column():
    cells = arnqs.entropy_grid(RNN, [2, 3], [0.0, 0.5], 3, 11)
    assert len(cells) == 4
    assert cells[0]["mean"] == 0.0 and cells[2]["mean"] == 0.0
    assert all(0.0 <= c["mean"] <= 1.0 for c in cells)


def test_energies_and_gradient():
    assert arnqs.exact_ground_energy("heisenberg", sites=2) == pytest.approx(-0.25)
    assert arnqs.exact_ground_energy("tfim", sites=2) == pytest.approx(-math.sqrt(5.0))
    params = arnqs.init_gaussian(RNN, 0.4, 6)
    e, var, grad = arnqs.exact_energy_gradient(RNN, params, "tfim")
    assert e == pytest.approx(arnqs.exact_energy(RNN, params, "tfim"))
    assert len(grad) == params.size and var >= 0.0


def test_vmc_trivial_anchor_converges_immediately():
    spec = dict(RNN, phase="positive")
    params = arnqs.init_gaussian(spec, 0.0, 0)
    res = arnqs.vmc_optimize(spec, params, "tfim", J=0.0, h=1.0, max_iters=3, n_samples=50)
    assert res["tau_conv"] == 0


def test_logit_normal_helpers():
    assert arnqs.logit_normal_pdf(0.5) == pytest.approx(1.595769, abs=1e-6)
    assert arnqs.logit_normal_cdf(0.5, sigma=3.0) == 0.5
    assert arnqs.mass_outside_eps(1.0, 0.5) == 0.0
    assert arnqs.reference_mean_r_min("poisson") == pytest.approx(2 * math.log(2) - 1, abs=1e-9)


def test_config_and_execute(tmp_path):
    cfg = {"subcommand": "phase-diagram", "spec": {"sites": 6, "hidden": 3},
           "grid": {"arch_axis": [2], "sigma_axis": [0.0, 0.6], "n_init": 2},
           "output_dir": str(tmp_path / "run")}
    canon = arnqs.parse_config(cfg)
    assert canon["estimator"]["kind"] == "exact"
    assert arnqs.parse_config(canon) == canon
    code, summary, files = arnqs.execute(cfg)
    assert code == 0 and "internal checks: all passed" in summary
    assert "grid.csv" in files
    manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert manifest["config"] == canon
    with pytest.raises(ValueError, match="unknown key"):
        arnqs.parse_config(dict(cfg, extra=1))
