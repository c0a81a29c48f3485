"""Smoke tests for the Python bindings: thin checks that the compiled module
loads, round-trips numpy data, and agrees with its own closed forms. The heavy
numerical validation lives in the C++ test suite."""

import math

import numpy as np
import pytest

import sbdlab


def make_model(mortality=1.0, plus_mass=3.0, minus_mass=2.0):
    birth = sbdlab.Kernel.gaussian(1, plus_mass / math.sqrt(2 * math.pi), 1.0)
    comp = sbdlab.Kernel.gaussian(1, minus_mass / (0.7 * math.sqrt(2 * math.pi)), 0.7)
    return sbdlab.Model(mortality, birth, comp)


def test_kernel_stats():
    ball = sbdlab.Kernel.ball(1, 2.0, 0.5)
    assert ball.mass == pytest.approx(2.0)
    assert ball.sup == 2.0
    assert ball.support_radius == 0.5
    with pytest.raises(ValueError):
        sbdlab.Kernel.ball(1, -1.0, 0.5)


def test_constant_data_matches_closed_form():
    dom = sbdlab.TorusDomain(1, 20.0, 64)
    model = make_model()
    exact = sbdlab.homogeneous_exact(0.4, model)
    out = sbdlab.integrate(dom, 0.4, model, t_end=2.0, dt=1e-3, store_every=200)
    dens = out["densities"]
    assert dens.shape == (11, 64)
    for t, row in zip(out["times"], dens):
        assert row == pytest.approx(exact(t), rel=1e-7)
    assert exact.equilibrium == pytest.approx(1.0)


def test_integrate_accepts_numpy_initial_data():
    dom = sbdlab.TorusDomain(1, 20.0, 32)
    model = make_model()
    x = np.arange(32) * dom.spacing
    rho0 = 0.5 + 0.2 * np.cos(2 * np.pi * x / dom.edge)
    out = sbdlab.integrate(dom, rho0, model, t_end=0.5)
    assert out["densities"][0] == pytest.approx(rho0)
    assert np.all(out["densities"] >= 0)
    with pytest.raises(ValueError):
        sbdlab.integrate(dom, np.ones(7), model, t_end=0.1)


def test_ensemble_is_thread_deterministic():
    dom = sbdlab.TorusDomain(1, 15.0, 30)
    model = make_model(mortality=0.5, plus_mass=1.0, minus_mass=1.0)
    kwargs = dict(t_end=1.0, snapshot_times=[0.5, 1.0], runs=12, seed=2718)
    one = sbdlab.run_ensemble(dom, 0.8, model, threads=1, **kwargs)
    four = sbdlab.run_ensemble(dom, 0.8, model, threads=4, **kwargs)
    for a, b in zip(one["snapshots"], four["snapshots"]):
        assert a["populations"] == b["populations"]
        assert a["mean_density"] == b["mean_density"]
        assert np.array_equal(a["k1"], b["k1"])


def test_chain_stays_product_at_epsilon_zero():
    dom = sbdlab.TorusDomain(1, 10.0, 24)
    birth = sbdlab.Kernel.gaussian(1, 1.2 / (0.5 * math.sqrt(2 * math.pi)), 0.5)
    comp = sbdlab.Kernel.gaussian(1, 0.8 / (0.4 * math.sqrt(2 * math.pi)), 0.4)
    model = sbdlab.Model(0.7, birth, comp)
    out = sbdlab.evolve_chain(dom, 1.0, model, epsilon=0.0, t_end=0.2, dt=2e-3, store_every=50)
    assert out["k1"].shape[1] == 24
    assert max(out["product_residuals"]) < 1e-9
    assert out["k2_final"].shape == (24, 24)


def test_certificate_dict():
    dom = sbdlab.TorusDomain(1, 20.0, 100)
    model = sbdlab.Model(0.5, sbdlab.Kernel.ball(1, 1.0, 0.5), sbdlab.Kernel.ball(1, 2.0, 0.3))
    cert = sbdlab.certify_excess_mass_bound(model, dom, theta=1.0)
    assert cert["hypotheses_hold"]
    assert cert["details"]["excess"] == pytest.approx(0.4)
    assert cert["conclusion"] == "not-checked"


CONFIG = """
[experiment]
kind = kinetic

[domain]
dim = 1
edge = 12.0
points = 24

[params]
mortality = 1.0

[kernel.birth]
shape = ball
amplitude = 1.5
radius = 0.5

[kernel.competition]
shape = ball
amplitude = 1.0
radius = 0.5

[initial]
kind = constant
value = 0.3

[run]
t_end = 0.5
dt = 0.005
store_every = 20
"""


def test_run_config_writes_manifest(tmp_path):
    man = sbdlab.run_config(CONFIG, name="demo", output_dir=str(tmp_path / "out"))
    assert man["kind"] == "kinetic"
    assert man["certificates_passed"]
    paths = {o["path"] for o in man["outputs"]}
    assert paths == {"trajectory.csv", "summary.json"}
    for rec in man["outputs"]:
        data = (tmp_path / "out" / rec["path"]).read_bytes()
        assert len(data) == rec["bytes"]
        assert sbdlab.content_hash(data.decode()) == rec["hash"]
    assert (tmp_path / "out" / "manifest.json").exists()


def test_validate_config_rejects_unknown_keys():
    good = sbdlab.validate_config(CONFIG, name="demo")
    assert good["kind"] == "kinetic"
    assert good["config_hash"].startswith("fnv1a64:")
    with pytest.raises(ValueError, match="run.typo"):
        sbdlab.validate_config(CONFIG + "\n[run]\ntypo = 1\n", name="demo")
