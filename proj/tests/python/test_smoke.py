import numpy as np
import pytest

import tethersim as ts


@pytest.fixture(scope="module")
def params():
    return ts.make_params(
        quad_mass=0.755,
        inertia_diag=[0.0043, 0.0043, 0.0103],
        link_masses=[0.06] * 5,
        link_lengths=[1.0] * 5,
    )


def test_params_round_numbers(params):
    assert params.n == 5
    assert params.total_length == pytest.approx(5.0)
    assert params.total_mass == pytest.approx(1.055)


def test_straight_chain_positions(params):
    q = np.tile([1.0, 0.0, 0.0], (5, 1))
    pos = ts.positions(params, q)
    assert pos.shape == (5, 3)
    np.testing.assert_allclose(pos[:, 0], np.arange(1.0, 6.0))
    np.testing.assert_allclose(pos[:, 1:], 0.0)


def test_hanging_chain_closure(params):
    x0 = np.array([2.46, 0.0, -0.43])
    q = ts.hanging_chain(params, x0)
    np.testing.assert_allclose(q.sum(axis=0), x0, atol=1e-8)
    np.testing.assert_allclose(np.linalg.norm(q, axis=1), 1.0, atol=1e-12)
    with pytest.raises(ValueError):
        ts.hanging_chain(params, [6.0, 0.0, 0.0])  # outside reach


def test_link_accelerations_tangent(params):
    rng = np.random.default_rng(7)
    q = rng.standard_normal((5, 3))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    omega = rng.standard_normal((5, 3))
    acc = ts.link_accelerations(params, q, omega, [0.0, 0.0, -12.0])
    assert acc.shape == (5, 3)
    # accelerations stay tangent to each direction
    np.testing.assert_allclose((acc * q).sum(axis=1), 0.0, atol=1e-9)


def test_stabilizer_is_hurwitz(params):
    lin = ts.linearize(params)
    gains = ts.synthesize_gains(lin, margin=0.05)
    assert gains.K_x.shape == (3, 10)
    closed = ts.closed_loop_matrix(lin, gains)
    eigs = np.linalg.eigvals(closed)
    assert eigs.real.max() < -0.05
    assert gains.margin >= 0.05


def test_lyapunov_certificate_defaults():
    cert = ts.lyapunov_certificate(ts.TautGains(), 1.9)
    assert cert.is_valid
    for mat in (cert.P_lower, cert.P_upper, cert.W_q):
        assert np.linalg.eigvalsh(mat).min() > 0.0


def test_preset_run_and_metrics():
    cfg = ts.load_scenario("fig2")
    assert cfg.links == 1
    cfg.duration = 1.0
    cfg.simplified = True
    result = ts.run_scenario(cfg)
    assert len(result.trajectory) == 501
    assert result.metrics.max_tension_error < 1e-9
    assert result.metrics.final_e_q is not None
    e_q = result.trajectory.error_norm("e_q")
    assert e_q.shape == (501,)
    assert np.isfinite(e_q).all()
    assert result.metrics.final_e_x is None


def test_csv_round_trip():
    cfg = ts.load_scenario("fig2")
    cfg.duration = 0.05
    result = ts.run_scenario(cfg)
    text = ts.trajectory_csv(result.trajectory)
    back = ts.parse_trajectory_csv(text)
    assert ts.trajectory_csv(back) == text
    np.testing.assert_array_equal(
        back.link_direction(0), result.trajectory.link_direction(0)
    )


def test_audit_clean_run(params):
    cfg = ts.parse_scenario(
        "\n".join(
            [
                "system.links = 2",
                "system.quad_mass = 0.755",
                "system.inertia_diag = 0.0043 0.0043 0.0103",
                "system.tether_mass = 0.3",
                "system.tether_length = 5.0",
                "initial.kind = link_directions",
                "initial.direction = 1 0 0.4",
                "controller.kind = none",
                "integrator.h = 1e-3",
                "run.duration = 0.5",
            ]
        )
    )
    result = ts.run_scenario(cfg)
    report = ts.run_audit(cfg.make_system(), result.trajectory)
    assert report.max_constraint_drift < 1e-9
    assert report.energy_drift_rel < 1e-6
    assert report.bound_violations == 0


def test_config_errors_surface_as_value_errors():
    with pytest.raises(ValueError, match="missing field"):
        ts.parse_scenario("system.links = 1\n")
    with pytest.raises(ValueError):
        ts.load_scenario("/nonexistent/path.cfg")


def test_scenario_round_trip():
    cfg = ts.load_scenario("fig5")
    text = ts.serialize_scenario(cfg)
    back = ts.parse_scenario(text)
    assert ts.serialize_scenario(back) == text
    assert set(ts.preset_names()) == {"fig2", "fig3", "fig4", "fig5"}
