import numpy as np
import pytest

import extobs
from extobs import observer
from extobs.errors import DivergenceError
from extobs.hetero import Lre
from extobs.lti_core import build_extended


@pytest.fixture()
def gcfg(demo_cfg):
    return observer.GammaConfig(gamma0=demo_cfg.gamma0, gamma1=demo_cfg.gamma1,
                                rho=demo_cfg.rho)


def _state(setup, gcfg, x=None, kappa=None):
    return observer.ObserverState(
        x_hat_e=np.zeros(5) if x is None else np.asarray(x, dtype=float),
        kappa_hat=np.zeros(9) if kappa is None else np.asarray(kappa, dtype=float),
        gamma_cfg=gcfg,
        n_Theta=4,
    )


def test_observer_matches_baseline_at_true_parameters(setup, gcfg):
    """With the true parameters the adaptive structure is the baseline one."""
    rng = np.random.default_rng(0)
    x0 = rng.standard_normal(5) * 5
    st = _state(setup, gcfg, x=x0, kappa=setup.kappa_true)
    x_star = x0.copy()
    dt = 1e-3
    for k in range(200):
        y = np.sin(0.7 * k * dt) * 3.0
        u = np.cos(1.3 * k * dt)
        st = observer.observer_step(st, u, y, dt, setup.spec, setup.exo)
        x_star = observer.baseline_step(x_star, u, y, dt, setup.ext.theta_ab,
                                        setup.gain_true, setup.spec, setup.exo)
    assert np.allclose(st.x_hat_e, x_star, atol=1e-10)


def test_observer_tracks_plant_with_exact_start(setup, gcfg, demo_cfg):
    """Exact parameters and exact initial state: the observer output follows
    the plant up to integrator error."""
    from dataclasses import replace

    cfg = replace(demo_cfg, dt=2.5e-4, t_final=1.0, t_eps=0.5, k_amp=1e-30,
                  x_hat0=demo_cfg.x0e, kappa_hat0=setup.kappa_true)
    art = extobs.simulate(cfg, engine="numba")
    err = np.linalg.norm(art.series["x_star"] - art.series["xe"], axis=1)
    assert err.max() <= 1e-7 * max(1.0, np.abs(art.series["xe"]).max())


def test_estimation_freezes_below_threshold(setup, gcfg):
    st = _state(setup, gcfg, kappa=np.ones(9))
    lre = Lre(y=np.full(9, 0.5), m=np.asarray(0.5), label="kappa")
    reg = observer.ErrorRegressor(phi_t=np.zeros((5, 9)), lambda_max=0.0)
    out = observer.estimation_step(st, lre, raw_delta=0.05, err_reg=reg, dt=1e-3)
    assert np.array_equal(out.kappa_hat, st.kappa_hat)


def test_estimation_exponential_rate(setup, gcfg):
    """phi = 0 gives gamma M^2 = gamma1: the error contracts at exactly that
    rate, so after time T the norm is e^(-gamma1 T) of the start."""
    target = np.arange(1.0, 10.0)
    st = _state(setup, gcfg, kappa=target + 2.0)
    lre = Lre(y=0.5 * target, m=np.asarray(0.5), label="kappa")
    reg = observer.ErrorRegressor(phi_t=np.zeros((5, 9)), lambda_max=0.0)
    dt, horizon = 1e-3, 1.0
    for _ in range(int(horizon / dt)):
        st = observer.estimation_step(st, lre, 1.0, reg, dt)
    err = np.linalg.norm(st.kappa_hat - target)
    expected = np.exp(-setup.cfg.gamma1 * horizon) * np.linalg.norm(2.0 * np.ones(9))
    assert err == pytest.approx(expected, rel=0.01)


def test_estimation_inconsistency_error(setup, gcfg):
    st = _state(setup, gcfg)
    lre = Lre(y=np.zeros(9), m=np.asarray(0.0), label="kappa")
    reg = observer.ErrorRegressor(phi_t=np.zeros((5, 9)), lambda_max=0.0)
    with pytest.raises(RuntimeError, match="inconsistent"):
        observer.estimation_step(st, lre, raw_delta=1.0, err_reg=reg, dt=1e-3)


def test_error_regressor_cases(setup, gcfg):
    st = _state(setup, gcfg)
    reg = observer.error_regressor(st, 0.0, 0.0, setup.spec)
    assert np.all(reg.phi_t == 0.0) and reg.lambda_max == 0.0

    # ytilde = 2 with a zero state regressor gives lambda_max = 4
    st2 = _state(setup, gcfg)
    reg2 = observer.error_regressor(st2, 0.0, -2.0, setup.spec)
    assert reg2.lambda_max == pytest.approx(4.0, rel=1e-8)
    assert np.allclose(reg2.phi_t[:, 4:], -2.0 * np.eye(5))

    rng = np.random.default_rng(1)
    for _ in range(20):
        st3 = _state(setup, gcfg, x=rng.standard_normal(5) * 10)
        u, y = rng.standard_normal(2)
        reg3 = observer.error_regressor(st3, u, y, setup.spec)
        dense = np.linalg.eigvalsh(reg3.phi_t.T @ reg3.phi_t)[-1]
        assert reg3.lambda_max == pytest.approx(dense, rel=1e-6)


def test_baseline_divergence_with_destabilizing_gain(setup):
    # a wrong-signed gain makes the closed loop unstable; the guard fires
    bad_gain = -50.0 * setup.gain_true
    x = np.ones(5)
    with pytest.raises(DivergenceError):
        for k in range(200000):
            x = observer.baseline_step(x, 0.0, 100.0 * np.sin(0.01 * k), 1e-2,
                                       setup.ext.theta_ab, bad_gain,
                                       setup.spec, setup.exo)


def test_disturbance_estimate(setup, gcfg):
    st = _state(setup, gcfg)
    assert observer.disturbance_estimate(st, setup.exo) == 0.0
    st2 = _state(setup, gcfg, x=[0.0, 0.0, 0.0, 7.0, -1.0])
    assert observer.disturbance_estimate(st2, setup.exo) == pytest.approx(7.0)


def test_kappa_error_monotone_with_exact_lre(setup, gcfg):
    rng = np.random.default_rng(2)
    target = np.concatenate([setup.ext.theta_ab, setup.gain_true])
    st = _state(setup, gcfg, kappa=target + rng.standard_normal(9))
    lre = Lre(y=0.8 * target, m=np.asarray(0.8), label="kappa")
    last = np.linalg.norm(st.kappa_hat - target)
    for k in range(200):
        reg = observer.error_regressor(st, rng.standard_normal(), rng.standard_normal(),
                                       setup.spec)
        st = observer.estimation_step(st, lre, 1.0, reg, 1e-3)
        err = np.linalg.norm(st.kappa_hat - target)
        assert err <= last + 1e-14
        last = err
