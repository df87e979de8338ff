"""Adaptive observer, its error regressor, and the switched estimation law.

The observer integrates the lifted dynamics with the current parameter
estimate and output injection through the estimated gain. The parameter
vector kappa = col(Theta_AB, L) is driven toward the regression ratio by a
normalized gradient law that switches off while the raw scalar regressor
sits below the excitation threshold rho.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import _linalg
from .errors import DivergenceError
from .hetero import Lre
from .lti_core import ExosystemSpec, SystemSpec, embed_disturbance, regressor_phi

STATE_GUARD = 1e12  # peaking transients stay orders of magnitude below this


@dataclass(frozen=True)
class GammaConfig:
    gamma0: float
    gamma1: float
    rho: float


@dataclass(frozen=True)
class ObserverState:
    x_hat_e: np.ndarray
    kappa_hat: np.ndarray
    gamma_cfg: GammaConfig
    n_Theta: int

    @property
    def theta_ab_hat(self):
        return self.kappa_hat[: self.n_Theta]

    @property
    def gain_hat(self):
        return self.kappa_hat[self.n_Theta:]


@dataclass(frozen=True)
class ErrorRegressor:
    """phi^T = [Phi^T(x_hat_e, u), -ytilde I]; lambda_max of phi phi^T."""

    phi_t: np.ndarray
    lambda_max: float


def _observer_rhs(x, u, y, theta_ab, gain, spec, a_d, c_e):
    return regressor_phi(x, u, spec) @ theta_ab + a_d @ x - gain * (c_e @ x - y)


def _rk4_state(x, u, y, theta_ab, gain, spec, a_d, c_e, dt):
    k1 = _observer_rhs(x, u, y, theta_ab, gain, spec, a_d, c_e)
    k2 = _observer_rhs(x + dt / 2 * k1, u, y, theta_ab, gain, spec, a_d, c_e)
    k3 = _observer_rhs(x + dt / 2 * k2, u, y, theta_ab, gain, spec, a_d, c_e)
    k4 = _observer_rhs(x + dt * k3, u, y, theta_ab, gain, spec, a_d, c_e)
    return x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def observer_step(st: ObserverState, u: float, y: float, dt: float,
                  spec: SystemSpec, exo: ExosystemSpec) -> ObserverState:
    """One RK4 step of the state estimate with the current kappa_hat frozen."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    a_d = embed_disturbance(spec, exo)
    c_e = np.concatenate([spec.c, np.zeros(exo.n_delta)])
    x_new = _rk4_state(st.x_hat_e, u, y, st.theta_ab_hat, st.gain_hat, spec, a_d, c_e, dt)
    if not np.all(np.isfinite(x_new)) or np.max(np.abs(x_new)) > STATE_GUARD:
        raise DivergenceError(f"observer divergence: |x_hat| > {STATE_GUARD:g}", t=None)
    return replace(st, x_hat_e=x_new)


def baseline_step(x_star: np.ndarray, u: float, y: float, dt: float,
                  theta_ab_true: np.ndarray, gain_true: np.ndarray,
                  spec: SystemSpec, exo: ExosystemSpec) -> np.ndarray:
    """Non-adaptive reference observer: same structure, frozen true parameters."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    a_d = embed_disturbance(spec, exo)
    c_e = np.concatenate([spec.c, np.zeros(exo.n_delta)])
    x_new = _rk4_state(x_star, u, y, theta_ab_true, gain_true, spec, a_d, c_e, dt)
    if not np.all(np.isfinite(x_new)) or np.max(np.abs(x_new)) > STATE_GUARD:
        raise DivergenceError(f"observer divergence: |x_star| > {STATE_GUARD:g}", t=None)
    return x_new


def error_regressor(st: ObserverState, u: float, y: float, spec: SystemSpec) -> ErrorRegressor:
    """Assemble the error-equation regressor and its largest singular energy.

    lambda_max(phi phi^T) equals lambda_max of the small Gram
    Phi^T Phi + ytilde^2 I, evaluated by power iteration to 1e-8.
    """
    n_e = spec.n_e
    phi_big_t = regressor_phi(st.x_hat_e, u, spec)
    y_tilde = float(st.x_hat_e @ np.concatenate([spec.c, np.zeros(n_e - spec.n)]) - y)
    phi_t = np.concatenate([phi_big_t, -y_tilde * np.eye(n_e)], axis=1)
    gram = phi_big_t @ phi_big_t.T + y_tilde**2 * np.eye(n_e)
    lam = _linalg.power_iteration_lmax(gram, tol=1e-8)
    return ErrorRegressor(phi_t=phi_t, lambda_max=lam)


def estimation_gain(raw_delta: float, m_kappa: float, lambda_max: float,
                    cfg: GammaConfig) -> float:
    """Switched adaptation gain: zero below the excitation threshold.

    Raises RuntimeError when the threshold is met but the stacked regressor
    vanished, which the positivity result rules out.
    """
    if raw_delta < cfg.rho:
        return 0.0
    if m_kappa == 0.0:
        raise RuntimeError(
            "inconsistent regression: raw Delta above rho with zero stacked regressor"
        )
    return (cfg.gamma0 * lambda_max + cfg.gamma1) / m_kappa**2


def estimation_step(st: ObserverState, lre: Lre, raw_delta: float,
                    err_reg: ErrorRegressor, dt: float) -> ObserverState:
    """One RK4 step of the parameter law with frozen regression data.

    d/dt kappa_hat = -gamma M_kappa (M_kappa kappa_hat - Y_kappa); with the
    gain's 1/M_kappa^2 normalization this is a uniform contraction toward
    the regression ratio whenever the excitation switch is on.
    """
    if lre.label != "kappa":
        raise ValueError(f"expected a kappa regression, got {lre.label!r}")
    gamma = estimation_gain(raw_delta, float(lre.m), err_reg.lambda_max, st.gamma_cfg)
    if gamma == 0.0:
        return st
    m = float(lre.m)
    y = np.asarray(lre.y, dtype=float)

    def rhs(k):
        return -gamma * m * (m * k - y)

    k1 = rhs(st.kappa_hat)
    k2 = rhs(st.kappa_hat + dt / 2 * k1)
    k3 = rhs(st.kappa_hat + dt / 2 * k2)
    k4 = rhs(st.kappa_hat + dt * k3)
    kappa_new = st.kappa_hat + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(kappa_new)):
        raise DivergenceError("observer divergence: non-finite kappa_hat", t=None)
    return replace(st, kappa_hat=kappa_new)


def disturbance_estimate(st: ObserverState, exo: ExosystemSpec) -> float:
    """delta_hat = h_delta^T (disturbance block of x_hat_e)."""
    return float(exo.h_delta @ st.x_hat_e[-exo.n_delta:])
