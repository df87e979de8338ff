"""Filter bank turning (u, y) into a scalar-regressor linear regression.

State filters driven by the measured input/output produce an instantaneous
regression pair (q_bar, phi_bar) for the canonical-form parameters eta,
with the disturbance contribution absorbed through an auxiliary filter
triple (F, H, N) weighted by a Sylvester-derived vector beta. Low-pass
copies and a two-layer weighted integration then build the square system
(q, phi); mixing by the adjugate of phi yields Y = Delta * eta with the
scalar regressor Delta = k * det(phi).

The extension integrals are implemented literally as cascaded integration:
an inner accumulator integrates the weighted products, and the outer state
integrates the accumulator.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_sylvester

from . import _linalg
from .errors import ConfigError, DivergenceError
from .hetero import Lre
from .lti_core import ExosystemSpec


@dataclass(frozen=True)
class FilterConfig:
    k_gain: np.ndarray          # output-injection gain K of the state filters
    a_k: np.ndarray             # A_0 - K C_0^T, Hurwitz
    c_0: np.ndarray
    g: np.ndarray               # disturbance filter matrix, Hurwitz
    l: np.ndarray               # (g, l) controllable
    beta: np.ndarray
    k1: float                   # low-pass time constant
    k2: float                   # extension integral weight rate
    k_amp: float                # mixing amplifier k(t) when constant
    t_eps: float                # extension start time
    n: int
    n_delta: int

    def validate(self):
        if self.k1 <= 0 or self.k2 <= 0 or self.k_amp <= 0:
            raise ConfigError("filter constants k, k1, k2 must be positive")
        if not _linalg.is_hurwitz(self.a_k):
            raise ConfigError("A_0 - K C_0^T must be Hurwitz")
        if not _linalg.is_hurwitz(self.g):
            raise ConfigError("disturbance filter matrix G must be Hurwitz")
        if not _linalg.is_controllable(self.g, self.l):
            raise ConfigError("pair (G, l) must be controllable")


@dataclass
class FilterBank:
    """All filter states; created at zero per the stated initial conditions."""

    z: np.ndarray
    omega: np.ndarray
    p: np.ndarray
    f: np.ndarray
    h: np.ndarray
    n_mat: np.ndarray
    q_bar_f: float
    phi_bar_f: np.ndarray
    f_f: np.ndarray
    y_f: float
    q_inner: np.ndarray
    q: np.ndarray
    phi_inner: np.ndarray
    phi: np.ndarray

    @classmethod
    def zeros(cls, cfg: FilterConfig) -> "FilterBank":
        n, nd = cfg.n, cfg.n_delta
        return cls(
            z=np.zeros(n),
            omega=np.zeros((n, n)),
            p=np.zeros((n, n)),
            f=np.zeros(nd),
            h=np.zeros((nd, n)),
            n_mat=np.zeros((nd, n)),
            q_bar_f=0.0,
            phi_bar_f=np.zeros(2 * n),
            f_f=np.zeros(nd),
            y_f=0.0,
            q_inner=np.zeros(2 * n),
            q=np.zeros(2 * n),
            phi_inner=np.zeros((2 * n, 2 * n)),
            phi=np.zeros((2 * n, 2 * n)),
        )


def compute_beta(g: np.ndarray, l: np.ndarray, exo: ExosystemSpec):
    """Solve M A_delta - G M = l hbar^T with hbar^T = h^T A_delta; beta = hbar^T M^{-1}.

    Requires disjoint spectra of A_delta and G (Sylvester solvability) and
    an invertible M (non-degenerate exosystem/filter pairing).
    """
    g = np.asarray(g, dtype=float)
    l = np.asarray(l, dtype=float)
    if not _linalg.spectra_disjoint(exo.a_delta, g):
        raise ConfigError("Sylvester equation singular: exosystem and filter share spectrum")
    hbar = exo.h_delta @ exo.a_delta
    m_delta = solve_sylvester(-g, exo.a_delta, np.outer(l, hbar))
    cond = np.linalg.cond(m_delta)
    if not np.isfinite(cond) or cond > 1e12:
        raise ConfigError("exosystem/filter pairing degenerate: coupling matrix is singular")
    beta = np.linalg.solve(m_delta.T, hbar)
    return m_delta, beta


def filter_derivatives(bank: FilterBank, cfg: FilterConfig, y: float, u: float):
    """Right-hand sides of every filter ODE plus the regression pair.

    The z, Omega, P derivatives are reused to drive F, H, N and to form
    phi_bar, avoiding numerical differentiation. Returns (derivs dict,
    q_bar, phi_bar).
    """
    n = cfg.n
    eye = np.eye(n)
    zd = cfg.a_k @ bank.z + cfg.k_gain * y
    omd = cfg.a_k @ bank.omega + eye * y
    pd = cfg.a_k @ bank.p + eye * u
    fd = cfg.g @ bank.f + (cfg.g @ cfg.l) * y - cfg.l * (cfg.c_0 @ zd)
    hd = cfg.g @ bank.h - np.outer(cfg.l, cfg.c_0 @ pd)
    nd = cfg.g @ bank.n_mat - np.outer(cfg.l, cfg.c_0 @ omd)
    q_bar = y - cfg.c_0 @ bank.z
    phi_bar = np.concatenate(
        [omd.T @ cfg.c_0 + bank.n_mat.T @ cfg.beta, pd.T @ cfg.c_0 + bank.h.T @ cfg.beta]
    )
    derivs = {
        "z": zd,
        "omega": omd,
        "p": pd,
        "f": fd,
        "h": hd,
        "n_mat": nd,
        "q_bar_f": -cfg.k1 * bank.q_bar_f + q_bar,
        "phi_bar_f": -cfg.k1 * bank.phi_bar_f + phi_bar,
        "f_f": -cfg.k1 * bank.f_f + bank.f,
        "y_f": -cfg.k1 * bank.y_f + y,
    }
    return derivs, q_bar, phi_bar


def build_qbar_phibar(bank: FilterBank, cfg: FilterConfig, y: float, u: float):
    """Instantaneous regression pair (q_bar, phi_bar) at the current state."""
    _, q_bar, phi_bar = filter_derivatives(bank, cfg, y, u)
    return q_bar, phi_bar


def mismatch_signal(bank: FilterBank, cfg: FilterConfig, y: float) -> float:
    """chi = q_bar - k1 q_bar_f - beta^T (F_f + l y_f), the extension drive."""
    q_bar = y - cfg.c_0 @ bank.z
    return q_bar - cfg.k1 * bank.q_bar_f - cfg.beta @ (bank.f_f + cfg.l * bank.y_f)


_FILTER_KEYS = ("z", "omega", "p", "f", "h", "n_mat", "q_bar_f", "phi_bar_f", "f_f", "y_f")


def step_filters(bank: FilterBank, cfg: FilterConfig, y: float, u: float,
                 t: float, dt: float) -> FilterBank:
    """Advance the filter ODEs one classical RK4 step.

    The measured signals are held constant over the step; co-simulation
    with substep-consistent inputs is handled by the engine. Raises
    DivergenceError when a non-finite state appears.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")

    def rhs(b):
        derivs, _, _ = filter_derivatives(b, cfg, y, u)
        return derivs

    def shift(b, derivs, h):
        return replace(b, **{k: getattr(b, k) + h * derivs[k] for k in _FILTER_KEYS})

    k1d = rhs(bank)
    k2d = rhs(shift(bank, k1d, dt / 2))
    k3d = rhs(shift(bank, k2d, dt / 2))
    k4d = rhs(shift(bank, k3d, dt))
    new = replace(
        bank,
        **{
            k: getattr(bank, k)
            + dt / 6 * (k1d[k] + 2 * k2d[k] + 2 * k3d[k] + k4d[k])
            for k in _FILTER_KEYS
        },
    )
    for k in _FILTER_KEYS:
        if not np.all(np.isfinite(np.asarray(getattr(new, k)))):
            raise DivergenceError(f"filter divergence in state {k!r} at t={t + dt:.6g}", t=t + dt)
    return new


def step_extension(bank: FilterBank, cfg: FilterConfig, y: float, t: float, dt: float) -> FilterBank:
    """Advance the cascaded extension integrals one RK4 step.

    Inner accumulators integrate the weighted regression products; q and
    phi integrate the accumulators. The signals phi_bar_f and chi are held
    at their current values across the step while the weight
    exp(-k2 (tau - t_eps)) varies. No-op before t_eps by contract.
    """
    if t < cfg.t_eps:
        return bank
    phif = bank.phi_bar_f
    chi = mismatch_signal(bank, cfg, y)
    outer = np.outer(phif, phif)

    def rates(tau, q_inner, phi_inner):
        w = np.exp(-cfg.k2 * (tau - cfg.t_eps)) if tau >= cfg.t_eps else 0.0
        return w * phif * chi, q_inner, w * outer, phi_inner

    s1 = rates(t, bank.q_inner, bank.phi_inner)
    s2 = rates(t + dt / 2, bank.q_inner + dt / 2 * s1[0], bank.phi_inner + dt / 2 * s1[2])
    s3 = rates(t + dt / 2, bank.q_inner + dt / 2 * s2[0], bank.phi_inner + dt / 2 * s2[2])
    s4 = rates(t + dt, bank.q_inner + dt * s3[0], bank.phi_inner + dt * s3[2])

    def rk(i):
        return dt / 6 * (s1[i] + 2 * s2[i] + 2 * s3[i] + s4[i])

    return replace(
        bank,
        q_inner=bank.q_inner + rk(0),
        q=bank.q + rk(1),
        phi_inner=bank.phi_inner + rk(2),
        phi=bank.phi + rk(3),
    )


def mix(bank: FilterBank, k_amp: float) -> Lre:
    """Regressor mixing: Y = k adj(phi) q, Delta = k det(phi)."""
    adj, det = _linalg.adjugate_and_det(bank.phi)
    return Lre(y=k_amp * (adj @ bank.q), m=k_amp * det, label="eta")


def lemma1_residual(bank: FilterBank, cfg: FilterConfig, eta_true: np.ndarray,
                    y: float, t: float, q_bar_t0: float = 0.0, t0: float = 0.0) -> float:
    """Magnitude of the decaying term left in the filtered regression identity.

    Computes |chi - phi_bar_f^T eta - exp(-k1 (t - t0)) q_bar(t0)|, the
    quantity whose smallness certifies that the parametrization has
    converged onto the true eta.
    """
    chi = mismatch_signal(bank, cfg, y)
    return float(
        abs(chi - bank.phi_bar_f @ eta_true - np.exp(-cfg.k1 * (t - t0)) * q_bar_t0)
    )
