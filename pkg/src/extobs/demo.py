"""Built-in demo plant: a three-state oscillator chain with three physical
parameters, a scalar control on the last state and an oscillatory
disturbance entering the first state.

    dx/dt = [[0, th1+th2, 0], [-th2, 0, th2], [0, -th3, 0]] x
            + [0, 0, th3]^T u + [th1*th2, 0, 0]^T delta,   y = x3.

The lifted parameter vector is Theta_AB = (th1+th2, th1*th2, th2, th3).
Closed forms of the canonical parameters and the three regression
transforms for this family ship alongside the structural data.
"""

import numpy as np

from .hetero import HeteroMapping
from .lti_core import ExosystemSpec, SystemSpec

N, N_DELTA, N_E, N_THETA, N_THETA_AB = 3, 2, 5, 3, 4


def _a_of(th):
    return np.array([[0.0, th[0] + th[1], 0.0], [-th[1], 0.0, th[1]], [0.0, -th[2], 0.0]])


def _b_of(th):
    return np.array([0.0, 0.0, th[2]])


def _d_of(th):
    return np.array([th[0] * th[1], 0.0, 0.0])


def _structural_matrices():
    # nonzero entries of col(vec(A_e^T), B_e) as signed copies of Theta_AB
    # (flat index -> (component, sign)); vec is column-stacking.
    entries = {1: (0, 1.0), 3: (1, 1.0), 5: (2, -1.0), 7: (2, 1.0), 11: (3, -1.0), 27: (3, 1.0)}
    rows = N_E * (N_E + 1)
    d_phi = np.zeros((rows, N_THETA_AB))
    for k, (j, s) in entries.items():
        d_phi[k, j] = s
    l_phi = np.zeros((N_THETA_AB, rows))
    for j, k in enumerate((1, 3, 7, 27)):
        l_phi[j, k] = 1.0
    l_at = np.hstack([np.eye(N_E * N_E), np.zeros((N_E * N_E, N_E))])
    l_b = np.hstack([np.zeros((N_E, N_E * N_E)), np.eye(N_E)])
    l_ab = np.zeros((N_THETA, 2 * N))
    for j, k in enumerate((1, 3, 5)):
        l_ab[j, k] = 1.0
    return d_phi, l_phi, l_at, l_b, l_ab


def build_system() -> SystemSpec:
    d_phi, l_phi, l_at, l_b, l_ab = _structural_matrices()
    spec = SystemSpec(
        name="demo",
        n=N,
        n_theta=N_THETA,
        n_Theta=N_THETA_AB,
        a_of=_a_of,
        b_of=_b_of,
        d_of=_d_of,
        c=np.array([0.0, 0.0, 1.0]),
        d_phi=d_phi,
        l_phi=l_phi,
        l_at=l_at,
        l_b=l_b,
        l_ab=l_ab,
    )
    spec.validate()
    return spec


def default_exosystem() -> ExosystemSpec:
    return ExosystemSpec(
        a_delta=np.array([[0.0, 1.0], [-10.0, -0.01]]),
        h_delta=np.array([1.0, 0.0]),
    )


def psi_a_closed(th):
    return np.array([0.0, -(th[0] + th[1] + th[2]) * th[1], 0.0])


def psi_b_closed(th):
    return np.array([th[2], 0.0, th[2] * th[1] * (th[1] + th[0])])


def psi_d_closed(th):
    return np.array([0.0, 0.0, th[0] * th[1] ** 2 * th[2]])


def psi_ab_closed(th):
    return np.array(
        [-(th[0] + th[1] + th[2]) * th[1], th[2], th[2] * th[1] * (th[1] + th[0])]
    )


def theta_ab_closed(th):
    return np.array([th[0] + th[1], th[0] * th[1], th[1], th[2]])


def theta_from_psi_ab(psi):
    """Closed-form inverse psi_ab -> theta on the invertible region."""
    th3 = psi[1]
    th2 = -(psi[0] * psi[1] + psi[2]) / psi[1] ** 2
    th1 = psi[2] / (psi[1] * th2) - th2
    return np.array([th1, th2, th3])


def _g_underlying(psi):
    psi = np.asarray(psi, dtype=float)
    p1, p2, p3 = psi[..., 0], psi[..., 1], psi[..., 2]
    diag = np.stack([p2**3 * (p1 * p2 + p3), p2**2, p1], axis=-1)
    out = np.zeros(psi.shape[:-1] + (3, 3))
    for i in range(3):
        out[..., i, i] = diag[..., i]
    return out


def _s_underlying(psi):
    psi = np.asarray(psi, dtype=float)
    p1, p2, p3 = psi[..., 0], psi[..., 1], psi[..., 2]
    return np.stack(
        [p2 * (p1 * p2 + p3) ** 2 - p2**4 * p3, -(p1 * p2 + p3), p2 * p1], axis=-1
    )


def _diag_powers(omega, powers):
    omega = np.asarray(omega, dtype=float)
    k = len(powers)
    out = np.zeros(omega.shape + (k, k))
    for i, p in enumerate(powers):
        out[..., i, i] = omega**p
    return out


def _xi_bar_rows(omega, rows):
    """Stack of rows (coef position, power of omega) applied to a 3-vector."""
    omega = np.asarray(omega, dtype=float)
    out = np.zeros(omega.shape + (len(rows), 3))
    for r, (j, p) in enumerate(rows):
        out[..., r, j] = omega**p if p else np.ones_like(omega)
    return out


def make_mapping_s() -> HeteroMapping:
    # xi = (Y1, Y2, Y3, Delta*Y3)
    rows = [(0, 0), (1, 0), (2, 0), (2, 1)]

    def t_of(xi):
        xi = np.asarray(xi, dtype=float)
        a, b, c, d = xi[..., 0], xi[..., 1], xi[..., 2], xi[..., 3]
        return np.stack([b * (a * b + d) ** 2 - b**4 * c, -(a * b) - d, b * a], axis=-1)

    return HeteroMapping(
        name="s_demo",
        degree=9,
        arg_dim=4,
        in_dim=3,
        pi_of=lambda w: _diag_powers(w, (5, 2, 2)),
        xi_bar_of=lambda w: _xi_bar_rows(w, rows),
        t_of=t_of,
        f_of=_s_underlying,
    )


def make_mapping_g() -> HeteroMapping:
    # xi = (Y1, Y2, Y3, Delta*Y3, Delta*Y1)
    rows = [(0, 0), (1, 0), (2, 0), (2, 1), (0, 1)]

    def t_of(xi):
        xi = np.asarray(xi, dtype=float)
        a, b, d, e = xi[..., 0], xi[..., 1], xi[..., 3], xi[..., 4]
        diag = np.stack([b**3 * (a * b + d), b**2, e], axis=-1)
        out = np.zeros(xi.shape[:-1] + (3, 3))
        for i in range(3):
            out[..., i, i] = diag[..., i]
        return out

    return HeteroMapping(
        name="g_demo",
        degree=9,
        arg_dim=5,
        in_dim=3,
        pi_of=lambda w: _diag_powers(w, (5, 2, 2)),
        xi_bar_of=lambda w: _xi_bar_rows(w, rows),
        t_of=t_of,
        f_of=_g_underlying,
    )


def make_mapping_theta() -> HeteroMapping:
    def t_of(xi):
        xi = np.asarray(xi, dtype=float)
        a, b, c = xi[..., 0], xi[..., 1], xi[..., 2]
        return np.stack([a + b, a * b, b, c], axis=-1)

    def xi_bar_of(omega):
        omega = np.asarray(omega, dtype=float)
        return np.broadcast_to(np.eye(3), omega.shape + (3, 3))

    return HeteroMapping(
        name="lift_demo",
        degree=5,
        arg_dim=3,
        in_dim=3,
        pi_of=lambda w: _diag_powers(w, (1, 2, 1, 1)),
        xi_bar_of=xi_bar_of,
        t_of=t_of,
        f_of=theta_ab_closed,
    )


MAPPING_SETS = {
    "demo": lambda: (make_mapping_s(), make_mapping_g(), make_mapping_theta()),
}

SYSTEMS = {
    "demo": build_system,
}

DEFAULT_CONFIG = {
    "system": "demo",
    "mappings": "demo",
    "theta": [1.0, 2.0, 3.0],
    "exosystem": {
        "a_delta": [[0.0, 1.0], [-10.0, -0.01]],
        "h_delta": [1.0, 0.0],
    },
    "x0e": [-1.0, 0.0, 2.0, 500.0, 100.0],
    "filters": {
        "k_gain": [3.0, 3.0, 1.0],
        "g": [[-4.0, 1.0], [-2.0, 0.0]],
        "l": [1.0, 2.0],
        "k": 1.0e19,
        "k1": 25.0,
        "k2": 1.0,
        "t_eps": 25.0,
    },
    "gamma": {"eigenvalue": -1.0},
    "estimation": {"rho": 0.1, "gamma0": 1.0e-11, "gamma1": 1.0},
    "control": {"gain": 75.0, "sign": 1.0, "r0": 100.0, "r_amp": 2.5, "r_freq": 10.0},
    "sim": {"dt": 1.0e-4, "t_final": 50.0, "output_stride": 100},
}
