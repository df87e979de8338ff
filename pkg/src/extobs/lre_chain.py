"""Observer-gain regression and the stacked parameter regression.

The output-injection gain L places the closed-loop spectrum at the
spectrum of a designer-chosen matrix Gamma through a Sylvester pair
(generalized pole placement). The same relations, cleared of divisions by
powers of the scalar regressor, convert a Theta_AB regression into one for
L, and block-diagonal mixing stacks both into a single regression for
kappa = col(Theta_AB, L).
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_sylvester

from . import _linalg
from .errors import ConfigError
from .hetero import HeteroMapping, Lre
from .lti_core import ExtendedSystem


@dataclass(frozen=True)
class GainProblem:
    """Data needed to compute or regress the observer gain."""

    gamma: np.ndarray
    a_delta_embed: np.ndarray
    c_e: np.ndarray
    d_phi: np.ndarray
    l_at: np.ndarray
    l_b: np.ndarray

    @property
    def n_e(self) -> int:
        return self.gamma.shape[0]

    def validate(self, ext: ExtendedSystem):
        a_ext = ext.a_e + self.a_delta_embed
        if not _linalg.spectra_disjoint(a_ext, self.gamma):
            raise ConfigError("spectrum of the plant meets spectrum of Gamma")
        if not _linalg.is_controllable(a_ext.T, self.c_e):
            raise ConfigError("extended pair (A_e^T + A_d^T, C_e) is not controllable")
        if not _linalg.is_observable(self.gamma, ext.b_e):
            raise ConfigError("pair (B_e^T, Gamma) is not observable")


def gain_direct(ext: ExtendedSystem, prob: GainProblem) -> np.ndarray:
    """Exact gain from the Sylvester pair.

    Solves (A_e^T + A_d^T) M - M Gamma = C_e B_e^T, then L^T = B_e^T M^{-1}.
    The closed-loop matrix A_e + A_d - L C_e^T is similar to Gamma^T, so its
    spectrum equals the desired one exactly.
    """
    a_t = ext.a_e.T + prob.a_delta_embed.T
    if not _linalg.spectra_disjoint(a_t, prob.gamma):
        raise ConfigError("pole placement infeasible: shared spectra")
    m = solve_sylvester(a_t, -prob.gamma, np.outer(prob.c_e, ext.b_e))
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > 1e12:
        raise ConfigError("pole placement infeasible: coupling matrix is singular")
    return np.linalg.solve(m.T, ext.b_e)


def placement_certificate(ext: ExtendedSystem, prob: GainProblem, gain: np.ndarray) -> float:
    """Relative residual of the similarity tying the closed loop to Gamma.

    A small value certifies spectrum equality far more sharply than raw
    eigenvalues, whose resolution for a defective repeated pole is only
    about eps**(1/n_e).
    """
    a_t = ext.a_e.T + prob.a_delta_embed.T
    m = solve_sylvester(a_t, -prob.gamma, np.outer(prob.c_e, ext.b_e))
    a_m_t = a_t - np.outer(prob.c_e, gain)
    res = a_m_t @ m - m @ prob.gamma
    return float(np.linalg.norm(res) / (np.linalg.norm(a_m_t) * np.linalg.norm(m)))


def _gain_arrays(m_ab, y_ab, prob: GainProblem):
    """Batched gain regression: inputs (..., ) and (..., n_Theta)."""
    m_ab = np.asarray(m_ab, dtype=float)
    y_ab = np.asarray(y_ab, dtype=float)
    n_e = prob.n_e
    lat_dphi = prob.l_at @ prob.d_phi
    lb_dphi = prob.l_b @ prob.d_phi
    w = np.einsum("ij,...j->...i", lat_dphi, y_ab)          # = M_AB vec(A_e^T)
    a_hat = _linalg.unvec(w, n_e) + m_ab[..., None, None] * prob.a_delta_embed.T
    eye = np.eye(n_e)
    kron = np.einsum("ab,...ij->...aibj", eye, a_hat).reshape(
        a_hat.shape[:-2] + (n_e * n_e, n_e * n_e)
    )
    kron = kron - m_ab[..., None, None] * np.kron(prob.gamma.T, eye)
    adj_k, det_k = _linalg.adjugate_and_det(kron)
    b_vec = np.einsum("ij,...j->...i", lb_dphi, y_ab)       # = M_AB B_e
    vec_cb = _linalg.vec(np.einsum("i,...j->...ij", prob.c_e, b_vec))
    w2 = m_ab[..., None] * np.einsum("...ij,...j->...i", adj_k, vec_cb)
    # C-order reshape realizes the transposed column-unstacking directly
    t_p = w2.reshape(w2.shape[:-1] + (n_e, n_e))
    t_q = det_k[..., None] * b_vec
    adj_p, det_p = _linalg.adjugate_and_det(t_p)
    y_l = np.einsum("...ij,...j->...i", adj_p, t_q)
    cond_est = np.linalg.norm(kron, axis=(-2, -1)) * np.linalg.norm(adj_k, axis=(-2, -1))
    cond_est = np.where(np.abs(det_k) > 0, cond_est / np.where(det_k == 0, 1.0, np.abs(det_k)), np.inf)
    return det_p, y_l, cond_est


def gain_lre(ab: Lre, prob: GainProblem) -> Lre:
    """Push a Theta_AB regression to one for the gain L.

    A degenerate (zero) determinant yields the valid but unexciting pair
    M_L = 0, Y_L = 0.
    """
    if ab.label != "Theta_AB":
        raise ValueError(f"expected a Theta_AB regression, got {ab.label!r}")
    m_l, y_l, _ = _gain_arrays(ab.m, ab.y, prob)
    return Lre(y=y_l, m=m_l, label="L")


def stack_kappa(ab: Lre, gl: Lre) -> Lre:
    """Block-diagonal mix of the Theta_AB and L regressions into kappa.

    adj(bdiag(a I_p, b I_q)) applied to the stacked regressands gives
    Y_kappa = col(a^(p-1) b^q Y_AB, a^p b^(q-1) Y_L) and
    M_kappa = a^p b^q.
    """
    if ab.label != "Theta_AB" or gl.label != "L":
        raise ValueError("stack_kappa expects (Theta_AB, L) regressions")
    a = np.asarray(ab.m, dtype=float)
    b = np.asarray(gl.m, dtype=float)
    y_ab = np.asarray(ab.y, dtype=float)
    y_l = np.asarray(gl.y, dtype=float)
    p = y_ab.shape[-1]
    q = y_l.shape[-1]
    m_k = a**p * b**q
    y_k = np.concatenate(
        [(a ** (p - 1) * b**q)[..., None] * y_ab, (a**p * b ** (q - 1))[..., None] * y_l],
        axis=-1,
    )
    return Lre(y=y_k, m=m_k, label="kappa")


@dataclass(frozen=True)
class Prop1Report:
    ok: bool
    margins: dict
    first_violation: dict


def check_prop1(snapshots: dict, t_grid: np.ndarray, t_e: float) -> Prop1Report:
    """Positivity margins of every scalar regressor in the chain after t_e.

    ``snapshots`` maps name -> sampled series for Delta (raw) and the
    normalized M_AB, M_L, M_kappa. The report asserts strict positivity of
    |.| and the absence of sign changes for t >= t_e; bounds are the
    empirical minima.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    mask = t_grid >= t_e
    if not np.any(mask):
        raise ValueError("no samples at or after t_e")
    margins = {}
    first_violation = {}
    ok = True
    for name, series in snapshots.items():
        series = np.asarray(series, dtype=float)[mask]
        tt = t_grid[mask]
        zero = np.abs(series) <= 0.0
        flips = np.sign(series) != np.sign(series[0])
        bad = zero | flips
        margins[name] = float(np.abs(series).min())
        if np.any(bad):
            ok = False
            first_violation[name] = float(tt[np.argmax(bad)])
    return Prop1Report(ok=ok, margins=margins, first_violation=first_violation)


def make_gain_mappings(prob: GainProblem, n_theta_ab: int):
    """The matrix/vector gain-regression transforms as heterogeneous mappings.

    The underlying mapping acts on the stacked argument
    theta' = col(Theta_AB, vec(Gamma), vec(A_d)); only the Theta_AB slot is
    free, the two trailing slots are the configured constants. Degree is
    n_e * (n_e^2 + 1): the cleared form scales as omega**(n_e^2 + 1) on
    both sides.
    """
    n_e = prob.n_e
    n2 = n_e * n_e
    arg_dim = n_theta_ab + 2 * n2
    vec_gamma = _linalg.vec(prob.gamma)
    # recover the scalar regressor from a known nonzero entry of Gamma
    idx = int(np.argmax(np.abs(vec_gamma) > 0))
    gamma_entry = vec_gamma[idx]
    lat_dphi = prob.l_at @ prob.d_phi
    lb_dphi = prob.l_b @ prob.d_phi
    eye = np.eye(n_e)

    def split(xi):
        xi = np.asarray(xi, dtype=float)
        return (
            xi[..., :n_theta_ab],
            xi[..., n_theta_ab : n_theta_ab + n2],
            xi[..., n_theta_ab + n2 :],
        )

    def kron_of(xi):
        y_ab, xi_gamma, xi_ad = split(xi)
        a_hat = _linalg.unvec(np.einsum("ij,...j->...i", lat_dphi, y_ab), n_e)
        a_hat = a_hat + np.swapaxes(_linalg.unvec(xi_ad, n_e), -1, -2)
        k = np.einsum("ab,...ij->...aibj", eye, a_hat).reshape(
            a_hat.shape[:-2] + (n2, n2)
        )
        gam_t = np.swapaxes(_linalg.unvec(xi_gamma, n_e), -1, -2)
        return k - np.einsum("...ij,ab->...iajb", gam_t, eye).reshape(k.shape)

    def t_p(xi):
        y_ab, xi_gamma, _ = split(xi)
        m_ab = xi_gamma[..., idx] / gamma_entry
        adj_k, _ = _linalg.adjugate_and_det(kron_of(xi))
        b_vec = np.einsum("ij,...j->...i", lb_dphi, y_ab)
        vec_cb = _linalg.vec(np.einsum("i,...j->...ij", prob.c_e, b_vec))
        w = m_ab[..., None] * np.einsum("...ij,...j->...i", adj_k, vec_cb)
        return w.reshape(w.shape[:-1] + (n_e, n_e))

    def t_q(xi):
        y_ab, _, _ = split(xi)
        _, det_k = _linalg.adjugate_and_det(kron_of(xi))
        return det_k[..., None] * np.einsum("ij,...j->...i", lb_dphi, y_ab)

    def f_p(theta_prime):
        a_e_t = _linalg.unvec(np.einsum("ij,...j->...i", lat_dphi, theta_prime[..., :n_theta_ab]), n_e)
        b_e = np.einsum("ij,...j->...i", lb_dphi, theta_prime[..., :n_theta_ab])
        k = np.einsum("ab,...ij->...aibj", eye, a_e_t + prob.a_delta_embed.T).reshape(
            a_e_t.shape[:-2] + (n2, n2)
        ) - np.kron(prob.gamma.T, eye)
        adj_k, _ = _linalg.adjugate_and_det(k)
        w = np.einsum("...ij,...j->...i", adj_k, _linalg.vec(np.einsum("i,...j->...ij", prob.c_e, b_e)))
        return w.reshape(w.shape[:-1] + (n_e, n_e))

    def f_q(theta_prime):
        a_e_t = _linalg.unvec(np.einsum("ij,...j->...i", lat_dphi, theta_prime[..., :n_theta_ab]), n_e)
        b_e = np.einsum("ij,...j->...i", lb_dphi, theta_prime[..., :n_theta_ab])
        k = np.einsum("ab,...ij->...aibj", eye, a_e_t + prob.a_delta_embed.T).reshape(
            a_e_t.shape[:-2] + (n2, n2)
        ) - np.kron(prob.gamma.T, eye)
        _, det_k = _linalg.adjugate_and_det(k)
        return det_k[..., None] * b_e

    degree = n_e * (n2 + 1)

    def pi_of(omega):
        omega = np.asarray(omega, dtype=float)
        return omega[..., None, None] ** (n2 + 1) * eye

    def xi_bar_of(omega):
        omega = np.asarray(omega, dtype=float)
        return np.broadcast_to(np.eye(arg_dim), omega.shape + (arg_dim, arg_dim))

    map_p = HeteroMapping(
        name="gain_matrix",
        degree=degree,
        arg_dim=arg_dim,
        in_dim=arg_dim,
        pi_of=pi_of,
        xi_bar_of=xi_bar_of,
        t_of=t_p,
        f_of=f_p,
    )
    map_q = HeteroMapping(
        name="gain_vector",
        degree=degree,
        arg_dim=arg_dim,
        in_dim=arg_dim,
        pi_of=pi_of,
        xi_bar_of=xi_bar_of,
        t_of=t_q,
        f_of=f_q,
    )
    return map_p, map_q
