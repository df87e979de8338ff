"""Heterogeneous mappings and the division-free regression transforms.

A mapping F is heterogeneous of degree ell when Pi(w) F(x) = T(Xi(w) x)
with det(Pi(w)) >= w^ell and Xi(w) built from plain monomials of w. This
lets a linear regression Y = M * p be pushed through a nonlinear
reparametrization without dividing by the regressor: evaluate T on the
measured products, multiply by the adjugate of the matrix-valued side and
the determinant becomes the new scalar regressor.

All transform evaluators accept stacked inputs (leading batch axes), so a
whole simulated trajectory can be pushed through at once.
"""

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from ._linalg import adjugate_and_det


@dataclass(frozen=True)
class HeteroMapping:
    """One heterogeneous mapping with its scaling structure.

    ``t_of`` consumes the pre-scaled argument xi = xi_bar(omega) @ y and
    returns either a vector (..., n_f) or a matrix (..., n_f, n_f).
    ``f_of`` is the underlying unscaled mapping, used only to verify the
    defining identity.
    """

    name: str
    degree: int
    arg_dim: int
    in_dim: int
    pi_of: Callable[[np.ndarray], np.ndarray]
    xi_bar_of: Callable[[np.ndarray], np.ndarray]
    t_of: Callable[[np.ndarray], np.ndarray]
    f_of: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def xi_apply(self, omega, y):
        """xi_bar(omega) @ y with broadcasting over leading axes."""
        xb = self.xi_bar_of(np.asarray(omega, dtype=float))
        return np.einsum("...ij,...j->...i", xb, np.asarray(y, dtype=float))


@dataclass(frozen=True)
class Lre:
    """A linear regression pair asserting Y = M * (unknown named by label)."""

    y: np.ndarray
    m: np.ndarray
    label: str

    def ratio(self):
        return np.asarray(self.y) / np.asarray(self.m)[..., None]


def normalize_lre(lre: Lre) -> Lre:
    """Jointly rescale (Y, M) so max(|M|, max|Y|) = 1; zero pairs unchanged.

    Positive joint scaling preserves the asserted ratio, keeps the later
    determinant powers inside the floating range, and never flips the sign
    of the scalar regressor.
    """
    y = np.asarray(lre.y, dtype=float)
    m = np.asarray(lre.m, dtype=float)
    scale = np.maximum(np.abs(m), np.max(np.abs(y), axis=-1))
    scale = np.where(scale == 0.0, 1.0, scale)
    return Lre(y=y / scale[..., None], m=m / scale, label=lre.label)


def select_ab(eta_lre: Lre, l_ab: np.ndarray) -> Lre:
    """Select the transfer-function entries psi_ab out of an eta regression."""
    y = np.einsum("ij,...j->...i", l_ab, np.asarray(eta_lre.y, dtype=float))
    return Lre(y=y, m=eta_lre.m, label="psi_ab")


def verify_heterogeneity(mapping: HeteroMapping, f, omega, x) -> float:
    """Residual norm of the defining identity at one probe (omega, x).

    Returns ||Pi(omega) f(x) - t_of(xi_bar(omega) * omega * x)||; zero up
    to roundoff for a valid mapping. ``omega`` must be positive.
    """
    if omega <= 0:
        raise ValueError("heterogeneity is defined for omega > 0")
    x = np.asarray(x, dtype=float)
    lhs = np.asarray(f(x), dtype=float)
    pi = mapping.pi_of(np.asarray(omega, dtype=float))
    if lhs.ndim == 2:
        lhs = pi @ lhs
    else:
        lhs = np.einsum("...ij,...j->...i", pi, lhs)
    rhs = mapping.t_of(mapping.xi_apply(omega, omega * x))
    return float(np.linalg.norm(lhs - rhs))


def lre_to_theta(ab: Lre, map_s: HeteroMapping, map_g: HeteroMapping) -> Lre:
    """Push a psi_ab regression to one in the physical parameters.

    Y_theta = adj(T_G(.)) T_S(.), M_theta = det(T_G(.)), both evaluated on
    the scaled regressand. A zero input produces the valid but unexciting
    pair (0, 0).
    """
    if ab.label != "psi_ab":
        raise ValueError(f"expected a psi_ab regression, got {ab.label!r}")
    delta = np.asarray(ab.m, dtype=float)
    g_mat = map_g.t_of(map_g.xi_apply(delta, ab.y))
    s_vec = map_s.t_of(map_s.xi_apply(delta, ab.y))
    adj, det = adjugate_and_det(g_mat)
    y = np.einsum("...ij,...j->...i", adj, s_vec)
    return Lre(y=y, m=det, label="theta")


def lre_to_theta_ab(th: Lre, map_theta: HeteroMapping) -> Lre:
    """Push a theta regression to one in the lifted parameters Theta_AB."""
    if th.label != "theta":
        raise ValueError(f"expected a theta regression, got {th.label!r}")
    m_th = np.asarray(th.m, dtype=float)
    pi = map_theta.pi_of(m_th)
    t_vec = map_theta.t_of(map_theta.xi_apply(m_th, th.y))
    adj, det = adjugate_and_det(pi)
    y = np.einsum("...ij,...j->...i", adj, t_vec)
    return Lre(y=y, m=det, label="Theta_AB")


def check_pi_lower_bound(mapping: HeteroMapping, omegas) -> bool:
    """det(Pi(w)) >= w^degree on a grid of positive amplitudes."""
    omegas = np.asarray(omegas, dtype=float)
    dets = np.array([np.linalg.det(mapping.pi_of(np.asarray(w))) for w in omegas])
    return bool(np.all(dets >= omegas**mapping.degree - 1e-9 * np.abs(omegas**mapping.degree)))


def rescaled(lre: Lre, s: float) -> Lre:
    """Joint positive rescaling, used in homogeneity tests."""
    return replace(lre, y=np.asarray(lre.y) * s, m=np.asarray(lre.m) * s)
