"""Plant, exosystem and extended-system assembly.

The plant dx/dt = A(th) x + B(th) u + D(th) delta, y = C^T x is combined
with the autonomous disturbance generator into a single extended system
whose dynamics factor as Phi^T(x_e, u) Theta_AB + A_delta x_e, with
Theta_AB a lifted parameter vector and Phi a known regressor. The module
also provides the observer-canonical-form transform and a finite-excitation
measure for sampled regressors.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _linalg
from .errors import ConfigError


@dataclass(frozen=True)
class SystemSpec:
    """Structural description of one parametrized plant family.

    The lifted parametrization is carried as data: ``d_phi`` (duplication)
    and ``l_phi`` (elimination) tie Theta_AB to the stacked entries of the
    extended-system matrices, ``l_at``/``l_b`` recover vec(A_e^T) and B_e
    from that stack, and ``l_ab`` selects the transfer-function parameters
    psi_ab out of eta = col(psi_a, psi_b).
    """

    name: str
    n: int
    n_theta: int
    n_Theta: int
    a_of: Callable[[np.ndarray], np.ndarray]
    b_of: Callable[[np.ndarray], np.ndarray]
    d_of: Callable[[np.ndarray], np.ndarray]
    c: np.ndarray
    d_phi: np.ndarray
    l_phi: np.ndarray
    l_at: np.ndarray
    l_b: np.ndarray
    l_ab: np.ndarray

    @property
    def n_e(self) -> int:
        rows = self.d_phi.shape[0]
        n_e = int((np.sqrt(4 * rows + 1) - 1) / 2)
        if n_e * (n_e + 1) != rows:
            raise ConfigError(f"d_phi has {rows} rows, not n_e*(n_e+1) for integer n_e")
        return n_e

    def validate(self):
        n_e = self.n_e
        if not (n_e >= self.n_Theta >= self.n_theta):
            # the extended dimension bounds the lifted parameter count
            raise ConfigError(
                f"need n_e >= n_Theta >= n_theta, got {n_e}, {self.n_Theta}, {self.n_theta}"
            )
        if self.l_phi.shape != (self.n_Theta, n_e * (n_e + 1)):
            raise ConfigError("l_phi shape mismatch")
        if not np.allclose(self.l_phi @ self.d_phi, np.eye(self.n_Theta), atol=1e-12):
            raise ConfigError("l_phi @ d_phi must be the identity")
        if self.c.shape != (self.n,):
            raise ConfigError("output vector has wrong length")


@dataclass(frozen=True)
class ExosystemSpec:
    """Autonomous generator of the scalar disturbance delta = h^T x_delta."""

    a_delta: np.ndarray
    h_delta: np.ndarray

    @property
    def n_delta(self) -> int:
        return self.h_delta.shape[0]

    def validate(self):
        nd = self.n_delta
        if self.a_delta.shape != (nd, nd):
            raise ConfigError("exosystem matrix/output dimension mismatch")
        if not _linalg.is_observable(self.a_delta, self.h_delta):
            raise ConfigError("exosystem pair (h_delta^T, A_delta) is not observable")
        if np.any(np.linalg.eigvals(self.a_delta).real > 1e-9):
            raise ConfigError("exosystem must not have eigenvalues in the open right half plane")


@dataclass(frozen=True)
class ExtendedSystem:
    n_e: int
    a_e: np.ndarray
    a_delta_embed: np.ndarray
    b_e: np.ndarray
    c_e: np.ndarray
    theta_ab: np.ndarray


@dataclass(frozen=True)
class CanonicalForm:
    psi_a: np.ndarray
    psi_b: np.ndarray
    psi_d: np.ndarray
    t: np.ndarray
    t_inv: np.ndarray
    c_0: np.ndarray
    a_0: np.ndarray = field(repr=False, default=None)


def embed_disturbance(spec: SystemSpec, exo: ExosystemSpec) -> np.ndarray:
    """Block-diagonal embedding of the exosystem matrix into the extended state."""
    n_e = spec.n + exo.n_delta
    a_d = np.zeros((n_e, n_e))
    a_d[spec.n:, spec.n:] = exo.a_delta
    return a_d


def build_extended(spec: SystemSpec, exo: ExosystemSpec, theta: np.ndarray) -> ExtendedSystem:
    """Assemble the extended system blocks and the lifted parameter vector.

    Raises ConfigError on dimension mismatch between plant and exosystem,
    and when the resulting lifted factorization is inconsistent with the
    duplication/elimination matrices carried by ``spec``.
    """
    theta = np.asarray(theta, dtype=float)
    n, nd = spec.n, exo.n_delta
    n_e = n + nd
    if spec.n_e != n_e:
        raise ConfigError(
            f"spec duplication matrix is sized for n_e={spec.n_e}, exosystem gives n_e={n_e}"
        )
    a = spec.a_of(theta)
    b = spec.b_of(theta)
    d = spec.d_of(theta)
    a_e = np.zeros((n_e, n_e))
    a_e[:n, :n] = a
    a_e[:n, n:] = np.outer(d, exo.h_delta)
    b_e = np.concatenate([b, np.zeros(nd)])
    c_e = np.concatenate([spec.c, np.zeros(nd)])
    stacked = np.concatenate([_linalg.vec(a_e.T), b_e])
    theta_ab = spec.l_phi @ stacked
    if not np.allclose(spec.d_phi @ theta_ab, stacked, atol=1e-9, rtol=1e-9):
        raise ConfigError("duplication matrix does not reproduce the extended-system entries")
    return ExtendedSystem(
        n_e=n_e,
        a_e=a_e,
        a_delta_embed=embed_disturbance(spec, exo),
        b_e=b_e,
        c_e=c_e,
        theta_ab=theta_ab,
    )


def regressor_phi(x_e: np.ndarray, u: float, spec: SystemSpec) -> np.ndarray:
    """Phi^T(x_e, u), the n_e x n_Theta regressor of the lifted dynamics.

    Satisfies Phi^T(x_e, u) @ Theta_AB(theta) = A_e(theta) x_e + B_e(theta) u
    for every admissible theta.
    """
    x_e = np.asarray(x_e, dtype=float)
    n_e = spec.n_e
    d_state = spec.d_phi[: n_e * n_e].reshape(n_e, n_e, spec.n_Theta)
    d_input = spec.d_phi[n_e * n_e:]
    return np.einsum("imj,m->ij", d_state, x_e) + u * d_input


def canonical_transform(spec: SystemSpec, theta: np.ndarray) -> CanonicalForm:
    """Similarity transform to observer canonical form.

    T^{-1} stacks A^{n-1} O_n, ..., O_n column-wise where O_n is the last
    column of the inverted observability matrix. Raises ConfigError when
    the plant is unobservable at ``theta``.
    """
    theta = np.asarray(theta, dtype=float)
    n = spec.n
    a = spec.a_of(theta)
    ob = _linalg.observability_matrix(a, spec.c)
    s = np.linalg.svd(ob, compute_uv=False)
    if s[-1] <= 1e-12 * max(s[0], 1.0):
        raise ConfigError(f"system not observable at theta={theta.tolist()}")
    o_n = np.linalg.solve(ob, np.eye(n)[:, n - 1])
    t_inv = np.empty((n, n))
    col = o_n
    for k in range(n - 1, -1, -1):
        t_inv[:, k] = col
        col = a @ col
    t = np.linalg.inv(t_inv)
    c_0 = t_inv.T @ spec.c
    a_0 = np.diag(np.ones(n - 1), 1)
    return CanonicalForm(
        psi_a=t @ a @ t_inv @ c_0,
        psi_b=t @ spec.b_of(theta),
        psi_d=t @ spec.d_of(theta),
        t=t,
        t_inv=t_inv,
        c_0=c_0,
        a_0=a_0,
    )


def eta_of(spec: SystemSpec, theta: np.ndarray) -> np.ndarray:
    """Canonical-form parameter vector eta = col(psi_a, psi_b)."""
    cf = canonical_transform(spec, theta)
    return np.concatenate([cf.psi_a, cf.psi_b])


def excitation_level(phi_series: np.ndarray, t_start: float, t_end: float, dt: float) -> float:
    """Smallest eigenvalue of the Gram integral of a sampled regressor.

    ``phi_series`` holds one regressor sample per row on a uniform grid of
    step ``dt`` starting at ``t_start``; the integral runs to ``t_end``.
    """
    if t_end <= t_start:
        raise ValueError("excitation window must have t_end > t_start")
    phi_series = np.atleast_2d(np.asarray(phi_series, dtype=float))
    n_steps = int(round((t_end - t_start) / dt))
    if n_steps < 1 or n_steps + 1 > phi_series.shape[0]:
        raise ValueError("excitation window is empty or not covered by the series")
    gram = _linalg.trapezoid_gram(phi_series[: n_steps + 1], dt)
    return float(np.linalg.eigvalsh(gram)[0])
