"""Experiment configuration: ingestion, validation, runtime assembly.

Configs are plain YAML with numeric literals and row-major nested arrays
for matrices. Structural mappings (the plant family and its regression
transforms) are referenced by registry name; everything numeric is data.
Validation runs every stated precondition before a simulation starts:
stability of the filter matrices, observability and controllability of the
relevant pairs, spectrum separation, local invertibility of the
theta -> psi_ab map and the rank condition of its regression factor.
"""

import copy
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from . import _linalg, demo
from .errors import ConfigError
from .hetero import HeteroMapping
from .lre_chain import GainProblem, gain_direct
from .lti_core import (CanonicalForm, ExosystemSpec, ExtendedSystem, SystemSpec,
                       build_extended, canonical_transform, embed_disturbance)
from .parametrizer import FilterConfig, compute_beta


@dataclass(frozen=True)
class ExperimentConfig:
    system: str
    mappings: str
    theta: np.ndarray
    exosystem: ExosystemSpec
    x0e: np.ndarray
    k_gain: np.ndarray
    g: np.ndarray
    l: np.ndarray
    k_amp: float
    k1: float
    k2: float
    t_eps: float
    gamma_eigenvalue: float
    rho: float
    gamma0: float
    gamma1: float
    ctrl_gain: float
    ctrl_sign: float
    r0: float
    r_amp: float
    r_freq: float
    dt: float
    t_final: float
    output_stride: int
    x_hat0: Optional[np.ndarray] = None
    kappa_hat0: Optional[np.ndarray] = None


@dataclass(frozen=True)
class RuntimeSetup:
    """Everything a simulation needs, assembled and validated."""

    cfg: ExperimentConfig
    spec: SystemSpec
    exo: ExosystemSpec
    ext: ExtendedSystem
    canon: CanonicalForm
    fcfg: FilterConfig
    prob: GainProblem
    gain_true: np.ndarray
    kappa_true: np.ndarray
    eta_true: np.ndarray
    map_s: HeteroMapping = field(repr=False, default=None)
    map_g: HeteroMapping = field(repr=False, default=None)
    map_theta: HeteroMapping = field(repr=False, default=None)


def default_config() -> ExperimentConfig:
    return _from_dict(copy.deepcopy(demo.DEFAULT_CONFIG))


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    merged = copy.deepcopy(demo.DEFAULT_CONFIG)
    _deep_update(merged, raw or {})
    return _from_dict(merged)


def _deep_update(base, extra):
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = value


def _from_dict(d) -> ExperimentConfig:
    try:
        exo = ExosystemSpec(
            a_delta=np.asarray(d["exosystem"]["a_delta"], dtype=float),
            h_delta=np.asarray(d["exosystem"]["h_delta"], dtype=float),
        )
        filt = d["filters"]
        est = d["estimation"]
        ctrl = d["control"]
        sim = d["sim"]
        return ExperimentConfig(
            system=d["system"],
            mappings=d["mappings"],
            theta=np.asarray(d["theta"], dtype=float),
            exosystem=exo,
            x0e=np.asarray(d["x0e"], dtype=float),
            k_gain=np.asarray(filt["k_gain"], dtype=float),
            g=np.asarray(filt["g"], dtype=float),
            l=np.asarray(filt["l"], dtype=float),
            k_amp=float(filt["k"]),
            k1=float(filt["k1"]),
            k2=float(filt["k2"]),
            t_eps=float(filt["t_eps"]),
            gamma_eigenvalue=float(d["gamma"]["eigenvalue"]),
            rho=float(est["rho"]),
            gamma0=float(est["gamma0"]),
            gamma1=float(est["gamma1"]),
            ctrl_gain=float(ctrl["gain"]),
            ctrl_sign=float(ctrl["sign"]),
            r0=float(ctrl["r0"]),
            r_amp=float(ctrl["r_amp"]),
            r_freq=float(ctrl["r_freq"]),
            dt=float(sim["dt"]),
            t_final=float(sim["t_final"]),
            output_stride=int(sim.get("output_stride", 100)),
            x_hat0=None if d.get("x_hat0") is None else np.asarray(d["x_hat0"], dtype=float),
            kappa_hat0=None if d.get("kappa_hat0") is None else np.asarray(d["kappa_hat0"], dtype=float),
        )
    except KeyError as exc:
        raise ConfigError(f"missing configuration key: {exc}") from exc


def _check_c0_parameter_independence(spec, theta, c_0, rng):
    for _ in range(8):
        probe = theta * (1.0 + 0.3 * rng.uniform(-1.0, 1.0, size=theta.shape))
        try:
            cf = canonical_transform(spec, probe)
        except ConfigError:
            continue
        if not np.allclose(cf.c_0, c_0, atol=1e-8, rtol=1e-8):
            raise ConfigError(
                "canonical output direction depends on theta; the filter "
                "construction requires a parameter-independent C_0"
            )


def _psi_ab_jacobian_det(spec, theta, eps=1e-6):
    from .lti_core import eta_of

    base = spec.l_ab @ eta_of(spec, theta)
    jac = np.empty((theta.size, theta.size))
    for j in range(theta.size):
        step = np.zeros_like(theta)
        step[j] = eps * max(1.0, abs(theta[j]))
        plus = spec.l_ab @ eta_of(spec, theta + step)
        minus = spec.l_ab @ eta_of(spec, theta - step)
        jac[:, j] = (plus - minus) / (2 * step[j])
    return float(np.linalg.det(jac)), base


def build_runtime(cfg: ExperimentConfig) -> RuntimeSetup:
    """Validate every precondition and assemble the runtime objects."""
    if cfg.system not in demo.SYSTEMS:
        raise ConfigError(f"unknown system {cfg.system!r}")
    if cfg.mappings not in demo.MAPPING_SETS:
        raise ConfigError(f"unknown mapping set {cfg.mappings!r}")
    spec = demo.SYSTEMS[cfg.system]()
    spec.validate()
    cfg.exosystem.validate()
    if cfg.theta.shape != (spec.n_theta,):
        raise ConfigError(f"theta must have {spec.n_theta} entries")
    if cfg.dt <= 0 or cfg.t_final <= 0:
        raise ConfigError("dt and t_final must be positive")
    if cfg.output_stride < 1:
        raise ConfigError("output_stride must be at least 1")
    if cfg.t_eps >= cfg.t_final:
        raise ConfigError("t_eps must lie inside the simulated horizon")
    if abs(round(cfg.t_eps / cfg.dt) * cfg.dt - cfg.t_eps) > 1e-9:
        warnings.warn("t_eps is not on the integration grid; it will be snapped")
    if cfg.rho <= 0 or cfg.gamma0 <= 0 or cfg.gamma1 <= 0:
        raise ConfigError("estimation constants rho, gamma0, gamma1 must be positive")
    if cfg.t_eps < 5.0 / cfg.k1:
        warnings.warn(
            "t_eps is shorter than five low-pass time constants; early "
            "transients will not have decayed when the extension starts"
        )

    ext = build_extended(spec, cfg.exosystem, cfg.theta)
    canon = canonical_transform(spec, cfg.theta)
    rng = np.random.default_rng(20240401)
    _check_c0_parameter_independence(spec, cfg.theta, canon.c_0, rng)

    det_jac, _ = _psi_ab_jacobian_det(spec, cfg.theta)
    if det_jac**2 <= 1e-12:
        raise ConfigError("theta -> psi_ab map is not locally invertible at this theta")

    if not _linalg.is_controllable(cfg.g, cfg.l):
        raise ConfigError("pair (G, l) must be controllable")
    m_delta, beta = compute_beta(cfg.g, cfg.l, cfg.exosystem)
    a_k = canon.a_0 - np.outer(cfg.k_gain, canon.c_0)
    fcfg = FilterConfig(
        k_gain=cfg.k_gain,
        a_k=a_k,
        c_0=canon.c_0,
        g=cfg.g,
        l=cfg.l,
        beta=beta,
        k1=cfg.k1,
        k2=cfg.k2,
        k_amp=cfg.k_amp,
        t_eps=round(cfg.t_eps / cfg.dt) * cfg.dt,
        n=spec.n,
        n_delta=cfg.exosystem.n_delta,
    )
    fcfg.validate()

    gamma = _linalg.repeated_pole_companion(cfg.gamma_eigenvalue, ext.n_e)
    prob = GainProblem(
        gamma=gamma,
        a_delta_embed=ext.a_delta_embed,
        c_e=ext.c_e,
        d_phi=spec.d_phi,
        l_at=spec.l_at,
        l_b=spec.l_b,
    )
    prob.validate(ext)
    gain_true = gain_direct(ext, prob)
    kappa_true = np.concatenate([ext.theta_ab, gain_true])
    eta_true = np.concatenate([canon.psi_a, canon.psi_b])

    map_s, map_g, map_theta = demo.MAPPING_SETS[cfg.mappings]()
    psi_ab = spec.l_ab @ eta_true
    g_at_theta = map_g.f_of(psi_ab)
    if np.linalg.matrix_rank(g_at_theta, tol=1e-10) != spec.n_theta:
        raise ConfigError("regression factor G(psi_ab) loses rank at this theta")

    return RuntimeSetup(
        cfg=cfg,
        spec=spec,
        exo=cfg.exosystem,
        ext=ext,
        canon=canon,
        fcfg=fcfg,
        prob=prob,
        gain_true=gain_true,
        kappa_true=kappa_true,
        eta_true=eta_true,
        map_s=map_s,
        map_g=map_g,
        map_theta=map_theta,
    )
