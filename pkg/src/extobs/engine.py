"""Simulation engine: closed-loop run, regression chain, observer pair.

The data flow is strictly feed-forward between three stages:

1. plant + filter bank + extension integrals, integrated jointly by RK4 on
   a half-step grid (so stage 3 can sample y and u at substep times);
2. the regression chain, evaluated sample-wise over the whole recorded
   trajectory with stacked linear algebra;
3. the adaptive and baseline observers plus the switched parameter law,
   integrated on the configured grid with per-step frozen regression data.

Nothing in stages 1-2 depends on the observer states, so the split is
exact, not an approximation. A plain NumPy twin of each compiled kernel
serves as the reference implementation (engine="numpy").
"""

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels, _linalg
from .config import ExperimentConfig, RuntimeSetup, build_runtime
from .errors import ConfigError, DivergenceError
from .hetero import Lre, normalize_lre, select_ab
from .lre_chain import _gain_arrays, check_prop1, stack_kappa
from .lti_core import excitation_level
from .observer import STATE_GUARD

CHAIN_CHUNK = 8192


@dataclass
class RunArtifacts:
    """Full-resolution series, strided output tables, and summary metrics."""

    t: np.ndarray
    series: dict
    summary: dict
    stride: int
    columns: dict = field(default_factory=dict)

    def table(self, name):
        cols, arrays = self.columns[name]
        data = [self.t[:: self.stride]] + [a[:: self.stride] for a in arrays]
        return ["t"] + cols, np.column_stack(data)

    def save(self, outdir):
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        for name in self.columns:
            header, data = self.table(name)
            np.savetxt(
                outdir / f"{name}.csv",
                data,
                delimiter=",",
                header=",".join(header),
                comments="",
                fmt="%.17g",
            )
        with open(outdir / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(self.summary, fh, indent=2, sort_keys=True)
        return outdir


def reference_signal(t, cfg: ExperimentConfig):
    """Setpoint plus a decaying probing oscillation.

    The decay exponent is clamped at zero before t_eps: the unclamped
    form grows without bound backwards in time, which contradicts the
    boundedness required of the closed loop.
    """
    t = np.asarray(t, dtype=float)
    return cfg.r0 + cfg.r_amp * np.exp(-np.maximum(0.0, t - cfg.t_eps)) * np.sin(cfg.r_freq * t)


# ---------------------------------------------------------------------------
# stage 1: plant + filters + extension
# ---------------------------------------------------------------------------

def _stage1_numpy(setup: RuntimeSetup, dt_half, n_half, out):
    cfg, fcfg, ext = setup.cfg, setup.fcfg, setup.ext
    n, nd = fcfg.n, fcfg.n_delta
    ne = n + nd
    n2 = 2 * n
    a_ext = ext.a_e + ext.a_delta_embed
    eye = np.eye(n)

    sizes = [ne, n, n * n, n * n, nd, nd * n, nd * n, 1, n2, nd, 1, n2, n2, n2 * n2, n2 * n2]
    off = np.concatenate([[0], np.cumsum(sizes)])
    ns = off[-1]
    sl = {k: slice(off[i], off[i + 1]) for i, k in enumerate(
        ["xe", "z", "om", "p", "f", "h", "n", "qf", "phif", "ff", "yf", "sq", "q", "sphi", "phi"])}

    def rhs(t, w):
        dw = np.zeros(ns)
        xe = w[sl["xe"]]
        z = w[sl["z"]]
        om = w[sl["om"]].reshape(n, n)
        p = w[sl["p"]].reshape(n, n)
        f = w[sl["f"]]
        h = w[sl["h"]].reshape(nd, n)
        nm = w[sl["n"]].reshape(nd, n)
        qf = w[sl["qf"]][0]
        phif = w[sl["phif"]]
        ff = w[sl["ff"]]
        yf = w[sl["yf"]][0]
        y = ext.c_e @ xe
        u = cfg.ctrl_sign * cfg.ctrl_gain * (float(reference_signal(t, cfg)) - y)
        dw[sl["xe"]] = a_ext @ xe + ext.b_e * u
        zd = fcfg.a_k @ z + fcfg.k_gain * y
        omd = fcfg.a_k @ om + eye * y
        pd = fcfg.a_k @ p + eye * u
        dw[sl["z"]] = zd
        dw[sl["om"]] = omd.ravel()
        dw[sl["p"]] = pd.ravel()
        dw[sl["f"]] = fcfg.g @ f + (fcfg.g @ fcfg.l) * y - fcfg.l * (fcfg.c_0 @ zd)
        dw[sl["h"]] = (fcfg.g @ h - np.outer(fcfg.l, fcfg.c_0 @ pd)).ravel()
        dw[sl["n"]] = (fcfg.g @ nm - np.outer(fcfg.l, fcfg.c_0 @ omd)).ravel()
        qbar = y - fcfg.c_0 @ z
        phibar = np.concatenate([omd.T @ fcfg.c_0 + nm.T @ fcfg.beta,
                                 pd.T @ fcfg.c_0 + h.T @ fcfg.beta])
        dw[sl["qf"]] = -fcfg.k1 * qf + qbar
        dw[sl["phif"]] = -fcfg.k1 * phif + phibar
        dw[sl["ff"]] = -fcfg.k1 * ff + f
        dw[sl["yf"]] = -fcfg.k1 * yf + y
        if t >= fcfg.t_eps:
            wgt = np.exp(-fcfg.k2 * (t - fcfg.t_eps))
            chi = qbar - fcfg.k1 * qf - fcfg.beta @ (ff + fcfg.l * yf)
            dw[sl["sq"]] = wgt * phif * chi
            dw[sl["q"]] = w[sl["sq"]]
            dw[sl["sphi"]] = (wgt * np.outer(phif, phif)).ravel()
            dw[sl["phi"]] = w[sl["sphi"]]
        return dw, y, u, qbar, phibar

    w = np.zeros(ns)
    w[sl["xe"]] = cfg.x0e
    _, y0, u0, qb0, pb0 = rhs(0.0, w)
    out["y_h"][0] = y0
    out["u_h"][0] = u0
    out["xe"][0] = cfg.x0e
    out["qbar"][0] = qb0
    out["phibar"][0] = pb0

    for kh in range(n_half):
        t = kh * dt_half
        d1, _, _, _, _ = rhs(t, w)
        d2, _, _, _, _ = rhs(t + dt_half / 2, w + dt_half / 2 * d1)
        d3, _, _, _, _ = rhs(t + dt_half / 2, w + dt_half / 2 * d2)
        d4, _, _, _, _ = rhs(t + dt_half, w + dt_half * d3)
        w = w + dt_half / 6 * (d1 + 2 * d2 + 2 * d3 + d4)
        t_next = (kh + 1) * dt_half
        y = ext.c_e @ w[sl["xe"]]
        out["y_h"][kh + 1] = y
        out["u_h"][kh + 1] = cfg.ctrl_sign * cfg.ctrl_gain * (
            float(reference_signal(t_next, cfg)) - y)
        if (kh + 1) % 2 == 0:
            kf = (kh + 1) // 2
            xe = w[sl["xe"]]
            if not np.all(np.isfinite(xe)) or np.max(np.abs(xe)) > STATE_GUARD:
                raise DivergenceError(
                    f"filter divergence at t={t_next:.6g}: plant state left the guard region",
                    t=t_next)
            _, _, _, qb, pb = rhs(t_next, w)
            out["xe"][kf] = xe
            out["qbar"][kf] = qb
            out["phibar"][kf] = pb
            out["qbar_f"][kf] = w[sl["qf"]][0]
            out["phibar_f"][kf] = w[sl["phif"]]
            out["f_f"][kf] = w[sl["ff"]]
            out["y_f"][kf] = w[sl["yf"]][0]
            out["q"][kf] = w[sl["q"]]
            out["phi"][kf] = w[sl["phi"]].reshape(n2, n2)


def _run_stage1(setup: RuntimeSetup, dt, n_full, engine):
    fcfg = setup.fcfg
    n, nd = fcfg.n, fcfg.n_delta
    ne, n2 = n + nd, 2 * n
    n_half = 2 * n_full
    out = {
        "y_h": np.zeros(n_half + 1),
        "u_h": np.zeros(n_half + 1),
        "xe": np.zeros((n_full + 1, ne)),
        "qbar": np.zeros(n_full + 1),
        "phibar": np.zeros((n_full + 1, n2)),
        "qbar_f": np.zeros(n_full + 1),
        "phibar_f": np.zeros((n_full + 1, n2)),
        "f_f": np.zeros((n_full + 1, nd)),
        "y_f": np.zeros(n_full + 1),
        "q": np.zeros((n_full + 1, n2)),
        "phi": np.zeros((n_full + 1, n2, n2)),
    }
    if engine == "numpy":
        _stage1_numpy(setup, dt / 2, n_half, out)
        return out
    info = np.zeros(1)
    a_ext = setup.ext.a_e + setup.ext.a_delta_embed
    code = _kernels.stage1_loop(
        n, nd, a_ext, setup.ext.b_e, setup.ext.c_e, fcfg.a_k, fcfg.k_gain,
        fcfg.c_0, fcfg.g, fcfg.l, fcfg.beta, fcfg.k1, fcfg.k2, fcfg.t_eps,
        setup.cfg.ctrl_sign * setup.cfg.ctrl_gain, setup.cfg.r0,
        setup.cfg.r_amp, setup.cfg.r_freq, dt / 2, n_half, setup.cfg.x0e,
        STATE_GUARD, out["y_h"], out["u_h"], out["xe"], out["qbar"],
        out["phibar"], out["qbar_f"], out["phibar_f"], out["f_f"], out["y_f"],
        out["q"], out["phi"], info)
    if code == _kernels.DIVERGED_PLANT:
        raise DivergenceError(
            f"filter divergence at t={info[0]:.6g}: plant state left the guard region",
            t=float(info[0]))
    return out


# ---------------------------------------------------------------------------
# stage 2: regression chain over the whole trajectory
# ---------------------------------------------------------------------------

def _normalize_pair(m, y):
    scale = np.maximum(np.abs(m), np.max(np.abs(y), axis=-1))
    scale = np.where(scale == 0.0, 1.0, scale)
    return m / scale, y / scale[..., None]


def run_chain(setup: RuntimeSetup, q, phi, k_amp=None):
    """Evaluate the whole regression chain on stacked (q, phi) samples.

    Returns a dict with the raw scalar regressor, the normalized regression
    pairs of every stage, and a rough condition estimate of the gain-stage
    kernel. Inter-stage normalization is mandatory: determinant powers of
    the later stages would overflow otherwise, and every asserted ratio is
    invariant under the joint positive rescaling.
    """
    spec = setup.spec
    n_steps = q.shape[0]
    k_amp = setup.cfg.k_amp if k_amp is None else k_amp
    adj_phi, det_phi = _linalg.adjugate_and_det(phi)
    draw = k_amp * det_phi
    y_eta = k_amp * np.einsum("nij,nj->ni", adj_phi, q)

    m_eta_n, y_eta_n = _normalize_pair(draw.copy(), y_eta.copy())
    eta_lre = Lre(y=y_eta_n, m=m_eta_n, label="eta")
    ab = select_ab(eta_lre, spec.l_ab)

    # stage theta
    xi_g = setup.map_g.xi_apply(ab.m, ab.y)
    xi_s = setup.map_s.xi_apply(ab.m, ab.y)
    g_mat = setup.map_g.t_of(xi_g)
    s_vec = setup.map_s.t_of(xi_s)
    adj_g, m_theta = _linalg.adjugate_and_det(g_mat)
    y_theta = np.einsum("nij,nj->ni", adj_g, s_vec)
    m_theta_n, y_theta_n = _normalize_pair(m_theta, y_theta)

    # stage Theta_AB
    pi_t = setup.map_theta.pi_of(m_theta_n)
    t_vec = setup.map_theta.t_of(setup.map_theta.xi_apply(m_theta_n, y_theta_n))
    adj_pi, m_ab = _linalg.adjugate_and_det(pi_t)
    y_ab = np.einsum("nij,nj->ni", adj_pi, t_vec)
    m_ab_n, y_ab_n = _normalize_pair(m_ab, y_ab)

    # stage L, chunked: the Kronecker kernel is n_e^2 x n_e^2 per sample
    ne = setup.ext.n_e
    m_l = np.empty(n_steps)
    y_l = np.empty((n_steps, ne))
    cond = np.empty(n_steps)
    for a in range(0, n_steps, CHAIN_CHUNK):
        b = min(a + CHAIN_CHUNK, n_steps)
        m_l[a:b], y_l[a:b], cond[a:b] = _gain_arrays(m_ab_n[a:b], y_ab_n[a:b], setup.prob)
    m_l_n, y_l_n = _normalize_pair(m_l, y_l)

    kap = stack_kappa(Lre(y=y_ab_n, m=m_ab_n, label="Theta_AB"),
                      Lre(y=y_l_n, m=m_l_n, label="L"))
    kap = normalize_lre(kap)

    return {
        "delta_raw": draw,
        "y_eta": y_eta,
        "m_eta": m_eta_n,
        "y_eta_n": y_eta_n,
        "m_theta": m_theta_n,
        "y_theta": y_theta_n,
        "m_ab": m_ab_n,
        "y_ab": y_ab_n,
        "m_l": m_l_n,
        "y_l": y_l_n,
        "m_kappa": np.asarray(kap.m),
        "y_kappa": np.asarray(kap.y),
        "cond_gain": cond,
    }


# ---------------------------------------------------------------------------
# stage 3: observers + parameter law
# ---------------------------------------------------------------------------

def _stage3_numpy(setup: RuntimeSetup, dt, y_h, u_h, chain, out):
    spec, ext = setup.spec, setup.ext
    ne, n_theta = ext.n_e, spec.n_Theta
    cfg = setup.cfg
    a_d = ext.a_delta_embed
    c_e = ext.c_e
    d_state = spec.d_phi[: ne * ne].reshape(ne, ne, n_theta)
    d_input = spec.d_phi[ne * ne:]

    def phi_t(x, u):
        return np.einsum("imj,m->ij", d_state, x) + u * d_input

    def obs_rhs(x, u, y, th, gn):
        return phi_t(x, u) @ th + a_d @ x - gn * (c_e @ x - y)

    def rk4(x, th, gn, kf):
        y0, y1, y2 = y_h[2 * kf], y_h[2 * kf + 1], y_h[2 * kf + 2]
        u0, u1, u2 = u_h[2 * kf], u_h[2 * kf + 1], u_h[2 * kf + 2]
        k1 = obs_rhs(x, u0, y0, th, gn)
        k2 = obs_rhs(x + dt / 2 * k1, u1, y1, th, gn)
        k3 = obs_rhs(x + dt / 2 * k2, u1, y1, th, gn)
        k4 = obs_rhs(x + dt * k3, u2, y2, th, gn)
        return x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    n_full = chain["m_kappa"].shape[0] - 1
    xh = out["x_hat"][0].copy()
    xs = out["x_star"][0].copy()
    kap = out["kappa_hat"][0].copy()
    for kf in range(n_full):
        pt = phi_t(xh, u_h[2 * kf])
        yt = float(c_e @ xh - y_h[2 * kf])
        gram = pt @ pt.T + yt**2 * np.eye(ne)
        lmax = _linalg.power_iteration_lmax(gram, tol=1e-8)
        gamma = 0.0
        if chain["delta_raw"][kf] >= cfg.rho:
            m_k = chain["m_kappa"][kf]
            if m_k == 0.0:
                raise RuntimeError("inconsistent regression: Delta above rho, zero regressor")
            gamma = (cfg.gamma0 * lmax + cfg.gamma1) / m_k**2
        xh = rk4(xh, kap[:n_theta], kap[n_theta:], kf)
        xs = rk4(xs, ext.theta_ab, setup.gain_true, kf)
        if gamma > 0.0:
            m_k = chain["m_kappa"][kf]
            a = gamma * m_k**2
            target = chain["y_kappa"][kf] / m_k
            e = kap - target
            c1 = -a * e
            c2 = -a * (e + dt / 2 * c1)
            c3 = -a * (e + dt / 2 * c2)
            c4 = -a * (e + dt * c3)
            kap = kap + dt / 6 * (c1 + 2 * c2 + 2 * c3 + c4)
        for arr in (xh, xs, kap):
            if not np.all(np.isfinite(arr)) or np.max(np.abs(arr)) > STATE_GUARD:
                raise DivergenceError(
                    f"observer divergence at t={(kf + 1) * dt:.6g}", t=(kf + 1) * dt)
        out["x_hat"][kf + 1] = xh
        out["x_star"][kf + 1] = xs
        out["kappa_hat"][kf + 1] = kap
        out["gamma"][kf + 1] = gamma
        out["lambda_max"][kf + 1] = lmax


def _run_stage3(setup: RuntimeSetup, dt, n_full, y_h, u_h, chain, engine):
    spec, ext, cfg = setup.spec, setup.ext, setup.cfg
    ne, n_theta = ext.n_e, spec.n_Theta
    n_kappa = n_theta + ne
    out = {
        "x_hat": np.zeros((n_full + 1, ne)),
        "x_star": np.zeros((n_full + 1, ne)),
        "kappa_hat": np.zeros((n_full + 1, n_kappa)),
        "gamma": np.zeros(n_full + 1),
        "lambda_max": np.zeros(n_full + 1),
    }
    if cfg.x_hat0 is not None:
        out["x_hat"][0] = cfg.x_hat0
        out["x_star"][0] = cfg.x_hat0
    if cfg.kappa_hat0 is not None:
        out["kappa_hat"][0] = cfg.kappa_hat0
    if engine == "numpy":
        _stage3_numpy(setup, dt, y_h, u_h, chain, out)
        return out
    info = np.zeros(1)
    code = _kernels.stage3_loop(
        ne, n_theta, spec.d_phi, ext.a_delta_embed, ext.c_e, ext.theta_ab,
        setup.gain_true, y_h, u_h, chain["y_kappa"], chain["m_kappa"],
        chain["delta_raw"], cfg.rho, cfg.gamma0, cfg.gamma1, dt, STATE_GUARD,
        out["x_hat"][0].copy(), out["x_star"][0].copy(),
        out["kappa_hat"][0].copy(), out["x_hat"], out["x_star"],
        out["kappa_hat"], out["gamma"], out["lambda_max"], info)
    if code == _kernels.DIVERGED_OBSERVER:
        raise DivergenceError(f"observer divergence at t={info[0]:.6g}", t=float(info[0]))
    if code == _kernels.INCONSISTENT_REGRESSION:
        raise RuntimeError(
            f"inconsistent regression at t={info[0]:.6g}: Delta above rho, zero regressor")
    return out


# ---------------------------------------------------------------------------
# top level
# ---------------------------------------------------------------------------

def simulate(cfg: ExperimentConfig, engine: str = "auto") -> RunArtifacts:
    """Run the full experiment and assemble artifacts.

    ``engine`` selects "numba" (default when available) or the "numpy"
    reference path; both produce the same trajectories up to roundoff.
    """
    setup = build_runtime(cfg)
    if engine == "auto":
        engine = "numba"
    if engine not in ("numba", "numpy"):
        raise ValueError(f"unknown engine {engine!r}")

    wall0 = time.perf_counter()
    dt = cfg.dt
    n_full = int(round(cfg.t_final / dt))
    t = np.arange(n_full + 1) * dt

    s1 = _run_stage1(setup, dt, n_full, engine)
    chain = run_chain(setup, s1["q"], s1["phi"])
    s3 = _run_stage3(setup, dt, n_full, s1["y_h"], s1["u_h"], chain, engine)

    series = {**{k: v for k, v in s1.items() if k not in ("y_h", "u_h")}, **chain, **s3}
    series["y"] = s1["y_h"][::2]
    series["u"] = s1["u_h"][::2]
    series["r"] = reference_signal(t, cfg)
    series["y_h"] = s1["y_h"]
    series["u_h"] = s1["u_h"]

    # derived diagnostics
    eta = setup.eta_true
    chi = series["qbar"] - cfg.k1 * series["qbar_f"] - (
        series["f_f"] @ setup.fcfg.beta + series["y_f"] * (setup.fcfg.beta @ setup.fcfg.l))
    pred = series["phibar_f"] @ eta
    series["chi"] = chi
    series["phibar_f_eta"] = pred
    series["lemma1_gap"] = chi - pred - np.exp(-cfg.k1 * t) * series["qbar"][0]
    series["kappa_err"] = series["kappa_hat"] - setup.kappa_true
    series["y_tilde"] = series["x_hat"] @ setup.ext.c_e - series["y"]
    nd = setup.exo.n_delta
    series["delta_true"] = series["xe"][:, -nd:] @ setup.exo.h_delta
    series["delta_hat"] = series["x_hat"][:, -nd:] @ setup.exo.h_delta
    series["delta_star"] = series["x_star"][:, -nd:] @ setup.exo.h_delta

    summary = _summarize(setup, t, series)
    summary["engine"] = engine
    summary["wall_time_s"] = time.perf_counter() - wall0

    art = RunArtifacts(t=t, series=series, summary=summary, stride=cfg.output_stride)
    _define_tables(art, setup)
    return art


def _summarize(setup: RuntimeSetup, t, series):
    cfg = setup.cfg
    draw = series["delta_raw"]
    crossed = np.nonzero(draw >= cfg.rho)[0]
    t_e = float(t[crossed[0]]) if crossed.size else None
    out = {
        "theta": cfg.theta.tolist(),
        "kappa_true": setup.kappa_true.tolist(),
        "beta": setup.fcfg.beta.tolist(),
        "t_eps": setup.fcfg.t_eps,
        "t_e": t_e,
        "delta_raw_max": float(draw.max()),
        "delta_raw_final": float(draw[-1]),
    }
    mask25 = t >= setup.fcfg.t_eps
    gap_rel = np.abs(series["lemma1_gap"]) / (1.0 + np.abs(series["phibar_f_eta"]))
    out["lemma1_gap_rel_max_after_t_eps"] = float(gap_rel[mask25].max())
    if t_e is not None:
        m = t >= t_e
        eta = setup.eta_true
        err = np.linalg.norm(series["y_eta"] - np.outer(draw, eta), axis=1)
        rel = err[m] / (np.abs(draw[m]) * np.linalg.norm(eta))
        out["eta_lre_rel_err_max_after_t_e"] = float(rel.max())
        out["eta_lre_rel_err_final"] = float(rel[-1])
        out["rho_below_min_delta"] = bool(cfg.rho <= draw[m].min())
        kerr = np.linalg.norm(series["kappa_err"], axis=1)
        xdiff = np.linalg.norm(series["x_hat"] - series["x_star"], axis=1)
        out["kappa_err_peak_after_t_e"] = float(kerr[m].max())
        out["kappa_err_final"] = float(kerr[-1])
        out["kappa_decrease_factor"] = float(kerr[m].max() / kerr[-1]) if kerr[-1] > 0 else np.inf
        out["xdiff_peak_after_t_e"] = float(xdiff[m].max())
        out["xdiff_final"] = float(xdiff[-1])
        out["xdiff_decrease_factor"] = float(xdiff[m].max() / xdiff[-1]) if xdiff[-1] > 0 else np.inf
        margins = check_prop1(
            {
                "delta_raw": draw,
                "m_ab": series["m_ab"],
                "m_l": series["m_l"],
                "m_kappa": series["m_kappa"],
            },
            t,
            t_e,
        )
        out["prop1_ok"] = margins.ok
        out["prop1_margins"] = margins.margins
        dt = float(t[1] - t[0])
        i0 = int(round(setup.fcfg.t_eps / dt))
        out["excitation_level"] = excitation_level(
            series["phibar_f"][i0:], setup.fcfg.t_eps, t_e, dt) if t_e > setup.fcfg.t_eps else 0.0
    return out


def _define_tables(art: RunArtifacts, setup: RuntimeSetup):
    s = art.series
    ne = setup.ext.n_e
    n2 = 2 * setup.spec.n
    n_th = setup.spec.n_Theta

    def cols(prefix, k):
        return [f"{prefix}{i + 1}" for i in range(k)]

    art.columns["plant"] = (
        cols("x_e", ne) + ["y", "u", "r"],
        [s["xe"], s["y"], s["u"], s["r"]],
    )
    art.columns["filters"] = (
        ["q_bar", "q_bar_f", "y_f"] + cols("phi_bar", n2) + cols("phi_bar_f", n2)
        + ["Delta", *cols("Y_eta", n2), "lemma1_residual"],
        [s["qbar"], s["qbar_f"], s["y_f"], s["phibar"], s["phibar_f"],
         s["delta_raw"], s["y_eta"], np.abs(s["lemma1_gap"])],
    )
    art.columns["chain"] = (
        ["Delta_raw", "M_theta", "M_AB", "M_L", "M_kappa", "cond_gain"]
        + cols("Y_theta", setup.spec.n_theta) + cols("Y_AB", n_th)
        + cols("Y_L", ne) + cols("Y_kappa", n_th + ne),
        [s["delta_raw"], s["m_theta"], s["m_ab"], s["m_l"], s["m_kappa"],
         s["cond_gain"], s["y_theta"], s["y_ab"], s["y_l"], s["y_kappa"]],
    )
    art.columns["observer"] = (
        cols("x_hat", ne) + cols("x_star", ne) + cols("kappa_hat", n_th + ne)
        + cols("kappa_err", n_th + ne)
        + ["gamma", "lambda_max", "y_tilde", "delta_hat", "delta_star", "delta_true"],
        [s["x_hat"], s["x_star"], s["kappa_hat"], s["kappa_err"], s["gamma"],
         s["lambda_max"], s["y_tilde"], s["delta_hat"], s["delta_star"], s["delta_true"]],
    )


def emit_plots(art: RunArtifacts, outdir):
    """Write plain-text plot series: the filtered-regression overlay pair
    and the per-component normalized error transients.

    Each error series is normalized by its own maximum magnitude over the
    whole run, so a constant series maps to +-1.
    """
    if art.t.size == 0 or not art.series:
        raise ValueError("empty artifacts: nothing to plot")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    t = art.t[:: art.stride]

    overlay = np.column_stack([
        t,
        art.series["phibar_f_eta"][:: art.stride],
        art.series["lemma1_gap"][:: art.stride],
    ])
    np.savetxt(outdir / "regression_overlay.dat", overlay,
               header="t signal gap", comments="", fmt="%.17g")

    def normalized(x):
        x = np.asarray(x, dtype=float)
        peak = np.max(np.abs(x), axis=0)
        peak = np.where(peak == 0.0, 1.0, peak)
        return x / peak

    n_th = art.series["kappa_err"].shape[1] - art.series["x_hat"].shape[1]
    blocks = {
        "theta_ab_errors": art.series["kappa_err"][:, :n_th],
        "gain_errors": art.series["kappa_err"][:, n_th:],
        "state_errors": art.series["x_hat"] - art.series["x_star"],
        "disturbance_error": (art.series["delta_hat"] - art.series["delta_star"])[:, None],
    }
    for name, block in blocks.items():
        data = np.column_stack([t, normalized(block)[:: art.stride]])
        head = "t " + " ".join(f"e{i + 1}" for i in range(block.shape[1]))
        np.savetxt(outdir / f"{name}.dat", data, header=head, comments="", fmt="%.17g")
    return outdir
