"""Compiled inner loops for the simulation engine.

Two sequential kernels: the closed-loop plant with the full filter bank and
extension integrals (run on a half-step grid so the observer stage can
sample inputs at RK4 substep times), and the observer pair with the
parameter law (run on the configured grid, regression data frozen per
step). Both mirror the plain NumPy reference implementations in
``engine.py``; a cross-check test keeps them aligned.
"""

import numpy as np
from numba import njit

OK = 0
DIVERGED_PLANT = 1
DIVERGED_OBSERVER = 2
INCONSISTENT_REGRESSION = 3


@njit(cache=True)
def _reference(t, t_eps, r0, r_amp, r_freq):
    decay = t - t_eps
    if decay < 0.0:
        decay = 0.0
    return r0 + r_amp * np.exp(-decay) * np.sin(r_freq * t)


@njit(cache=True)
def _stage1_rhs(t, w, dw, phibar, ext_active, n, nd, a_ext, b_e, c_e, a_k,
                k_gain, c_0, g, l, beta, k1, k2, t_eps, ctrl, r0, r_amp, r_freq):
    """Joint right-hand side; also exports (y, u, qbar) and fills phibar.

    ``ext_active`` gates the extension integrals per integration step, so
    the discontinuous start at t_eps never lands inside an RK4 stage.
    """
    ne = n + nd
    n2 = 2 * n
    o_z = ne
    o_om = o_z + n
    o_p = o_om + n * n
    o_f = o_p + n * n
    o_h = o_f + nd
    o_n = o_h + nd * n
    o_qf = o_n + nd * n
    o_phif = o_qf + 1
    o_ff = o_phif + n2
    o_yf = o_ff + nd
    o_sq = o_yf + 1

    xe = w[:ne]
    z = w[o_z:o_om]
    om = w[o_om:o_p].reshape(n, n)
    p = w[o_p:o_f].reshape(n, n)
    f = w[o_f:o_h]
    h = w[o_h:o_n].reshape(nd, n)
    nmat = w[o_n:o_qf].reshape(nd, n)
    qf = w[o_qf]
    phif = w[o_phif:o_ff]
    ff = w[o_ff:o_yf]
    yf = w[o_yf]

    y = 0.0
    for i in range(ne):
        y += c_e[i] * xe[i]
    u = ctrl * (_reference(t, t_eps, r0, r_amp, r_freq) - y)

    for i in range(ne):
        acc = b_e[i] * u
        for j in range(ne):
            acc += a_ext[i, j] * xe[j]
        dw[i] = acc

    # state filters; their derivatives feed the disturbance filters and phi_bar
    zd = np.empty(n)
    for i in range(n):
        acc = k_gain[i] * y
        for j in range(n):
            acc += a_k[i, j] * z[j]
        zd[i] = acc
        dw[o_z + i] = acc
    omd = np.empty((n, n))
    pd = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            acc_o = 0.0
            acc_p = 0.0
            for m in range(n):
                acc_o += a_k[i, m] * om[m, j]
                acc_p += a_k[i, m] * p[m, j]
            if i == j:
                acc_o += y
                acc_p += u
            omd[i, j] = acc_o
            pd[i, j] = acc_p
            dw[o_om + i * n + j] = acc_o
            dw[o_p + i * n + j] = acc_p

    c0zd = 0.0
    for i in range(n):
        c0zd += c_0[i] * zd[i]
    c0pd = np.empty(n)
    c0omd = np.empty(n)
    for j in range(n):
        sp = 0.0
        so = 0.0
        for i in range(n):
            sp += c_0[i] * pd[i, j]
            so += c_0[i] * omd[i, j]
        c0pd[j] = sp
        c0omd[j] = so

    for i in range(nd):
        gl = 0.0
        for j in range(nd):
            gl += g[i, j] * l[j]
        acc = gl * y - l[i] * c0zd
        for j in range(nd):
            acc += g[i, j] * f[j]
        dw[o_f + i] = acc
    for i in range(nd):
        for j in range(n):
            acc_h = -l[i] * c0pd[j]
            acc_n = -l[i] * c0omd[j]
            for m in range(nd):
                acc_h += g[i, m] * h[m, j]
                acc_n += g[i, m] * nmat[m, j]
            dw[o_h + i * n + j] = acc_h
            dw[o_n + i * n + j] = acc_n

    qbar = y
    for i in range(n):
        qbar -= c_0[i] * z[i]
    for j in range(n):
        acc = c0omd[j]
        acc2 = c0pd[j]
        for i in range(nd):
            acc += nmat[i, j] * beta[i]
            acc2 += h[i, j] * beta[i]
        phibar[j] = acc
        phibar[n + j] = acc2

    dw[o_qf] = -k1 * qf + qbar
    for i in range(n2):
        dw[o_phif + i] = -k1 * phif[i] + phibar[i]
    for i in range(nd):
        dw[o_ff + i] = -k1 * ff[i] + f[i]
    dw[o_yf] = -k1 * yf + y

    if ext_active:
        o_q = o_sq + n2
        o_sphi = o_q + n2
        o_phi = o_sphi + n2 * n2
        wgt = np.exp(-k2 * (t - t_eps))
        chi = qbar - k1 * qf
        for i in range(nd):
            chi -= beta[i] * (ff[i] + l[i] * yf)
        for i in range(n2):
            dw[o_sq + i] = wgt * phif[i] * chi
            dw[o_q + i] = w[o_sq + i]
            for j in range(n2):
                dw[o_sphi + i * n2 + j] = wgt * phif[i] * phif[j]
                dw[o_phi + i * n2 + j] = w[o_sphi + i * n2 + j]
    else:
        for i in range(o_sq, w.shape[0]):
            dw[i] = 0.0
    return y, u, qbar


@njit(cache=True)
def stage1_loop(n, nd, a_ext, b_e, c_e, a_k, k_gain, c_0, g, l, beta,
                k1, k2, t_eps, ctrl, r0, r_amp, r_freq,
                dt_half, n_half, x0e, guard,
                y_h, u_h, rec_xe, rec_qbar, rec_phibar, rec_qf, rec_phif,
                rec_ff, rec_yf, rec_q, rec_phi, info):
    ne = n + nd
    n2 = 2 * n
    ns = ne + n + 2 * n * n + nd + 2 * nd * n + 1 + n2 + nd + 1 + 2 * n2 + 2 * n2 * n2
    w = np.zeros(ns)
    for i in range(ne):
        w[i] = x0e[i]
    k1v = np.empty(ns)
    k2v = np.empty(ns)
    k3v = np.empty(ns)
    k4v = np.empty(ns)
    wt = np.empty(ns)
    scratch = np.empty(ns)
    pb = np.empty(n2)

    o_z = ne
    o_qf = o_z + n + 2 * n * n + nd + 2 * nd * n
    o_phif = o_qf + 1
    o_ff = o_phif + n2
    o_yf = o_ff + nd
    o_sq = o_yf + 1
    o_q = o_sq + n2
    o_sphi = o_q + n2
    o_phi = o_sphi + n2 * n2

    k_eps = int(np.round(t_eps / dt_half))
    y0, u0, qb0 = _stage1_rhs(0.0, w, scratch, pb, k_eps <= 0, n, nd, a_ext,
                              b_e, c_e, a_k, k_gain, c_0, g, l, beta, k1, k2,
                              t_eps, ctrl, r0, r_amp, r_freq)
    y_h[0] = y0
    u_h[0] = u0
    rec_qbar[0] = qb0
    for i in range(ne):
        rec_xe[0, i] = w[i]
    for i in range(n2):
        rec_phibar[0, i] = pb[i]

    for kh in range(n_half):
        t = kh * dt_half
        act = kh >= k_eps
        _stage1_rhs(t, w, k1v, pb, act, n, nd, a_ext, b_e, c_e, a_k, k_gain,
                    c_0, g, l, beta, k1, k2, t_eps, ctrl, r0, r_amp, r_freq)
        for i in range(ns):
            wt[i] = w[i] + 0.5 * dt_half * k1v[i]
        _stage1_rhs(t + 0.5 * dt_half, wt, k2v, pb, act, n, nd, a_ext, b_e, c_e,
                    a_k, k_gain, c_0, g, l, beta, k1, k2, t_eps, ctrl, r0, r_amp, r_freq)
        for i in range(ns):
            wt[i] = w[i] + 0.5 * dt_half * k2v[i]
        _stage1_rhs(t + 0.5 * dt_half, wt, k3v, pb, act, n, nd, a_ext, b_e, c_e,
                    a_k, k_gain, c_0, g, l, beta, k1, k2, t_eps, ctrl, r0, r_amp, r_freq)
        for i in range(ns):
            wt[i] = w[i] + dt_half * k3v[i]
        _stage1_rhs(t + dt_half, wt, k4v, pb, act, n, nd, a_ext, b_e, c_e, a_k,
                    k_gain, c_0, g, l, beta, k1, k2, t_eps, ctrl, r0, r_amp, r_freq)
        for i in range(ns):
            w[i] += dt_half / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i])

        t_next = (kh + 1) * dt_half
        y = 0.0
        for i in range(ne):
            y += c_e[i] * w[i]
        y_h[kh + 1] = y
        u_h[kh + 1] = ctrl * (_reference(t_next, t_eps, r0, r_amp, r_freq) - y)

        if (kh + 1) % 2 == 0:
            kf = (kh + 1) // 2
            bad = False
            for i in range(ne):
                if not np.isfinite(w[i]) or np.abs(w[i]) > guard:
                    bad = True
            if bad:
                info[0] = t_next
                return DIVERGED_PLANT
            _, _, qb = _stage1_rhs(t_next, w, scratch, pb, kh + 1 >= k_eps,
                                   n, nd, a_ext, b_e, c_e, a_k, k_gain, c_0,
                                   g, l, beta, k1, k2, t_eps, ctrl, r0,
                                   r_amp, r_freq)
            for i in range(ne):
                rec_xe[kf, i] = w[i]
            rec_qbar[kf] = qb
            rec_qf[kf] = w[o_qf]
            for i in range(n2):
                rec_phibar[kf, i] = pb[i]
                rec_phif[kf, i] = w[o_phif + i]
                rec_q[kf, i] = w[o_q + i]
                for j in range(n2):
                    rec_phi[kf, i, j] = w[o_phi + i * n2 + j]
            for i in range(nd):
                rec_ff[kf, i] = w[o_ff + i]
            rec_yf[kf] = w[o_yf]
    return OK


@njit(cache=True)
def _phi_t(x, u, d_phi, ne, n_theta, out):
    for i in range(ne):
        for j in range(n_theta):
            acc = u * d_phi[ne * ne + i, j]
            for m in range(ne):
                acc += x[m] * d_phi[i * ne + m, j]
            out[i, j] = acc


@njit(cache=True)
def _obs_rhs(x, u, y, theta_ab, gain, d_phi, a_d, c_e, ne, n_theta, phit, out):
    _phi_t(x, u, d_phi, ne, n_theta, phit)
    yh = 0.0
    for i in range(ne):
        yh += c_e[i] * x[i]
    for i in range(ne):
        acc = -gain[i] * (yh - y)
        for j in range(n_theta):
            acc += phit[i, j] * theta_ab[j]
        for j in range(ne):
            acc += a_d[i, j] * x[j]
        out[i] = acc


@njit(cache=True)
def _lambda_max(gram, ne, tol, max_iter):
    v = np.empty(ne)
    for i in range(ne):
        v[i] = 1.0 / np.sqrt(ne)
    lam = 0.0
    for _ in range(max_iter):
        wv = gram @ v
        nw = np.linalg.norm(wv)
        if nw == 0.0:
            return 0.0
        for i in range(ne):
            v[i] = wv[i] / nw
        lam_new = v @ (gram @ v)
        if np.abs(lam_new - lam) <= tol * max(1.0, np.abs(lam_new)):
            return lam_new
        lam = lam_new
    return lam


@njit(cache=True)
def _rk4_observer(x, u0, u1, u2, y0, y1, y2, theta_ab, gain, d_phi, a_d, c_e,
                  ne, n_theta, dt, phit, k1v, k2v, k3v, k4v, xt):
    _obs_rhs(x, u0, y0, theta_ab, gain, d_phi, a_d, c_e, ne, n_theta, phit, k1v)
    for i in range(ne):
        xt[i] = x[i] + 0.5 * dt * k1v[i]
    _obs_rhs(xt, u1, y1, theta_ab, gain, d_phi, a_d, c_e, ne, n_theta, phit, k2v)
    for i in range(ne):
        xt[i] = x[i] + 0.5 * dt * k2v[i]
    _obs_rhs(xt, u1, y1, theta_ab, gain, d_phi, a_d, c_e, ne, n_theta, phit, k3v)
    for i in range(ne):
        xt[i] = x[i] + dt * k3v[i]
    _obs_rhs(xt, u2, y2, theta_ab, gain, d_phi, a_d, c_e, ne, n_theta, phit, k4v)
    for i in range(ne):
        x[i] = x[i] + dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i])


@njit(cache=True)
def stage3_loop(ne, n_theta, d_phi, a_d, c_e, theta_true, gain_true,
                y_h, u_h, y_kappa, m_kappa, draw, rho, gamma0, gamma1,
                dt, guard, x_hat0, x_star0, kappa0,
                rec_xh, rec_xs, rec_kap, rec_gamma, rec_lmax, info):
    n_kappa = n_theta + ne
    n_full = m_kappa.shape[0] - 1
    xh = x_hat0.copy()
    xs = x_star0.copy()
    kap = kappa0.copy()
    phit = np.empty((ne, n_theta))
    gram = np.empty((ne, ne))
    k1v = np.empty(ne)
    k2v = np.empty(ne)
    k3v = np.empty(ne)
    k4v = np.empty(ne)
    xt = np.empty(ne)
    for i in range(ne):
        rec_xh[0, i] = xh[i]
        rec_xs[0, i] = xs[i]
    for i in range(n_kappa):
        rec_kap[0, i] = kap[i]
    rec_gamma[0] = 0.0
    rec_lmax[0] = 0.0

    for kf in range(n_full):
        y0 = y_h[2 * kf]
        y1 = y_h[2 * kf + 1]
        y2 = y_h[2 * kf + 2]
        u0 = u_h[2 * kf]
        u1 = u_h[2 * kf + 1]
        u2 = u_h[2 * kf + 2]

        # adaptation gain from step-start quantities
        _phi_t(xh, u0, d_phi, ne, n_theta, phit)
        yh = 0.0
        for i in range(ne):
            yh += c_e[i] * xh[i]
        yt = yh - y0
        for i in range(ne):
            for j in range(ne):
                acc = yt * yt if i == j else 0.0
                for m in range(n_theta):
                    acc += phit[i, m] * phit[j, m]
                gram[i, j] = acc
        lmax = _lambda_max(gram, ne, 1e-8, 200)

        gamma = 0.0
        if draw[kf] >= rho:
            if m_kappa[kf] == 0.0:
                info[0] = kf * dt
                return INCONSISTENT_REGRESSION
            gamma = (gamma0 * lmax + gamma1) / (m_kappa[kf] * m_kappa[kf])

        theta_hat = kap[:n_theta]
        gain_hat = kap[n_theta:]
        _rk4_observer(xh, u0, u1, u2, y0, y1, y2, theta_hat, gain_hat, d_phi,
                      a_d, c_e, ne, n_theta, dt, phit, k1v, k2v, k3v, k4v, xt)
        _rk4_observer(xs, u0, u1, u2, y0, y1, y2, theta_true, gain_true, d_phi,
                      a_d, c_e, ne, n_theta, dt, phit, k1v, k2v, k3v, k4v, xt)

        if gamma > 0.0:
            # parameter law is linear with frozen data; RK4 per component
            a = gamma * m_kappa[kf] * m_kappa[kf]
            for i in range(n_kappa):
                target = y_kappa[kf, i] / m_kappa[kf]
                e0 = kap[i] - target
                c1 = -a * e0
                c2 = -a * (e0 + 0.5 * dt * c1)
                c3 = -a * (e0 + 0.5 * dt * c2)
                c4 = -a * (e0 + dt * c3)
                kap[i] = kap[i] + dt / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)

        bad = False
        for i in range(ne):
            if not np.isfinite(xh[i]) or np.abs(xh[i]) > guard:
                bad = True
            if not np.isfinite(xs[i]) or np.abs(xs[i]) > guard:
                bad = True
        for i in range(n_kappa):
            if not np.isfinite(kap[i]):
                bad = True
        if bad:
            info[0] = (kf + 1) * dt
            return DIVERGED_OBSERVER

        for i in range(ne):
            rec_xh[kf + 1, i] = xh[i]
            rec_xs[kf + 1, i] = xs[i]
        for i in range(n_kappa):
            rec_kap[kf + 1, i] = kap[i]
        rec_gamma[kf + 1] = gamma
        rec_lmax[kf + 1] = lmax
    return OK
