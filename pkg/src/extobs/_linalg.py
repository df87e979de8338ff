"""Small dense-matrix routines: column-major vectorization, adjugates that
stay finite at singularity, companion forms, observability tests.

All adjugate/determinant helpers accept stacked inputs with arbitrary
leading batch axes.
"""

from functools import lru_cache

import numpy as np


def vec(m):
    """Column-stacking vectorization, vec(M)[i + j*rows] = M[i, j].

    Leading batch axes pass through untouched.
    """
    m = np.asarray(m)
    return np.swapaxes(m, -1, -2).reshape(m.shape[:-2] + (-1,))


def unvec(v, rows, cols=None):
    """Inverse of :func:`vec` for a batch of flat vectors."""
    v = np.asarray(v)
    cols = rows if cols is None else cols
    out = v.reshape(v.shape[:-1] + (cols, rows))
    return np.swapaxes(out, -1, -2)


@lru_cache(maxsize=32)
def _minor_index(n):
    # index grids such that minors[..., i, j] deletes row j and column i,
    # giving the transposed-cofactor (adjugate) layout directly
    keep = np.array([[k for k in range(n) if k != i] for i in range(n)])
    rows = keep[None, :, :, None]
    cols = keep[:, None, None, :]
    signs = (-1.0) ** (np.add.outer(np.arange(n), np.arange(n)))
    return rows, cols, signs


def _small_det(m):
    """Closed-form determinants for orders 1..3, batched; LAPACK beyond."""
    k = m.shape[-1]
    if k == 1:
        return m[..., 0, 0]
    if k == 2:
        return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    if k == 3:
        return (
            m[..., 0, 0] * (m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1])
            - m[..., 0, 1] * (m[..., 1, 0] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 0])
            + m[..., 0, 2] * (m[..., 1, 0] * m[..., 2, 1] - m[..., 1, 1] * m[..., 2, 0])
        )
    return np.linalg.det(m)


def _cofactor_adjugate(x):
    """adj(X) via cofactor expansion; exact-finite at det(X) = 0."""
    n = x.shape[-1]
    if n == 1:
        return np.ones_like(x)
    rows, cols, signs = _minor_index(n)
    # minors indexed (..., i, j) holding the (j, i) minor of X
    minors = x[..., rows, cols]
    return signs * _small_det(minors)


def _svd_adjugate(x):
    """adj(X) from the SVD; exact at any rank, O(n^3) per matrix."""
    u, s, vt = np.linalg.svd(x)
    sign = np.linalg.det(u) * np.linalg.det(vt)
    # products of all singular values but one, stable against underflow
    n = s.shape[-1]
    prefix = np.ones_like(s)
    suffix = np.ones_like(s)
    for i in range(1, n):
        prefix[..., i] = prefix[..., i - 1] * s[..., i - 1]
        suffix[..., n - 1 - i] = suffix[..., n - i] * s[..., n - i]
    adj_sigma = prefix * suffix
    return sign[..., None, None] * np.einsum(
        "...ji,...j,...kj->...ik", vt, adj_sigma, u
    )


def _inv_based_adjugate(xn, dn):
    """det*inv adjugate with a residual-checked singular fallback.

    The identity adj(X) X = det(X) I is verified per sample; where the
    inverse is unreliable (a nearly singular sample) the SVD form, exact at
    any rank, replaces it. Cofactors would need minor stacks of
    O(n^4) entries per sample, which is infeasible at the sizes used here.
    """
    adj = np.zeros_like(xn)
    ok = np.abs(dn) > 0.0
    if np.any(ok):
        try:
            adj[ok] = dn[ok][..., None, None] * np.linalg.inv(xn[ok])
        except np.linalg.LinAlgError:
            idx = np.nonzero(ok)
            for flat in zip(*idx):
                try:
                    adj[flat] = dn[flat] * np.linalg.inv(xn[flat])
                except np.linalg.LinAlgError:
                    ok[flat] = False
                    adj[flat] = 0.0
    n = xn.shape[-1]
    resid = np.einsum("...ij,...jk->...ik", adj, xn)
    resid[..., range(n), range(n)] -= dn[..., None]
    bad = ~ok | (
        np.abs(resid).max(axis=(-2, -1))
        > 1e-9 * (1.0 + np.abs(adj).max(axis=(-2, -1)) * np.abs(xn).max(axis=(-2, -1)))
    )
    if np.any(bad):
        adj[bad] = _svd_adjugate(xn[bad])
    return adj


def adjugate_and_det(x):
    """Return (adj(X), det(X)) for a stack of square matrices.

    Cofactor expansion for n <= 4; det*inv for larger matrices after
    rescaling by the Frobenius norm, with an SVD fallback wherever the
    inverse fails the adjugate identity (near-singular samples, where
    inversion is meaningless but the adjugate is still well defined).
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if n == 1:
        return np.ones_like(x), x[..., 0, 0].copy()

    scale = np.linalg.norm(x, axis=(-2, -1)) / np.sqrt(n)
    zero = scale == 0.0
    safe = np.where(zero, 1.0, scale)
    xn = x / safe[..., None, None]
    dn = np.linalg.det(xn)
    det = np.where(zero, 0.0, safe**n * dn)

    if n <= 4:
        adj = _cofactor_adjugate(xn)
    else:
        adj = np.zeros_like(xn)
        nz = ~zero
        if np.any(nz):
            adj[nz] = _inv_based_adjugate(xn[nz], dn[nz])
    adj = adj * np.where(zero, 0.0, safe ** (n - 1))[..., None, None]
    return adj, det


def adjugate(x):
    """Adjugate (transposed cofactor matrix); adj(X) @ X = det(X) * I."""
    return adjugate_and_det(x)[0]


def companion(char_coeffs):
    """Top-shift companion matrix for s^n + a_{n-1} s^{n-1} + ... + a_0.

    ``char_coeffs`` lists (a_0, ..., a_{n-1}).
    """
    a = np.asarray(char_coeffs, dtype=float)
    n = a.size
    m = np.zeros((n, n))
    for i in range(n - 1):
        m[i, i + 1] = 1.0
    m[n - 1, :] = -a
    return m


def repeated_pole_companion(lam, n):
    """Companion realization of the characteristic polynomial (s - lam)^n."""
    coeffs = np.poly1d([1.0, -lam]) ** n
    return companion(np.asarray(coeffs.coeffs[::-1][:-1], dtype=float))


def observability_matrix(a, c):
    """Stack [c^T; c^T A; ...; c^T A^(n-1)] for output row c."""
    a = np.asarray(a, dtype=float)
    c = np.asarray(c, dtype=float)
    n = a.shape[0]
    rows = np.empty((n, n))
    r = c.copy()
    for k in range(n):
        rows[k] = r
        r = r @ a
    return rows


def is_observable(a, c, rtol=1e-9):
    ob = observability_matrix(a, c)
    s = np.linalg.svd(ob, compute_uv=False)
    return s[-1] > rtol * max(s[0], 1.0)


def is_controllable(a, b, rtol=1e-9):
    return is_observable(np.asarray(a).T, np.asarray(b), rtol=rtol)


def is_hurwitz(a, margin=0.0):
    return bool(np.all(np.linalg.eigvals(a).real < -margin))


def spectra_disjoint(a, b, tol=1e-8):
    ea = np.linalg.eigvals(a)
    eb = np.linalg.eigvals(b)
    gap = np.abs(ea[:, None] - eb[None, :])
    return bool(gap.min() > tol)


def power_iteration_lmax(g, tol=1e-8, max_iter=200):
    """Largest eigenvalue of a symmetric PSD matrix by power iteration."""
    g = np.asarray(g, dtype=float)
    n = g.shape[0]
    v = np.ones(n) / np.sqrt(n)
    lam = 0.0
    for _ in range(max_iter):
        w = g @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        lam_new = float(v @ g @ v)
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return lam_new
        lam = lam_new
    return lam


def trapezoid_gram(series, dt):
    """Trapezoidal quadrature of the Gram integral of a sampled vector signal."""
    series = np.asarray(series, dtype=float)
    w = np.full(series.shape[0], dt)
    w[0] *= 0.5
    w[-1] *= 0.5
    return np.einsum("t,ti,tj->ij", w, series, series)
