"""Verification suite: structural identities, oracles, and run margins.

Each check is independent and pure given its inputs; the randomized ones
take a seed. The CLI aggregates the results into a pass/fail report with a
nonzero exit code on any failure.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_sylvester

from . import _linalg
from .config import ExperimentConfig, build_runtime
from .engine import run_chain, simulate
from .hetero import Lre, check_pi_lower_bound, normalize_lre, verify_heterogeneity
from .lre_chain import check_prop1, gain_direct, make_gain_mappings, placement_certificate
from .lti_core import build_extended
from .parametrizer import compute_beta


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str


def _probe_domain(setup, mapping, rng):
    """Random probe in the mapping's natural input domain."""
    if mapping.name.startswith("gain_"):
        n2 = setup.ext.n_e ** 2
        free = rng.uniform(0.5, 1.5, size=setup.spec.n_Theta)
        return np.concatenate([free, _linalg.vec(setup.prob.gamma),
                               _linalg.vec(setup.prob.a_delta_embed)])
    return rng.uniform(0.5, 2.0, size=mapping.in_dim)


def check_heterogeneity(cfg: ExperimentConfig, seed=0, n_probes=1000) -> list:
    """Defining identity of all five shipped mappings over random probes."""
    setup = build_runtime(cfg)
    map_p, map_q = make_gain_mappings(setup.prob, setup.spec.n_Theta)
    mappings = [setup.map_s, setup.map_g, setup.map_theta, map_p, map_q]
    rng = np.random.default_rng(seed)
    results = []
    for mapping in mappings:
        # large-degree mappings overflow the float range for large omega
        w_hi = 10.0 if mapping.degree <= 20 else 1.5
        worst = 0.0
        for _ in range(n_probes):
            omega = rng.uniform(0.05, w_hi)
            x = _probe_domain(setup, mapping, rng)
            lhs_scale = np.linalg.norm(
                np.asarray(mapping.pi_of(np.asarray(omega)), dtype=float)
                @ np.atleast_2d(np.asarray(mapping.f_of(x), dtype=float).T).T
            )
            res = verify_heterogeneity(mapping, mapping.f_of, omega, x)
            worst = max(worst, res / (1.0 + lhs_scale))
        ok = worst <= 1e-9
        results.append(CheckResult(
            name=f"heterogeneity[{mapping.name}]",
            ok=ok,
            detail=f"worst relative residual {worst:.3e} over {n_probes} probes",
        ))
        grid = np.logspace(-2, 0.9 if mapping.degree <= 20 else 0.15, 25)
        ok_pi = check_pi_lower_bound(mapping, grid)
        results.append(CheckResult(
            name=f"pi_lower_bound[{mapping.name}]",
            ok=ok_pi,
            detail="det(Pi(w)) >= w^degree on a log grid",
        ))
    return results


def check_worked_example() -> CheckResult:
    """The two-component product mapping at omega = 2, x = (3, 5)."""
    def f(x):
        return np.array([x[0] * x[1], x[0]])

    omega, x = 2.0, np.array([3.0, 5.0])
    pi = np.diag([omega**2, omega])
    lhs = pi @ f(x)
    rhs = f(omega * x)
    ok = np.allclose(lhs, np.array([60.0, 6.0])) and np.allclose(lhs, rhs)
    return CheckResult("heterogeneity[worked_example]", ok,
                       f"Pi F = {lhs.tolist()}, T(Xi x) = {rhs.tolist()}")


def check_beta(cfg: ExperimentConfig, seed=0, n_random=25) -> list:
    """Coupling-vector solve against a Kronecker-vectorized oracle."""
    setup = build_runtime(cfg)
    results = []
    m_delta, beta = compute_beta(cfg.g, cfg.l, cfg.exosystem)
    hbar = cfg.exosystem.h_delta @ cfg.exosystem.a_delta
    res = np.linalg.norm(m_delta @ cfg.exosystem.a_delta - cfg.g @ m_delta
                         - np.outer(cfg.l, hbar))
    scale = max(1.0, np.linalg.norm(m_delta))
    results.append(CheckResult("beta_residual", res <= 1e-10 * scale,
                               f"Sylvester residual {res:.3e}"))
    rng = np.random.default_rng(seed)
    nd = cfg.exosystem.n_delta
    worst = 0.0
    for _ in range(n_random):
        g = -np.eye(nd) * rng.uniform(0.5, 4.0) + 0.3 * rng.standard_normal((nd, nd))
        if not _linalg.is_hurwitz(g) or not _linalg.spectra_disjoint(cfg.exosystem.a_delta, g):
            continue
        l = rng.standard_normal(nd)
        m = solve_sylvester(-g, cfg.exosystem.a_delta, np.outer(l, hbar))
        kron = np.kron(np.eye(nd), -g) + np.kron(cfg.exosystem.a_delta.T, np.eye(nd))
        m_oracle = _linalg.unvec(np.linalg.solve(kron, _linalg.vec(np.outer(l, hbar))), nd)
        worst = max(worst, np.linalg.norm(m - m_oracle) / max(1.0, np.linalg.norm(m_oracle)))
    results.append(CheckResult("beta_kronecker_oracle", worst <= 1e-10,
                               f"worst relative gap {worst:.3e}"))
    return results


def check_chain_equivalence(cfg: ExperimentConfig, seed=0, n_theta=50) -> CheckResult:
    """Exact synthetic regressions through the whole chain against the
    direct Sylvester gain, for random admissible parameters."""
    setup = build_runtime(cfg)
    rng = np.random.default_rng(seed)
    worst = 0.0
    tried = 0
    while tried < n_theta:
        theta = rng.uniform(0.5, 3.0, size=setup.spec.n_theta)
        try:
            ext = build_extended(setup.spec, setup.exo, theta)
            gain = gain_direct(ext, setup.prob)
        except Exception:
            continue
        tried += 1
        from .lti_core import eta_of

        eta = eta_of(setup.spec, theta)
        delta = rng.uniform(0.3, 3.0)
        lre = normalize_lre(Lre(y=delta * eta, m=np.asarray(delta), label="eta"))
        chain = run_chain_exact(setup, lre)
        kappa = chain.y / chain.m
        truth = np.concatenate([ext.theta_ab, gain])
        worst = max(worst, np.linalg.norm(kappa - truth) / np.linalg.norm(truth))
    return CheckResult("chain_oracle_equivalence", worst <= 1e-6,
                       f"worst relative error {worst:.3e} over {n_theta} draws")


def run_chain_exact(setup, eta_lre: Lre) -> Lre:
    """Single-sample pass of the full chain, via the batched implementation."""
    from .hetero import lre_to_theta, lre_to_theta_ab, select_ab
    from .lre_chain import gain_lre, stack_kappa

    ab = select_ab(eta_lre, setup.spec.l_ab)
    th = normalize_lre(lre_to_theta(ab, setup.map_s, setup.map_g))
    tab = normalize_lre(lre_to_theta_ab(th, setup.map_theta))
    gl = normalize_lre(gain_lre(tab, setup.prob))
    return normalize_lre(stack_kappa(tab, gl))


def check_placement(cfg: ExperimentConfig) -> list:
    setup = build_runtime(cfg)
    gain = gain_direct(setup.ext, setup.prob)
    cert = placement_certificate(setup.ext, setup.prob, gain)
    a_m = setup.ext.a_e + setup.ext.a_delta_embed - np.outer(gain, setup.ext.c_e)
    eigs = np.linalg.eigvals(a_m)
    spread = float(np.max(np.abs(eigs - cfg.gamma_eigenvalue)))
    out = [
        CheckResult("placement_certificate", cert <= 1e-6,
                    f"similarity residual {cert:.3e}"),
        CheckResult("placement_hurwitz", bool(np.all(eigs.real < 0)),
                    f"raw eigenvalue spread about the target: {spread:.3e} "
                    "(limited to ~eps^(1/n_e) by the defective multiple pole)"),
    ]
    return out


def check_margins(cfg: ExperimentConfig, engine="auto") -> list:
    """Proposition-style positivity margins on a full simulated run."""
    art = simulate(cfg, engine=engine)
    t_e = art.summary.get("t_e")
    if t_e is None:
        return [CheckResult("prop1_margins", False,
                            "scalar regressor never reached the threshold rho")]
    report = check_prop1(
        {
            "delta_raw": art.series["delta_raw"],
            "m_ab": art.series["m_ab"],
            "m_l": art.series["m_l"],
            "m_kappa": art.series["m_kappa"],
        },
        art.t,
        t_e,
    )
    detail = ", ".join(f"{k}={v:.3e}" for k, v in report.margins.items())
    out = [CheckResult("prop1_margins", report.ok, detail)]
    out.append(CheckResult(
        "rho_below_min_delta", bool(art.summary.get("rho_below_min_delta", False)),
        f"rho={cfg.rho}, min Delta after t_e={report.margins.get('delta_raw', 0):.3e}"))
    return out


def run_all(cfg: ExperimentConfig, seed=0, with_simulation=True, engine="auto") -> list:
    results = [check_worked_example()]
    results += check_heterogeneity(cfg, seed=seed)
    results += check_beta(cfg, seed=seed)
    results.append(check_chain_equivalence(cfg, seed=seed))
    results += check_placement(cfg)
    if with_simulation:
        results += check_margins(cfg, engine=engine)
    return results
