import json
import numpy as np
import pytest
from dataclasses import replace

import extobs
from extobs import demo
from extobs.cli import main as cli_main
from extobs.config import build_runtime
from extobs.engine import RunArtifacts, _run_stage3, emit_plots, reference_signal, simulate
from extobs.errors import ConfigError
from extobs.lre_chain import GainProblem
from extobs.verify import check_heterogeneity


def test_engines_agree(short_cfg):
    # the regression chain is one shared code path; the compiled and
    # reference integrators must agree on every state trajectory
    art_np = simulate(short_cfg, engine="numpy")
    art_nb = simulate(short_cfg, engine="numba")
    for key in ("xe", "q", "phi", "x_hat", "x_star", "kappa_hat", "y_h", "u_h",
                "qbar", "phibar", "phibar_f"):
        a, b = art_np.series[key], art_nb.series[key]
        scale = max(1.0, float(np.max(np.abs(b))))
        assert np.max(np.abs(a - b)) / scale <= 1e-10, key


def test_stage3_engines_agree_with_active_law(setup, short_cfg):
    """Synthetic regression data with the switch on: both integrators must
    produce the same estimates."""
    n_full = 400
    dt = 1e-3
    t_h = np.arange(2 * n_full + 1) * dt / 2
    y_h = 3.0 * np.sin(2.0 * t_h)
    u_h = 1.5 * np.cos(3.0 * t_h) + 0.2
    target = np.concatenate([setup.ext.theta_ab, setup.gain_true])
    chain = {
        "m_kappa": np.full(n_full + 1, 0.5),
        "y_kappa": np.tile(0.5 * target, (n_full + 1, 1)),
        "delta_raw": np.ones(n_full + 1),
    }
    outs = []
    for engine in ("numpy", "numba"):
        s3 = _run_stage3(build_runtime(short_cfg), dt, n_full, y_h, u_h, chain, engine)
        outs.append(s3)
    for key in ("x_hat", "x_star", "kappa_hat", "gamma", "lambda_max"):
        a, b = outs[0][key], outs[1][key]
        scale = max(1.0, float(np.max(np.abs(b))))
        assert np.max(np.abs(a - b)) / scale <= 1e-10, key
    # the law actually moved the estimate toward the regression ratio
    final_err = np.linalg.norm(outs[1]["kappa_hat"][-1] - target)
    start_err = np.linalg.norm(outs[1]["kappa_hat"][0] - target)
    assert final_err < 0.7 * start_err


def test_deterministic_output(tmp_path, short_cfg):
    d1 = simulate(short_cfg, engine="numba").save(tmp_path / "a")
    d2 = simulate(short_cfg, engine="numba").save(tmp_path / "b")
    for name in ("plant", "filters", "chain", "observer"):
        assert (d1 / f"{name}.csv").read_bytes() == (d2 / f"{name}.csv").read_bytes()


def test_reference_signal_clamped(demo_cfg):
    t = np.array([0.0, 10.0, demo_cfg.t_eps, demo_cfg.t_eps + 2.0])
    r = reference_signal(t, demo_cfg)
    expected_pre = demo_cfg.r0 + demo_cfg.r_amp * np.sin(demo_cfg.r_freq * t[:3])
    assert np.allclose(r[:3], expected_pre)
    decayed = demo_cfg.r0 + demo_cfg.r_amp * np.exp(-2.0) * np.sin(demo_cfg.r_freq * t[3])
    assert r[3] == pytest.approx(decayed)
    assert np.all(np.abs(r - demo_cfg.r0) <= demo_cfg.r_amp + 1e-12)


def test_config_validation_rejections(demo_cfg):
    with pytest.raises(ConfigError):
        build_runtime(replace(demo_cfg, theta=np.array([1.0, 2.0, 0.0])))  # unobservable
    with pytest.raises(ConfigError):
        build_runtime(replace(demo_cfg, dt=-1.0))
    with pytest.raises(ConfigError):
        build_runtime(replace(demo_cfg, rho=-0.1))
    with pytest.raises(ConfigError):
        build_runtime(replace(demo_cfg, t_eps=100.0))
    with pytest.raises(ConfigError, match="Hurwitz"):
        build_runtime(replace(demo_cfg, g=np.array([[1.0, 0.0], [0.0, -1.0]])))
    with pytest.raises(ConfigError, match="controllable"):
        build_runtime(replace(demo_cfg, l=np.zeros(2)))


def test_diagonal_gamma_rejected(setup):
    """The repeated-pole target must be realized nonderogatorily: a diagonal
    Gamma cannot be observed through a single output."""
    prob = GainProblem(
        gamma=-np.eye(5),
        a_delta_embed=setup.ext.a_delta_embed,
        c_e=setup.ext.c_e,
        d_phi=setup.spec.d_phi,
        l_at=setup.spec.l_at,
        l_b=setup.spec.l_b,
    )
    with pytest.raises(ConfigError, match="observable"):
        prob.validate(setup.ext)


def test_corrupted_mapping_detected(demo_cfg, monkeypatch):
    """A sign flip inside one transform breaks its defining identity, and the
    check names the offending mapping."""
    map_s, map_g, map_theta = demo.MAPPING_SETS["demo"]()
    orig = map_g.t_of

    def bad_t(xi):
        out = orig(xi).copy()
        out[..., 0, 0] = -out[..., 0, 0]
        return out

    from dataclasses import replace as dreplace

    bad_g = dreplace(map_g, t_of=bad_t)
    monkeypatch.setitem(demo.MAPPING_SETS, "demo", lambda: (map_s, bad_g, map_theta))
    results = check_heterogeneity(demo_cfg, seed=0, n_probes=50)
    failed = [r for r in results if not r.ok]
    assert any("g_demo" in r.name for r in failed)


def test_emit_plots_constant_series(tmp_path):
    n = 11
    t = np.linspace(0.0, 1.0, n)
    series = {
        "phibar_f_eta": np.ones(n),
        "lemma1_gap": np.zeros(n),
        "kappa_err": np.column_stack([np.full(n, 2.0), np.full(n, -3.0)] + [np.zeros(n)] * 7),
        "x_hat": np.zeros((n, 5)),
        "x_star": -np.ones((n, 5)),
        "delta_hat": np.full(n, 4.0),
        "delta_star": np.zeros(n),
    }
    art = RunArtifacts(t=t, series=series, summary={}, stride=1)
    outdir = emit_plots(art, tmp_path)
    data = np.loadtxt(outdir / "theta_ab_errors.dat", skiprows=1)
    assert np.allclose(data[:, 1], 1.0)
    assert np.allclose(data[:, 2], -1.0)
    state = np.loadtxt(outdir / "state_errors.dat", skiprows=1)
    assert np.allclose(state[:, 1:], 1.0)  # constant difference normalizes to +1
    dist = np.loadtxt(outdir / "disturbance_error.dat", skiprows=1)
    assert np.allclose(dist[:, 1], 1.0)


def test_emit_plots_empty_raises(tmp_path):
    art = RunArtifacts(t=np.array([]), series={}, summary={}, stride=1)
    with pytest.raises(ValueError, match="empty"):
        emit_plots(art, tmp_path)
    assert not any(tmp_path.iterdir())


def test_zero_disturbance_baseline_tracks_plant(demo_cfg, setup):
    cfg = replace(demo_cfg, dt=2.5e-4, t_final=2.0, t_eps=1.0, k_amp=1e-30,
                  x0e=np.array([-1.0, 0.0, 2.0, 0.0, 0.0]),
                  x_hat0=np.array([-1.0, 0.0, 2.0, 0.0, 0.0]),
                  kappa_hat0=setup.kappa_true)
    art = simulate(cfg, engine="numba")
    assert np.abs(art.series["delta_true"]).max() == 0.0
    scale = float(np.abs(art.series["xe"]).max())
    err = np.linalg.norm(art.series["x_star"] - art.series["xe"], axis=1)
    assert err.max() <= 1e-6 * scale
    # exact parameters: adaptive observer coincides with the baseline
    assert np.abs(art.series["x_hat"] - art.series["x_star"]).max() <= 1e-9 * scale


def test_integrator_convergence_smoke(short_cfg):
    art1 = simulate(short_cfg, engine="numba")
    art2 = simulate(replace(short_cfg, dt=short_cfg.dt / 2), engine="numba")
    final1 = art1.series["x_hat"][-1]
    final2 = art2.series["x_hat"][-1]
    rel = np.linalg.norm(final1 - final2) / max(1.0, np.linalg.norm(final2))
    # coarse-step smoke check; the production-precision bound is criterion 8
    assert rel < 1e-5


def test_summary_and_tables(short_cfg, tmp_path):
    art = simulate(short_cfg, engine="numba")
    outdir = art.save(tmp_path)
    with open(outdir / "summary.json", "r", encoding="utf-8") as fh:
        summary = json.load(fh)
    assert summary["engine"] == "numba"
    header, data = art.table("observer")
    assert header[0] == "t"
    assert np.all(np.diff(data[:, 0]) > 0)
    assert np.all(np.isfinite(data))


def test_cli_gain_and_simulate(tmp_path, capsys):
    assert cli_main(["gain"]) == 0
    out = capsys.readouterr().out
    assert "beta" in out and "19.97" in out

    cfg_path = tmp_path / "short.yaml"
    cfg_path.write_text(
        "filters:\n  t_eps: 1.0\nsim:\n  t_final: 2.0\n  dt: 1.0e-3\n  output_stride: 10\n")
    assert cli_main(["simulate", "--config", str(cfg_path),
                     "--out", str(tmp_path / "run")]) == 0
    assert (tmp_path / "run" / "observer.csv").exists()
    assert (tmp_path / "run" / "regression_overlay.dat").exists()

    assert cli_main(["plots", "--config", str(cfg_path),
                     "--out", str(tmp_path / "plots")]) == 0
    assert (tmp_path / "plots" / "state_errors.dat").exists()


def test_cli_config_error_exit_code(tmp_path):
    cfg_path = tmp_path / "bad.yaml"
    cfg_path.write_text("theta: [1.0, 2.0, 0.0]\n")
    assert cli_main(["gain", "--config", str(cfg_path)]) == 2
