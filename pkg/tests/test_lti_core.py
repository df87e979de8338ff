import numpy as np
import pytest

from extobs import demo, lti_core
from extobs.errors import ConfigError


@pytest.fixture(scope="module")
def spec():
    return demo.build_system()


@pytest.fixture(scope="module")
def exo():
    return demo.default_exosystem()


def test_build_extended_demo_values(spec, exo):
    ext = lti_core.build_extended(spec, exo, np.array([1.0, 2.0, 3.0]))
    assert ext.n_e == 5
    assert np.allclose(ext.theta_ab, [3.0, 2.0, 2.0, 3.0])
    assert np.allclose(ext.b_e, [0.0, 0.0, 3.0, 0.0, 0.0])
    # disturbance input row: D(theta) h^T with theta1*theta2 = 2
    assert np.allclose(ext.a_e[0, 3:], [2.0, 0.0])
    assert np.allclose(ext.c_e, [0.0, 0.0, 1.0, 0.0, 0.0])


def test_build_extended_zero_theta(spec, exo):
    ext = lti_core.build_extended(spec, exo, np.zeros(3))
    assert np.all(ext.a_e == 0.0)
    assert np.all(ext.b_e == 0.0)
    assert np.allclose(ext.a_delta_embed[3:, 3:], exo.a_delta)


def test_build_extended_dimension_mismatch(spec):
    bad_exo = lti_core.ExosystemSpec(
        a_delta=np.array([[-1.0]]), h_delta=np.array([1.0]))
    with pytest.raises(ConfigError):
        lti_core.build_extended(spec, bad_exo, np.array([1.0, 2.0, 3.0]))


def test_regressor_rows_match_display(spec, exo):
    rng = np.random.default_rng(0)
    x = rng.standard_normal(5)
    u = rng.standard_normal()
    phi_t = lti_core.regressor_phi(x, u, spec)
    expected = np.array([
        [x[1], x[3], 0.0, 0.0],
        [0.0, 0.0, x[2] - x[0], 0.0],
        [0.0, 0.0, 0.0, u - x[1]],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
    ])
    assert np.allclose(phi_t, expected)
    assert np.all(lti_core.regressor_phi(np.zeros(5), 0.0, spec) == 0.0)


def test_regressor_factorization_property(spec, exo):
    rng = np.random.default_rng(1)
    for _ in range(1000):
        theta = rng.uniform(0.2, 4.0, 3)
        ext = lti_core.build_extended(spec, exo, theta)
        x = rng.standard_normal(5) * rng.choice([1.0, 10.0, 100.0])
        u = rng.standard_normal() * 10
        lhs = lti_core.regressor_phi(x, u, spec) @ ext.theta_ab
        rhs = ext.a_e @ x + ext.b_e * u
        assert np.linalg.norm(lhs - rhs) <= 1e-10 * (1 + np.linalg.norm(x) + abs(u))


def test_canonical_demo_closed_forms(spec):
    cf = lti_core.canonical_transform(spec, np.array([1.0, 2.0, 3.0]))
    assert np.allclose(cf.psi_a, [0.0, -12.0, 0.0], atol=1e-9)
    assert np.allclose(cf.psi_b, [3.0, 0.0, 18.0], atol=1e-9)
    assert np.allclose(cf.psi_d, [0.0, 0.0, 12.0], atol=1e-9)
    assert np.allclose(cf.t @ cf.t_inv, np.eye(3), atol=1e-10)
    assert np.allclose(cf.c_0, [1.0, 0.0, 0.0], atol=1e-12)


def test_canonical_identity_when_already_canonical():
    # a system already in canonical coordinates keeps T = identity
    a0 = np.diag(np.ones(2), 1)
    psi = np.array([-3.0, -3.0, -1.0])

    spec = lti_core.SystemSpec(
        name="canon", n=3, n_theta=1, n_Theta=1,
        a_of=lambda th: a0 + np.outer(psi, [1.0, 0.0, 0.0]),
        b_of=lambda th: np.array([0.0, 0.0, th[0]]),
        d_of=lambda th: np.zeros(3),
        c=np.array([1.0, 0.0, 0.0]),
        d_phi=np.zeros((30, 1)), l_phi=np.zeros((1, 30)),
        l_at=np.zeros((25, 30)), l_b=np.zeros((5, 30)),
        l_ab=np.zeros((1, 6)),
    )
    cf = lti_core.canonical_transform(spec, np.array([1.0]))
    assert np.allclose(cf.t, np.eye(3), atol=1e-9)
    assert np.allclose(cf.psi_a, psi, atol=1e-9)


def test_canonical_consistency_random(spec):
    rng = np.random.default_rng(2)
    for _ in range(100):
        theta = rng.uniform(0.5, 5.0, 3)
        cf = lti_core.canonical_transform(spec, theta)
        a = spec.a_of(theta)
        lhs = cf.a_0 + np.outer(cf.psi_a, cf.c_0)
        rhs = cf.t @ a @ cf.t_inv
        scale = max(1.0, np.linalg.norm(rhs))
        assert np.linalg.norm(lhs - rhs) <= 1e-9 * scale
        assert np.allclose(cf.psi_b, cf.t @ spec.b_of(theta), rtol=1e-9, atol=1e-9)
        # closed forms of the demo family
        assert np.allclose(cf.psi_a, demo.psi_a_closed(theta), rtol=1e-8, atol=1e-8)
        assert np.allclose(cf.psi_b, demo.psi_b_closed(theta), rtol=1e-8, atol=1e-8)
        assert np.allclose(cf.psi_d, demo.psi_d_closed(theta), rtol=1e-8, atol=1e-8)


def test_canonical_unobservable_raises(spec):
    with pytest.raises(ConfigError, match="not observable"):
        lti_core.canonical_transform(spec, np.array([1.0, 2.0, 0.0]))


def test_psi_ab_jacobian_full_rank(spec):
    from extobs.config import _psi_ab_jacobian_det

    det, _ = _psi_ab_jacobian_det(spec, np.array([1.0, 2.0, 3.0]))
    assert det**2 > 1e-6


def test_excitation_level_cases():
    dt = 1e-3
    n = 1001
    e1 = np.zeros((n, 3))
    e1[:, 0] = 1.0
    assert lti_core.excitation_level(e1, 0.0, 1.0, dt) == pytest.approx(0.0, abs=1e-12)

    dt = 2 * np.pi / 4000
    t = np.arange(4001) * dt
    circ = np.column_stack([np.cos(t), np.sin(t)])
    alpha = lti_core.excitation_level(circ, 0.0, 2 * np.pi, dt)
    assert alpha == pytest.approx(np.pi, rel=1e-4)

    with pytest.raises(ValueError):
        lti_core.excitation_level(circ, 1.0, 1.0, dt)
