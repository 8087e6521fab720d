import json
import warnings

import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given, settings
from hypothesis import strategies as st

from antitree.disorder import DisorderSpec, harmonic_average
from antitree.errors import ConfigurationError, IntegrationError, UnresolvedZerosWarning
from antitree.sde import (
    SdeParams,
    brownian_increments,
    closed_form_limit,
    endpoint_matrices,
    hyperbolic_drift,
    integrate_lambda,
    noise_block,
    s_matrix,
    sample_brownian_increment,
    sample_goe_endpoint,
    sample_goe_endpoints,
    sde_params_from_channels,
    with_noise_scale,
    write_path,
    zero_process,
)
from antitree.transfer import channel_decomposition

TWO = DisorderSpec("two_point_symmetric", 1.0)
STATS = harmonic_average(TWO, 3.0)


def params_for(r, m, offset=0.0, **kw):
    ch = channel_decomposition(TWO, 3.0, STATS.h + offset, r)
    return sde_params_from_channels(ch, STATS, m, **kw), ch


def test_s_matrix():
    z = np.exp(1j * np.array([0.4, 2.0]))
    s = np.diag(s_matrix(z))
    assert np.allclose(s[:2], 1j / (2 * np.sin([0.4, 2.0])))
    assert np.allclose(s[:2], s[2:])


def test_variance_scale_default():
    p, _ = params_for(5, np.inf)
    assert p.variance_scale == pytest.approx(STATS.h ** 4 * STATS.sigma2 / 6)
    assert p.drift == 0.0


def test_hyperbolic_drift():
    p, ch = params_for(3, 100.0, offset=1.7)
    assert (ch.r_h, ch.r_e) == (1, 2)
    g = ch.gamma[0]
    assert p.q == pytest.approx(STATS.h ** 4 * STATS.sigma2 / 4 / (1 / g - g))
    assert hyperbolic_drift(channel_decomposition(TWO, 3.0, STATS.h, 3), STATS) == 0.0
    assert p.drift == pytest.approx((STATS.w_drift - p.q) / 100.0)


def test_increment_structure():
    inc = sample_brownian_increment(4, 0.01, 2.0, 3)
    a, b = inc["dA"], inc["dB"]
    assert np.array_equal(a, a.conj().T)
    assert np.array_equal(b, b.T)
    n = noise_block(a, b)
    assert np.array_equal(n[:4, 4:], b) and np.array_equal(n[4:, 4:], -a.conj())
    with pytest.raises(ConfigurationError):
        sample_brownian_increment(2, 0.0, 1.0, 0)


def test_increment_covariances():
    v, count = 0.7, 200_000
    da, db = brownian_increments(3, count, v, 0)
    dt = 1.0 / count
    scale = v * dt

    def close(samples, target):
        se = samples.std(ddof=1) / np.sqrt(samples.size)
        return abs(samples.mean() - target) <= 5 * se

    assert close(np.abs(da[:, 0, 1]) ** 2 / scale, 1.0)
    assert close(da[:, 0, 0].real ** 2 / scale, 1.5)
    assert close(da[:, 0, 0].real * da[:, 1, 1].real / scale, 1.0)
    assert close(np.abs(db[:, 0, 1]) ** 2 / scale, 1.0)
    assert close(np.abs(db[:, 2, 2]) ** 2 / scale, 1.5)
    # circular: E dB_ij^2 = 0 and E dA_ij^2 = 0 off the diagonal
    assert close((db[:, 0, 1] ** 2).real / scale, 0.0)
    assert close((da[:, 0, 2] ** 2).real / scale, 0.0)
    assert close(da[:, 0, 0].real * db[:, 0, 0].real / scale, 0.0)


def test_zero_noise_matches_expm():
    p, _ = params_for(3, 1e4, eps_grid=np.array([-0.1, 0.0, 0.1]), t_steps=10_000)
    p = with_noise_scale(p, 0.0)
    path = integrate_lambda(p, 0)
    for e, eps in enumerate(p.eps_grid):
        ref = la.expm((eps + p.drift) * p.S @ p.D)
        assert np.max(np.abs(path.endpoint[e] - ref)) <= 1e-6


def test_zero_drift_zero_eps_identity():
    ch = channel_decomposition(TWO, 3.0, STATS.h, 2)
    p = SdeParams(r_e=2, r=2, lambda_stats=STATS, m=50.0, q=STATS.w_drift, S=s_matrix(ch.z),
                  eps_grid=[0.0], t_steps=200, variance_scale=0.0)
    assert p.drift == 0.0
    assert np.array_equal(integrate_lambda(p, 1).endpoint[0], np.eye(4))


def test_dt_refinement_r1():
    p, _ = params_for(1, 1e4, eps_grid=np.array([0.5]))
    p = with_noise_scale(p, 0.0)
    ref = la.expm((0.5 + p.drift) * p.S @ p.D)
    errs = []
    for n in (100, 1000, 10_000):
        p = SdeParams(**{**p.__dict__, "t_steps": n})
        errs.append(np.max(np.abs(integrate_lambda(p, 0).endpoint[0] - ref)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[1] / errs[0] < 0.2


def test_integrate_errors():
    p, _ = params_for(2, np.inf)
    with pytest.raises(ConfigurationError):
        integrate_lambda(p, 0)
    p, _ = params_for(2, 10.0, t_steps=50)
    with pytest.raises(ConfigurationError):
        integrate_lambda(p, 0)
    p, _ = params_for(2, 1e-6, eps_grid=[0.0], t_steps=1000)
    with pytest.raises(IntegrationError):
        integrate_lambda(with_noise_scale(p, 1e3), 0)
    with pytest.raises(ConfigurationError):
        SdeParams(r_e=3, r=2, lambda_stats=STATS, m=1.0, q=0.0, S=np.eye(6), eps_grid=[0.0])


def test_closed_form_affine():
    p, _ = params_for(3, np.inf, t_steps=500)
    path = closed_form_limit(p, 4)
    a1, b1 = endpoint_matrices(p, 4)
    assert np.array_equal(a1, a1.conj().T) and np.array_equal(b1, b1.T)
    for e in (0, 100, 311):
        assert np.allclose(path.endpoint[e], path.evaluate(p.eps_grid[e]), atol=1e-13)
    # collinear in eps
    x = path.endpoint
    assert np.allclose(x[2] - x[1], x[1] - x[0], atol=1e-12)
    assert np.array_equal(path.values[:, 0], np.zeros_like(x))


@pytest.mark.parametrize("r", [1, 3, 5])
def test_zero_process_identity(r):
    p, _ = params_for(r, np.inf, t_steps=200)
    for seed in range(5):
        zeros = zero_process(closed_form_limit(p, seed), "identity")
        a1, b1 = endpoint_matrices(p, seed)
        ref = np.linalg.eigvalsh(np.real(b1 - a1))
        assert zeros.size == r and np.max(np.abs(zeros - ref)) <= 1e-6


def test_zero_process_noise_free():
    p, _ = params_for(2, np.inf, eps_grid=np.linspace(-1, 1, 101), t_steps=200)
    p = with_noise_scale(p, 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnresolvedZerosWarning)
        zeros = zero_process(closed_form_limit(p, 0), "identity")
    assert np.allclose(zeros, [0.0], atol=1e-9)


def test_zero_process_zstar_and_errors():
    p, ch = params_for(2, np.inf, t_steps=200)
    path = closed_form_limit(p, 1)
    zeros = zero_process(path, "zstar", z_star=np.ones(2))
    assert np.allclose(zeros, zero_process(path, "identity"), atol=1e-9)
    with pytest.raises(ConfigurationError):
        zero_process(path, "zstar")
    with pytest.raises(ConfigurationError):
        zero_process(path, "other")


def test_zero_process_em_path():
    p, _ = params_for(1, 1e4, eps_grid=np.linspace(-3, 3, 121), t_steps=1000)
    path = integrate_lambda(p, 2)
    zeros = zero_process(path, "identity")
    # with noise off the only zero of det(L Lambda R) sits where (eps + drift) vanishes
    quiet = zero_process(integrate_lambda(with_noise_scale(p, 0.0), 2), "identity")
    assert zeros.size >= 1 and np.allclose(quiet, [-p.drift], atol=0.06)


@pytest.mark.parametrize("use_k", [True, False])
def test_goe_endpoint_r1_variance(use_k):
    v = STATS.h ** 4 * STATS.sigma2 / 2
    x = sample_goe_endpoints(1, 1, STATS, 5, 200_000, use_K_form=use_k)[:, 0, 0]
    se = (x ** 2).std(ddof=1) / np.sqrt(x.size)
    assert abs(np.mean(x ** 2) - 2.25 * v) <= 5 * se


def test_goe_endpoint_single_and_errors():
    for use_k in (True, False):
        m = sample_goe_endpoint(4, 5, STATS, 0, use_K_form=use_k)
        assert m.shape == (4, 4) and np.array_equal(m, m.T)
    with pytest.raises(ConfigurationError):
        sample_goe_endpoint(4, 3, STATS, 0)


def test_write_path(tmp_path):
    p, _ = params_for(1, 50.0, eps_grid=[0.0, 1.0], t_steps=100)
    path = integrate_lambda(p, 0, save_every=50)
    csv_path, json_path = write_path(path, tmp_path)
    lines = open(csv_path).read().splitlines()
    assert lines[0] == "eps_index,eps,t_index,t,row,col,re,im"
    assert len(lines) - 1 == 2 * 3 * 4
    meta = json.load(open(json_path))
    assert meta["seed"] == 0 and meta["dt"] == 0.01 and meta["params"]["r_e"] == 1


@settings(max_examples=20, deadline=None)
@given(r_e=st.integers(1, 5), seed=st.integers(0, 10 ** 6), v=st.floats(0.01, 10))
def test_increment_symmetries(r_e, seed, v):
    inc = sample_brownian_increment(r_e, 0.1, v, seed)
    assert np.array_equal(inc["dA"], inc["dA"].conj().T)
    assert np.array_equal(inc["dB"], inc["dB"].T)
    m = sample_goe_endpoint(r_e, r_e + 1, STATS, seed, variance_scale=v)
    assert np.array_equal(m, m.T)
