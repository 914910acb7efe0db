import numpy as np
import pytest

from alaam import _kernels
from alaam.ee import DIVERGED, DZ_NOT_ZERO, EEChain, EEConfig, algorithm_s, batch_means_cov, read_run_csv, \
    read_status, run_ee, run_file, status_file, summarize_run, write_run_csv, write_status
from alaam.errors import InsufficientData
from alaam.inference import pool_runs
from alaam.sampler import make_rng

from conftest import ten_node_problem

SMALL = EEConfig(Ms=100, Mee=3000, burninIters=500, thinInterval=10)


def assert_update_identity(chain, config):
    th, dz = chain.thetaTrace, chain.dzTrace
    nxt = np.vstack([th[1:], chain.final_theta(config)])
    # replaying the rule reproduces every transition bit for bit
    replay = th - np.sign(dz) * config.r * np.maximum(np.abs(th), config.c)
    assert np.array_equal(nxt, replay)
    assert np.any(dz != 0) and np.all(nxt[dz == 0] == th[dz == 0])


def test_config():
    assert EEConfig().Nm == 490
    assert SMALL.Nm == 250
    with pytest.raises(ValueError):
        EEConfig(Mee=100, burninIters=100)
    with pytest.raises(ValueError):
        EEConfig(r=0)


def test_update_identity_replay():
    model, observed, _ = ten_node_problem()
    chain = run_ee(model, observed, SMALL, seed=4)
    assert chain.thetaTrace.shape == (3000, 3) and not chain.failed
    assert_update_identity(chain, SMALL)


def test_algorithm_s_moves_at_most_r_c_from_zero():
    model, observed, _ = ten_node_problem()
    cfg = EEConfig(Ms=50, Mee=10, burninIters=0, initSteps=100)
    theta = algorithm_s(model, observed, cfg, make_rng(1))
    assert np.all(np.abs(theta) > 0)
    # starting at zero each step changes theta by r*max(|theta|, c); bounded by c*((1+r)^k - 1)
    assert np.all(np.abs(theta) <= cfg.c * ((1 + cfg.r) ** cfg.initSteps - 1) + 1e-15)
    assert np.array_equal(algorithm_s(model, observed, EEConfig(initSteps=0), make_rng(1)), np.zeros(3))


def test_algorithm_s_leaves_outcome_untouched():
    model, observed, _ = ten_node_problem()
    before = observed.values.copy()
    algorithm_s(model, observed, SMALL, make_rng(2))
    assert np.array_equal(observed.values, before)


def test_run_deterministic_per_index():
    model, observed, _ = ten_node_problem()
    a = run_ee(model, observed, SMALL, seed=7, run_index=2)
    b = run_ee(model, observed, SMALL, seed=7, run_index=2)
    c = run_ee(model, observed, SMALL, seed=7, run_index=3)
    assert np.array_equal(a.thetaTrace, b.thetaTrace)
    assert not np.array_equal(a.thetaTrace, c.thetaTrace)


def test_batch_means_iid():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(40_000, 2)) * [1.0, 3.0]
    mean, cov = batch_means_cov(x)
    np.testing.assert_allclose(np.diag(cov), [1.0, 9.0], rtol=0.15)
    np.testing.assert_allclose(mean, x.mean(axis=0))


def test_batch_means_ar1():
    rng = np.random.default_rng(1)
    phi, n = 0.8, 200_000
    e = rng.normal(size=n)
    x = np.empty(n)
    x[0] = e[0]
    for t in range(1, n):
        x[t] = phi * x[t - 1] + e[t]
    # asymptotic variance of an AR(1) mean: 1 / (1 - phi)^2
    _, cov = batch_means_cov(x)
    assert cov[0, 0] == pytest.approx(1 / (1 - phi) ** 2, rel=0.2)


def test_batch_means_batch_arithmetic():
    x = np.arange(10, dtype=float)
    # b = 3, a = 3, trailing element dropped
    _, cov = batch_means_cov(x)
    means = np.array([1.0, 4.0, 7.0])
    assert cov[0, 0] == pytest.approx(3 / 2 * np.sum((means - x.mean()) ** 2))
    with pytest.raises(InsufficientData):
        batch_means_cov(np.arange(3.0)[:1])


def test_summary_standard_error_formula():
    model, observed, _ = ten_node_problem()
    chain = run_ee(model, observed, SMALL, seed=5)
    est = summarize_run(chain, SMALL)
    assert est.Nm == SMALL.Nm
    W = est.T / est.Nm + np.linalg.inv(est.V / est.Nm)
    np.testing.assert_allclose(est.stdError, np.sqrt(np.diag((W + W.T) / 2)))
    np.testing.assert_allclose(est.theta, chain.thetaTrace[500:3000:10].mean(axis=0))


def test_dz_ratio_rule():
    rng = np.random.default_rng(3)
    cfg = EEConfig(Ms=1, Mee=2000, burninIters=0, thinInterval=1)
    dz = rng.normal(size=(2000, 2))
    dz[:, 1] += 1.0  # mean far from zero relative to sd
    chain = EEChain(rng.normal(size=(2000, 2)), dz, np.zeros(2000), np.zeros(2))
    est = summarize_run(chain, cfg)
    assert not est.converged and est.failReason == DZ_NOT_ZERO
    assert est.dzRatio[1] > 0.3 > est.dzRatio[0]


def test_divergence_truncates():
    model, observed, _ = ten_node_problem()
    cfg = EEConfig(Ms=100, Mee=3000, burninIters=10, r=0.5, maxAbsTheta=0.5)
    chain = run_ee(model, observed, cfg, seed=1)
    assert chain.failReason == DIVERGED and len(chain.thetaTrace) < cfg.Mee
    est = summarize_run(chain, cfg)
    assert not est.converged and est.failReason == DIVERGED


def test_csv_round_trip(tmp_path):
    model, observed, _ = ten_node_problem()
    chain = run_ee(model, observed, SMALL, seed=6)
    est = summarize_run(chain, SMALL)
    write_run_csv(chain, model.names, run_file(tmp_path, 0))
    write_status(est, status_file(tmp_path, 0))
    back = read_run_csv(run_file(tmp_path, 0))
    assert back.names == model.names
    assert np.array_equal(back.thetaTrace, chain.thetaTrace)
    assert np.array_equal(back.dzTrace, chain.dzTrace)
    again = summarize_run(back, SMALL)
    assert np.array_equal(again.theta, est.theta) and again.converged == est.converged
    assert read_status(status_file(tmp_path, 0))["converged"] == str(est.converged).lower()


def test_dz_tracks_statistics_relative_to_observed():
    model, observed, _ = ten_node_problem()
    z_obs = model.observed_stats(observed)
    rng = np.random.default_rng(12)
    y = observed.indicator()
    free = observed.free_nodes.astype(np.int64)
    theta, dz = np.zeros(3), np.zeros(3)
    rows, ms = 50, 30
    traces = np.zeros((rows, 3)), np.zeros((rows, 3)), np.zeros(rows)
    for _ in range(4):
        _kernels.ee_iterations(y, free, theta, dz, 0.01, 0.01, 1e10, rng.integers(0, free.size, (rows, ms)),
                               rng.random((rows, ms)), *traces, 0, *model.compiled.arrays())
        np.testing.assert_allclose(dz, model.observed_stats(y) - z_obs, atol=1e-9)
        np.testing.assert_allclose(traces[1][-1], dz)


def test_runs_near_exact_mle():
    model, observed, enum = ten_node_problem()
    mle = enum.mle(model.observed_stats(observed))
    cfg = EEConfig(Ms=100, Mee=20000)
    runs = [summarize_run(run_ee(model, observed, cfg, seed=21, run_index=j), cfg) for j in range(20)]
    pooled = pool_runs(runs)
    inside = [np.all(np.abs(r.theta - mle) <= 3 * pooled.stdError) for r in runs if r.converged]
    assert len(inside) >= 18 and np.mean(inside) >= 0.95
