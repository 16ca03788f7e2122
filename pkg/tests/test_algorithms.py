import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edas import lazy_metropolis, ring, spectral
from edas.algorithms import (DRAW_BLOCK, EdasState, SampleFeed, StepsizeSchedule, centralized_sgd_step,
                             dsgd_step, dsgt_init, dsgt_step, edas_step_primal_dual, edas_step_three_term, run)
from edas.exceptions import ContractError, DivergenceError, ParameterError
from edas.mixing import beta_shift
from edas.problems import quadratic_problem, synthetic_logistic, logistic_problem

from strategies import random_connected_graph

ALPHA = StepsizeSchedule(20, 200)


def test_schedule():
    s = StepsizeSchedule(20, 200)
    a = s(np.arange(1000))
    assert np.all(a > 0) and np.all(np.diff(a) < 0)
    assert s(0) == 0.1
    t = StepsizeSchedule.from_theta(5.0, 2.0, 10.0)
    assert t(0) == pytest.approx(5 / (2 * 10))
    assert t.theta(2.0) == pytest.approx(5.0)
    with pytest.raises(ParameterError):
        StepsizeSchedule(0, 1)
    with pytest.raises(ParameterError):
        StepsizeSchedule(1, -1)


# ---------------------------------------------------------------- EDAS


def test_primal_dual_single_agent_is_sgd():
    st_ = EdasState.initial(np.array([[2.0, -1.0]]))
    g = np.array([[0.5, 0.25]])
    out = edas_step_primal_dual(st_, np.eye(1), np.zeros((1, 1)), g, 0.1)
    assert np.array_equal(out.X, st_.X - 0.1 * g)
    assert out.k == 1


def test_primal_dual_zero_gradient_is_consensus(ring8, rng):
    X = rng.standard_normal((8, 2))
    out = edas_step_primal_dual(EdasState.initial(X), ring8.W, ring8.V, np.zeros_like(X), 0.3)
    assert np.allclose(out.X, ring8.W @ X, atol=1e-15)


def test_primal_dual_fixed_point(ring8):
    prob = quadratic_problem(ring8, noise_sigma=0.0)
    alpha = 0.05
    X = np.broadcast_to(prob.x_star, (8, 1)).copy()
    st_ = EdasState(X, "primal-dual", Y=ring8.y_star(alpha, prob.grad_F_star))
    for _ in range(20):
        st_ = edas_step_primal_dual(st_, ring8.W, ring8.V, prob.gradients(st_.X), alpha)
    assert np.abs(st_.X - prob.x_star).max() <= 1e-10


def test_primal_dual_shape_errors(ring8):
    st_ = EdasState.initial(np.zeros((8, 1)))
    with pytest.raises(ContractError):
        edas_step_primal_dual(st_, ring8.W, ring8.V, np.zeros((8, 2)), 0.1)
    with pytest.raises(ContractError):
        edas_step_primal_dual(EdasState.initial(np.zeros((7, 1))), ring8.W, ring8.V, np.zeros((7, 1)), 0.1)
    with pytest.raises(ContractError):
        edas_step_primal_dual(EdasState.initial(np.zeros((8, 1)), "three-term"), ring8.W, ring8.V,
                              np.zeros((8, 1)), 0.1)
    with pytest.raises(ParameterError):
        EdasState.initial(np.zeros((8, 1)), "other")


def test_three_term_first_step(ring8, rng):
    X0, G0 = rng.standard_normal((2, 8, 1))
    out = edas_step_three_term(EdasState.initial(X0, "three-term"), ring8.W, G0, 0.1)
    assert np.allclose(out.X, ring8.W @ (X0 - 0.1 * G0), atol=0)
    assert out.X_prev is not None and np.array_equal(out.G_prev, G0)


def test_three_term_missing_history(ring8):
    st_ = EdasState(np.zeros((8, 1)), "three-term", k=3)
    with pytest.raises(ContractError, match="k=3"):
        edas_step_three_term(st_, ring8.W, np.zeros((8, 1)), 0.1)


def test_three_term_single_agent_matches_sgd():
    rng = np.random.default_rng(0)
    g = lambda x, noise: 1.3 * (x - 0.7) + noise
    noise = 0.1 * rng.standard_normal(300)
    x_sgd = np.zeros((1, 1))
    st_ = EdasState.initial(np.zeros((1, 1)), "three-term")
    for k in range(300):
        st_ = edas_step_three_term(st_, np.eye(1), g(st_.X, noise[k]), ALPHA(k))
        x_sgd = centralized_sgd_step(x_sgd, g(x_sgd, noise[k]), ALPHA(k))
    assert np.allclose(st_.X, x_sgd, rtol=1e-12, atol=1e-14)


@settings(max_examples=8)
@given(st.integers(3, 14), st.integers(0, 2**31), st.sampled_from(["quadratic", "logistic"]))
def test_forms_agree_on_random_instances(n, seed, kind):
    spec = spectral(lazy_metropolis(random_connected_graph(n, seed, 0.2)))
    if kind == "quadratic":
        prob = quadratic_problem(spec, p=2, noise_sigma=0.1)
        sched = ALPHA
    else:
        prob = logistic_problem(synthetic_logistic(n, 8, 3, seed=seed % 1000), minibatch=2)
        sched = StepsizeSchedule(6, 20)
    a = run("edas", prob, spec, sched, 1000, seed=seed, replicas=2)
    b = run("edas3", prob, spec, sched, 1000, seed=seed, replicas=2)
    scale = np.abs(a.final).max()
    assert np.abs(a.final - b.final).max() <= 1e-9 * max(scale, 1.0)
    assert np.allclose(a.metrics["mse"], b.metrics["mse"], rtol=1e-8, atol=1e-14)


# ---------------------------------------------------------------- DSGD / DSGT / SGD


def test_dsgd_variants(ring8, rng):
    X, G = rng.standard_normal((2, 8, 3))
    assert np.allclose(dsgd_step(X, ring8.W, G, 0.1), ring8.W @ (X - 0.1 * G))
    assert np.allclose(dsgd_step(X, ring8.W, G, 0.1, "cta"), ring8.W @ X - 0.1 * G)
    assert np.allclose(dsgd_step(X, ring8.W, np.zeros_like(X), 0.1), ring8.W @ X)
    I = np.eye(8)
    assert np.allclose(dsgd_step(X, I, G, 0.1, "atc"), X - 0.1 * G)
    assert np.allclose(dsgd_step(X, I, G, 0.1, "cta"), X - 0.1 * G)
    with pytest.raises(ParameterError):
        dsgd_step(X, ring8.W, G, 0.1, "other")
    with pytest.raises(ContractError):
        dsgd_step(X, ring8.W, G[:, :2], 0.1)


def test_dsgt_single_agent():
    g = lambda x: 2.0 * x + 1.0
    st_ = dsgt_init(np.array([[1.0]]), g(np.array([[1.0]])))
    out = dsgt_step(st_, np.eye(1), 0.1, g)
    assert np.allclose(out.X, 1.0 - 0.1 * 3.0)
    assert np.allclose(out.Y, g(out.X))


def test_dsgt_fixed_point(ring8):
    prob = quadratic_problem(ring8, noise_sigma=0.0)
    X = np.broadcast_to(prob.x_star, (8, 1)).copy()
    st_ = dsgt_init(X, prob.gradients(X))
    for _ in range(50):
        st_ = dsgt_step(st_, ring8.W, 0.05, prob.gradients)
        assert st_.X.mean(axis=0) == pytest.approx(prob.x_star, abs=1e-12)


def test_dsgt_conservation(ring8_problem, ring8):
    feed = SampleFeed(ring8_problem, 4, [0])
    X = np.zeros((1, 8, 1))
    st_ = dsgt_init(X, ring8_problem.stochastic_gradients(X, feed(0)))
    for k in range(1000):
        st_ = dsgt_step(st_, ring8.W, ALPHA(k), lambda Xn: ring8_problem.stochastic_gradients(Xn, feed(k + 1)))
        assert np.abs(st_.Y.mean(axis=-2) - st_.G_prev.mean(axis=-2)).max() <= 1e-10


def test_centralized_sgd_examples(ring8):
    prob = quadratic_problem(ring8, noise_sigma=0.0)
    x = np.array([0.25])
    G = prob.gradients(np.broadcast_to(x, (8, 1)))
    out = centralized_sgd_step(x, G, 0.01)
    assert np.allclose(out, x - 0.01 * np.sqrt(8) * (x - prob.x_star), atol=1e-15)
    assert np.allclose(centralized_sgd_step(np.ones(2), np.array([[0.5, 1.0]]), 0.1), [0.95, 0.9])


def test_centralized_gradient_variance(ring8_problem):
    rng = np.random.default_rng(3)
    x = np.zeros((8, 1))
    G = ring8_problem.stochastic_gradients(x, ring8_problem.draw(rng, (10_000,))).mean(axis=-2)
    var = G.var(axis=0).sum()
    target = ring8_problem.sigma_bar_sq / 8
    assert abs(var - target) <= 0.05 * target


# ---------------------------------------------------------------- engine


def test_run_zero_iterations(ring8_problem, ring8):
    rec = run("edas", ring8_problem, ring8, ALPHA, 0)
    assert len(rec) == 1
    assert rec.metrics["mse"][0, 0] == pytest.approx(np.mean((ring8_problem.x_star) ** 2))


@pytest.mark.parametrize("method", ["edas", "edas3", "dsgd", "dsgt", "sgd"])
def test_run_is_deterministic(method, ring8_problem, ring8):
    a = run(method, ring8_problem, ring8, ALPHA, 300, seed=9, replicas=3, record=("mse", "consensus"))
    b = run(method, ring8_problem, ring8, ALPHA, 300, seed=9, replicas=3, record=("mse", "consensus"))
    for k in a.metrics:
        assert np.array_equal(a.metrics[k], b.metrics[k])
    assert len(a) == 301


def test_replica_subsets_and_horizon_prefix(ring8_problem, ring8):
    full = run("edas", ring8_problem, ring8, ALPHA, 600, seed=2, replicas=4)
    part = run("edas", ring8_problem, ring8, ALPHA, 600, seed=2, replicas=[2, 3])
    assert np.array_equal(full.metrics["mse"][:, 2:], part.metrics["mse"])
    short = run("edas", ring8_problem, ring8, ALPHA, DRAW_BLOCK + 7, seed=2, replicas=4)
    assert np.array_equal(full.metrics["mse"][:DRAW_BLOCK + 8], short.metrics["mse"])


def test_zero_noise_edas_converges(ring8):
    prob = quadratic_problem(ring8, noise_sigma=0.0)
    rec = run("edas", prob, ring8, ALPHA, 20_000)
    assert rec.metrics["mse"][-1, 0] <= 1e-6


def test_divergence_is_reported(ring8_problem, ring8):
    with pytest.raises(DivergenceError) as info:
        run("dsgd", ring8_problem, ring8, StepsizeSchedule(1e3, 1.0), 2000, replicas=2)
    err = info.value
    assert err.algorithm == "dsgd" and err.iteration > 0 and f"k={err.iteration}" in str(err)


def test_run_validation(ring8_problem, ring8):
    with pytest.raises(ParameterError):
        run("nope", ring8_problem, ring8, ALPHA, 1)
    with pytest.raises(ParameterError):
        run("edas", ring8_problem, ring8, ALPHA, 1, record=("bogus",))
    with pytest.raises(ContractError):
        run("edas", ring8_problem, spectral(lazy_metropolis(ring(5))), ALPHA, 1)


def test_lyapunov_records_skipped_with_reason(ring8_problem, ring8):
    rec = run("edas", ring8_problem, ring8, ALPHA, 5, record=("mse", "Tk", "Hk"))
    assert set(rec.skipped) == {"Tk", "Hk"} and "lambda" in rec.skipped["Tk"]
    rec = run("dsgd", ring8_problem, ring8, ALPHA, 5, record=("mse", "Tk"))
    assert "dual" in rec.skipped["Tk"]


def test_single_agent_methods_match_sgd():
    spec = spectral(np.eye(1))
    prob = quadratic_problem(spec, p=2, noise_sigma=0.3)
    ref = run("sgd", prob, spec, ALPHA, 400, seed=5, replicas=2).metrics["mse"]
    for method in ("edas", "edas3", "dsgd", "dsgt"):
        out = run(method, prob, spec, ALPHA, 400, seed=5, replicas=2).metrics["mse"]
        assert np.allclose(out, ref, rtol=1e-10, atol=1e-15), method


def _manual_edas(prob, spec, iters, seed=0):
    feed = SampleFeed(prob, seed, [0])
    st_ = EdasState.initial(np.zeros((1, prob.n, prob.p)))
    for k in range(iters):
        G = prob.stochastic_gradients(st_.X, feed(k))
        new = edas_step_primal_dual(st_, spec.W, spec.V, G, ALPHA(k))
        yield k, st_, G, new
        st_ = new


def test_mean_iterate_law_and_dual_conservation(ring8_problem, ring8):
    for k, old, G, new in _manual_edas(ring8_problem, ring8, 1000):
        lhs = new.X.mean(axis=-2)
        rhs = old.X.mean(axis=-2) - ALPHA(k) * G.mean(axis=-2)
        assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, np.abs(rhs).max())
        assert np.abs(new.Y.sum(axis=-2)).max() <= 1e-10


def test_mean_iterate_law_logistic():
    spec = spectral(lazy_metropolis(ring(6)))
    prob = logistic_problem(synthetic_logistic(6, 10, 3, seed=1))
    for k, old, G, new in _manual_edas(prob, spec, 300):
        rhs = old.X.mean(axis=-2) - ALPHA(k) * G.mean(axis=-2)
        assert np.abs(new.X.mean(axis=-2) - rhs).max() <= 1e-12 * max(1.0, np.abs(rhs).max())


def test_dsgd_cta_runs(ring8_problem, ring8):
    a = run("dsgd", ring8_problem, ring8, ALPHA, 50, variant="cta")
    b = run("dsgd", ring8_problem, ring8, ALPHA, 50, variant="atc")
    assert not np.array_equal(a.final, b.final)


def test_nonzero_initializer(ring8_problem, ring8):
    rec = run("edas", ring8_problem, ring8, ALPHA, 0, x0=np.full((8, 1), 2.0))
    assert rec.metrics["mse"][0, 0] == pytest.approx(np.mean((2.0 - ring8_problem.x_star) ** 2))


def test_shifted_ring_lyapunov_records():
    spec = spectral(beta_shift(lazy_metropolis(ring(8)), 0.75))
    prob = quadratic_problem(spec, noise_sigma=0.0)
    rec = run("edas", prob, spec, ALPHA, 20_000, record=("mse", "Mk", "Tk", "Hk"))
    assert not rec.skipped
    T, H, M = rec.metrics["Tk"][:, 0], rec.metrics["Hk"][:, 0], rec.metrics["Mk"][:, 0]
    assert np.all(H >= M)
    assert T[-1] <= 1e-10 * T[0]
    # alpha_0 = 0.1 is already below min(1/(3 mu), 2/(mu + L)); allow a warm-up
    assert np.all(np.diff(H[500:]) <= 1e-15 * H[500:-1])
