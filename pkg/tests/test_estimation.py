import math

import numpy as np
import pytest
from scipy.optimize import minimize

from pairshrink.data import Dataset, ItemUniverse, build_graph
from pairshrink.estimation import (FitConfig, FitError, QualityVector,
                                   choice_prob, ctmc_rate_matrix, fit_mle,
                                   log_likelihood, model_from_json,
                                   model_to_json)


def make_dataset(n, records):
    return Dataset(ItemUniverse(tuple(f"i{k}" for k in range(n))),
                   tuple(records))


def random_connected_dataset(rng, n, extra=10):
    # round-robin backbone (one win each way) keeps the graph strongly
    # connected; extra records randomize the counts
    recs = [(i, j) for i in range(n) for j in range(n) if i != j]
    for _ in range(extra):
        i, j = rng.choice(n, size=2, replace=False)
        recs.append((int(i), int(j)))
    return make_dataset(n, recs)


def direct_penalized_mle(data, epsilon):
    """Oracle: maximize the penalized log-likelihood over log-parameters."""
    rec = np.asarray(data.records).reshape(-1, 2)
    n = data.n

    def objective(theta_free):
        theta = np.concatenate([[0.0], theta_free])
        g = np.exp(theta)
        s = g[rec[:, 0]] + g[rec[:, 1]]
        ll = float(np.sum(theta[rec[:, 0]] - np.log(s)))
        ll += epsilon * (float(theta.sum()) - n * math.log(g.sum()))
        grad = np.zeros(n)
        np.add.at(grad, rec[:, 0], 1.0 - g[rec[:, 0]] / s)
        np.add.at(grad, rec[:, 1], -g[rec[:, 1]] / s)
        grad += epsilon * (1.0 - n * g / g.sum())
        return -ll, -grad[1:]

    res = minimize(objective, np.zeros(n - 1), jac=True, method="L-BFGS-B",
                   options={"maxiter": 20000, "ftol": 1e-18, "gtol": 1e-14})
    g = np.exp(np.concatenate([[0.0], res.x]))
    return g / g.sum()


def dense_chain_fit(data, epsilon, tol=1e-12, max_iter=1000):
    """Oracle: iterate the stationary distribution of the full dense rate
    matrix (prior terms included entrywise), no sparse-form rearrangement."""
    graph = build_graph(data)
    n = data.n
    gamma = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        Q = ctmc_rate_matrix(QualityVector(gamma), graph, epsilon)
        A = Q.T.copy()
        b = np.zeros(n)
        pin = int(np.argmax(gamma))
        A[pin, :] = 1.0
        b[pin] = 1.0
        new = np.linalg.solve(A, b)
        new = np.maximum(new, 1e-300)
        new /= new.sum()
        if np.max(np.abs(new - gamma)) < tol:
            return new
        gamma = new
    return gamma


class TestQualityVector:
    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            QualityVector(np.array([0.0, 1.0]))
        with pytest.raises(ValueError):
            QualityVector(np.array([-0.1, 1.1]))

    def test_rejects_bad_sum(self):
        with pytest.raises(ValueError):
            QualityVector(np.array([0.5, 0.6]))

    def test_json_round_trip(self):
        model = QualityVector(np.array([0.25, 0.75]))
        text = model_to_json(model, ("a", "b"), epsilon=1e-6, loglik=-1.0)
        again, items = model_from_json(text)
        assert items == ("a", "b")
        assert np.allclose(again.gamma, model.gamma)


class TestChoiceProb:
    def test_equal_strength(self):
        model = QualityVector(np.array([0.5, 0.5]))
        assert choice_prob(model, 0, 1) == 0.5

    def test_direct_formula(self):
        model = QualityVector(np.array([0.75, 0.25]))
        assert choice_prob(model, 0, 1) == pytest.approx(0.75)

    def test_complementarity(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            g = rng.dirichlet(np.ones(5))
            model = QualityVector(g / g.sum())
            i, j = rng.choice(5, size=2, replace=False)
            total = choice_prob(model, int(i), int(j)) + choice_prob(model, int(j), int(i))
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_self_comparison_error(self):
        with pytest.raises(ValueError):
            choice_prob(QualityVector(np.array([0.5, 0.5])), 1, 1)


class TestLogLikelihood:
    def test_single_record(self):
        model = QualityVector(np.array([0.5, 0.5]))
        data = make_dataset(2, [(0, 1)])
        assert log_likelihood(model, data) == pytest.approx(math.log(0.5))

    def test_empty(self):
        model = QualityVector(np.array([0.5, 0.5]))
        assert log_likelihood(model, make_dataset(2, [])) == 0.0

    def test_two_records(self):
        model = QualityVector(np.array([2 / 3, 1 / 3]))
        data = make_dataset(2, [(0, 1), (1, 0)])
        expected = math.log(2 / 3) + math.log(1 / 3)  # = -1.5040773967762740
        assert log_likelihood(model, data) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(-1.504077, abs=1e-6)

    def test_matches_choice_prob_sum(self):
        rng = np.random.default_rng(2)
        g = rng.dirichlet(np.ones(4))
        model = QualityVector(g / g.sum())
        data = random_connected_dataset(rng, 4)
        by_hand = sum(math.log(choice_prob(model, w, l)) for w, l in data.records)
        assert log_likelihood(model, data) == pytest.approx(by_hand, rel=1e-12)


class TestRateMatrix:
    def test_hand_example(self):
        model = QualityVector(np.array([0.5, 0.5]))
        graph = build_graph(make_dataset(2, [(0, 1), (1, 0)]))
        Q = ctmc_rate_matrix(model, graph, epsilon=0.0)
        assert np.allclose(Q, [[-1.0, 1.0], [1.0, -1.0]])

    def test_zero_data_zero_rates(self):
        model = QualityVector(np.array([0.5, 0.5]))
        graph = build_graph(make_dataset(2, []))
        assert not ctmc_rate_matrix(model, graph, epsilon=0.0).any()

    def test_rows_sum_to_zero(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            n = int(rng.integers(2, 7))
            data = random_connected_dataset(rng, n, extra=5)
            g = rng.dirichlet(np.ones(n))
            model = QualityVector(g / g.sum())
            Q = ctmc_rate_matrix(model, build_graph(data), epsilon=rng.random() * 0.1)
            assert np.allclose(Q.sum(axis=1), 0.0, atol=1e-12)


class TestFitMle:
    def test_two_item_closed_form(self):
        data = make_dataset(2, [(0, 1), (0, 1), (1, 0)])
        model = fit_mle(data, FitConfig(epsilon=0.0))
        assert np.allclose(model.gamma, [2 / 3, 1 / 3], atol=1e-8)

    def test_two_item_matches_direct_maximization(self):
        data = make_dataset(2, [(0, 1), (0, 1), (1, 0)])
        model = fit_mle(data, FitConfig(epsilon=0.0))
        oracle = direct_penalized_mle(data, epsilon=0.0)
        assert np.max(np.abs(model.gamma - oracle)) < 1e-8

    def test_balanced_round_robin_is_uniform(self):
        for n in (3, 5):
            recs = [(i, j) for i in range(n) for j in range(n) if i != j]
            model = fit_mle(make_dataset(n, recs), FitConfig(epsilon=0.0))
            assert np.allclose(model.gamma, 1.0 / n, atol=1e-8)

    def test_never_winner_stays_positive(self):
        data = make_dataset(3, [(0, 1), (1, 0), (0, 2), (1, 2)])
        model = fit_mle(data, FitConfig(epsilon=1e-6))
        assert np.all(model.gamma > 0)
        assert np.argmin(model.gamma) == 2

    def test_disconnected_without_prior_is_error(self):
        data = make_dataset(2, [(0, 1), (0, 1)])
        with pytest.raises(FitError, match="strongly connected"):
            fit_mle(data, FitConfig(epsilon=0.0))

    def test_prior_equivalence_with_direct_maximization(self):
        rng = np.random.default_rng(11)
        for n in (3, 4, 5):
            data = random_connected_dataset(rng, n, extra=8)
            model = fit_mle(data, FitConfig(epsilon=1e-6))
            oracle = direct_penalized_mle(data, epsilon=1e-6)
            assert np.max(np.abs(model.gamma - oracle)) < 1e-6

    def test_prior_equivalence_disconnected_data(self):
        # item 2 never wins, estimate exists only through the prior
        data = make_dataset(3, [(0, 1), (1, 0), (0, 2), (1, 2)])
        model = fit_mle(data, FitConfig(epsilon=1e-3))
        oracle = direct_penalized_mle(data, epsilon=1e-3)
        assert np.max(np.abs(model.gamma - oracle)) < 1e-6

    def test_sparse_system_matches_dense_chain(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            n = int(rng.integers(3, 9))
            data = random_connected_dataset(rng, n, extra=int(rng.integers(0, 15)))
            for eps in (0.0, 1e-6, 1e-3):
                fitted = fit_mle(data, FitConfig(epsilon=eps, tol=1e-12))
                dense = dense_chain_fit(data, epsilon=eps)
                assert np.max(np.abs(fitted.gamma - dense)) < 1e-8

    def test_gradient_vanishes_at_mle(self):
        rng = np.random.default_rng(17)
        for _ in range(5):
            n = int(rng.integers(3, 6))
            data = random_connected_dataset(rng, n, extra=6)
            model = fit_mle(data, FitConfig(epsilon=0.0, tol=1e-12))
            h = 1e-6
            grad = np.zeros(n)

            # central differences of the raw (unnormalized) likelihood
            def ll(g):
                rec = np.asarray(data.records)
                return float(np.sum(np.log(g[rec[:, 0]])
                                    - np.log(g[rec[:, 0]] + g[rec[:, 1]])))
            for i in range(n):
                up = model.gamma.copy()
                down = model.gamma.copy()
                up[i] += h
                down[i] -= h
                grad[i] = (ll(up) - ll(down)) / (2 * h)
            tangent = grad - grad.mean()
            assert np.max(np.abs(tangent)) < 1e-6

    def test_fit_improves_likelihood_over_uniform(self):
        rng = np.random.default_rng(19)
        for _ in range(10):
            n = int(rng.integers(2, 7))
            data = random_connected_dataset(rng, n, extra=12)
            model = fit_mle(data, FitConfig(epsilon=0.0))
            uniform = QualityVector(np.full(n, 1.0 / n))
            assert log_likelihood(model, data) >= log_likelihood(uniform, data) - 1e-9

    def test_deterministic(self):
        data = make_dataset(3, [(0, 1), (1, 2), (2, 0), (0, 2)])
        a = fit_mle(data)
        b = fit_mle(data)
        assert np.array_equal(a.gamma, b.gamma)

    def test_empty_data_with_prior_is_uniform(self):
        model = fit_mle(make_dataset(3, []), FitConfig(epsilon=1e-6))
        assert np.allclose(model.gamma, 1 / 3, atol=1e-12)

    def test_nonconvergence_carries_last_iterate(self):
        data = make_dataset(3, [(0, 1), (1, 2), (2, 0), (0, 2), (0, 1)])
        with pytest.raises(FitError) as exc_info:
            fit_mle(data, FitConfig(epsilon=0.0, tol=1e-16, max_iter=1))
        assert exc_info.value.last_estimate is not None
        assert exc_info.value.last_estimate.shape == (3,)
