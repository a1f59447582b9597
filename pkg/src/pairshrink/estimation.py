"""Bradley-Terry-Luce probabilities, likelihoods, and spectral MLE fitting.

The model assigns each item a positive quality gamma_i, normalized to the
simplex, with P(i beats j) = gamma_i / (gamma_i + gamma_j). The maximum
likelihood estimate is computed by iterative spectral ranking: each iterate
builds a continuous-time Markov chain whose transition rate from i to j
aggregates j's wins over i scaled by 1/(gamma_i + gamma_j), and solves for
its stationary distribution. A Dirichlet prior of strength epsilon adds a
uniform epsilon rate between every ordered pair, which keeps the estimate
well defined even when the comparison graph is not strongly connected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .data import ComparisonGraph, Dataset, build_graph, is_strongly_connected


class FitError(RuntimeError):
    """Fitting failed; carries the last iterate when one exists."""

    def __init__(self, message: str, last_estimate: np.ndarray | None = None):
        super().__init__(message)
        self.last_estimate = last_estimate


@dataclass(frozen=True)
class QualityVector:
    """Positive item qualities summing to 1 (L1-normalized)."""

    gamma: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        object.__setattr__(self, "gamma", g)
        if g.ndim != 1 or g.size < 2:
            raise ValueError("gamma must be a vector of length >= 2")
        if np.any(g <= 0):
            raise ValueError("gamma entries must be positive")
        if abs(g.sum() - 1.0) > 1e-9:
            raise ValueError(f"gamma must sum to 1, got {g.sum():.12f}")
        g.setflags(write=False)

    @property
    def n(self) -> int:
        return self.gamma.size


@dataclass(frozen=True)
class FitConfig:
    """Fitting knobs: prior strength, convergence tolerance, iteration cap."""

    epsilon: float = 1e-6
    tol: float = 1e-9
    max_iter: int = 200

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


def choice_prob(model: QualityVector, i: int, j: int) -> float:
    """P(i chosen over j) = gamma_i / (gamma_i + gamma_j)."""
    if i == j:
        raise ValueError("cannot compare an item with itself")
    g = model.gamma
    return float(g[i] / (g[i] + g[j]))


def log_likelihood(model: QualityVector, data: Dataset) -> float:
    """Sum over records of log P(winner beats loser) under the model."""
    if model.n != data.n:
        raise ValueError(f"model has {model.n} items, data has {data.n}")
    if not data.records:
        return 0.0
    rec = np.asarray(data.records)
    g = model.gamma
    return float(np.sum(np.log(g[rec[:, 0]]) - np.log(g[rec[:, 0]] + g[rec[:, 1]])))


def ctmc_rate_matrix(model: QualityVector, graph: ComparisonGraph,
                     epsilon: float) -> np.ndarray:
    """Rate matrix Q with Q[i, j] = M[j, i]/(gamma_i + gamma_j) + epsilon.

    The i -> j rate aggregates j's wins over i; rows sum to zero.
    """
    if model.n != graph.n:
        raise ValueError(f"model has {model.n} items, graph has {graph.n}")
    g = model.gamma
    pair_sum = g[:, None] + g[None, :]
    Q = graph.M.T / pair_sum + epsilon
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    return Q


def _solve_stationary(Qt: np.ndarray, pin: int) -> np.ndarray:
    # Solve Q^T x = 0 for the stationary distribution by replacing the
    # equation at `pin` with the normalization sum(x) = 1.
    n = Qt.shape[0]
    A = Qt.copy()
    b = np.zeros(n)
    A[pin, :] = 1.0
    b[pin] = 1.0
    return np.linalg.solve(A, b)


def fit_mle(data: Dataset, config: FitConfig = FitConfig()) -> QualityVector:
    """Fit BTL qualities by iterative spectral ranking.

    With epsilon = 0 this is the plain MLE and requires the comparison graph
    to be strongly connected. With epsilon > 0 the fit maximizes the
    epsilon-penalized likelihood (equivalent to epsilon pseudo-choices of
    each item from the full universe) and always exists; each iterate then
    solves the strictly diagonally dominant system
    (Qtilde^T - n*eps*I) x = -eps * sum(gamma_t) * 1, whose solution is
    positive and keeps the running normalization.

    Raises:
        FitError: epsilon = 0 on a non-strongly-connected graph (the MLE
            does not exist), or no convergence within max_iter (the error
            carries the last iterate).
    """
    graph = build_graph(data)
    n = data.n
    eps = config.epsilon
    if eps == 0.0 and not is_strongly_connected(graph):
        raise FitError("MLE does not exist: comparison graph is not strongly "
                       "connected (no chain of wins links every pair); "
                       "fit with epsilon > 0 or restrict to the largest "
                       "strongly connected component")

    gamma = np.full(n, 1.0 / n)
    Mf = graph.M.astype(float)
    for _ in range(config.max_iter):
        pair_sum = gamma[:, None] + gamma[None, :]
        Qt_tilde = Mf / pair_sum  # transpose of the zero-prior rate matrix
        np.fill_diagonal(Qt_tilde, 0.0)
        Qt_tilde -= np.diag(Qt_tilde.sum(axis=0))
        if eps == 0.0:
            new = _solve_stationary(Qt_tilde, pin=int(np.argmax(gamma)))
        else:
            A = Qt_tilde - n * eps * np.eye(n)
            new = np.linalg.solve(A, np.full(n, -eps * gamma.sum()))
        new = np.maximum(new, 1e-300)
        new /= new.sum()
        delta = float(np.max(np.abs(new - gamma)))
        gamma = new
        if delta < config.tol:
            return QualityVector(gamma)
    raise FitError(f"no convergence after {config.max_iter} iterations "
                   f"(last max change {delta:.3e})", last_estimate=gamma)


def model_to_json(model: QualityVector, items: tuple[str, ...],
                  epsilon: float, loglik: float) -> str:
    """Serialize a fitted model with its item ids."""
    if len(items) != model.n:
        raise ValueError("item list does not match model dimension")
    return json.dumps({
        "items": list(items),
        "gamma": [float(x) for x in model.gamma],
        "epsilon": epsilon,
        "loglik": loglik,
    })


def model_from_json(text: str) -> tuple[QualityVector, tuple[str, ...]]:
    """Load a model and its item ids from JSON."""
    doc = json.loads(text)
    model = QualityVector(np.asarray(doc["gamma"], dtype=float))
    items = tuple(str(x) for x in doc["items"])
    if len(items) != model.n:
        raise ValueError("item list does not match gamma length")
    return model, items
