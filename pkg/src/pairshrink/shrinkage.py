"""Empirical Bayes priors and James-Stein shrinkage of fitted qualities.

The shrunk estimate pulls the MLE toward a target vector u with matrix
weight W = Sigma (Sigma + A)^-1, where Sigma is the covariance of the MLE
and A the prior covariance. The prior is a Dirichlet centered at the MLE
with concentration n, whose exact covariance has zero row sums; the target
is uniform, or per-group means when the data is bipartite (two-group).
"""

from __future__ import annotations

import numpy as np

from dataclasses import dataclass

from .data import RaschStructure
from .estimation import QualityVector
from .fisher import PINV_RCOND, CovarianceEstimate, implicit_shrink_matrix


@dataclass(frozen=True)
class PriorSpec:
    """Shrinkage target u (on the simplex) and prior covariance A."""

    u: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        A = np.asarray(self.A, dtype=float)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "A", A)
        if np.any(u <= 0) or abs(u.sum() - 1.0) > 1e-9:
            raise ValueError("target u must be positive and sum to 1")
        if A.shape != (u.size, u.size):
            raise ValueError("A must be n x n for the n-vector u")
        if float(np.max(np.abs(A - A.T))) > 1e-10:
            raise ValueError("prior covariance must be symmetric")
        u.setflags(write=False)
        A.setflags(write=False)


def dirichlet_prior_cov(model: QualityVector, printed_variant: bool = False) -> np.ndarray:
    """Covariance of a Dirichlet prior centered at the model, concentration n.

    Exact moments: A_ii = g_i (1 - g_i) / (n + 1) and
    A_ij = -g_i g_j / (n + 1), which is PSD with zero row sums.
    `printed_variant` instead returns the alternative form with diagonal
    g_i (1 - g_i) / (n (n + 1)) and positive off-diagonal g_i g_j / (n + 1),
    kept for ablation only.
    """
    g = model.gamma
    n = model.n
    if printed_variant:
        A = np.outer(g, g) / (n + 1)
        np.fill_diagonal(A, g * (1 - g) / (n * (n + 1)))
        return A
    A = -np.outer(g, g) / (n + 1)
    np.fill_diagonal(A, g * (1 - g) / (n + 1))
    return A


def uniform_target(n: int) -> np.ndarray:
    """Constant target 1/n."""
    if n < 2:
        raise ValueError("need at least 2 items")
    return np.full(n, 1.0 / n)


def rasch_target(model: QualityVector, structure: RaschStructure) -> np.ndarray:
    """Per-item target equal to the mean fitted quality of the item's group."""
    if len(structure.groups) != model.n:
        raise ValueError("structure does not match model dimension")
    g = model.gamma
    u = np.empty(model.n)
    for grp in (0, 1):
        members = structure.members(grp)
        if not members:
            raise ValueError(f"group {grp} is empty")
        u[members] = g[members].mean()
    return u


def make_prior(model: QualityVector, structure: RaschStructure | None = None,
               printed_variant: bool = False) -> PriorSpec:
    """Default prior: Dirichlet covariance at the model; group-mean target
    when a two-group structure is present, uniform otherwise."""
    if structure is not None:
        u = rasch_target(model, structure)
    else:
        u = uniform_target(model.n)
    return PriorSpec(u=u, A=dirichlet_prior_cov(model, printed_variant))


def _shrink(gamma: np.ndarray, W: np.ndarray, u: np.ndarray) -> QualityVector:
    out = gamma - W @ gamma + W @ u
    out = np.maximum(out, 1e-12)
    return QualityVector(out / out.sum())


def james_stein(gamma_mle: QualityVector, sigma: CovarianceEstimate,
                prior: PriorSpec) -> QualityVector:
    """Shrunk estimate (I - W) gamma + W u with W = Sigma (Sigma + A)^-1.

    Sigma + A is pseudo-inverted (relative cutoff PINV_RCOND) when singular.
    Nonpositive entries of the result are clamped to 1e-12 and the vector is
    renormalized to the simplex.
    """
    sig = sigma.sigma()
    A = prior.A
    if sig.shape != A.shape or gamma_mle.n != A.shape[0]:
        raise ValueError("dimension mismatch between model, covariance, and prior")
    W = sig @ np.linalg.pinv(sig + A, rcond=PINV_RCOND, hermitian=True)
    return _shrink(gamma_mle.gamma, W, prior.u)


def james_stein_implicit(gamma_mle: QualityVector, S: CovarianceEstimate,
                         prior: PriorSpec) -> QualityVector:
    """Shrunk estimate using an inverse-covariance estimate S directly.

    The weight on the target is R = (I + A S)^-1, which equals
    Sigma (Sigma + A)^-1 whenever Sigma = S^-1 exists, so this path agrees
    with `james_stein` on invertible estimates without ever inverting S.
    """
    if not S.inverse:
        raise ValueError("expected an inverse-form covariance estimate")
    R = implicit_shrink_matrix(S.matrix, prior.A)
    return _shrink(gamma_mle.gamma, R, prior.u)
