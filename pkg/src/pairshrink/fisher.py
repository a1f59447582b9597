"""Fisher information matrices and information-based covariance estimates.

The observed information is the negative mean Hessian of the log-likelihood
at the fitted model; the expected information replaces each recorded choice
with its model-implied expectation while keeping the matchup counts fixed
(computed in closed form, no sampling). Either can be pseudo-inverted into
a covariance estimate for the MLE, or used directly in inverse form to
build the shrinkage weight matrix without ever inverting the information.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .data import Dataset, build_graph
from .estimation import QualityVector

#: Relative singular-value cutoff shared by every pseudo-inverse in the
#: package; the scale direction of the model is always in the null space.
PINV_RCOND = 1e-10

SCHEMES = ("fisher-observed", "fisher-expected",
           "boot-b-p", "boot-b-np", "boot-nb-p", "boot-nb-np")


@dataclass(frozen=True)
class InformationMatrix:
    """Per-comparison information (symmetric n x n) plus the count it averages.

    At the MLE of richly connected data the matrix is positive semidefinite
    on the simplex tangent space; away from the MLE the observed kind can be
    indefinite there, so only symmetry is enforced at construction.
    """

    matrix: np.ndarray
    kind: Literal["observed", "expected"]
    N: int

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("information matrix must be square")
        asym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
        if asym > 1e-10:
            raise ValueError(f"information matrix asymmetric by {asym:.2e}")
        m.setflags(write=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, "N": self.N,
                           "matrix": self.matrix.tolist()})


@dataclass(frozen=True)
class CovarianceEstimate:
    """Covariance of the fitted qualities, or its inverse when `inverse`.

    `scheme` records which estimation route produced it (one of SCHEMES).
    """

    matrix: np.ndarray
    scheme: str
    inverse: bool = False

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("covariance must be square")
        asym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
        if asym > 1e-8:
            raise ValueError(f"covariance asymmetric by {asym:.2e}")
        m.setflags(write=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def sigma(self) -> np.ndarray:
        """Covariance form, pseudo-inverting when held as an inverse."""
        if not self.inverse:
            return self.matrix
        sig = np.linalg.pinv(self.matrix, rcond=PINV_RCOND, hermitian=True)
        return (sig + sig.T) / 2.0

    def to_json(self) -> str:
        return json.dumps({"scheme": self.scheme, "inverse": self.inverse,
                           "matrix": self.matrix.tolist()})


def _check_dims(model: QualityVector, data: Dataset) -> None:
    if model.n != data.n:
        raise ValueError(f"model has {model.n} items, data has {data.n}")


def observed_information(model: QualityVector, data: Dataset) -> InformationMatrix:
    """Negative mean Hessian of the log-likelihood at the model.

    Each record (i beats j) contributes, before the -1/N scaling,
    d2/dgi2 = -1/gi^2 + 1/(gi+gj)^2, d2/dgj2 = 1/(gi+gj)^2, and
    d2/dgi dgj = 1/(gi+gj)^2.
    """
    _check_dims(model, data)
    if not data.records:
        raise ValueError("no information in an empty dataset")
    g = model.gamma
    graph = build_graph(data)
    N = data.N
    inv_sq = 1.0 / (g[:, None] + g[None, :]) ** 2
    J = -graph.B * inv_sq
    wins = graph.M.sum(axis=1)
    np.fill_diagonal(J, wins / g**2 - (graph.B * inv_sq).sum(axis=1))
    return InformationMatrix(matrix=J / N, kind="observed", N=N)


def expected_information(model: QualityVector, data: Dataset) -> InformationMatrix:
    """Model-expected information, keeping the observed matchup counts.

    For each matchup the winner-i contribution is weighted by p_ij and the
    winner-j contribution by p_ji, which collapses to diagonal terms
    1/(s*gi) - 1/s^2 with s = gi + gj; off-diagonals match the observed form.
    """
    _check_dims(model, data)
    if not data.records:
        raise ValueError("no information in an empty dataset")
    g = model.gamma
    graph = build_graph(data)
    N = data.N
    s = g[:, None] + g[None, :]
    inv_sq = 1.0 / s**2
    II = -graph.B * inv_sq
    np.fill_diagonal(II, (graph.B * (1.0 / (s * g[:, None]) - inv_sq)).sum(axis=1))
    return InformationMatrix(matrix=II / N, kind="expected", N=N)


def covariance_from_information(info: InformationMatrix,
                                ridge: bool = False) -> CovarianceEstimate:
    """Covariance estimate pinv(info)/N (the total information is N * info).

    The pseudo-inverse drops singular values below PINV_RCOND relative to
    the largest; scale invariance makes the information singular along the
    model direction. With `ridge`, adds 1e-8 * trace/n to the diagonal and
    uses a plain inverse instead (for ill-conditioned real data).
    """
    if info.N < 1:
        raise ValueError("information must average at least one comparison")
    m = info.matrix
    if not np.any(m):
        raise ValueError("no curvature: information matrix is zero")
    if ridge:
        lam = 1e-8 * np.trace(m) / info.n
        sig = np.linalg.inv(m + lam * np.eye(info.n)) / info.N
    else:
        sig = np.linalg.pinv(m, rcond=PINV_RCOND, hermitian=True) / info.N
    sig = (sig + sig.T) / 2.0
    scheme = "fisher-observed" if info.kind == "observed" else "fisher-expected"
    return CovarianceEstimate(matrix=sig, scheme=scheme)


def inverse_covariance(info: InformationMatrix) -> CovarianceEstimate:
    """Inverse-form estimate S = N * info, for the implicit shrinkage path."""
    scheme = "fisher-observed" if info.kind == "observed" else "fisher-expected"
    return CovarianceEstimate(matrix=info.N * info.matrix, scheme=scheme,
                              inverse=True)


def implicit_shrink_matrix(S: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Shrinkage weight (I + A S)^-1, equal to Sigma (Sigma + A)^-1 for
    Sigma = S^-1, computed by a linear solve rather than an explicit inverse.
    """
    n = S.shape[0]
    lhs = np.eye(n) + A @ S
    try:
        R = np.linalg.solve(lhs, np.eye(n))
    except np.linalg.LinAlgError:
        R = np.linalg.lstsq(lhs, np.eye(n), rcond=None)[0]
    if not np.all(np.isfinite(R)):
        raise np.linalg.LinAlgError("I + A S is singular")
    return R
