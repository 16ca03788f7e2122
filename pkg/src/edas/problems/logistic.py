"""Regularised logistic regression spread over agent-local datasets."""

from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from ..exceptions import DataError, NumericalError, ParameterError
from .base import ProblemInstance

logger = logging.getLogger(__name__)


class Partition(NamedTuple):
    """One agent's local dataset; ``indices`` point back into the source pool."""

    features: np.ndarray
    labels: np.ndarray
    indices: np.ndarray


class LogisticProblem(ProblemInstance):
    """``f_i(x) = mean_j log(1 + exp(-v_j u_j^T x)) + (rho/2) ||x||^2``.

    Stochastic gradients average ``minibatch`` per-sample gradients drawn
    uniformly with replacement from the local dataset.  The reported
    ``L = rho + max_j ||u_j||^2 / 4`` bounds every local curvature and the
    per-agent variance bound is ``mean_j ||u_j||^2 / minibatch`` (each
    per-sample data gradient has norm at most ``||u_j||``).
    """

    kind = "logistic"

    def __init__(self, partitions, rho: float = 1.0, minibatch: int = 1,
                 x_star_solver_tol: float = 1e-10, max_solver_iter: int = 500_000):
        if rho <= 0:
            raise ParameterError(f"rho must be positive, got {rho}")
        if minibatch < 1:
            raise ParameterError(f"minibatch must be positive, got {minibatch}")
        parts = [Partition(np.asarray(p[0], dtype=float), np.asarray(p[1], dtype=float),
                           np.asarray(p[2] if len(p) > 2 else np.arange(len(p[1]))))
                 for p in partitions]
        if not parts:
            raise DataError("no partitions supplied")
        dims = {p.features.shape[1] if p.features.ndim == 2 else -1 for p in parts}
        if len(dims) != 1 or -1 in dims:
            raise DataError(f"inconsistent feature dimensions across partitions: {sorted(dims)}")
        for i, part in enumerate(parts):
            if len(part.labels) == 0:
                raise DataError(f"partition {i} is empty")
            if part.features.shape[0] != len(part.labels):
                raise DataError(f"partition {i}: {part.features.shape[0]} feature rows vs {len(part.labels)} labels")
            if not np.all(np.isin(part.labels, (-1.0, 1.0))):
                raise DataError(f"partition {i}: labels must be -1 or +1")

        self.partitions = parts
        self.n = len(parts)
        self.p = dims.pop()
        self.rho = float(rho)
        self.minibatch = int(minibatch)
        self.sizes = np.array([len(part.labels) for part in parts])
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)[:-1]])
        self.U = np.vstack([part.features for part in parts])
        self.v = np.concatenate([part.labels for part in parts])
        self._agent_of = np.repeat(np.arange(self.n), self.sizes)

        sq = np.sum(self.U**2, axis=1)
        self.mu = self.rho
        self.L = float(self.rho + sq.max() / 4.0)
        self.sigma_sq = np.array([sq[o:o + s].mean() for o, s in zip(self.offsets, self.sizes)]) / self.minibatch
        self.x_star_solver_tol = float(x_star_solver_tol)
        self.x_star, self.solver_iterations = self._solve(max_solver_iter)
        self.grad_F_star = self.gradients(np.broadcast_to(self.x_star, (self.n, self.p)))

    def _sample_grads(self, x_rows, rows):
        # per-sample data gradient -v u sigmoid(-v u^T x)
        margin = self.v[rows] * np.einsum("...p,...p->...", self.U[rows], x_rows)
        return (-self.v[rows] * expit(-margin))[..., None] * self.U[rows]

    def gradients(self, X):
        X = np.asarray(X, dtype=float)
        out = np.empty(X.shape)
        for i, (o, s) in enumerate(zip(self.offsets, self.sizes)):
            Ui, vi = self.U[o:o + s], self.v[o:o + s]
            xi = X[..., i, :]
            margin = (xi @ Ui.T) * vi
            coef = -vi * expit(-margin)
            out[..., i, :] = coef @ Ui / s + self.rho * xi
        return out

    def objective(self, x):
        x = np.asarray(x, dtype=float)
        margins = self.v * (self.U @ x)
        loss = np.logaddexp(0.0, -margins)
        local = np.bincount(self._agent_of, weights=loss, minlength=self.n) / self.sizes
        return float(local.mean() + 0.5 * self.rho * x @ x)

    def _solve(self, max_iter):
        step = 1.0 / self.L
        x = np.zeros(self.p)
        for it in range(max_iter):
            g = self.full_gradient(x)
            if np.linalg.norm(g) <= self.x_star_solver_tol:
                return x, it
            x = x - step * g
        raise NumericalError(
            f"reference solver did not reach gradient norm {self.x_star_solver_tol} in {max_iter} iterations"
        )

    def draw(self, rng, size=()):
        shape = tuple(size) + (self.n, self.minibatch)
        high = self.sizes[:, None]
        return rng.integers(0, high, size=shape)

    def stochastic_gradients(self, X, sample):
        X = np.asarray(X, dtype=float)
        rows = self.offsets[:, None] + np.asarray(sample)
        lead = np.broadcast_shapes(X.shape[:-2], rows.shape[:-2])
        X = np.broadcast_to(X, lead + X.shape[-2:])
        rows = np.broadcast_to(rows, lead + rows.shape[-2:])
        h = self._sample_grads(X[..., :, None, :], rows)
        return h.mean(axis=-2) + self.rho * X

    def variance_at(self, x) -> np.ndarray:
        """Exact per-agent variance of the stochastic gradient at ``x``."""
        x = np.asarray(x, dtype=float)
        rows = np.arange(len(self.v))
        h = self._sample_grads(np.broadcast_to(x, (len(rows), self.p)), rows)
        out = np.empty(self.n)
        for i, (o, s) in enumerate(zip(self.offsets, self.sizes)):
            hi = h[o:o + s]
            out[i] = np.sum((hi - hi.mean(axis=0)) ** 2) / s
        return out / self.minibatch

    def describe(self):
        out = super().describe()
        out.update(rho=self.rho, minibatch=self.minibatch, local_sizes=self.sizes.tolist(),
                   sigma_bar_sq_at_optimum=float(self.variance_at(self.x_star).mean()),
                   solver_iterations=self.solver_iterations)
        return out


def logistic_problem(partitions, rho: float = 1.0, minibatch: int = 1, **kwargs) -> LogisticProblem:
    return LogisticProblem(partitions, rho=rho, minibatch=minibatch, **kwargs)
