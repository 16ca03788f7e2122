"""Near-sharp quadratic benchmark ``f(x) = (1/n) sum_i (sqrt(n)/2) ||x - d_i||^2``."""

from __future__ import annotations

import numpy as np

from ..exceptions import ParameterError
from ..mixing import SpectralMixing
from .base import ProblemInstance


class QuadraticProblem(ProblemInstance):
    """Quadratic with targets ``d_i = a_i sqrt(i) 1`` (``a_i`` the i-th smallest
    eigenvalue of ``W``, ``i`` 1-indexed) and additive isotropic Gaussian noise.
    """

    kind = "quadratic"

    def __init__(self, d, noise_sigma: float = 0.1):
        d = np.asarray(d, dtype=float)
        if d.ndim != 2:
            raise ParameterError(f"targets must be an n x p matrix, got shape {d.shape}")
        if noise_sigma < 0:
            raise ParameterError(f"noise_sigma must be >= 0, got {noise_sigma}")
        self.d = d
        self.n, self.p = d.shape
        self.noise_sigma = float(noise_sigma)
        self.scale = np.sqrt(self.n)
        self.mu = self.L = float(self.scale)
        self.sigma_sq = np.full(self.n, self.noise_sigma**2 * self.p)
        self.x_star = d.mean(axis=0)
        self.grad_F_star = self.scale * (self.x_star - d)

    def gradients(self, X):
        return self.scale * (np.asarray(X, dtype=float) - self.d)

    def objective(self, x):
        x = np.asarray(x, dtype=float)
        return float(np.mean(0.5 * self.scale * np.sum((x - self.d) ** 2, axis=1)))

    def draw(self, rng, size=()):
        shape = tuple(size) + (self.n, self.p)
        if self.noise_sigma == 0.0:
            return np.zeros(shape)
        return self.noise_sigma * rng.standard_normal(shape)

    def stochastic_gradients(self, X, sample):
        return self.gradients(X) + sample

    def describe(self):
        out = super().describe()
        out["noise_sigma"] = self.noise_sigma
        return out


def quadratic_problem(spec: SpectralMixing, p: int = 1, noise_sigma: float = 0.1) -> QuadraticProblem:
    if p < 1:
        raise ParameterError(f"dimension p must be positive, got {p}")
    a = spec.ascending_eigenvalues()
    idx = np.arange(1, spec.n + 1)
    d = np.repeat((a * np.sqrt(idx))[:, None], p, axis=1)
    return QuadraticProblem(d, noise_sigma)
