from __future__ import annotations

import numpy as np


class ProblemInstance:
    """Stochastic first-order oracle for ``f = (1/n) sum_i f_i``.

    Subclasses set ``n, p, mu, L, sigma_sq`` (per-agent variance bounds),
    ``x_star`` and ``grad_F_star`` and implement :meth:`gradients`,
    :meth:`draw` and :meth:`stochastic_gradients`.  Randomness is split
    from evaluation: :meth:`draw` consumes a generator and returns the raw
    sample (Gaussian noise, minibatch indices) for a block of iterations,
    so one sample can be replayed through several algorithms.

    Iterate blocks ``X`` have shape ``(..., n, p)``; row ``i`` is evaluated
    with ``f_i``.
    """

    kind = "abstract"
    n: int
    p: int
    mu: float
    L: float
    sigma_sq: np.ndarray
    x_star: np.ndarray
    grad_F_star: np.ndarray

    @property
    def sigma_bar_sq(self) -> float:
        return float(np.mean(self.sigma_sq))

    def gradients(self, X) -> np.ndarray:
        raise NotImplementedError

    def objective(self, x) -> float:
        raise NotImplementedError

    def full_gradient(self, x) -> np.ndarray:
        """Gradient of the average ``f`` at a single point ``x``."""
        X = np.broadcast_to(np.asarray(x, dtype=float), (self.n, self.p))
        return self.gradients(X).mean(axis=0)

    def draw(self, rng: np.random.Generator, size: tuple[int, ...] = ()):
        """Raw randomness for ``size`` iterations; each item covers all agents."""
        raise NotImplementedError

    def stochastic_gradients(self, X, sample) -> np.ndarray:
        raise NotImplementedError

    def stochastic_gradient(self, i: int, x, rng: np.random.Generator) -> np.ndarray:
        """One sample ``g_i(x, xi)`` for a single agent."""
        X = np.zeros((self.n, self.p))
        X[i] = x
        return self.stochastic_gradients(X, self.draw(rng))[i]

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "p": self.p,
            "mu": self.mu,
            "L": self.L,
            "sigma_bar_sq": self.sigma_bar_sq,
            "grad_F_star_norm_sq": float(np.sum(self.grad_F_star**2)),
        }
