"""scikit-learn style wrappers around :func:`edas.algorithms.run`."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_is_fitted, check_X_y, validate_data
from scipy.special import expit

from .algorithms import StepsizeSchedule, run
from .exceptions import ParameterError
from .mixing import SpectralMixing, lazy_metropolis, spectral
from .problems.logistic import LogisticProblem, Partition
from .topology import ring


class _DecentralizedOptimizer(BaseEstimator):
    """Shared ``fit(problem, mixing)`` for the iterative methods.

    After fitting, ``coef_`` is the network average of the final iterates
    (averaged over replicas), ``iterates_`` the final ``(R, n, p)`` block and
    ``history_`` the per-iteration metrics averaged over replicas.
    """

    _algorithm = None

    def __init__(self, step_numerator=20.0, step_offset=200.0, n_iter=1000, replicas=1,
                 random_state=0, record=("mse",), x0=None):
        self.step_numerator = step_numerator
        self.step_offset = step_offset
        self.n_iter = n_iter
        self.replicas = replicas
        self.random_state = random_state
        self.record = record
        self.x0 = x0

    def _run_kwargs(self):
        return {}

    def fit(self, problem, mixing=None):
        if mixing is None:
            raise ParameterError(f"{type(self).__name__}.fit needs a mixing matrix or SpectralMixing")
        if not isinstance(mixing, SpectralMixing):
            mixing = spectral(mixing)
        schedule = StepsizeSchedule(self.step_numerator, self.step_offset)
        rec = run(self._algorithm, problem, mixing, schedule, int(self.n_iter), seed=int(self.random_state),
                  replicas=int(self.replicas), x0=self.x0, record=tuple(self.record), **self._run_kwargs())
        self.iterates_ = rec.final
        avg = rec.final if rec.final.ndim == 2 else rec.final.mean(axis=1)
        self.coef_ = avg.mean(axis=0)
        self.history_ = {k: rec.mean(k) for k in rec.metrics}
        self.skipped_ = dict(rec.skipped)
        self.n_iter_ = int(self.n_iter)
        return self

    def score(self, problem, mixing=None):
        """Negative objective gap ``-(f(coef_) - f(x*))`` on ``problem``."""
        check_is_fitted(self, "coef_")
        return -(problem.objective(self.coef_) - problem.objective(problem.x_star))


class EDAS(_DecentralizedOptimizer):
    """Exact diffusion with diminishing stepsizes.

    ``form`` selects the primal-dual recursion (default) or the three-term
    recursion; both produce the same iterates for the same samples.
    """

    def __init__(self, step_numerator=20.0, step_offset=200.0, n_iter=1000, replicas=1,
                 random_state=0, record=("mse",), x0=None, form="primal-dual"):
        super().__init__(step_numerator, step_offset, n_iter, replicas, random_state, record, x0)
        self.form = form

    @property
    def _algorithm(self):
        if self.form not in ("primal-dual", "three-term"):
            raise ParameterError(f"unknown EDAS form {self.form!r}")
        return "edas" if self.form == "primal-dual" else "edas3"


class DSGD(_DecentralizedOptimizer):
    def __init__(self, step_numerator=20.0, step_offset=200.0, n_iter=1000, replicas=1,
                 random_state=0, record=("mse",), x0=None, variant="atc"):
        super().__init__(step_numerator, step_offset, n_iter, replicas, random_state, record, x0)
        self.variant = variant

    _algorithm = "dsgd"

    def _run_kwargs(self):
        return {"variant": self.variant}


class DSGT(_DecentralizedOptimizer):
    _algorithm = "dsgt"


class CentralizedSGD(_DecentralizedOptimizer):
    _algorithm = "sgd"


class DecentralizedLogisticRegression(ClassifierMixin, BaseEstimator):
    """Binary L2-regularised logistic regression trained by a decentralized method.

    Rows of ``X`` are dealt round-robin to ``n_agents`` agents on a ring
    with Lazy Metropolis weights; an intercept column is appended.

    Parameters
    ----------
    n_agents : int
    rho : float
        Regularisation weight (also the strong-convexity constant).
    algorithm : {"edas", "edas3", "dsgd", "dsgt", "sgd"}
    minibatch : int
        Samples per stochastic gradient.
    """

    def __init__(self, n_agents=4, rho=1.0, algorithm="edas", step_numerator=6.0, step_offset=20.0,
                 n_iter=2000, minibatch=1, random_state=0):
        self.n_agents = n_agents
        self.rho = rho
        self.algorithm = algorithm
        self.step_numerator = step_numerator
        self.step_offset = step_offset
        self.n_iter = n_iter
        self.minibatch = minibatch
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        validate_data(self, X, reset=True, skip_check_array=True)
        self.classes_ = unique_labels(y)
        if len(self.classes_) != 2:
            raise ValueError(f"binary classification only, got {len(self.classes_)} classes")
        if X.shape[0] < self.n_agents:
            raise ValueError(f"need at least n_agents={self.n_agents} samples, got {X.shape[0]}")
        signs = np.where(y == self.classes_[1], 1.0, -1.0)
        U = np.hstack([X, np.ones((X.shape[0], 1))])
        parts = [Partition(U[i::self.n_agents], signs[i::self.n_agents], np.arange(X.shape[0])[i::self.n_agents])
                 for i in range(self.n_agents)]
        self.problem_ = LogisticProblem(parts, rho=self.rho, minibatch=self.minibatch)
        mixing = spectral(lazy_metropolis(ring(self.n_agents))) if self.n_agents >= 3 else \
            spectral(np.full((self.n_agents, self.n_agents), 1.0 / self.n_agents))
        rec = run(self.algorithm, self.problem_, mixing, StepsizeSchedule(self.step_numerator, self.step_offset),
                  int(self.n_iter), seed=int(self.random_state), replicas=1, record=("mse",))
        w = rec.final[0] if rec.final.ndim == 2 else rec.final[0].mean(axis=0)
        self.coef_ = w[None, :-1]
        self.intercept_ = w[-1:]
        self.mse_history_ = rec.mean("mse")
        self.n_iter_ = int(self.n_iter)
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, reset=False)
        return X @ self.coef_[0] + self.intercept_[0]

    def predict_proba(self, X):
        p1 = expit(self.decision_function(X))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return self.classes_[(self.decision_function(X) > 0).astype(int)]
