"""EDAS (both recursions), DSGD, DSGT and centralized SGD.

Every step function accepts iterate blocks with arbitrary leading batch
axes, shape ``(..., n, p)``, so independent replicas advance together.
:func:`run` drives a method for ``K`` synchronous rounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ContractError, DegenerateSpectrumError, DivergenceError, ParameterError
from .metrics import consensus_error, distributed_mse, lyapunov_weight, transformed_coords
from .mixing import BDecomposition, SpectralMixing

METHODS = ("edas", "edas3", "dsgd", "dsgt", "sgd")
DSGD_VARIANTS = ("atc", "cta")
RECORD_KINDS = ("mse", "consensus", "Mk", "Tk", "Hk")
#: Iterations of randomness drawn per generator call; fixed so that a
#: replica's sample path does not depend on the run horizon.
DRAW_BLOCK = 256
RNG_NAME = "numpy Philox4x32-10 keyed by SeedSequence([seed, replica])"


@dataclass(frozen=True)
class StepsizeSchedule:
    """``alpha_k = numerator / (k + offset)``; equals ``theta / (mu (k + m))``
    with ``numerator = theta / mu`` and ``offset = m``."""

    numerator: float
    offset: float

    def __post_init__(self):
        if not self.numerator > 0:
            raise ParameterError(f"stepsize numerator must be positive, got {self.numerator}")
        if not self.offset > 0:
            raise ParameterError(f"stepsize offset must be positive, got {self.offset}")

    @classmethod
    def from_theta(cls, theta: float, mu: float, m: float) -> "StepsizeSchedule":
        return cls(theta / mu, m)

    def theta(self, mu: float) -> float:
        return self.numerator * mu

    def __call__(self, k):
        return self.numerator / (np.asarray(k, dtype=float) + self.offset) if np.ndim(k) else \
            self.numerator / (k + self.offset)


# ---------------------------------------------------------------- states


@dataclass(frozen=True)
class EdasState:
    X: np.ndarray
    form: str = "primal-dual"
    Y: np.ndarray | None = None
    X_prev: np.ndarray | None = None
    G_prev: np.ndarray | None = None
    alpha_prev: float | None = None
    k: int = 0

    @classmethod
    def initial(cls, X0, form: str = "primal-dual") -> "EdasState":
        X0 = np.asarray(X0, dtype=float)
        if form == "primal-dual":
            return cls(X0, form, Y=np.zeros_like(X0))
        if form == "three-term":
            return cls(X0, form)
        raise ParameterError(f"unknown EDAS form {form!r}")


@dataclass(frozen=True)
class DsgtState:
    X: np.ndarray
    Y: np.ndarray
    G_prev: np.ndarray
    k: int = 0


def _check(W, X, G=None):
    n = W.shape[0]
    if W.shape != (n, n) or X.shape[-2] != n:
        raise ContractError(f"W {W.shape} incompatible with iterates {X.shape}")
    if G is not None and G.shape != X.shape:
        raise ContractError(f"gradient block {G.shape} does not match iterates {X.shape}")


# ---------------------------------------------------------------- steps


def edas_step_primal_dual(state: EdasState, W, V, G, alpha: float) -> EdasState:
    """``X' = W (X - alpha G) - V Y``, ``Y' = Y + V X'``."""
    _check(W, state.X, G)
    if state.Y is None:
        raise ContractError("primal-dual step needs a dual block Y")
    X = W @ (state.X - alpha * G) - V @ state.Y
    Y = state.Y + V @ X
    return replace(state, X=X, Y=Y, k=state.k + 1)


def edas_step_three_term(state: EdasState, W, G, alpha: float, alpha_prev: float | None = None) -> EdasState:
    """Algorithm-1 recursion; the first step is ``X_1 = W (X_0 - alpha_0 G_0)``."""
    _check(W, state.X, G)
    if state.k == 0:
        X = W @ (state.X - alpha * G)
    else:
        if state.X_prev is None or state.G_prev is None:
            raise ContractError(f"three-term step at k={state.k} needs the previous iterate and gradient")
        a_prev = state.alpha_prev if alpha_prev is None else alpha_prev
        X = W @ (2.0 * state.X - state.X_prev - alpha * G + a_prev * state.G_prev)
    return replace(state, X=X, X_prev=state.X, G_prev=G, alpha_prev=alpha, k=state.k + 1)


def dsgd_step(X, W, G, alpha: float, variant: str = "atc"):
    """Adapt-then-combine ``W (X - alpha G)`` or combine-and-adapt ``W X - alpha G``."""
    _check(W, X, G)
    if variant == "atc":
        return W @ (X - alpha * G)
    if variant == "cta":
        return W @ X - alpha * G
    raise ParameterError(f"unknown DSGD variant {variant!r}; expected one of {DSGD_VARIANTS}")


def dsgt_init(X0, G0) -> DsgtState:
    X0 = np.asarray(X0, dtype=float)
    return DsgtState(X0, np.array(G0, dtype=float), np.array(G0, dtype=float))


def dsgt_step(state: DsgtState, W, alpha: float, oracle) -> DsgtState:
    """``X' = W (X - alpha Y)``, ``Y' = W Y + G(X') - G(X)``; ``oracle(X')`` returns ``G(X')``."""
    _check(W, state.X, state.Y)
    X = W @ (state.X - alpha * state.Y)
    G = np.asarray(oracle(X), dtype=float)
    _check(W, X, G)
    Y = W @ state.Y + G - state.G_prev
    return DsgtState(X, Y, G, state.k + 1)


def centralized_sgd_step(x, G_rows, alpha: float):
    """``x' = x - alpha * mean_i g_i(x)`` given one sample per local function."""
    return np.asarray(x) - alpha * np.asarray(G_rows).mean(axis=-2)


# ---------------------------------------------------------------- engine


class SampleFeed:
    """Per-replica keyed generators delivering one sample per iteration."""

    def __init__(self, problem, seed: int, replicas):
        self.problem = problem
        self.gens = [np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(r)])))
                     for r in replicas]
        self._block_id = -1
        self._block = None

    def __call__(self, k: int):
        b, j = divmod(k, DRAW_BLOCK)
        if b != self._block_id:
            if b < self._block_id:
                raise ContractError("samples must be requested in increasing iteration order")
            while self._block_id < b:
                self._block = np.stack([self.problem.draw(g, (DRAW_BLOCK,)) for g in self.gens])
                self._block_id += 1
        return self._block[:, j]


@dataclass
class RunRecord:
    algorithm: str
    seed: int
    replicas: list[int]
    metrics: dict[str, np.ndarray]
    final: np.ndarray
    skipped: dict[str, str] = field(default_factory=dict)

    def __len__(self):
        return len(next(iter(self.metrics.values())))

    def mean(self, kind: str) -> np.ndarray:
        return self.metrics[kind].mean(axis=1)


def run(algorithm: str, problem, mixing: SpectralMixing, schedule: StepsizeSchedule, iterations: int, *,
        seed: int = 0, replicas=1, x0=None, record=("mse",), variant: str = "atc",
        bdecomp: BDecomposition | None = None) -> RunRecord:
    """Run ``iterations`` synchronous rounds for each replica.

    ``replicas`` is a count or an explicit sequence of replica ids.  Every
    metric in the returned record has shape ``(iterations + 1, R)`` with row
    ``k`` holding the value at ``X_k``.  Requested Lyapunov diagnostics that
    cannot be formed are listed in ``RunRecord.skipped``.
    """
    if algorithm not in METHODS:
        raise ParameterError(f"unknown algorithm {algorithm!r}; expected one of {METHODS}")
    if iterations < 0:
        raise ParameterError(f"iterations must be >= 0, got {iterations}")
    unknown = set(record) - set(RECORD_KINDS)
    if unknown:
        raise ParameterError(f"unknown record kinds {sorted(unknown)}")
    ids = list(range(replicas)) if isinstance(replicas, (int, np.integer)) else [int(r) for r in replicas]
    R, n, p = len(ids), problem.n, problem.p
    if mixing.n != n:
        raise ContractError(f"mixing matrix has {mixing.n} nodes but the problem has {n} agents")
    W, V = mixing.W, mixing.V
    feed = SampleFeed(problem, seed, ids)

    if x0 is None:
        X = np.zeros((R, n, p))
    else:
        x0 = np.asarray(x0, dtype=float)
        X = np.broadcast_to(x0 if x0.ndim >= 2 else np.broadcast_to(x0, (n, p)), (R, n, p)).copy()
    x_star = problem.x_star

    skipped = {}
    wants_lyap = [r for r in record if r in ("Tk", "Hk")]
    if wants_lyap:
        reason = None
        if algorithm != "edas":
            reason = "needs the dual block of primal-dual EDAS"
        elif bdecomp is None:
            from .mixing import b_decomposition, choose_c
            try:
                bdecomp = b_decomposition(mixing, choose_c(mixing))
            except DegenerateSpectrumError as exc:
                reason = str(exc)
        if reason:
            skipped = {r: reason for r in wants_lyap}
    kinds = [r for r in record if r not in skipped]
    out = {r: np.empty((iterations + 1, R)) for r in kinds}

    def log(k, X, Y=None):
        if algorithm == "sgd":
            mse = np.sum((X - x_star) ** 2, axis=-1)
        else:
            mse = distributed_mse(X, x_star)
        if not np.all(np.isfinite(mse)):
            bad = ids[int(np.flatnonzero(~np.isfinite(mse))[0])]
            raise DivergenceError(f"{algorithm}: non-finite iterate at k={k} (replica {bad})",
                                  iteration=k, algorithm=algorithm, replica=bad)
        if "mse" in out:
            out["mse"][k] = mse
        if "consensus" in out:
            out["consensus"][k] = 0.0 if algorithm == "sgd" else consensus_error(X)
        if "Mk" in out:
            xbar = X if algorithm == "sgd" else X.mean(axis=-2)
            out["Mk"][k] = np.sum((xbar - x_star) ** 2, axis=-1)
        if "Tk" in out or "Hk" in out:
            a = schedule(k)
            y_star = mixing.y_star(a, problem.grad_F_star)
            zbar, _, zcheck = transformed_coords(X, Y, x_star, y_star, bdecomp)
            T = np.sum(np.abs(zcheck) ** 2, axis=(-2, -1))
            if "Tk" in out:
                out["Tk"][k] = T
            if "Hk" in out:
                omega = lyapunov_weight(a, mixing, bdecomp, problem.mu, problem.L)
                out["Hk"][k] = np.sum(zbar**2, axis=-1) + omega * T

    def drive(X):
        if algorithm == "sgd":
            x = X[:, 0, :].copy()
            log(0, x)
            for k in range(iterations):
                G = problem.stochastic_gradients(np.broadcast_to(x[:, None, :], (R, n, p)), feed(k))
                x = centralized_sgd_step(x, G, schedule(k))
                log(k + 1, x)
            return x
        if algorithm in ("edas", "edas3"):
            state = EdasState.initial(X, "primal-dual" if algorithm == "edas" else "three-term")
            log(0, state.X, state.Y)
            for k in range(iterations):
                G = problem.stochastic_gradients(state.X, feed(k))
                if algorithm == "edas":
                    state = edas_step_primal_dual(state, W, V, G, schedule(k))
                else:
                    state = edas_step_three_term(state, W, G, schedule(k))
                log(k + 1, state.X, state.Y)
            return state.X
        if algorithm == "dsgd":
            log(0, X)
            for k in range(iterations):
                G = problem.stochastic_gradients(X, feed(k))
                X = dsgd_step(X, W, G, schedule(k), variant)
                log(k + 1, X)
            return X
        state = dsgt_init(X, problem.stochastic_gradients(X, feed(0)))
        log(0, state.X)
        for k in range(iterations):
            state = dsgt_step(state, W, schedule(k),
                              lambda Xn, k=k: problem.stochastic_gradients(Xn, feed(k + 1)))
            log(k + 1, state.X)
        return state.X

    # overflow shows up as a non-finite error and is reported by log()
    with np.errstate(over="ignore", invalid="ignore"):
        final = drive(X)
    return RunRecord(algorithm, int(seed), ids, out, final, skipped)
