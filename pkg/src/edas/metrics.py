"""Error functionals, transformed error coordinates and theory calculators."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import ContractError, ParameterError
from .mixing import BDecomposition, SpectralMixing, choose_c

TRANSIENT_MIN_K = 100
TRANSIENT_FACTOR = 2.0


def distributed_mse(X, x_star) -> np.ndarray:
    """``(1/n) sum_i ||x_i - x*||^2`` over the last two axes of ``X``."""
    X = np.asarray(X, dtype=float)
    diff = X - np.asarray(x_star, dtype=float)
    return np.sum(diff**2, axis=(-2, -1)) / X.shape[-2]


def consensus_error(X) -> np.ndarray:
    """``(1/n) sum_i ||x_i - xbar||^2``."""
    X = np.asarray(X, dtype=float)
    diff = X - X.mean(axis=-2, keepdims=True)
    return np.sum(diff**2, axis=(-2, -1)) / X.shape[-2]


def transformed_coords(X, Y, x_star, y_star_k, bdecomp: BDecomposition):
    """Return ``(zbar, zhat, zcheck)`` with ``(zbar; zhat; zcheck) = U^{-1} (X - X*; Y - Y*)``.

    ``zcheck`` is complex with shape ``(..., 2n-2, p)``.
    """
    xt = np.asarray(X, dtype=float) - np.asarray(x_star, dtype=float)
    yt = np.asarray(Y, dtype=float) - np.asarray(y_star_k, dtype=float)
    zbar = xt.mean(axis=-2)
    zhat = yt.mean(axis=-2)
    zcheck = (bdecomp.ULl @ xt + bdecomp.ULr @ yt) / bdecomp.c
    return zbar, zhat, zcheck


def lyapunov_weight(alpha: float, spec: SpectralMixing, bdecomp: BDecomposition, mu: float, L: float) -> float:
    """Weight ``omega_k`` of the consensus error inside ``H_k = M_k + omega_k T_k``."""
    c2 = bdecomp.c**2
    return 24.0 * alpha * c2 * bdecomp.norm_UR**2 * L**2 / (spec.n * mu * (1.0 - math.sqrt(spec.lambda2)))


@dataclass(frozen=True)
class ErrorTrajectory:
    values: np.ndarray
    kind: str = "distributed-mse"
    replicas: int = 1

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1:
            raise ContractError(f"trajectory must be one-dimensional, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ContractError(f"{self.kind} trajectory has negative or non-finite entries")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)


def transient_time(dist, cent, *, min_k: int = TRANSIENT_MIN_K, factor: float = TRANSIENT_FACTOR):
    """Smallest ``k > min_k`` with ``dist[k] <= factor * cent[k]``; ``None`` if never."""
    if isinstance(dist, ErrorTrajectory) and isinstance(cent, ErrorTrajectory):
        if dist.replicas != cent.replicas:
            raise ContractError(f"replica counts differ: {dist.replicas} vs {cent.replicas}")
    d = np.asarray(getattr(dist, "values", dist), dtype=float)
    c = np.asarray(getattr(cent, "values", cent), dtype=float)
    if d.shape != c.shape:
        raise ContractError(f"trajectory lengths differ: {d.shape} vs {c.shape}")
    ok = np.flatnonzero(d[min_k + 1:] <= factor * c[min_k + 1:])
    return int(ok[0]) + min_k + 1 if ok.size else None


@dataclass(frozen=True)
class TheoreticalConstants:
    theta: float
    m: float
    m_min: float
    m_min_terms: tuple[float, float]
    c: float
    norm_UL: float
    norm_UR: float
    omega_0: float
    p2: float
    p3: float
    p5: float
    H0: float
    H1_hat: float
    H2_hat: float
    q0: float
    q2: float
    q3: float
    q4: float
    c0: float
    asymptotic_coefficient: float
    centralized_coefficient: float

    def as_dict(self) -> dict:
        return asdict(self)


def q0_constant(lambda2: float) -> float:
    return (3.0 + math.sqrt(lambda2)) / 4.0


def m_min_terms(theta, lambda2, mu, L, norm_UL, norm_UR) -> tuple[float, float]:
    gap = 1.0 - math.sqrt(lambda2)
    return 24.0 * theta / gap, 24.0 * theta * L**2 * norm_UR * norm_UL / (mu**2 * gap)


def rate_coefficients(theta: float, sigma_bar_sq: float, n: int, mu: float) -> tuple[float, float]:
    """Leading ``1/(k+m)`` coefficients for EDAS and centralized SGD."""
    edas = 4.0 * theta**2 * sigma_bar_sq / ((3.0 * theta - 2.0) * n * mu**2)
    sgd = theta**2 * sigma_bar_sq / ((2.0 * theta - 1.0) * n * mu**2)
    return edas, sgd


def theoretical_constants(spec: SpectralMixing, bdecomp: BDecomposition | None, problem, theta: float,
                          m: float, X0=None) -> TheoreticalConstants:
    """Closed-form analysis constants for stepsize ``theta / (mu (k + m))``.

    ``bdecomp`` is rescaled to ``c = sqrt(n) ||U_L||``.  ``X0`` defaults to
    all zeros; the dual block starts at zero.
    """
    if theta <= 3:
        raise ParameterError(f"theta must exceed 3 for the Lyapunov bound, got {theta}")
    if theta <= 4:
        warnings.warn(f"theta = {theta} <= 4: the sublinear-rate lemma does not apply", stacklevel=2)
    if bdecomp is None:
        from .mixing import b_decomposition
        bdecomp = b_decomposition(spec)
    c = choose_c(spec)
    bd = bdecomp.rescaled(c)
    n, mu, L, s2 = spec.n, problem.mu, problem.L, problem.sigma_bar_sq
    lam2 = spec.lambda2
    sgap = 1.0 - math.sqrt(lam2)
    UL2, UR2 = bd.norm_UL**2, bd.norm_UR**2
    Vp2 = float(np.linalg.norm(spec.Vpinv, 2)) ** 2
    G2 = float(np.sum(problem.grad_F_star**2))
    terms = m_min_terms(theta, lam2, mu, L, bd.norm_UL, bd.norm_UR)

    alpha0 = theta / (mu * m)
    omega0 = lyapunov_weight(alpha0, spec, bd, mu, L)
    X0 = np.zeros((n, problem.p)) if X0 is None else np.asarray(X0, dtype=float)
    zbar, _, zcheck = transformed_coords(X0, np.zeros_like(X0), problem.x_star,
                                         spec.y_star(alpha0, problem.grad_F_star), bd)
    H0 = float(np.sum(zbar**2) + omega0 * np.sum(np.abs(zcheck) ** 2))

    p2 = theta**2 * s2 / (n * mu**2)
    p3 = 24.0 * lam2 * theta**3 * s2 * UL2 * UR2 * L**2 / (mu**4 * sgap)
    p5 = 96.0 * theta**3 * UL2 * UR2 * L**2 * Vp2 * G2 / (n * mu**4 * sgap**2)
    H1 = (p2 + p5 / m**3) / (theta - 3.0)
    H2 = m**2 * H0 + 2.0 * p3 / (2.0 * theta - 3.0)
    c2 = c**2
    common = 4.0 * lam2 * n * UL2 * theta**2 * L**2 / (mu**2 * c2 * (1.0 - lam2))
    q2 = lam2 * n * UL2 * s2 * theta**2 / (c2 * mu**2)
    q3 = common * H1
    q4 = common * H2 + 4.0 * UL2 * Vp2 * G2 * theta**2 / (mu**2 * c2 * sgap)
    c0 = 3.0 * theta * L**2 * c2 * UR2 / (n * mu**2)
    edas_coef, sgd_coef = rate_coefficients(theta, s2, n, mu)
    return TheoreticalConstants(
        theta=theta, m=m, m_min=max(terms), m_min_terms=terms, c=c, norm_UL=bd.norm_UL, norm_UR=bd.norm_UR,
        omega_0=omega0, p2=p2, p3=p3, p5=p5, H0=H0, H1_hat=H1, H2_hat=H2,
        q0=q0_constant(lam2), q2=q2, q3=q3, q4=q4, c0=c0,
        asymptotic_coefficient=edas_coef, centralized_coefficient=sgd_coef,
    )


@dataclass(frozen=True)
class TransientReport:
    """Order-level transient-time terms (hidden constants set to one)."""

    network: float
    gradient: float
    initial: float
    logarithmic: float
    headline: float

    @property
    def terms(self) -> dict[str, float]:
        return {"network": self.network, "gradient": self.gradient,
                "initial": self.initial, "logarithmic": self.logarithmic}

    @property
    def dominant(self) -> str:
        return max(self.terms, key=self.terms.get)

    @property
    def value(self) -> float:
        return max(self.terms.values())

    def as_dict(self) -> dict:
        return {**self.terms, "dominant": self.dominant, "value": self.value,
                "headline_n_over_gap": self.headline, "order_level": True}


def transient_bound(spec: SpectralMixing, problem, X0=None) -> TransientReport:
    n, gap = spec.n, spec.gap
    X0 = np.zeros((n, problem.p)) if X0 is None else np.asarray(X0, dtype=float)
    init = float(np.sum((X0 - problem.x_star) ** 2))
    G2 = float(np.sum(problem.grad_F_star**2))
    both = init + G2
    log_term = max(math.log(both) if both > 0 else -math.inf, -math.log(gap)) / gap
    return TransientReport(
        network=n / gap,
        gradient=(G2 / gap**3) ** (1.0 / 3.0),
        initial=(init / gap**6) ** (1.0 / 5.0),
        logarithmic=log_term,
        headline=n / gap,
    )


def reference_rate_curves(theta: float, sigma_bar_sq: float, n: int, mu: float, m: float, ks):
    """Leading-term EDAS and centralized-SGD curves ``coef / (k + m)``."""
    if theta <= 5:
        warnings.warn(f"theta = {theta} <= 5: the asymptotic EDAS rate is not guaranteed", stacklevel=2)
    edas, sgd = rate_coefficients(theta, sigma_bar_sq, n, mu)
    denom = np.asarray(ks, dtype=float) + m
    return edas / denom, sgd / denom
