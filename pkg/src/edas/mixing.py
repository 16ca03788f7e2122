"""Mixing matrices and their spectral machinery.

The spectral object carries ``W = Q diag(lambdas) Q^T`` with eigenvalues
sorted in descending order, the square root ``V = (I - W)^{1/2}`` and its
pseudoinverse.  :func:`b_decomposition` diagonalises the primal-dual
iteration matrix ``B = [[W, -V], [V W, W]]`` mode by mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateSpectrumError, InvalidTopologyError, NumericalError, ParameterError
from .topology import Graph, require_connected
from .validation import check_mixing_matrix

#: (1 - lambda) below this is treated as the consensus mode in the pseudoinverse.
PINV_TOL = 1e-10
#: Negative residues of (1 - lambda) above -CLAMP_TOL are rounded to zero.
CLAMP_TOL = 1e-12
#: Smallest eigenvalue admitted by :func:`b_decomposition`.
LAMBDA_MIN_TOL = 1e-8


def lazy_metropolis(graph: Graph) -> np.ndarray:
    """Lazy Metropolis weights ``1 / (2 max(deg_i, deg_j))`` on every edge."""
    require_connected(graph)
    deg = graph.degrees
    W = np.zeros((graph.n, graph.n))
    for i, j in graph.edges:
        W[i, j] = W[j, i] = 1.0 / (2.0 * max(deg[i], deg[j]))
    np.fill_diagonal(W, 1.0 - W.sum(axis=1))
    return W


def beta_shift(W, beta: float) -> np.ndarray:
    """Return ``beta I + (1 - beta) W``; the result has ``lambda_n >= 2 beta - 1``."""
    if not 0.5 < beta < 1.0:
        raise ParameterError(f"beta must lie in (1/2, 1), got {beta}")
    W = check_mixing_matrix(W)
    return beta * np.eye(W.shape[0]) + (1.0 - beta) * W


def _fix_signs(Q: np.ndarray) -> np.ndarray:
    for k in range(Q.shape[1]):
        col = Q[:, k]
        nz = np.flatnonzero(np.abs(col) > 1e-14)
        if nz.size and col[nz[0]] < 0:
            Q[:, k] = -col
    return Q


@dataclass(frozen=True)
class SpectralMixing:
    W: np.ndarray
    Q: np.ndarray
    lambdas: np.ndarray
    V: np.ndarray
    Vpinv: np.ndarray

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @property
    def lambda2(self) -> float:
        return float(self.lambdas[1]) if self.n > 1 else 0.0

    @property
    def lambda_n(self) -> float:
        return float(self.lambdas[-1])

    @property
    def gap(self) -> float:
        return 1.0 - self.lambda2

    def ascending_eigenvalues(self) -> np.ndarray:
        return np.sort(self.lambdas, kind="stable")

    def y_star(self, alpha: float, grad_F_star: np.ndarray) -> np.ndarray:
        """Dual optimum ``-V^- (alpha W grad F(x*))`` for the given stepsize."""
        return -self.Vpinv @ (alpha * (self.W @ grad_F_star))


def spectral(W) -> SpectralMixing:
    W = check_mixing_matrix(W)
    n = W.shape[0]
    try:
        lam, Q = np.linalg.eigh(W)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    Q = _fix_signs(Q[:, order].copy())
    if n > 1 and lam[1] >= 1.0 - 1e-12:
        raise InvalidTopologyError(
            f"second eigenvalue {lam[1]!r} equals 1: the underlying graph is disconnected"
        )
    # the consensus eigenvector is known exactly
    Q[:, 0] = 1.0 / np.sqrt(n)
    lam[0] = 1.0

    resid = 1.0 - lam
    resid[np.abs(resid) < CLAMP_TOL] = 0.0
    resid = np.maximum(resid, 0.0)
    sq = np.sqrt(resid)
    V = (Q * sq) @ Q.T
    V = 0.5 * (V + V.T)
    d = np.zeros(n)
    mask = resid > PINV_TOL
    d[mask] = 1.0 / sq[mask]
    Vpinv = (Q * d) @ Q.T
    Vpinv = 0.5 * (Vpinv + Vpinv.T)
    for arr in (W, Q, lam, V, Vpinv):
        arr.setflags(write=False)
    return SpectralMixing(W=W, Q=Q, lambdas=lam, V=V, Vpinv=Vpinv)


@dataclass(frozen=True)
class BDecomposition:
    """Eigendecomposition ``B = U diag(1, 1, D1) U^{-1}``.

    ``URu, URl`` (n x 2n-2) and ``ULl, ULr`` (2n-2 x n) are the unscaled
    complex blocks; inside ``U`` they appear as ``c * UR`` and ``UL / c``.
    Columns come in conjugate pairs, one pair per eigenvalue
    ``lambda_k, k = 2..n``.
    """

    D1: np.ndarray
    URu: np.ndarray
    URl: np.ndarray
    ULl: np.ndarray
    ULr: np.ndarray
    c: float
    norm_UR: float
    norm_UL: float

    @property
    def n(self) -> int:
        return self.URu.shape[0]

    @property
    def UR(self) -> np.ndarray:
        return np.vstack([self.URu, self.URl])

    @property
    def UL(self) -> np.ndarray:
        return np.hstack([self.ULl, self.ULr])

    def U(self) -> np.ndarray:
        n = self.n
        one = np.ones((n, 1))
        zero = np.zeros((n, 1))
        top = np.hstack([one, zero, self.c * self.URu])
        bot = np.hstack([zero, one, self.c * self.URl])
        return np.vstack([top, bot]).astype(complex)

    def U_inv(self) -> np.ndarray:
        n = self.n
        one = np.ones((1, n)) / n
        zero = np.zeros((1, n))
        return np.vstack(
            [np.hstack([one, zero]), np.hstack([zero, one]), self.UL / self.c]
        ).astype(complex)

    def D(self) -> np.ndarray:
        return np.concatenate([[1.0, 1.0], self.D1])

    def reconstruct_B(self) -> np.ndarray:
        return (self.U() * self.D()) @ self.U_inv()

    def rescaled(self, c: float) -> "BDecomposition":
        if c <= 0:
            raise ParameterError(f"scaling c must be positive, got {c}")
        return BDecomposition(self.D1, self.URu, self.URl, self.ULl, self.ULr, float(c), self.norm_UR, self.norm_UL)


def b_matrix(spec: SpectralMixing) -> np.ndarray:
    W, V = spec.W, spec.V
    return np.block([[W, -V], [V @ W, W]])


def b_decomposition(spec: SpectralMixing, c: float = 1.0) -> BDecomposition:
    if c <= 0:
        raise ParameterError(f"scaling c must be positive, got {c}")
    n = spec.n
    lam = spec.lambdas[1:]
    if n < 2:
        raise DegenerateSpectrumError("a single agent has no non-consensus modes")
    worst = int(np.argmin(lam))
    if lam[worst] <= LAMBDA_MIN_TOL:
        raise DegenerateSpectrumError(
            f"lambda_{worst + 2} = {float(lam[worst]):.3e} <= {LAMBDA_MIN_TOL}: the B decomposition "
            "divides by sqrt(lambda_k); apply beta_shift first"
        )
    q = spec.Q[:, 1:]
    root = np.sqrt(lam)
    imag = np.sqrt(np.maximum(lam - lam**2, 0.0))
    m = 2 * (n - 1)
    D1 = np.empty(m, dtype=complex)
    D1[0::2] = lam + 1j * imag
    D1[1::2] = lam - 1j * imag

    URu = np.repeat(q, 2, axis=1).astype(complex)
    URl = np.empty((n, m), dtype=complex)
    URl[:, 0::2] = -1j * root * q
    URl[:, 1::2] = 1j * root * q
    ULl = 0.5 * np.repeat(q.T, 2, axis=0).astype(complex)
    ULr = np.empty((m, n), dtype=complex)
    ULr[0::2] = (1j / (2.0 * root))[:, None] * q.T
    ULr[1::2] = (-1j / (2.0 * root))[:, None] * q.T

    norm_UR = float(np.linalg.norm(np.vstack([URu, URl]), 2))
    norm_UL = float(np.linalg.norm(np.hstack([ULl, ULr]), 2))
    return BDecomposition(D1, URu, URl, ULl, ULr, float(c), norm_UR, norm_UL)


def choose_c(spec: SpectralMixing) -> float:
    """Analysis scaling ``c = sqrt(n) * ||U_L||_2`` from the ``c = 1`` decomposition."""
    return float(np.sqrt(spec.n) * b_decomposition(spec, 1.0).norm_UL)
