"""Stability, Lyapunov/Riccati solvers, steady-state covariances and noise budgets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import schur

from qfc.core import LinearModel, NoiseSpec, input_noise
from qfc.errors import NoSteadyStateError, ResonanceError, RiccatiError

#: eigenvalues with real part above ``-STABILITY_MARGIN`` count as unstable
STABILITY_MARGIN = 1e-12


def spectral_abscissa(A) -> float:
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return -np.inf
    return float(np.linalg.eigvals(A).real.max())


def is_hurwitz(A) -> bool:
    return spectral_abscissa(A) < -STABILITY_MARGIN


def solve_lyapunov(A, Q) -> np.ndarray:
    """Solve ``A X + X A' + Q = 0`` by Kronecker vectorisation.

    Intended for the small (n <= ~10) systems used here.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    eig = np.linalg.eigvals(A)
    if eig.real.max() >= -STABILITY_MARGIN:
        raise NoSteadyStateError(
            f"dynamics not Hurwitz (max Re(eig) = {eig.real.max():.3g})", eigenvalues=eig)
    I = np.eye(n)
    # row-major vec: vec(A X) = (A kron I) vec(X), vec(X A') = (I kron A) vec(X)
    L = (A[:, None, :, None] * I[None, :, None, :]
         + I[:, None, :, None] * A[None, :, None, :]).reshape(n * n, n * n)
    X = np.linalg.solve(L, -Q.reshape(-1)).reshape(n, n)
    return 0.5 * (X + X.T)


def lyapunov_residual(A, X, Q) -> float:
    R = A @ X + X @ A.T + Q
    return float(np.abs(R).max())


def excitation(sigma, index: int) -> float:
    """Mean excitation of the mode at state indices ``(index, index + 1)``."""
    return (sigma[index, index] + sigma[index + 1, index + 1] - 2.0) / 4.0


@dataclass(frozen=True, eq=False)
class CovarianceResult:
    sigma: np.ndarray
    excitations: dict

    def __getitem__(self, mode_name: str) -> float:
        return self.excitations[mode_name]


def steady_covariance(G: LinearModel, N: NoiseSpec | None = None) -> CovarianceResult:
    """Stationary symmetrised covariance of the internal state of ``G``.

    ``N`` defaults to the noise implied by the input channel labels.
    """
    N = input_noise(G) if N is None else N
    sigma = solve_lyapunov(G.A, G.B @ N.F @ G.B.T)
    exc = {md.name: excitation(sigma, md.index) for md in G.modes if not md.classical}
    return CovarianceResult(sigma, exc)


def transfer_function(G: LinearModel, s: complex) -> np.ndarray:
    """Input-output transfer matrix ``C (sI - A)^{-1} B + D``."""
    return G.C @ state_transfer(G, s) + G.D


def state_transfer(G: LinearModel, s: complex) -> np.ndarray:
    """Input-to-state transfer matrix ``(sI - A)^{-1} B``."""
    n = G.n_states
    M = s * np.eye(n) - G.A
    if n and np.linalg.cond(M) > 1e14:
        raise ResonanceError(f"s = {s} is (numerically) an eigenvalue of A")
    return np.linalg.solve(M, G.B.astype(complex)) if n else np.zeros((0, G.B.shape[1]), complex)


def noise_budget(G: LinearModel, N: NoiseSpec | None = None, mode: str | None = None,
                 by_quadrature: bool = False) -> dict:
    """Split the excitation of ``mode`` into per-input contributions.

    The Lyapunov equation is linear in its source term, so the covariance is
    the sum of the covariances driven by each channel (or quadrature) alone.
    Each input's share of the vacuum floor is removed in proportion to what it
    would contribute if it carried vacuum, so that the shares sum to the
    total excitation and an input at vacuum level in a passive system
    contributes exactly zero.
    """
    N = input_noise(G) if N is None else N
    md = G.mode(mode)
    if not is_hurwitz(G.A):
        raise NoSteadyStateError("no steady state", eigenvalues=np.linalg.eigvals(G.A))
    if by_quadrature:
        keys = [f"{ch.name}:{q}" for ch in G.inputs for q in "xp"]
        groups = [[i] for i in range(2 * len(G.inputs))]
    else:
        keys = [ch.name for ch in G.inputs]
        groups = [[2 * i, 2 * i + 1] for i in range(len(G.inputs))]
    j = md.index
    raw, vac = [], []
    for idx in groups:
        Bi = G.B[:, idx]
        Fi = N.F[np.ix_(idx, idx)]
        S = solve_lyapunov(G.A, Bi @ Fi @ Bi.T)
        S0 = solve_lyapunov(G.A, Bi @ Bi.T)
        raw.append((S[j, j] + S[j + 1, j + 1]) / 4.0)
        vac.append((S0[j, j] + S0[j + 1, j + 1]) / 4.0)
    vac_total = sum(vac)
    floor = [0.5 * v / vac_total if vac_total > 0 else 0.0 for v in vac]
    return {k: r - f for k, r, f in zip(keys, raw, floor)}


def _care_residual(A, B, Q, R, X) -> float:
    return float(np.abs(A.T @ X + X @ A - X @ B @ np.linalg.solve(R, B.T @ X) + Q).max())


def solve_care(A, B, Q, R, tol: float = 1e-9, newton_steps: int = 20) -> np.ndarray:
    """Stabilising solution of ``A'X + XA - X B R^{-1} B' X + Q = 0``.

    Uses the stable invariant subspace of the Hamiltonian matrix (ordered real
    Schur form), then Newton-Kleinman refinement if the residual is above
    ``tol`` relative to the largest of ``Q``, ``A'X`` and ``X B R^{-1} B' X``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    n = A.shape[0]
    G = B @ np.linalg.solve(R, B.T)
    H = np.block([[A, -G], [-Q, -A.T]])
    T, Z, sdim = schur(H, output="real", sort="lhp")
    if sdim != n:
        raise RiccatiError(f"Hamiltonian has {sdim} stable eigenvalues, need {n}")
    U1, U2 = Z[:n, :n], Z[n:, :n]
    if np.linalg.cond(U1) > 1e12:
        raise RiccatiError("no stabilising solution (singular invariant-subspace basis)")
    X = np.linalg.solve(U1.T, U2.T).T
    X = 0.5 * (X + X.T)
    def scale_of(X):
        # magnitude of the individual terms, so near-uncontrollable pairs with
        # huge X are judged by relative rounding
        return max(1.0, float(np.abs(Q).max()), float(np.abs(A.T @ X).max()),
                   float(np.abs(X @ G @ X).max()))

    scale = scale_of(X)
    for _ in range(newton_steps):
        if _care_residual(A, B, Q, R, X) <= tol * scale:
            break
        # Newton-Kleinman: (A - G X)' Xn + Xn (A - G X) + X G X + Q = 0
        Ac = A - G @ X
        if not is_hurwitz(Ac):
            raise RiccatiError("Newton refinement lost stability")
        X = solve_lyapunov(Ac.T, X @ G @ X + Q)
        scale = scale_of(X)
    if _care_residual(A, B, Q, R, X) > tol * scale:
        raise RiccatiError("Riccati residual did not converge")
    if not is_hurwitz(A - G @ X):
        raise RiccatiError("solution is not stabilising")
    return X
