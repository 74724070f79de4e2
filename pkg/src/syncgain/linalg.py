"""Dense linear-algebra kernels for the agent model and its closed-loop modes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla

from .errors import (
    DimensionMismatch,
    IllConditioned,
    NoStabilizingSolution,
    NonFinite,
    NotControllable,
    NotHurwitz,
    ResidualTooLarge,
)

CONTROLLABILITY_RTOL = 1e-8


@dataclass(frozen=True)
class Plant:
    """Agent dynamics ``xdot = A x + B u``."""

    A: np.ndarray
    B: np.ndarray
    check_controllable: bool = True

    def __post_init__(self):
        A = np.atleast_2d(np.array(self.A, dtype=float))
        B = np.array(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise DimensionMismatch(f"B has {B.shape[0]} rows, A has {A.shape[0]}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise NonFinite("plant matrices must be finite")
        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        if self.check_controllable and not is_controllable(A, B):
            raise NotControllable("(A, B) is not controllable")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


def controllability_matrix(A, B):
    blocks = [B]
    for _ in range(A.shape[0] - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def is_controllable(A, B, rtol=CONTROLLABILITY_RTOL) -> bool:
    sv = np.linalg.svd(controllability_matrix(A, B), compute_uv=False)
    return bool(sv[0] > 0 and sv[-1] > rtol * sv[0])


def _check_gain(p: Plant, K) -> np.ndarray:
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.shape != (p.m, p.n):
        raise DimensionMismatch(f"gain must be {p.m}x{p.n}, got {K.shape}")
    return K


def spectral_abscissa(M) -> float:
    M = np.atleast_2d(np.asarray(M))
    if M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NonFinite("matrix has non-finite entries")
    return float(np.max(np.linalg.eigvals(M).real))


def closed_loop_mode(p: Plant, K, lam: complex) -> np.ndarray:
    """Complex mode matrix ``A - lam B K``."""
    K = _check_gain(p, K)
    return p.A.astype(complex) - complex(lam) * (p.B @ K)


def real_embedding(p: Plant, K, lam: complex) -> np.ndarray:
    K = _check_gain(p, K)
    lam = complex(lam)
    BK = p.B @ K
    diag = p.A - lam.real * BK
    off = lam.imag * BK
    return np.block([[diag, off], [-off, diag]])


def solve_lyapunov(A, Q) -> np.ndarray:
    """Solve ``A^T P + P A + Q = 0`` for Hurwitz ``A`` (Bartels-Stewart)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if A.shape[0] != A.shape[1] or Q.shape != A.shape:
        raise DimensionMismatch("A and Q must be square and of equal size")
    if spectral_abscissa(A) >= 0:
        raise NotHurwitz("A is not Hurwitz")
    # scipy solves A X + X A^H = Q; pass A^T to get the transposed equation
    P = spla.solve_continuous_lyapunov(A.T, -Q)
    P = 0.5 * (P + P.T)
    res = A.T @ P + P @ A + Q
    scale = np.linalg.norm(Q, 2) + np.linalg.norm(A, 2) * np.linalg.norm(P, 2)
    if np.linalg.norm(res, 2) > 1e-9 * max(scale, 1e-300):
        raise IllConditioned(f"Lyapunov residual {np.linalg.norm(res, 2):.3e} too large")
    return P


def care_residual(p: Plant, a: float, b: float, P) -> np.ndarray:
    A, B = p.A, p.B
    return A.T @ P + P @ A - 2 * b * P @ B @ B.T @ P + a * np.eye(p.n)


def solve_care(p: Plant, a: float, b: float) -> np.ndarray:
    """Stabilizing solution of ``A^T P + P A - 2b P B B^T P + a I = 0``.

    Stable invariant subspace of the Hamiltonian via an ordered real Schur
    form, polished by one Newton-Kleinman step.
    """
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    A, B, n = p.A, p.B, p.n
    G = 2.0 * b * (B @ B.T)
    H = np.block([[A, -G], [-a * np.eye(n), -A.T]])
    T, Z, sdim = spla.schur(H, output="real", sort="lhp")
    if sdim != n:
        raise NoStabilizingSolution(f"Hamiltonian has {sdim} stable eigenvalues, expected {n}")
    U1, U2 = Z[:n, :n], Z[n:, :n]
    if np.linalg.cond(U1) > 1e12:
        raise NoStabilizingSolution("stable subspace is not a graph subspace")
    P = np.linalg.solve(U1.T, U2.T).T
    P = 0.5 * (P + P.T)

    # Newton-Kleinman refinement
    Acl = A - G @ P
    if spectral_abscissa(Acl) < 0:
        P_new = solve_lyapunov(Acl, a * np.eye(n) + P @ G @ P)
        if np.linalg.norm(care_residual(p, a, b, P_new)) <= np.linalg.norm(care_residual(p, a, b, P)):
            P = P_new

    res = np.linalg.norm(care_residual(p, a, b, P), 2)
    scale = a + 2 * np.linalg.norm(A, 2) * np.linalg.norm(P, 2) + np.linalg.norm(G, 2) * np.linalg.norm(P, 2) ** 2
    if res > 1e-8 * scale:
        raise ResidualTooLarge(f"Riccati residual {res:.3e} exceeds tolerance")
    if spectral_abscissa(A - G @ P) >= 0:
        raise NoStabilizingSolution("computed solution is not stabilizing")
    return P


def matrix_2norm(M) -> float:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0.0
    return float(np.linalg.svd(M, compute_uv=False)[0])
