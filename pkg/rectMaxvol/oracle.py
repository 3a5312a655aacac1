"""
rectMaxvol Oracles
Slow, obviously-correct references for the fast paths in maxvol.py.

Exhaustive searches are capped by OracleConfig and refuse larger inputs
with OracleCapError instead of running for hours.
"""

from __future__ import annotations
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence, Tuple
import logging

import numpy as np

from .config import _Checked
from .errors import ArgumentError, OracleCapError
from .maxvol import SeedSet, _as_factor, log_rectangular_volume, lu_pivot_init, rectangular_volume

_log = logging.getLogger(__name__)

TIE_RTOL = 1e-12
LEMMA_ATOL = 1e-10


@dataclass(frozen=True)
class OracleConfig(_Checked):
    max_rank: int = 4        # f
    max_seed: int = 6        # L0
    max_columns: int = 10    # m
    max_dense: int = 512     # largest side for the SVD / pseudoinverse references
    seed: int = 0            # instance draws for oracle-backed checks

    def check(self) -> Optional[str]:
        if min(self.max_rank, self.max_seed, self.max_columns, self.max_dense) < 1:
            return "oracle caps must be positive"
        return None

    def rng(self, salt: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed, salt])


def _cap(what: str, value: int, limit: int) -> None:
    if value > limit:
        raise OracleCapError(f"{what}={value} exceeds the oracle cap {limit}",
                             hint="raise the OracleConfig cap only for one-off runs")


# ===== Exhaustive search =====

def brute_force_max_rectvol(Q, L0: int, config: Optional[OracleConfig] = None) -> SeedSet:
    """
    Volume-maximal seed over all C(m, L0) subsets. Subsets are visited in
    lexicographic order and a later one only wins by a strict margin, so
    ties go to the lexicographically first subset.
    """
    config = (config or OracleConfig()).require()
    Q = _as_factor(Q)
    f, m = Q.shape
    _cap("f", f, config.max_rank)
    _cap("L0", L0, config.max_seed)
    _cap("m", m, config.max_columns)
    if not f <= L0 <= m:
        raise ArgumentError(f"need f <= L0 <= m, got f={f}, L0={L0}, m={m}")

    best: Tuple[int, ...] = tuple(range(L0))
    best_vol = -1.0
    for subset in combinations(range(m), L0):
        vol = rectangular_volume(Q[:, list(subset)])
        if vol > best_vol * (1.0 + TIE_RTOL):
            best, best_vol = subset, vol
    return SeedSet(Q, best)


def naive_greedy(Q, L0: int, init: Optional[SeedSet] = None) -> SeedSet:
    """
    Greedy extension that recomputes Rectvol([S, q_i]) from scratch for every
    candidate i at every step; O(m L0² f²) per step.
    """
    Q = _as_factor(Q)
    f, m = Q.shape
    if not f <= L0 <= m:
        raise ArgumentError(f"need f <= L0 <= m, got f={f}, L0={L0}, m={m}")
    seed = init if init is not None else lu_pivot_init(Q)
    index = list(seed.indices)
    while len(index) < L0:
        taken = set(index)
        best, best_score = -1, float("-inf")
        for i in range(m):
            if i in taken:
                continue
            score = log_rectangular_volume(Q[:, index + [i]])
            if score > best_score:
                best, best_score = i, score
        index.append(best)
    return SeedSet(Q, tuple(index))


# ===== Dense references =====

def svd_oracle(A, config: Optional[OracleConfig] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Compact SVD A = U diag(s) Vᵀ from the symmetric eigenproblem of
    [[0, A], [Aᵀ, 0]], whose positive eigenvalues are the singular values.
    Only triplets with σ above round-off are returned; s is descending.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ArgumentError(f"expected a 2-D matrix, got {A.ndim}-D")
    n, m = A.shape
    _cap("matrix side", max(n, m), (config or OracleConfig()).max_dense)
    if not np.all(np.isfinite(A)):
        raise ArgumentError("matrix has non-finite entries")

    H = np.zeros((n + m, n + m))
    H[:n, n:] = A
    H[n:, :n] = A.T
    values, vectors = np.linalg.eigh(H)
    scale = float(np.max(np.abs(values), initial=0.0))
    cutoff = 10 * (n + m) * np.finfo(float).eps * scale
    keep = np.flatnonzero(values > cutoff)[::-1][:min(n, m)]

    s = values[keep]
    U = vectors[:n, keep]
    V = vectors[n:, keep]
    if keep.size:
        U = U / np.linalg.norm(U, axis=0)
        V = V / np.linalg.norm(V, axis=0)
    return U, s, V.T


def pinv_oracle(S, config: Optional[OracleConfig] = None) -> np.ndarray:
    """Moore–Penrose pseudoinverse V diag(1/σ) Uᵀ from svd_oracle."""
    U, s, Vt = svd_oracle(S, config)
    return (Vt.T / s) @ U.T


# ===== Cauchy–Binet =====

def _check_pair(A, B, config: OracleConfig) -> Tuple[np.ndarray, np.ndarray]:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or B.ndim != 2 or A.shape != B.shape[::-1]:
        raise ArgumentError(f"need A (N x M) and B (M x N), got {A.shape} and {B.shape}")
    N, M = A.shape
    if M <= N:
        raise ArgumentError(f"need M > N, got N={N}, M={M}")
    _cap("N", N, config.max_rank)
    _cap("M", M, config.max_columns)
    return A, B


def _deleted_dets(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    M = A.shape[1]
    out = np.empty(M)
    for i in range(M):
        keep = [j for j in range(M) if j != i]
        out[i] = np.linalg.det(A[:, keep] @ B[keep, :])
    return out


def deletion_average(A, B, config: Optional[OracleConfig] = None) -> float:
    """(1/(M−N)) Σ_i det(A₋ᵢ B₋ᵢ); equals det(AB) for every A, B."""
    config = (config or OracleConfig()).require()
    A, B = _check_pair(A, B, config)
    N, M = A.shape
    return float(_deleted_dets(A, B).sum() / (M - N))


def lemma1_check(A, B, config: Optional[OracleConfig] = None) -> bool:
    """det(AB) <= M/(M−N) · max_i det(A₋ᵢ B₋ᵢ), up to 1e-10."""
    config = (config or OracleConfig()).require()
    A, B = _check_pair(A, B, config)
    N, M = A.shape
    lhs = float(np.linalg.det(A @ B))
    rhs = M / (M - N) * float(_deleted_dets(A, B).max())
    return lhs <= rhs + LEMMA_ATOL


def offseed_coefficient_norms(Q, indices: Sequence[int]) -> np.ndarray:
    """||c_i|| of C = S†Q recomputed with pinv_oracle, seed columns dropped."""
    Q = _as_factor(Q)
    C = pinv_oracle(Q[:, list(indices)]) @ Q
    mask = np.ones(Q.shape[1], dtype=bool)
    mask[list(indices)] = False
    return np.linalg.norm(C[:, mask], axis=0)
