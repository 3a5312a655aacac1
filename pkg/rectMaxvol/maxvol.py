"""
rectMaxvol Core
Maximal-volume column selection on an f x m latent factor Q.

  rectangular_volume  sqrt(det(S Sᵀ)), the product of singular values of S
  lu_pivot_init       f columns from column-pivoted elimination of Q
  square_maxvol       swap columns until every |C_ij| <= 1 + tol (dominance)
  rect_maxvol         grow the seed greedily by max ||c_i||², rank-1 updates

Layout: C is L x m with one coefficient column c_i per item of Q, stored
row-major so a new seed row is contiguous and Cᵀ is column-major for BLAS
ger. `w[i] == ||c_i||²` for all i.
"""

from __future__ import annotations
from dataclasses import dataclass, field
from typing import Optional, Sequence, TextIO, Tuple
import csv
import logging
import math

import numpy as np
import scipy.linalg as la

from .config import MaxvolConfig
from .errors import ArgumentError, IterationCapError, RankDeficiencyError, shape_hint

_log = logging.getLogger(__name__)

PIVOT_TOL = 1e-12


def _as_factor(Q) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2:
        raise ArgumentError(f"latent factor must be 2-D, got {Q.ndim}-D")
    if Q.shape[0] > Q.shape[1]:
        raise ArgumentError(f"latent factor has rank f={Q.shape[0]} > columns m={Q.shape[1]}")
    return Q


# ---------------------------------------------------------------------------
# Seed set and coefficient state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeedSet:
    """Ordered, distinct column indices k into Q; S = Q(:, k)."""
    Q: np.ndarray = field(repr=False, compare=False)
    indices: Tuple[int, ...]

    def __post_init__(self):
        m = self.Q.shape[1]
        if len(set(self.indices)) != len(self.indices):
            raise ArgumentError(f"seed indices must be distinct, got {list(self.indices)}")
        for i in self.indices:
            if not 0 <= i < m:
                raise ArgumentError(f"seed index {i} out of range [0, {m})")

    @classmethod
    def of(cls, Q, indices: Sequence[int]) -> "SeedSet":
        return cls(_as_factor(Q), tuple(int(i) for i in indices))

    @property
    def S(self) -> np.ndarray:
        return self.Q[:, list(self.indices)]

    @property
    def size(self) -> int:
        return len(self.indices)

    def __contains__(self, i: int) -> bool:
        return int(i) in self.indices

    def __len__(self) -> int:
        return len(self.indices)

    def with_index(self, i: int) -> "SeedSet":
        return SeedSet(self.Q, self.indices + (int(i),))


class CoefficientState:
    """
    Live state of the greedy extension: least-norm C with S C = Q and the
    cached squared column norms w.

    Owned by a single writer; readers may share it between calls.
    """

    def __init__(self, C: np.ndarray, selected: np.ndarray, capacity: Optional[int] = None, swaps: int = 0):
        L, m = C.shape
        capacity = max(capacity or L, L)
        self._buf = np.zeros((capacity, m))
        self._buf[:L] = C
        self.size = L
        self.w = np.einsum("ij,ij->j", C, C)
        self.selected = selected.astype(bool).copy()
        self.swaps = swaps
        self.appends = 0

    @classmethod
    def from_seed(cls, seed: SeedSet, capacity: Optional[int] = None, swaps: int = 0) -> "CoefficientState":
        C = least_norm_coefficients(seed.S, seed.Q)
        selected = np.zeros(seed.Q.shape[1], dtype=bool)
        selected[list(seed.indices)] = True
        if seed.size == seed.Q.shape[0]:
            # square S: C = S⁻¹Q holds e_j exactly at seed position j
            C[:, list(seed.indices)] = np.eye(seed.size)
        return cls(C, selected, capacity, swaps)

    @property
    def C(self) -> np.ndarray:
        return self._buf[:self.size]

    @property
    def L(self) -> int:
        return self.size

    @property
    def m(self) -> int:
        return self._buf.shape[1]

    def reserve(self, rows: int) -> None:
        if rows <= self._buf.shape[0]:
            return
        grown = np.zeros((max(rows, 2 * self._buf.shape[0]), self.m))
        grown[:self.size] = self.C
        self._buf = grown

    def recomputed_norms(self) -> np.ndarray:
        C = self.C
        return np.einsum("ij,ij->j", C, C)

    def offseed_norms(self) -> np.ndarray:
        """w with seed columns masked to -inf, ready for argmax."""
        return np.where(self.selected, -np.inf, self.w)

    def copy(self) -> "CoefficientState":
        other = CoefficientState(self.C.copy(), self.selected, self._buf.shape[0], self.swaps)
        other.w = self.w.copy()
        other.appends = self.appends
        return other


def least_norm_coefficients(S: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Minimum-Frobenius-norm C with S C = Q, i.e. S†Q = Sᵀ(SSᵀ)⁻¹Q."""
    S = np.asarray(S, dtype=float)
    f, L = S.shape
    if L == f:
        return la.solve(S, Q)
    C, *_ = la.lstsq(S, Q, lapack_driver="gelsd")
    return C


# ---------------------------------------------------------------------------
# Volumes
# ---------------------------------------------------------------------------

def rectangular_volume(S) -> float:
    """sqrt(det(S Sᵀ)); equals |det S| for square S."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2:
        raise ArgumentError(f"submatrix must be 2-D, got {S.ndim}-D")
    f, L = S.shape
    if f > L:
        raise ArgumentError(f"rectangular volume needs f <= L, got f={f}, L={L} (det SSᵀ = 0)")
    return float(np.prod(la.svdvals(S)))


def log_rectangular_volume(S) -> float:
    """Natural log of the rectangular volume; -inf for rank-deficient S."""
    S = np.asarray(S, dtype=float)
    f, L = S.shape
    if f > L:
        raise ArgumentError(f"rectangular volume needs f <= L, got f={f}, L={L}")
    sv = la.svdvals(S)
    # numerical rank cutoff, as in matrix_rank
    if sv[0] == 0.0 or sv[-1] <= max(S.shape) * np.finfo(float).eps * sv[0]:
        return float("-inf")
    return float(np.sum(np.log(sv)))


def volume_gain(state: CoefficientState, i: int) -> float:
    """Multiplicative volume gain of appending column i: sqrt(1 + w_i)."""
    return math.sqrt(1.0 + float(state.w[i]))


def theorem_bound(f: int, L0: int) -> float:
    """Largest off-seed ||c_i|| a dominant f x L0 submatrix allows."""
    return math.sqrt(f / (L0 + 1 - f))


def max_offseed_norm(state: CoefficientState) -> float:
    scores = state.offseed_norms()
    if not np.isfinite(scores).any():
        return 0.0
    return math.sqrt(max(float(scores.max()), 0.0))


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------

def lu_pivot_init(Q) -> SeedSet:
    """
    Pick f columns of Q by Gaussian elimination with partial pivoting on Qᵀ
    (row pivots of Qᵀ are column pivots of Q). Ties go to the lowest index.
    """
    Q = _as_factor(Q)
    f, m = Q.shape
    A = Q.T.copy()
    perm = np.arange(m)
    threshold = PIVOT_TOL * max(1.0, float(np.abs(Q).max(initial=0.0)))

    for s in range(f):
        col = np.abs(A[s:, s])
        p = s + int(np.argmax(col))
        if col[p - s] < threshold:
            raise RankDeficiencyError(
                f"rank(Q) < f={f}: all remaining pivots fell below {PIVOT_TOL:g} at elimination step {s}",
                step=s, hint="choose a smaller rank f",
            )
        if p != s:
            A[[s, p]] = A[[p, s]]
            perm[[s, p]] = perm[[p, s]]
        A[s + 1:, s] /= A[s, s]
        A[s + 1:, s + 1:] -= np.outer(A[s + 1:, s], A[s, s + 1:])

    return SeedSet(Q, tuple(int(i) for i in perm[:f]))


# ---------------------------------------------------------------------------
# Square Maxvol
# ---------------------------------------------------------------------------

def square_maxvol(Q, init: SeedSet, tol: float = 1e-2,
                  max_iters: Optional[int] = None) -> Tuple[SeedSet, CoefficientState]:
    """
    Swap seed columns until S is dominant: every |C_ij| <= 1 + tol for C = S⁻¹Q.

    Each accepted swap multiplies |det S| by |C_ij| > 1 + tol. Raises
    IterationCapError (carrying the current valid seed) after `max_iters`
    swaps, 2*f by default.
    """
    Q = _as_factor(Q)
    f, m = Q.shape
    if init.size != f:
        raise ArgumentError(shape_hint("square seed", (f,), (init.size,)))
    if tol < 0:
        raise ArgumentError(f"tol must be >= 0, got {tol}")
    max_iters = 2 * f if max_iters is None else max_iters
    S = Q[:, list(init.indices)]
    if np.linalg.matrix_rank(S) < f:
        raise ArgumentError("initial square seed is singular")

    index = list(init.indices)
    C = la.solve(S, Q)
    swaps = 0
    fresh = True
    while True:
        # seed columns of C are unit vectors; round-off there is never a swap
        A = np.abs(C)
        A[:, index] = 0.0
        i, j = divmod(int(np.argmax(A)), m)
        pivot = C[i, j]
        if A[i, j] <= 1.0 + tol:
            if fresh:
                break
            # confirm dominance on an exact solve, not the rank-1 updated C
            C = la.solve(Q[:, index], Q)
            fresh = True
            continue
        if swaps >= max_iters:
            seed = SeedSet(Q, tuple(index))
            raise IterationCapError(
                f"Square Maxvol reached {max_iters} swaps with max |C_ij| = {abs(pivot):.6g}",
                seed=seed, state=CoefficientState.from_seed(seed, swaps=swaps), iterations=swaps,
            )
        u = C[:, j].copy()
        u[i] -= 1.0
        row = C[i].copy()
        C -= np.outer(u, row / pivot)
        index[i] = j
        swaps += 1
        fresh = False

    seed = SeedSet(Q, tuple(index))
    _log.debug("square_maxvol: f=%d m=%d swaps=%d", f, m, swaps)
    return seed, CoefficientState.from_seed(seed, swaps=swaps)


# ---------------------------------------------------------------------------
# Rectangular Maxvol
# ---------------------------------------------------------------------------

def _rank1_update(C: np.ndarray, x: np.ndarray, y: np.ndarray) -> None:
    """C -= x yᵀ in place, as BLAS ger on the column-major view Cᵀ."""
    A = C.T
    ger = la.get_blas_funcs("ger", [A])
    out = ger(-1.0, y, x, a=A, overwrite_a=1)
    if not np.shares_memory(out, A):
        A[...] = out


def append_column(state: CoefficientState, seed: SeedSet, i: int,
                  drift_every: int = 64) -> Tuple[CoefficientState, SeedSet]:
    """
    Append column i to the seed and update C, w in O(L m):

        C ← [C − c_i c_iᵀC / (1 + c_iᵀc_i) ;  c_iᵀC / (1 + c_iᵀc_i)]
        w_j ← w_j − (c_iᵀc_j)² / (1 + c_iᵀc_i)

    `state` is updated in place and returned with the extended seed.
    """
    i = int(i)
    if not 0 <= i < state.m:
        raise ArgumentError(f"column index {i} out of range [0, {state.m})")
    if i in seed:
        raise ArgumentError(f"column {i} is already in the seed set")

    L = state.size
    state.reserve(L + 1)
    C = state.C
    c = C[:, i].copy()
    v = c @ C
    scaled = v / (1.0 + v[i])
    _rank1_update(C, c, scaled)
    state._buf[L] = scaled
    state.size = L + 1
    state.w -= v * scaled
    np.maximum(state.w, 0.0, out=state.w)
    state.selected[i] = True
    state.appends += 1

    if drift_every and state.appends % drift_every == 0 and _log.isEnabledFor(logging.DEBUG):
        drift = float(np.max(np.abs(state.w - state.recomputed_norms())))
        _log.debug("append_column: L=%d norm drift %.3g", state.size, drift)

    return state, seed.with_index(i)


def rect_maxvol(Q, L0: Optional[int], tol_init: Optional[float] = None,
                config: Optional[MaxvolConfig] = None) -> Tuple[SeedSet, CoefficientState]:
    """
    Select L0 columns of Q greedily maximizing the rectangular volume.

    The first f indices come from LU pivots (refined by Square Maxvol when
    config.init == "maxvol"); each later index is argmax of w over columns
    outside the seed, lowest index on ties. L0=None keeps adding until every
    off-seed ||c_i|| <= config.stop_norm.
    """
    config = (config or MaxvolConfig()).require()
    Q = _as_factor(Q)
    f, m = Q.shape
    if L0 is not None:
        if L0 > m:
            raise ArgumentError(f"seed size L0={L0} exceeds item count m={m}")
        if L0 < f:
            raise ArgumentError(f"seed size L0={L0} is smaller than rank f={f}")

    seed = lu_pivot_init(Q)
    swaps = 0
    if config.init == "maxvol":
        tol = config.tol if tol_init is None else tol_init
        try:
            seed, square = square_maxvol(Q, seed, tol, config.swap_budget(f))
            swaps = square.swaps
        except IterationCapError as e:
            _log.warning("rect_maxvol: %s; continuing with the current seed", e.message)
            seed, swaps = e.seed, e.iterations

    limit = m if L0 is None else L0
    state = CoefficientState.from_seed(seed, capacity=min(limit, 2 * f + 8) if L0 is None else L0, swaps=swaps)
    bound = config.stop_norm ** 2

    while seed.size < limit:
        scores = state.offseed_norms()
        i = int(np.argmax(scores))
        if L0 is None and scores[i] <= bound:
            break
        state, seed = append_column(state, seed, i, config.drift_every)

    _log.debug("rect_maxvol: f=%d m=%d L=%d", f, m, seed.size)
    return seed, state


# ---------------------------------------------------------------------------
# Debug dump
# ---------------------------------------------------------------------------

def dump_state_csv(state: CoefficientState, seed: SeedSet, sink: TextIO) -> None:
    """Write `index,position,w` rows; position is -1 off the seed."""
    position = {k: p for p, k in enumerate(seed.indices)}
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["index", "position", "w"])
    for j in range(state.m):
        writer.writerow([j, position.get(j, -1), repr(float(state.w[j]))])
