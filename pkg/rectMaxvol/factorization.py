"""
rectMaxvol PureSVD
Rank-f truncated SVD of the rating matrix with unknown entries as zeros:

    R ≈ Pᵀ Q,   P = Σ Uᵀ (f x n),   Q = Vᵀ (f x m, orthonormal rows)

Solvers:
  - dense:  LAPACK SVD of the densified matrix (desk scale)
  - arpack: scipy.sparse.linalg.svds with a seeded start vector
"""

from __future__ import annotations
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional
import logging
import threading

import numpy as np
import scipy.linalg as la
from scipy.sparse.linalg import svds, ArpackNoConvergence

from .config import SvdConfig
from .data import RatingMatrix
from .errors import ArgumentError, ConvergenceError
from .ledger import sha256, stable_json

_log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Factorization:
    P: np.ndarray
    Q: np.ndarray
    singular_values: np.ndarray
    solver: str = "dense"
    tol: float = 1e-8
    residual: float = 0.0   # ||R - PᵀQ||_F

    @property
    def f(self) -> int:
        return self.Q.shape[0]

    @property
    def n(self) -> int:
        return self.P.shape[1]

    @property
    def m(self) -> int:
        return self.Q.shape[1]

    def reconstruct(self) -> np.ndarray:
        return self.P.T @ self.Q

    def meta(self) -> dict:
        return {"f": self.f, "solver": self.solver, "tol": self.tol, "residual": self.residual}


def _flip_signs(U: np.ndarray, Vt: np.ndarray):
    """Make the largest-magnitude entry of each right singular vector positive."""
    rows = np.arange(Vt.shape[0])
    signs = np.sign(Vt[rows, np.argmax(np.abs(Vt), axis=1)])
    signs[signs == 0] = 1.0
    return U * signs, Vt * signs[:, None]


def pure_svd(R: RatingMatrix, f: int, tol: Optional[float] = None,
             config: Optional[SvdConfig] = None) -> Factorization:
    """
    Best rank-f approximation of R in Frobenius norm.

    Raises ArgumentError when f > min(n, m) or R is empty, and
    ConvergenceError when ARPACK stops before `config.max_iters`.
    """
    config = (config or SvdConfig()).require()
    tol = config.tol if tol is None else tol
    n, m = R.shape
    if f < 1 or f > min(n, m):
        raise ArgumentError(f"rank f={f} must lie in [1, min(n, m)={min(n, m)}]")
    if R.nnz == 0:
        raise ArgumentError("rating matrix has no stored entries")

    solver = config.resolve(n, m, f)

    total = float(np.sum(R.matrix.data ** 2))
    if solver == "dense":
        U, s, Vt = la.svd(R.toarray(), full_matrices=False, lapack_driver="gesdd")
        U, s, Vt = U[:, :f], s[:f], Vt[:f]
    else:
        rng = np.random.default_rng(config.seed)
        v0 = rng.standard_normal(min(n, m))
        try:
            U, s, Vt = svds(R.matrix.astype(float), k=f, tol=tol, maxiter=config.max_iters,
                            v0=v0, solver="arpack")
        except ArpackNoConvergence as e:
            found = np.asarray(getattr(e, "eigenvalues", []), dtype=float)
            residual = float(np.sqrt(max(total - np.sum(np.abs(found)), 0.0))) if found.size else float("nan")
            raise ConvergenceError(
                f"ARPACK did not converge for f={f} within {config.max_iters} iterations",
                residual, "raise max_iters or use the dense solver",
            )
        order = np.argsort(s)[::-1]
        U, s, Vt = U[:, order], s[order], Vt[order]

    U, Vt = _flip_signs(U, Vt)
    residual = float(np.sqrt(max(total - float(np.sum(s ** 2)), 0.0)))
    _log.info("pure_svd: %dx%d f=%d solver=%s residual=%.6g", n, m, f, solver, residual)
    return Factorization(
        P=(U * s).T.copy(),
        Q=np.ascontiguousarray(Vt),
        singular_values=s.copy(),
        solver=solver,
        tol=tol,
        residual=residual,
    )


def predicted_rating(F: Factorization, u: int, i: int) -> float:
    """p_uᵀ q_i."""
    if not 0 <= u < F.n:
        raise ArgumentError(f"user index {u} out of range [0, {F.n})")
    if not 0 <= i < F.m:
        raise ArgumentError(f"item index {i} out of range [0, {F.m})")
    return float(F.P[:, u] @ F.Q[:, i])


# ---------------------------------------------------------------------------
# On-disk factor cache
# ---------------------------------------------------------------------------

class FactorCache:
    """
    `.npz` factor files keyed by (dataset hash, f, solver, seed), backed by an
    in-process memo. A None directory keeps only the memo.
    """

    def __init__(self, directory: Optional[Path]):
        self.directory = Path(directory) if directory else None
        self.hits = 0
        self.misses = 0
        self._memory: Dict[str, Factorization] = {}
        self._lock = threading.Lock()

    @staticmethod
    def key(dataset_hash: str, f: int, solver: str, seed: int) -> str:
        return sha256(stable_json({"data": dataset_hash, "f": f, "solver": solver, "seed": seed}))[:24]

    def _path(self, key: str) -> Optional[Path]:
        return self.directory / f"factors-{key}.npz" if self.directory else None

    def load(self, key: str) -> Optional[Factorization]:
        path = self._path(key)
        if path is None or not path.exists():
            return None
        with np.load(path, allow_pickle=False) as z:
            return Factorization(
                P=z["P"], Q=z["Q"], singular_values=z["s"],
                solver=str(z["solver"]), tol=float(z["tol"]), residual=float(z["residual"]),
            )

    def store(self, key: str, F: Factorization) -> None:
        path = self._path(key)
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp.npz")
        np.savez(tmp, P=F.P, Q=F.Q, s=F.singular_values, solver=np.array(F.solver),
                 tol=np.array(F.tol), residual=np.array(F.residual))
        tmp.replace(path)

    def factorize(self, R: RatingMatrix, f: int, config: Optional[SvdConfig] = None) -> Factorization:
        config = config or SvdConfig()
        key = self.key(R.digest(), f, config.resolve(*R.shape, f), config.seed)
        with self._lock:
            cached = self._memory.get(key) or self.load(key)
            if cached is not None:
                self.hits += 1
                self._memory[key] = cached
                _log.debug("factor cache hit %s", key)
                return cached
            self.misses += 1
        F = pure_svd(R, f, config=config)
        with self._lock:
            self._memory[key] = F
            self.store(key, F)
        return F
