"""
rectMaxvol Elicitation
Select a seed set, build the coefficient matrix C, and predict full rating
rows of cold users from their seed ratings:  z = z′ C.

Two ways to compute C:
  ratings:  C = (R(:,k)ᵀ R(:,k))⁻¹ R(:,k)ᵀ R     least squares on R itself
  factors:  C = S†Q,  S = Q(:,k)                   least-norm on the latent factor
"""

from __future__ import annotations
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union
import json
import logging

import numpy as np
import scipy.linalg as la

from .config import MaxvolConfig, SvdConfig, SCHEMA_VERSION, SELECTORS, VARIANTS
from .data import RatingMatrix
from .errors import (
    ArgumentError, IllConditionedError, IterationCapError, RankDeficiencyError,
    check_indices, parse_choice,
)
from .factorization import Factorization, FactorCache, pure_svd
from .ledger import RunLog, stable_json, write_atomic
from .maxvol import (
    CoefficientState, SeedSet, least_norm_coefficients, log_rectangular_volume,
    lu_pivot_init, max_offseed_norm, rect_maxvol, square_maxvol,
)

_log = logging.getLogger(__name__)

MAX_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class Predictor:
    """A ready-to-use seed set with its L0 x m coefficient matrix."""
    indices: Tuple[int, ...]
    coefficients: np.ndarray
    variant: str
    f: int
    dataset_hash: str = ""
    selector: str = "rectangular"
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.coefficients.shape[0] != len(self.indices):
            raise ArgumentError(f"coefficients have {self.coefficients.shape[0]} rows for {len(self.indices)} seeds")

    @property
    def L0(self) -> int:
        return len(self.indices)

    @property
    def m(self) -> int:
        return self.coefficients.shape[1]

    def predict(self, z_prime) -> np.ndarray:
        return predict_cold(z_prime, self.coefficients)

    def header(self) -> Dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "variant": self.variant,
            "selector": self.selector,
            "f": self.f,
            "L0": self.L0,
            "k": list(self.indices),
            "dataset_hash": self.dataset_hash,
            "meta": self.meta,
        }

    def save(self, path: Union[str, Path]) -> Path:
        """Write `<path>.json` (header) and `<path>.npy` (coefficients)."""
        path = Path(path)
        np.save(path.with_suffix(".npy"), self.coefficients)
        return write_atomic(path.with_suffix(".json"), stable_json(self.header(), indent=2) + "\n")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Predictor":
        path = Path(path)
        header = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
        if header.get("schema_version") != SCHEMA_VERSION:
            raise ArgumentError(f"unsupported predictor schema_version {header.get('schema_version')}")
        return cls(
            indices=tuple(header["k"]),
            coefficients=np.load(path.with_suffix(".npy"), allow_pickle=False),
            variant=header["variant"],
            f=header["f"],
            dataset_hash=header["dataset_hash"],
            selector=header["selector"],
            meta=header.get("meta", {}),
        )


# ---------------------------------------------------------------------------
# Coefficients
# ---------------------------------------------------------------------------

def _seed_indices(k: Sequence[int], m: int) -> list:
    k = [int(i) for i in k]
    if not k:
        raise ArgumentError("seed set is empty")
    check_indices(k, m, "seed index")
    if len(set(k)) != len(k):
        raise ArgumentError(f"seed indices must be distinct, got {k}")
    return k


def gram_condition(R: RatingMatrix, k: Sequence[int]) -> float:
    """2-norm condition number of R(:,k)ᵀ R(:,k)."""
    Rk = R.matrix[:, _seed_indices(k, R.m)]
    return float(np.linalg.cond((Rk.T @ Rk).toarray()))


def coefficients_via_ratings(R: RatingMatrix, k: Sequence[int],
                             max_condition: float = MAX_CONDITION) -> np.ndarray:
    """Least-squares C minimizing ||R − R(:,k) C||_F, without regularization."""
    k = _seed_indices(k, R.m)
    Rk = R.matrix[:, k]
    gram = (Rk.T @ Rk).toarray()
    condition = float(np.linalg.cond(gram))
    if not np.isfinite(condition) or condition > max_condition:
        raise IllConditionedError(
            f"R(:,k)ᵀR(:,k) is numerically singular (condition {condition:.3g} > {max_condition:.0e})",
            condition,
        )
    _log.debug("coefficients_via_ratings: L0=%d condition=%.3g", len(k), condition)
    rhs = (Rk.T @ R.matrix).toarray()
    return la.solve(gram, rhs, assume_a="pos")


def coefficients_via_factors(F: Factorization, k: Sequence[int]) -> np.ndarray:
    """Least-norm C solving S C = Q, i.e. C = S†Q."""
    k = _seed_indices(k, F.m)
    S = F.Q[:, k]
    rank = int(np.linalg.matrix_rank(S))
    if rank < F.f:
        raise RankDeficiencyError(
            f"seed submatrix has rank {rank} < f={F.f}", step=rank,
            hint="pick seeds whose latent vectors span the factor space",
        )
    return least_norm_coefficients(S, F.Q)


def predict_cold(z_prime, C_pred: np.ndarray) -> np.ndarray:
    """z = z′ C; z′ holds 0 for seed items the cold entity did not rate."""
    z = np.asarray(z_prime, dtype=float)
    if z.ndim not in (1, 2) or z.shape[-1] != C_pred.shape[0]:
        raise ArgumentError(f"seed ratings have length {z.shape[-1] if z.ndim else 0}, expected {C_pred.shape[0]}")
    return z @ C_pred


def representation_error(R: RatingMatrix, k: Sequence[int], C: np.ndarray) -> np.ndarray:
    """Dense residual R − R(:,k) C."""
    k = _seed_indices(k, R.m)
    return R.toarray() - np.asarray(R.matrix[:, k] @ C)


# ---------------------------------------------------------------------------
# Seed selection and the full pipeline
# ---------------------------------------------------------------------------

def select_seed(Q: np.ndarray, L0: Optional[int], selector: str = "rectangular",
                config: Optional[MaxvolConfig] = None) -> Tuple[SeedSet, CoefficientState]:
    """Run the chosen selector on the latent factor Q."""
    config = (config or MaxvolConfig()).require()
    selector = parse_choice("selector", selector, SELECTORS)
    f = Q.shape[0]
    if selector == "square":
        if L0 != f:
            raise ArgumentError(f"square selector needs f == L0, got f={f}, L0={L0}")
        try:
            return square_maxvol(Q, lu_pivot_init(Q), config.tol, config.swap_budget(f))
        except IterationCapError as e:
            _log.warning("select_seed: %s; using the last accepted seed", e.message)
            return e.seed, e.state
    return rect_maxvol(Q, L0, config=config)


def build_predictor(R: RatingMatrix, f: int, L0: Optional[int], variant: str = "ratings",
                    selector: str = "rectangular", *,
                    svd: Optional[SvdConfig] = None,
                    maxvol: Optional[MaxvolConfig] = None,
                    factorization: Optional[Factorization] = None,
                    cache: Optional[FactorCache] = None,
                    log: Optional[RunLog] = None) -> Predictor:
    """
    PureSVD → seed selection → coefficients.

    L0=None (rectangular only) grows the seed until every item latent vector
    lies inside the seed ellipsoid.
    """
    variant = parse_choice("variant", variant, VARIANTS)
    selector = parse_choice("selector", selector, SELECTORS)
    log = log if log is not None else RunLog()
    if L0 is not None:
        if f > L0:
            raise ArgumentError(f"rank f={f} exceeds seed size L0={L0}")
        if L0 > R.m:
            raise ArgumentError(f"seed size L0={L0} exceeds item count m={R.m}")
    elif selector == "square":
        raise ArgumentError("L0='auto' requires the rectangular selector")

    dataset_hash = R.digest()
    with log.timed("svd") as t:
        if factorization is not None:
            F = factorization
        elif cache is not None:
            F = cache.factorize(R, f, svd)
        else:
            F = pure_svd(R, f, config=svd)
        t.meta.update(F.meta())

    with log.timed("select") as t:
        seed, state = select_seed(F.Q, L0, selector, maxvol)
        t.meta.update({
            "selector": selector, "L": seed.size, "swaps": state.swaps,
            "max_offseed_norm": max_offseed_norm(state),
            "log_volume": log_rectangular_volume(seed.S),
        })

    with log.timed("coefficients") as t:
        if variant == "ratings":
            C = coefficients_via_ratings(R, seed.indices)
        else:
            C = coefficients_via_factors(F, seed.indices)
        t.meta["variant"] = variant

    return Predictor(
        indices=seed.indices,
        coefficients=C,
        variant=variant,
        f=f,
        dataset_hash=dataset_hash,
        selector=selector,
        meta={"swaps": state.swaps, "max_offseed_norm": max_offseed_norm(state)},
    )
