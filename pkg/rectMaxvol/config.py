"""
rectMaxvol Configuration
Frozen parameter bundles for every stage of the pipeline.

Each bundle validates itself with check(), which returns an error string
or None, and require(), which raises ArgumentError on that string.
"""

from __future__ import annotations
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any, Dict, Optional, Tuple
import os

from .errors import ArgumentError, parse_choice


SELECTORS = ("square", "rectangular")
VARIANTS = ("ratings", "factors")
MODES = ("user", "item")
SOLVERS = ("auto", "dense", "arpack")
INITS = ("lu", "maxvol")
METRICS = ("precision", "recall")

CACHE_ENV = "RECTMAXVOL_CACHE_DIR"
SCHEMA_VERSION = 1


class _Checked:
    def check(self) -> Optional[str]:
        return None

    def require(self):
        problem = self.check()
        if problem:
            raise ArgumentError(problem)
        return self

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class SvdConfig(_Checked):
    """
    Truncated SVD settings.

    "auto" densifies when n*m <= dense_limit and otherwise runs ARPACK with a
    starting vector drawn from `seed`, so every solver is deterministic.
    """
    solver: str = "auto"
    tol: float = 1e-8
    max_iters: Optional[int] = None
    seed: int = 0
    dense_limit: int = 4_000_000

    def check(self) -> Optional[str]:
        if self.solver not in SOLVERS:
            return f"Unknown solver '{self.solver}'"
        if self.tol < 0:
            return f"SVD tolerance must be >= 0, got {self.tol}"
        if self.max_iters is not None and self.max_iters < 1:
            return f"SVD max_iters must be positive, got {self.max_iters}"
        return None

    def resolve(self, n: int, m: int, f: Optional[int] = None) -> str:
        """Solver that runs for an n x m matrix at rank f."""
        solver = self.solver
        if solver == "auto":
            solver = "dense" if n * m <= self.dense_limit else "arpack"
        if solver == "arpack" and f is not None and f >= min(n, m):
            # svds needs k < min(n, m)
            solver = "dense"
        return solver


@dataclass(frozen=True)
class MaxvolConfig(_Checked):
    init: str = "lu"                   # initial square seed: LU pivots or LU + Square Maxvol
    tol: float = 1e-2                  # dominance slack for Square Maxvol
    max_iters: Optional[int] = None    # swap budget; None means 2*f
    stop_norm: float = 1.0             # L0="auto": stop once every off-seed ||c_i|| <= stop_norm
    drift_every: int = 64              # DEBUG-only recompute of w every N appends

    def check(self) -> Optional[str]:
        if self.init not in INITS:
            return f"Unknown init '{self.init}'"
        if self.tol < 0:
            return f"Maxvol tolerance must be >= 0, got {self.tol}"
        if self.max_iters is not None and self.max_iters < 1:
            return f"Maxvol max_iters must be positive, got {self.max_iters}"
        if self.stop_norm <= 0:
            return f"stop_norm must be positive, got {self.stop_norm}"
        return None

    def swap_budget(self, f: int) -> int:
        return self.max_iters if self.max_iters is not None else 2 * f


@dataclass(frozen=True)
class EvalConfig(_Checked):
    threshold: float = 4.0
    k_list: Tuple[int, ...] = (5, 10, 20)
    metric: str = "precision"          # validation metric used to pick the best rank
    metric_k: int = 10
    workers: int = 1

    def check(self) -> Optional[str]:
        if not self.k_list or any(k < 1 for k in self.k_list):
            return f"k_list must hold positive integers, got {list(self.k_list)}"
        if self.metric not in METRICS:
            return f"Unknown metric '{self.metric}'"
        if self.metric_k < 1:
            return f"metric_k must be positive, got {self.metric_k}"
        if self.workers < 1:
            return f"workers must be positive, got {self.workers}"
        return None


@dataclass(frozen=True)
class RunConfig(_Checked):
    """Everything one CLI invocation needs; all randomness flows from `seed`."""
    command: str
    dataset: Optional[str] = None
    mode: str = "user"
    selector: str = "rectangular"
    f: int = 10
    L0: Optional[int] = 10             # None means "auto"
    variant: str = "ratings"
    fold_count: int = 5
    seed: int = 0
    k_list: Tuple[int, ...] = (5, 10, 20)
    threshold: float = 4.0
    seed_sizes: Tuple[int, ...] = ()
    rank_grid: Tuple[int, ...] = ()
    solver: str = "auto"
    output: Optional[str] = None
    csv_output: Optional[str] = None
    optimal_output: Optional[str] = None
    predictor_output: Optional[str] = None
    cache_dir: Optional[str] = None
    delimiter: str = ","
    header: Optional[bool] = None
    workers: int = 1
    maxvol: MaxvolConfig = field(default_factory=MaxvolConfig)

    def check(self) -> Optional[str]:
        if self.mode not in MODES:
            return f"Unknown mode '{self.mode}'"
        if self.selector not in SELECTORS:
            return f"Unknown selector '{self.selector}'"
        if self.variant not in VARIANTS:
            return f"Unknown variant '{self.variant}'"
        if self.f < 1:
            return f"rank f must be positive, got {self.f}"
        if self.L0 is None:
            if self.selector != "rectangular":
                return "L0='auto' requires the rectangular selector"
        elif self.f > self.L0:
            return f"rank f={self.f} exceeds seed size L0={self.L0}"
        elif self.selector == "square" and self.f != self.L0:
            return f"square selector needs f == L0, got f={self.f}, L0={self.L0}"
        if self.solver not in SOLVERS:
            return f"Unknown solver '{self.solver}'"
        if self.fold_count < 1:
            return f"fold_count must be positive, got {self.fold_count}"
        if self.workers < 1:
            return f"workers must be positive, got {self.workers}"
        return self.maxvol.check()

    @classmethod
    def build(cls, **kwargs) -> "RunConfig":
        """Normalize option names (with did-you-mean hints) and validate."""
        for key, choices in (("mode", MODES), ("selector", SELECTORS), ("variant", VARIANTS), ("solver", SOLVERS)):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = parse_choice(key, kwargs[key], choices)
        return cls(**kwargs).require()

    def svd(self) -> SvdConfig:
        return SvdConfig(solver=self.solver, seed=self.seed)

    def evaluation(self) -> EvalConfig:
        return EvalConfig(threshold=self.threshold, k_list=tuple(self.k_list), workers=self.workers)


def parse_seed_size(value: str) -> Optional[int]:
    """Parse an L0 flag: a positive integer or the word 'auto'."""
    if value.strip().lower() == "auto":
        return None
    try:
        size = int(value)
    except ValueError:
        raise ArgumentError(f"L0 must be a positive integer or 'auto', got '{value}'")
    if size < 1:
        raise ArgumentError(f"L0 must be positive, got {size}")
    return size


def cache_dir(override: Optional[str] = None) -> Optional[Path]:
    """Resolve the factor cache directory: explicit flag, then environment."""
    value = override or os.environ.get(CACHE_ENV)
    return Path(value) if value else None
