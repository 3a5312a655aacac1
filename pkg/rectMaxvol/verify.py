"""
═══════════════════════════════════════════════════════════════════════════════
rectMaxvol CONFORMANCE RUNNER
Seeded oracle equivalences at capped sizes, with pinpointed failures
═══════════════════════════════════════════════════════════════════════════════

Features:
- Check categories (core/theory/pipeline)
- Each failure names the violated invariant and the generating inputs
- Filter by name/category
- CI-friendly result (False on any failure)
- Quick default sizes, --full for the acceptance sizes

Timing-dependent criteria (complexity scaling) live in the slow test suite,
not here: the summary printed by this runner is identical across reruns.
"""

from __future__ import annotations
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple
import fnmatch
import logging
import math
import time

import numpy as np

from .data import RatingMatrix
from .elicitation import coefficients_via_factors, representation_error
from .factorization import pure_svd
from .config import MaxvolConfig, SvdConfig
from .maxvol import (
    CoefficientState, append_column, lu_pivot_init, max_offseed_norm,
    rect_maxvol, rectangular_volume, square_maxvol, theorem_bound,
)
from .oracle import (
    OracleConfig, brute_force_max_rectvol, deletion_average, lemma1_check,
    naive_greedy, offseed_coefficient_norms, pinv_oracle,
)

_log = logging.getLogger(__name__)


# =============================================================================
# CHECK CATEGORIES
# =============================================================================

class CheckCategory(Enum):
    CORE = "core"           # update formulas and selectors against oracles
    THEORY = "theory"       # norm bounds and determinant identities
    PIPELINE = "pipeline"   # factorization + selection + prediction end to end


# =============================================================================
# DATA CLASSES
# =============================================================================

AppendFn = Callable[..., Tuple[CoefficientState, object]]


@dataclass
class VerifyConfig:
    seed: int = 0
    full: bool = False
    pattern: Optional[str] = None
    category: Optional[str] = None
    append: AppendFn = append_column     # swapped out by sensitivity tests

    def cases(self, quick: int, full: int) -> int:
        return full if self.full else quick

    def rng(self, salt: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, salt])


@dataclass
class CheckResult:
    """Result of one check over all of its generated cases."""
    name: str
    category: CheckCategory
    cases: int = 0
    failures: int = 0
    detail: Optional[str] = None       # first failure: invariant + inputs
    error: Optional[str] = None
    time_ms: float = 0.0

    @property
    def passed(self) -> bool:
        return self.failures == 0 and self.error is None

    def fail(self, detail: str) -> None:
        self.failures += 1
        if self.detail is None:
            self.detail = detail


@dataclass
class SuiteResult:
    results: List[CheckResult] = field(default_factory=list)
    seed: int = 0
    full: bool = False

    @property
    def passed(self) -> int:
        return sum(1 for r in self.results if r.passed)

    @property
    def failed(self) -> int:
        return sum(1 for r in self.results if not r.passed)

    @property
    def total(self) -> int:
        return len(self.results)

    @property
    def ok(self) -> bool:
        return self.failed == 0


# =============================================================================
# INSTANCE HELPERS
# =============================================================================

def _grown_state(Q: np.ndarray, L: int, rng: np.random.Generator, append: AppendFn):
    """LU seed grown to L columns by appending random off-seed columns."""
    seed = lu_pivot_init(Q)
    state = CoefficientState.from_seed(seed, capacity=L)
    while seed.size < L:
        free = np.flatnonzero(~state.selected)
        state, seed = append(state, seed, int(rng.choice(free)))
    return seed, state


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


# =============================================================================
# CHECKS
# =============================================================================

def check_volume_identity(cfg: VerifyConfig, res: CheckResult) -> None:
    rng = cfg.rng(1)
    for case in range(cfg.cases(200, 1000)):
        f = int(rng.integers(2, 9))
        L = int(rng.integers(f, 2 * f + 1))
        m = int(rng.integers(2 * f + 1, 201))
        Q = rng.standard_normal((f, m))
        seed, state = _grown_state(Q, L, rng, cfg.append)
        base = rectangular_volume(seed.S)
        free = np.flatnonzero(~state.selected)
        for i in rng.choice(free, size=min(5, free.size), replace=False):
            grown = rectangular_volume(Q[:, list(seed.indices) + [int(i)]])
            err = abs(grown - base * math.sqrt(1.0 + state.w[i])) / grown
            res.cases += 1
            if err > 1e-8:
                res.fail(f"Rectvol([S,q_i]) == Rectvol(S)·sqrt(1+w_i) off by {err:.3g}; "
                         f"case={case} f={f} L={L} m={m} i={int(i)}")


def check_update_equivalence(cfg: VerifyConfig, res: CheckResult) -> None:
    rng = cfg.rng(2)
    target = cfg.cases(1000, 10_000)
    case = 0
    while res.cases < target:
        f = int(rng.integers(2, 9))
        m = int(rng.integers(2 * f + 1, 201))
        Q = rng.standard_normal((f, m))
        seed = lu_pivot_init(Q)
        state = CoefficientState.from_seed(seed, capacity=2 * f)
        while seed.size < 2 * f and res.cases < target:
            free = np.flatnonzero(~state.selected)
            i = int(rng.choice(free))
            state, seed = cfg.append(state, seed, i)
            res.cases += 1
            expected = pinv_oracle(seed.S) @ Q
            err = _rel(state.C, expected)
            norms = np.einsum("ij,ij->j", expected, expected)
            w_err = float(np.max(np.abs(state.w - norms) / np.maximum(1.0, norms)))
            if err > 1e-8 or w_err > 1e-8:
                res.fail(f"C == S†Q and w == ||c||² after append (C err {err:.3g}, w err {w_err:.3g}); "
                         f"case={case} f={f} m={m} L={seed.size} i={i}")
        case += 1


def check_greedy_equivalence(cfg: VerifyConfig, res: CheckResult) -> None:
    rng = cfg.rng(3)
    for case in range(cfg.cases(40, 200)):
        f = int(rng.integers(1, 6))
        m = int(rng.integers(max(f + 1, 13), 41))
        L0 = int(rng.integers(f, 13))
        Q = rng.standard_normal((f, m))
        fast, _ = rect_maxvol(Q, L0)
        slow = naive_greedy(Q, L0)
        res.cases += 1
        if fast.indices != slow.indices:
            res.fail(f"rect_maxvol order == naive greedy order; case={case} f={f} m={m} L0={L0} "
                     f"fast={list(fast.indices)} naive={list(slow.indices)}")


def check_square_dominance(cfg: VerifyConfig, res: CheckResult) -> None:
    rng = cfg.rng(4)
    tol = 1e-2
    for case in range(cfg.cases(30, 100)):
        f = int(rng.integers(2, 7))
        m = int(rng.integers(f + 1, 61))
        Q = rng.standard_normal((f, m))
        seed, state = square_maxvol(Q, lu_pivot_init(Q), tol, max_iters=50 * f)
        res.cases += 1
        peak = float(np.max(np.abs(state.C)))
        if peak > 1.0 + tol + 1e-9:
            res.fail(f"max |C_ij| <= 1 + tol (got {peak:.6g}); case={case} f={f} m={m}")
            continue
        base = abs(np.linalg.det(seed.S))
        for p in range(f):
            for j in np.flatnonzero(~state.selected):
                swapped = list(seed.indices)
                swapped[p] = int(j)
                ratio = abs(np.linalg.det(Q[:, swapped])) / base
                if ratio > 1.0 + tol + 1e-9:
                    res.fail(f"no single swap grows |det S| beyond 1 + tol (ratio {ratio:.6g}); "
                             f"case={case} f={f} m={m} position={p} column={int(j)}")
                    break


def check_theorem_bound(cfg: VerifyConfig, res: CheckResult) -> None:
    oracle = OracleConfig(seed=cfg.seed)
    rng = oracle.rng(5)
    for case in range(cfg.cases(50, 200)):
        f = int(rng.integers(1, 4))
        L0 = int(rng.integers(f, 6))
        m = int(rng.integers(L0 + 1, 9))
        Q = rng.standard_normal((f, m))
        best = brute_force_max_rectvol(Q, L0, oracle)
        norms = offseed_coefficient_norms(Q, best.indices)
        bound = theorem_bound(f, L0)
        res.cases += 1
        if norms.size and float(norms.max()) > bound + 1e-10:
            res.fail(f"||c_i|| <= sqrt(f/(L0+1-f)) at the volume optimum ({float(norms.max()):.6g} > {bound:.6g}); "
                     f"case={case} f={f} L0={L0} m={m} seed={list(best.indices)}")


def check_lemma(cfg: VerifyConfig, res: CheckResult) -> None:
    rng = cfg.rng(6)
    for case in range(cfg.cases(200, 1000)):
        N = int(rng.integers(1, 4))
        M = int(rng.integers(N + 1, N + 5))
        A = rng.standard_normal((N, M))
        B = rng.standard_normal((M, N))
        res.cases += 1
        if not lemma1_check(A, B):
            res.fail(f"det(AB) <= M/(M-N)·max_i det(A_-i B_-i); case={case} N={N} M={M}")


def check_deletion_average(cfg: VerifyConfig, res: CheckResult) -> None:
    rng = cfg.rng(7)
    for case in range(cfg.cases(200, 1000)):
        N = int(rng.integers(1, 4))
        M = int(rng.integers(N + 1, N + 5))
        A = rng.standard_normal((N, M))
        B = rng.standard_normal((M, N))
        exact = float(np.linalg.det(A @ B))
        avg = deletion_average(A, B)
        res.cases += 1
        if abs(avg - exact) > 1e-10 * max(1.0, abs(exact)):
            res.fail(f"det(AB) == (1/(M-N))·Σ det(A_-i B_-i) ({exact:.12g} vs {avg:.12g}); "
                     f"case={case} N={N} M={M}")


def check_norm_decay(cfg: VerifyConfig, res: CheckResult) -> None:
    rng = cfg.rng(8)
    f, m, runs = 50, 2000, cfg.cases(10, 20)
    early = late = 0
    for _ in range(runs):
        Q = rng.standard_normal((f, m))
        _, state = rect_maxvol(Q, math.ceil(1.3 * f))
        early += max_offseed_norm(state) <= 2.0
        _, state = rect_maxvol(Q, math.ceil(2.2 * f))
        late += max_offseed_norm(state) <= 1.0
        res.cases += 1
    if early < 0.9 * runs or late < 0.9 * runs:
        res.fail(f"max ||c_i|| <= 2 at L0=ceil(1.3f) and <= 1 at L0=ceil(2.2f) in >= 90% of runs "
                 f"(got {early}/{runs} and {late}/{runs}); f={f} m={m}")


def check_exact_recovery(cfg: VerifyConfig, res: CheckResult) -> None:
    rng = cfg.rng(9)
    f, n, m = (8, 300, 200) if cfg.full else (4, 80, 60)
    P = rng.standard_normal((f, n))
    Q = rng.standard_normal((f, m))
    R = RatingMatrix.from_dense(P.T @ Q)
    F = pure_svd(R, f, config=SvdConfig(solver="dense"))
    total = np.linalg.norm(R.toarray())
    for L0 in (f, 2 * f):
        seed, _ = rect_maxvol(F.Q, L0)
        C = coefficients_via_factors(F, seed.indices)
        err = float(np.linalg.norm(representation_error(R, seed.indices, C)) / total)
        res.cases += 1
        if err > 1e-8:
            res.fail(f"||R - R(:,k)C||/||R|| <= 1e-8 on exact rank-f data (got {err:.3g}); "
                     f"f={f} n={n} m={m} L0={L0}")


def check_determinism(cfg: VerifyConfig, res: CheckResult) -> None:
    rng = cfg.rng(10)
    Q = rng.standard_normal((6, 120))
    config = MaxvolConfig(init="maxvol")
    a, sa = rect_maxvol(Q, None, config=config)
    b, sb = rect_maxvol(Q, None, config=config)
    res.cases += 1
    if a.indices != b.indices or sa.w.tobytes() != sb.w.tobytes():
        res.fail("identical inputs give identical seeds and norms; f=6 m=120 L0=auto")


CHECKS: List[Tuple[str, CheckCategory, Callable[[VerifyConfig, CheckResult], None]]] = [
    ("volume_identity", CheckCategory.CORE, check_volume_identity),
    ("update_equivalence", CheckCategory.CORE, check_update_equivalence),
    ("greedy_equivalence", CheckCategory.CORE, check_greedy_equivalence),
    ("square_dominance", CheckCategory.CORE, check_square_dominance),
    ("theorem_bound", CheckCategory.THEORY, check_theorem_bound),
    ("lemma", CheckCategory.THEORY, check_lemma),
    ("deletion_average", CheckCategory.THEORY, check_deletion_average),
    ("norm_decay", CheckCategory.THEORY, check_norm_decay),
    ("exact_recovery", CheckCategory.PIPELINE, check_exact_recovery),
    ("determinism", CheckCategory.PIPELINE, check_determinism),
]


# =============================================================================
# EXECUTION
# =============================================================================

def run_check(name: str, category: CheckCategory, fn, cfg: VerifyConfig) -> CheckResult:
    res = CheckResult(name, category)
    start = time.perf_counter()
    try:
        fn(cfg, res)
    except Exception as e:
        res.error = f"{type(e).__name__}: {e}"
        _log.debug("check %s raised", name, exc_info=True)
    res.time_ms = (time.perf_counter() - start) * 1000
    return res


def run_verify(cfg: Optional[VerifyConfig] = None) -> SuiteResult:
    cfg = cfg or VerifyConfig()
    suite = SuiteResult(seed=cfg.seed, full=cfg.full)
    for name, category, fn in CHECKS:
        if cfg.category and category.value != cfg.category:
            continue
        if cfg.pattern and not fnmatch.fnmatch(name, f"*{cfg.pattern}*"):
            continue
        suite.results.append(run_check(name, category, fn, cfg))
    return suite


# =============================================================================
# OUTPUT FORMATTING
# =============================================================================

def format_failure(result: CheckResult) -> str:
    lines = [f"FAIL [{result.category.value}] {result.name}"]
    if result.error:
        lines.append(f"  error: {result.error}")
    if result.detail:
        lines.append(f"  violated: {result.detail}")
        lines.append(f"  failing cases: {result.failures}/{result.cases}")
    return "\n".join(lines)


def format_results(suite: SuiteResult, verbose: bool = False, timings: bool = False,
                   max_failures: int = 10) -> str:
    out: List[str] = []
    out.append("=" * 65)
    out.append(f"  rectMaxvol VERIFY (seed={suite.seed}, {'full' if suite.full else 'quick'})")
    out.append("=" * 65)

    stats: Dict[CheckCategory, Tuple[int, int]] = {}
    for r in suite.results:
        status = "[PASS]" if r.passed else "[FAIL]"
        timing = f" ({r.time_ms:.1f}ms)" if timings else ""
        out.append(f"{status} [{r.category.value}] {r.name}: {r.cases - r.failures}/{r.cases}{timing}")
        ok, total = stats.get(r.category, (0, 0))
        stats[r.category] = (ok + int(r.passed), total + 1)

    if verbose:
        out.append("-" * 65)
        out.append("  Category Summary:")
        for cat in CheckCategory:
            if cat in stats:
                ok, total = stats[cat]
                out.append(f"    {'[OK]' if ok == total else '[!!]'} {cat.value:8}: {ok}/{total}")

    failures = [r for r in suite.results if not r.passed]
    if failures:
        out.append("-" * 65)
        out.append(f"  FAILURES ({len(failures)} total, showing first {min(len(failures), max_failures)}):")
        for r in failures[:max_failures]:
            out.append(format_failure(r))

    out.append("-" * 65)
    if suite.ok:
        out.append(f"[OK] ALL {suite.passed} CHECKS PASSED")
    else:
        out.append(f"[!!] {suite.failed} FAILED, {suite.passed} passed")
    out.append("=" * 65)
    return "\n".join(out)
