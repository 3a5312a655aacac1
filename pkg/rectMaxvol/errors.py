"""
rectMaxvol Errors That Teach

Every failure raised by the library is a RectMaxvolError subclass carrying:
  - a one-line message naming what went wrong
  - an optional hint telling the caller what to try instead
  - "Did you mean?" suggestions for mistyped selector/variant/mode names
"""

from typing import Any, List, Optional, Sequence


class RectMaxvolError(Exception):
    """Base class for every error raised by rectMaxvol."""

    def __init__(self, message: str, hint: Optional[str] = None):
        self.message = message
        self.hint = hint
        super().__init__(f"{message}. Hint: {hint}" if hint else message)


class ArgumentError(RectMaxvolError, ValueError):
    """Invalid shape, index, size or name passed by the caller."""


class ParseError(RectMaxvolError):
    def __init__(self, message: str, line: int = 0, hint: Optional[str] = None):
        self.line = line
        super().__init__(f"Line {line}: {message}" if line else message, hint)


class RatingValueError(ParseError):
    """A stored rating fell outside (0, 10]."""


class EmptyDatasetError(RectMaxvolError):
    pass


class RankDeficiencyError(RectMaxvolError):
    """Column-pivoted elimination ran out of usable pivots."""

    def __init__(self, message: str, step: int, hint: Optional[str] = None):
        self.step = step
        super().__init__(message, hint)


class ConvergenceError(RectMaxvolError):
    def __init__(self, message: str, residual: float = float("nan"), hint: Optional[str] = None):
        self.residual = residual
        super().__init__(message, hint)


class IterationCapError(RectMaxvolError):
    """
    Square Maxvol hit its swap budget before reaching dominance.

    `seed` and `state` are the last accepted (valid, invertible) seed set and
    its coefficients, so callers may keep going with a non-dominant seed.
    """

    def __init__(self, message: str, seed: Any, state: Any, iterations: int):
        self.seed = seed
        self.state = state
        self.iterations = iterations
        super().__init__(message, "raise max_iters or loosen tol")


class IllConditionedError(RectMaxvolError):
    def __init__(self, message: str, condition: float):
        self.condition = condition
        super().__init__(message, "use a smaller seed size L0 or the 'factors' variant")


class OracleCapError(ArgumentError):
    """An exhaustive oracle refused an input above its size caps."""


# ---------------------------------------------------------------------------
# Edit distance (Levenshtein)
# ---------------------------------------------------------------------------

def _edit_distance(a: str, b: str) -> int:
    if len(a) < len(b):
        return _edit_distance(b, a)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a):
        curr = [i + 1]
        for j, cb in enumerate(b):
            curr.append(min(curr[j] + 1, prev[j + 1] + 1, prev[j] + (ca != cb)))
        prev = curr
    return prev[-1]


def find_closest(name: str, candidates: Sequence[str], max_distance: int = 3) -> Optional[str]:
    """Find the closest match to `name` among `candidates`, if any is near enough."""
    best = None
    best_dist = max_distance + 1
    for c in candidates:
        d = _edit_distance(name.lower(), c.lower())
        if d < best_dist:
            best_dist = d
            best = c
    return best


# ---------------------------------------------------------------------------
# Hint builders
# ---------------------------------------------------------------------------

def choice_hint(kind: str, value: str, choices: Sequence[str]) -> str:
    """Build an error message for an unknown option name with a suggestion."""
    msg = f"Unknown {kind} '{value}'"
    suggestion = find_closest(value, choices)
    if suggestion:
        msg += f". Did you mean '{suggestion}'?"
    else:
        msg += f". Expected one of: {', '.join(choices)}"
    return msg


def parse_choice(kind: str, value: str, choices: Sequence[str]) -> str:
    """Normalize an option name, raising ArgumentError with a suggestion."""
    normalized = value.strip().lower()
    if normalized not in choices:
        raise ArgumentError(choice_hint(kind, value, choices))
    return normalized


def shape_hint(what: str, expected: Sequence[int], actual: Sequence[int]) -> str:
    exp = "x".join(str(d) for d in expected)
    act = "x".join(str(d) for d in actual)
    return f"{what} must be {exp}, got {act}"


def check_indices(indices: List[int], bound: int, what: str = "index") -> None:
    """Raise ArgumentError unless every index is an int in [0, bound)."""
    for i in indices:
        if not 0 <= int(i) < bound:
            raise ArgumentError(f"{what} {i} out of range [0, {bound})")
