"""
═══════════════════════════════════════════════════════════════════════════════
rectMaxvol RUN LEDGER
Audit trail for factorization, selection and evaluation runs

Trace → RunLog → Ledger (hash-chained) → run metadata JSON
═══════════════════════════════════════════════════════════════════════════════
"""

from __future__ import annotations
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union
import hashlib
import json
import os
import tempfile
import time

import numpy as np


# ═══════════════════════════════════════════════════════════════════════════════
# HELPERS
# ═══════════════════════════════════════════════════════════════════════════════

def _norm(v: Any) -> Any:
    if v is None or isinstance(v, (bool, int, str)):
        return v
    if isinstance(v, float):
        return v if np.isfinite(v) else repr(v)
    if isinstance(v, np.generic):
        return _norm(v.item())
    if isinstance(v, np.ndarray):
        return [_norm(i) for i in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_norm(i) for i in v]
    if isinstance(v, dict):
        return {str(k): _norm(v[k]) for k in sorted(v.keys(), key=str)}
    if hasattr(v, "to_dict"):
        return _norm(v.to_dict())
    return repr(v)


def stable_json(x: Any, indent: Optional[int] = None) -> str:
    """Deterministic JSON serialization (sorted keys, numpy-aware)."""
    separators = (",", ":") if indent is None else (",", ": ")
    return json.dumps(_norm(x), ensure_ascii=False, separators=separators, indent=indent)


def sha256(s: Union[str, bytes]) -> str:
    if isinstance(s, str):
        s = s.encode("utf-8")
    return hashlib.sha256(s).hexdigest()


def write_atomic(path: Union[str, Path], text: str) -> Path:
    """Write `text` to a temp file beside `path`, then rename over it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


# ═══════════════════════════════════════════════════════════════════════════════
# TRACE - One step of a run
# ═══════════════════════════════════════════════════════════════════════════════

@dataclass
class Trace:
    step: str
    ok: bool
    meta: Optional[Dict[str, Any]] = None
    note: Optional[str] = None
    at: float = 0.0

    @staticmethod
    def t(step: str, ok: bool = True, meta: Optional[Dict] = None, note: Optional[str] = None) -> "Trace":
        return Trace(step=step, ok=ok, meta=meta, note=note, at=time.time())

    def to_dict(self) -> Dict:
        return {
            "step": self.step,
            "ok": self.ok,
            "meta": self.meta,
            "note": self.note,
            "at": self.at,
        }


@dataclass
class RunLog:
    """Ordered traces for one run; `ok` is False once any step failed."""
    traces: List[Trace] = field(default_factory=list)

    def add(self, step: str, ok: bool = True, note: Optional[str] = None, **meta: Any) -> Trace:
        entry = Trace.t(step, ok, meta or None, note)
        self.traces.append(entry)
        return entry

    def timed(self, step: str) -> "_Timer":
        return _Timer(self, step)

    @property
    def ok(self) -> bool:
        return all(t.ok for t in self.traces)

    def find(self, step: str) -> List[Trace]:
        return [t for t in self.traces if t.step == step]

    def to_dict(self) -> List[Dict]:
        return [t.to_dict() for t in self.traces]


class _Timer:
    """Context manager recording a step's wall time in milliseconds."""

    def __init__(self, log: RunLog, step: str):
        self.log = log
        self.step = step
        self.meta: Dict[str, Any] = {}

    def __enter__(self) -> "_Timer":
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        self.meta["elapsed_ms"] = round((time.perf_counter() - self.start) * 1000, 3)
        self.log.add(self.step, exc is None, str(exc) if exc else None, **self.meta)
        return False


# ═══════════════════════════════════════════════════════════════════════════════
# LEDGER - Hash-chained record of produced artifacts
# ═══════════════════════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class LedgerEntry:
    index: int
    operation: str
    input_hash: str
    output_hash: str
    prev_hash: str
    hash: str


class Ledger:
    """
    Hash-chained ledger of run artifacts.

    Entries hash only their inputs and outputs (no wall-clock time), so two
    identical runs produce identical chains.
    """

    def __init__(self) -> None:
        self.entries: List[LedgerEntry] = []

    def append(self, op: str, input_obj: Any, output_obj: Any) -> LedgerEntry:
        prev_hash = self.entries[-1].hash if self.entries else "GENESIS"
        body = {
            "i": len(self.entries),
            "op": op,
            "in_hash": sha256(stable_json(input_obj)),
            "out_hash": sha256(stable_json(output_obj)),
            "prev_hash": prev_hash,
        }
        entry = LedgerEntry(
            index=body["i"],
            operation=op,
            input_hash=body["in_hash"],
            output_hash=body["out_hash"],
            prev_hash=prev_hash,
            hash=sha256(stable_json(body)),
        )
        self.entries.append(entry)
        return entry

    def verify_chain(self) -> bool:
        for i, entry in enumerate(self.entries):
            expected_prev = self.entries[i - 1].hash if i > 0 else "GENESIS"
            if entry.prev_hash != expected_prev:
                return False
            body = {
                "i": entry.index,
                "op": entry.operation,
                "in_hash": entry.input_hash,
                "out_hash": entry.output_hash,
                "prev_hash": entry.prev_hash,
            }
            if sha256(stable_json(body)) != entry.hash:
                return False
        return True

    def head(self) -> str:
        return self.entries[-1].hash if self.entries else "GENESIS"

    def to_dict(self) -> List[Dict]:
        return [
            {"index": e.index, "op": e.operation, "in": e.input_hash,
             "out": e.output_hash, "hash": e.hash}
            for e in self.entries
        ]

    def __len__(self) -> int:
        return len(self.entries)
