"""
rectMaxvol Ratings Data
Parse rating triplets into sparse matrices, split entities into cold-start
folds, and binarize relevance for ranking metrics.

Unknown ratings are never stored: an absent (user, item) entry means 0.
"""

from __future__ import annotations
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, TextIO, Tuple, Union
import csv
import io
import logging

import numpy as np
import scipy.sparse as sp

from .errors import ArgumentError, EmptyDatasetError, ParseError, RatingValueError
from .ledger import sha256

_log = logging.getLogger(__name__)

MAX_RATING = 10.0


# ---------------------------------------------------------------------------
# Formats and types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RatingsFormat:
    """
    Describes a ratings file: `user,item,rating[,timestamp]` rows.

    header=None sniffs the first line: it is a header only when none of its
    user, item or rating fields is a number (MovieLens `ratings.csv` starts
    with `userId,movieId,rating,timestamp`). Anything else is data and must
    parse.
    """
    delimiter: str = ","
    header: Optional[bool] = None

    @classmethod
    def movielens(cls) -> "RatingsFormat":
        return cls(delimiter=",", header=True)

    @classmethod
    def tsv(cls) -> "RatingsFormat":
        return cls(delimiter="\t", header=False)


@dataclass(frozen=True)
class RatingTriplet:
    user_id: int
    item_id: int
    rating: float


@dataclass(frozen=True)
class RatingMatrix:
    """
    n x m sparse rating matrix with dense 0-based indices.

    `user_ids[r]` / `item_ids[c]` give the external id of row r / column c.
    The CSR payload is never mutated after construction.
    """
    matrix: sp.csr_matrix
    user_ids: np.ndarray
    item_ids: np.ndarray

    def __post_init__(self):
        n, m = self.matrix.shape
        if n < 1 or m < 1:
            raise ArgumentError(f"rating matrix must be at least 1x1, got {n}x{m}")
        if len(self.user_ids) != n or len(self.item_ids) != m:
            raise ArgumentError("id maps must match the matrix shape")

    @classmethod
    def from_dense(cls, dense, user_ids=None, item_ids=None) -> "RatingMatrix":
        """Build from a dense array; zeros become unstored entries."""
        arr = np.asarray(dense, dtype=float)
        if arr.ndim != 2:
            raise ArgumentError(f"expected a 2-D array, got {arr.ndim}-D")
        csr = sp.csr_matrix(arr)
        csr.eliminate_zeros()
        n, m = arr.shape
        return cls(
            csr,
            np.arange(n) if user_ids is None else np.asarray(user_ids),
            np.arange(m) if item_ids is None else np.asarray(item_ids),
        )

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def m(self) -> int:
        return self.matrix.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.matrix.shape

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def row_index(self) -> Dict[int, int]:
        return {int(u): r for r, u in enumerate(self.user_ids)}

    def col_index(self) -> Dict[int, int]:
        return {int(i): c for c, i in enumerate(self.item_ids)}

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def rows(self, index) -> "RatingMatrix":
        """Sub-matrix of the given rows (users), all columns kept."""
        index = np.asarray(index, dtype=np.int64)
        return RatingMatrix(self.matrix[index].tocsr(), self.user_ids[index], self.item_ids)

    def triplets(self) -> Iterable[RatingTriplet]:
        coo = self.matrix.tocoo()
        for r, c, v in zip(coo.row, coo.col, coo.data):
            yield RatingTriplet(int(self.user_ids[r]), int(self.item_ids[c]), float(v))

    def digest(self) -> str:
        """Content hash over shape, ids and the canonical CSR payload."""
        csr = self.matrix.copy()
        csr.sort_indices()
        h = sha256(
            repr(self.shape).encode()
            + self.user_ids.astype(np.int64).tobytes()
            + self.item_ids.astype(np.int64).tobytes()
            + csr.indptr.astype(np.int64).tobytes()
            + csr.indices.astype(np.int64).tobytes()
            + csr.data.astype(np.float64).tobytes()
        )
        return h[:16]


@dataclass(frozen=True)
class FoldSplit:
    fold_count: int
    assignments: np.ndarray
    seed: int

    def members(self, fold: int) -> np.ndarray:
        """Entity indices assigned to `fold`, ascending."""
        return np.flatnonzero(self.assignments == fold)

    def complement(self, *folds: int) -> np.ndarray:
        return np.flatnonzero(~np.isin(self.assignments, folds))

    def sizes(self) -> List[int]:
        return np.bincount(self.assignments, minlength=self.fold_count).tolist()


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def _looks_like_header(row: List[str]) -> bool:
    if len(row) < 3:
        return False
    return not any(_is_number(cell) for cell in row[:3])


def parse_ratings(source: Union[TextIO, str], fmt: Optional[RatingsFormat] = None) -> RatingMatrix:
    """
    Parse `user_id,item_id,rating[,timestamp]` lines into a RatingMatrix.

    Rows and columns are numbered by first appearance of each id. Duplicate
    (user, item) pairs keep the last rating; timestamps are discarded.
    """
    fmt = fmt or RatingsFormat()
    stream = io.StringIO(source) if isinstance(source, str) else source
    reader = csv.reader(stream, delimiter=fmt.delimiter)

    cells: Dict[Tuple[int, int], float] = {}
    users: Dict[int, int] = {}
    items: Dict[int, int] = {}
    first = True

    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if first:
            first = False
            header = fmt.header if fmt.header is not None else _looks_like_header(row)
            if header:
                continue
        if len(row) < 3 or len(row) > 4:
            raise ParseError(f"expected 3 or 4 fields, got {len(row)}", line)
        try:
            user = int(row[0])
            item = int(row[1])
            rating = float(row[2])
        except ValueError as e:
            raise ParseError(f"malformed triplet {row!r}: {e}", line)
        if not (0.0 < rating <= MAX_RATING):
            raise RatingValueError(f"rating {rating} outside (0, {MAX_RATING:g}]", line)
        r = users.setdefault(user, len(users))
        c = items.setdefault(item, len(items))
        cells[(r, c)] = rating

    if not cells:
        raise EmptyDatasetError("ratings input holds no triplets")

    keys = np.array(list(cells.keys()), dtype=np.int64)
    data = np.fromiter(cells.values(), dtype=float, count=len(cells))
    matrix = sp.csr_matrix((data, (keys[:, 0], keys[:, 1])), shape=(len(users), len(items)))
    matrix.sort_indices()
    _log.info("parsed %d ratings: %d users x %d items", matrix.nnz, len(users), len(items))
    return RatingMatrix(
        matrix,
        np.fromiter(users.keys(), dtype=np.int64, count=len(users)),
        np.fromiter(items.keys(), dtype=np.int64, count=len(items)),
    )


def load_ratings(path: Union[str, Path], fmt: Optional[RatingsFormat] = None) -> RatingMatrix:
    path = Path(path)
    if not path.exists():
        raise ArgumentError(f"File not found: {path}")
    if fmt is None and path.suffix in (".tsv", ".data"):
        fmt = RatingsFormat.tsv()
    with path.open("r", encoding="utf-8", newline="") as f:
        return parse_ratings(f, fmt)


def write_ratings(R: RatingMatrix, sink: TextIO, delimiter: str = ",") -> None:
    """Write canonical triplets (sorted by external user, then item id), no header."""
    writer = csv.writer(sink, delimiter=delimiter, lineterminator="\n")
    for t in sorted(R.triplets(), key=lambda t: (t.user_id, t.item_id)):
        writer.writerow([t.user_id, t.item_id, repr(t.rating)])


# ---------------------------------------------------------------------------
# Transformations
# ---------------------------------------------------------------------------

def transpose(R: RatingMatrix) -> RatingMatrix:
    """Swap users and items; item cold start becomes user cold start."""
    return RatingMatrix(R.matrix.T.tocsr(), R.item_ids, R.user_ids)


def split_folds(entity_count: int, fold_count: int = 5, seed: int = 0) -> FoldSplit:
    """
    Randomly partition `entity_count` entities into `fold_count` folds whose
    sizes differ by at most one.
    """
    if entity_count < 1 or fold_count < 1:
        raise ArgumentError(f"entity_count and fold_count must be positive, got {entity_count}, {fold_count}")
    if fold_count > entity_count:
        raise ArgumentError(f"cannot split {entity_count} entities into {fold_count} folds")
    rng = np.random.default_rng(seed)
    order = rng.permutation(entity_count)
    assignments = np.empty(entity_count, dtype=np.int64)
    assignments[order] = np.arange(entity_count) % fold_count
    return FoldSplit(fold_count, assignments, seed)


def binarize_relevance(R: RatingMatrix, threshold: float = 4.0) -> sp.csr_matrix:
    """Boolean CSR that is True exactly where a stored rating >= threshold."""
    relevant = R.matrix.copy().astype(float)
    relevant.data = (relevant.data >= threshold).astype(float)
    relevant.eliminate_zeros()
    return relevant.astype(bool)
