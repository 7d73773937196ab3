"""Dense matrices over F_q: products, row reduction, affine solves, and the
random instances / observation masks used by the experiments."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .gf import FieldError, FieldSpec


@dataclass(frozen=True, eq=False)
class FieldMatrix:
    """An m×n matrix over ``field`` backed by an int64 array of representatives."""

    field: FieldSpec
    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=np.int64, copy=True)
        if arr.ndim != 2:
            raise FieldError(f"expected a 2-D array, got shape {arr.shape}")
        if arr.size and (arr.min() < 0 or arr.max() >= self.field.order):
            raise FieldError(f"entries must lie in [0, {self.field.order})")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @property
    def T(self) -> FieldMatrix:
        return FieldMatrix(self.field, self.entries.T)

    def __eq__(self, other):
        if not isinstance(other, FieldMatrix):
            return NotImplemented
        return self.field == other.field and np.array_equal(self.entries, other.entries)

    def __matmul__(self, other: FieldMatrix) -> FieldMatrix:
        return mat_mul(self, other)

    @classmethod
    def zeros(cls, field: FieldSpec, m: int, n: int) -> FieldMatrix:
        return cls(field, np.zeros((m, n), dtype=np.int64))

    @classmethod
    def identity(cls, field: FieldSpec, n: int) -> FieldMatrix:
        return cls(field, np.eye(n, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class ObservationMask:
    """Ω as a boolean m×n array; ``pairs()`` yields the observed (i, j)."""

    observed: np.ndarray

    def __post_init__(self):
        arr = np.array(self.observed, dtype=bool, copy=True)
        if arr.ndim != 2:
            raise ValueError("mask must be 2-D")
        arr.setflags(write=False)
        object.__setattr__(self, "observed", arr)

    @classmethod
    def from_pairs(cls, m: int, n: int, pairs) -> ObservationMask:
        arr = np.zeros((m, n), dtype=bool)
        for i, j in pairs:
            if not (0 <= i < m and 0 <= j < n):
                raise ValueError(f"pair {(i, j)} outside {m}x{n}")
            arr[i, j] = True
        return cls(arr)

    @classmethod
    def full(cls, m: int, n: int) -> ObservationMask:
        return cls(np.ones((m, n), dtype=bool))

    @property
    def rows(self) -> int:
        return self.observed.shape[0]

    @property
    def cols(self) -> int:
        return self.observed.shape[1]

    def pairs(self) -> Iterator[tuple[int, int]]:
        for i, j in zip(*np.nonzero(self.observed)):
            yield int(i), int(j)

    def __len__(self):
        return int(self.observed.sum())

    def __eq__(self, other):
        if not isinstance(other, ObservationMask):
            return NotImplemented
        return np.array_equal(self.observed, other.observed)


@dataclass(frozen=True, eq=False)
class PartialMatrix:
    """P_Ω(X): entries outside the mask are meaningless and stored as 0."""

    matrix: FieldMatrix
    mask: ObservationMask

    def __post_init__(self):
        if self.matrix.shape != self.mask.observed.shape:
            raise ValueError(
                f"matrix shape {self.matrix.shape} != mask shape {self.mask.observed.shape}"
            )
        clean = np.where(self.mask.observed, self.matrix.entries, 0)
        object.__setattr__(self, "matrix", FieldMatrix(self.matrix.field, clean))

    @property
    def field(self) -> FieldSpec:
        return self.matrix.field

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def agrees_with(self, other: FieldMatrix) -> bool:
        """True iff ``other`` matches the observed entries."""
        obs = self.mask.observed
        return bool(np.array_equal(self.matrix.entries[obs], other.entries[obs]))

    def __eq__(self, other):
        if not isinstance(other, PartialMatrix):
            return NotImplemented
        return self.matrix == other.matrix and self.mask == other.mask


def mat_mul(A: FieldMatrix, B: FieldMatrix) -> FieldMatrix:
    if A.field != B.field:
        raise FieldError(f"field mismatch: {A.field} vs {B.field}")
    if A.cols != B.rows:
        raise FieldError(f"shape mismatch: {A.shape} @ {B.shape}")
    F = A.field
    a, b = A.entries, B.entries
    if F.degree == 1:
        # q <= 2^16 and k <= 2^20 terms keep the int64 accumulator exact
        return FieldMatrix(F, (a @ b) % F.characteristic)
    acc = np.zeros((A.rows, B.cols), dtype=np.int64)
    for k in range(A.cols):
        acc = F.add(acc, F.mul(a[:, k, None], b[None, k, :]))
    return FieldMatrix(F, acc)


def row_reduce(F: FieldSpec, a: np.ndarray, ncols: int | None = None) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over F.

    Only the first ``ncols`` columns are eligible as pivots (default: all),
    which lets callers reduce an augmented matrix [A | b].
    Returns the reduced copy and the pivot column list.
    """
    a = np.array(a, dtype=np.int64, copy=True)
    m, n = a.shape
    ncols = n if ncols is None else ncols
    pivots: list[int] = []
    row = 0
    for c in range(ncols):
        if row >= m:
            break
        nz = np.nonzero(a[row:, c])[0]
        if nz.size == 0:
            continue
        piv = row + int(nz[0])
        if piv != row:
            a[[row, piv]] = a[[piv, row]]
        a[row] = F.mul(a[row], F.inv(a[row, c]))
        others = np.nonzero(a[:, c])[0]
        others = others[others != row]
        if others.size:
            factors = F.neg(a[others, c])
            a[others] = F.add(a[others], F.mul(factors[:, None], a[row][None, :]))
        pivots.append(c)
        row += 1
    return a, pivots


def rank(A: FieldMatrix) -> int:
    if A.entries.size == 0:
        return 0
    return len(row_reduce(A.field, A.entries)[1])


@dataclass(frozen=True)
class SolutionSet:
    """Affine solution set of A x = b.

    ``status`` is one of ``"inconsistent"``, ``"unique"``, ``"affine"``.
    ``particular`` is None when inconsistent; ``nullspace`` has the basis
    vectors as rows (zero rows when unique).
    """

    status: str
    particular: np.ndarray | None
    nullspace: np.ndarray

    @property
    def consistent(self) -> bool:
        return self.status != "inconsistent"

    @property
    def dimension(self) -> int:
        return self.nullspace.shape[0]


def solve_affine(A: FieldMatrix, b) -> SolutionSet:
    F = A.field
    b = np.asarray(b, dtype=np.int64).reshape(-1)
    m, n = A.shape
    if b.shape[0] != m:
        raise FieldError(f"rhs length {b.shape[0]} != rows {m}")
    aug = np.concatenate([A.entries, b[:, None]], axis=1) if m else np.zeros((0, n + 1), dtype=np.int64)
    red, pivots = row_reduce(F, aug, ncols=n)
    r = len(pivots)
    if m and np.any(red[r:, n] != 0):
        return SolutionSet("inconsistent", None, np.zeros((0, n), dtype=np.int64))

    x = np.zeros(n, dtype=np.int64)
    for k, c in enumerate(pivots):
        x[c] = red[k, n]

    free = [c for c in range(n) if c not in set(pivots)]
    basis = np.zeros((len(free), n), dtype=np.int64)
    for t, f in enumerate(free):
        basis[t, f] = 1
        for k, c in enumerate(pivots):
            basis[t, c] = F.neg(red[k, f])
    status = "unique" if not free else "affine"
    return SolutionSet(status, x, basis)


def nullspace(A: FieldMatrix) -> np.ndarray:
    """Basis (as rows) of {x : A x = 0}."""
    return solve_affine(A, np.zeros(A.rows, dtype=np.int64)).nullspace


def random_rank_r(
    m: int,
    n: int,
    r: int,
    field: FieldSpec,
    rng: np.random.Generator,
    require_exact_rank: bool = False,
) -> tuple[FieldMatrix, FieldMatrix, FieldMatrix]:
    """Draw L (m×r) and R (r×n) with i.i.d. uniform entries and return (LR, L, R).

    With ``require_exact_rank`` the factors are redrawn until both have rank r.
    """
    if m < 1 or n < 1 or not 1 <= r <= min(m, n):
        raise ValueError(f"need 1 <= r <= min(m, n), got m={m} n={n} r={r}")
    while True:
        L = FieldMatrix(field, field.random(rng, (m, r)))
        R = FieldMatrix(field, field.random(rng, (r, n)))
        if not require_exact_rank or (rank(L) == r and rank(R) == r):
            return mat_mul(L, R), L, R


def sample_mask(m: int, n: int, p: float, rng: np.random.Generator) -> ObservationMask:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"observation probability {p} outside [0, 1]")
    return ObservationMask(rng.random((m, n)) < p)
