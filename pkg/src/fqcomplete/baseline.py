"""Combinatorial completion over F_2 from certified orthogonal index sets.

Row subsets S with |S| <= s whose rows sum to zero on every commonly observed
column are taken as evidence that e_S is orthogonal to the column space. The
orthogonal complement of those indicators gives a basis U_1 containing the
column space (likewise U_2 for rows), and X = U_1 X̃ U_2ᵀ is solved for from
the observed entries.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .gf import FieldSpec, gf
from .linalg import FieldMatrix, PartialMatrix, nullspace, solve_affine


class UnsupportedField(ValueError):
    pass


@dataclass(frozen=True)
class HFamily:
    side: str
    s: int
    sets: tuple[tuple[int, ...], ...]

    def indicator_matrix(self, n_side: int) -> np.ndarray:
        out = np.zeros((len(self.sets), n_side), dtype=np.int64)
        for row, S in enumerate(self.sets):
            out[row, list(S)] = 1
        return out


@dataclass(frozen=True)
class BaselineResult:
    status: str  # "unique" | "ambiguous" | "inconsistent"
    X_hat: FieldMatrix | None
    k1: int
    k2: int
    row_family: HFamily | None = None
    col_family: HFamily | None = None


def _require_f2(X_obs: PartialMatrix):
    if X_obs.field.order != 2:
        raise UnsupportedField(f"baseline completion needs F_2, got {X_obs.field}")


def _oriented(X_obs: PartialMatrix, side: str) -> tuple[np.ndarray, np.ndarray]:
    vals = X_obs.matrix.entries
    obs = X_obs.mask.observed
    if side == "row":
        return vals, obs
    if side == "column":
        return vals.T, obs.T
    raise ValueError(f"side must be 'row' or 'column', got {side!r}")


def build_h_family(X_obs: PartialMatrix, s: int, side: str = "row") -> HFamily:
    """Admit every subset S, 1 <= |S| <= s, whose selected lines XOR to zero on
    the positions observed in all of them (vacuously when there are none).

    Subsets are visited by size, then lexicographically.
    """
    _require_f2(X_obs)
    vals, obs = _oriented(X_obs, side)
    n_side = vals.shape[0]
    if not 1 <= s <= n_side:
        raise ValueError(f"need 1 <= s <= {n_side}, got {s}")
    admitted: list[tuple[int, ...]] = []
    for size in range(1, s + 1):
        combos = np.array(list(itertools.combinations(range(n_side), size)), dtype=np.int64)
        if combos.size == 0:
            continue
        common = np.logical_and.reduce(obs[combos], axis=1)
        parity = np.bitwise_xor.reduce(vals[combos], axis=1)
        ok = ~np.any(common & (parity == 1), axis=1)
        admitted.extend(tuple(int(i) for i in c) for c in combos[ok])
    return HFamily(side, s, tuple(admitted))


def perp_basis(H: HFamily, n_side: int, field: FieldSpec | None = None) -> FieldMatrix:
    """Columns form a basis of span{e_S : S in H}^⊥ over F_2."""
    F = field if field is not None else gf(2)
    if not H.sets:
        return FieldMatrix.identity(F, n_side)
    basis = nullspace(FieldMatrix(F, H.indicator_matrix(n_side)))
    return FieldMatrix(F, basis.T.reshape(n_side, basis.shape[0]))


def complete_baseline(X_obs: PartialMatrix, r: int) -> BaselineResult:
    _require_f2(X_obs)
    F = X_obs.field
    m, n = X_obs.shape
    s = r + 1
    H1 = build_h_family(X_obs, min(s, m), "row")
    H2 = build_h_family(X_obs, min(s, n), "column")
    U1 = perp_basis(H1, m, F).entries
    U2 = perp_basis(H2, n, F).entries
    k1, k2 = U1.shape[1], U2.shape[1]

    rows, cols = np.nonzero(X_obs.mask.observed)
    # equation for (i, j): Σ_ab U1[i,a] U2[j,b] X̃[a,b] = X_ij, X̃ flattened row-major
    A = (U1[rows][:, :, None] * U2[cols][:, None, :]).reshape(rows.size, k1 * k2) % 2
    b = X_obs.matrix.entries[rows, cols]
    sol = solve_affine(FieldMatrix(F, A.reshape(rows.size, k1 * k2)), b)
    if not sol.consistent:
        return BaselineResult("inconsistent", None, k1, k2, H1, H2)
    Xt = sol.particular.reshape(k1, k2)
    X_hat = FieldMatrix(F, (U1 @ Xt @ U2.T) % 2)
    # with nothing observed every subset is admitted vacuously and k1 = 0,
    # which would make the all-zero guess look determined
    status = "unique" if sol.status == "unique" and rows.size else "ambiguous"
    return BaselineResult(status, X_hat, k1, k2, H1, H2)
