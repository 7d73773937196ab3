"""ML-decoding failure probabilities of random binary linear codes over the
binary erasure channel, and the observation-probability thresholds derived
from them.

``pe_exact`` is the closed-form average failure probability of a code drawn
from the uniform k×n generator ensemble; ``pe_mc_oracle`` estimates the same
quantity by direct simulation and shares no code with it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class PeQuery:
    epsilon: float
    k: int
    n: int

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"erasure probability {self.epsilon} outside [0, 1]")
        if not 1 <= self.k <= self.n:
            raise ValueError(f"need 1 <= k <= n, got k={self.k} n={self.n}")


class CappedAtOne(float):
    """Threshold result when even p = 1 does not meet the failure budget."""

    def __new__(cls):
        return super().__new__(cls, 1.0)

    def __repr__(self):
        return "CappedAtOne()"


def _log_binom_pmf(n: int, e: int, eps: float) -> float:
    if eps == 0.0:
        return 0.0 if e == 0 else -math.inf
    if eps == 1.0:
        return 0.0 if e == n else -math.inf
    return (
        math.lgamma(n + 1)
        - math.lgamma(e + 1)
        - math.lgamma(n - e + 1)
        + e * math.log(eps)
        + (n - e) * math.log1p(-eps)
    )


def _rank_deficiency_prob(unerased: int, k: int) -> float:
    """1 - Π_{i=u-k+1}^{u} (1 - 2^-i): a uniform k×u binary matrix has rank < k."""
    prod = 1.0
    for i in range(unerased - k + 1, unerased + 1):
        if i <= 0:
            return 1.0
        prod *= 1.0 - 2.0**-i
        if prod == 0.0:
            return 1.0
    return 1.0 - prod


def pe_exact(q: PeQuery) -> float:
    n, k, eps = q.n, q.k, q.epsilon
    total = 0.0
    for e in range(n + 1):
        lw = _log_binom_pmf(n, e, eps)
        if lw == -math.inf:
            continue
        total += math.exp(lw) * _rank_deficiency_prob(n - e, k)
    return min(1.0, max(0.0, total))


def pe(epsilon: float, k: int, n: int) -> float:
    return pe_exact(PeQuery(epsilon, k, n))


@lru_cache(maxsize=None)
def _subspace_automaton(k: int) -> tuple[np.ndarray, np.ndarray]:
    """Transition table over all subspaces of F_2^k.

    State s with vector v (as a k-bit int) moves to span(s ∪ {v}). Returns
    (table[state, v], dim[state]); state 0 is the zero subspace.
    """
    zero = frozenset([0])
    ids = {zero: 0}
    spaces = [zero]
    rows = []
    i = 0
    while i < len(spaces):
        s = spaces[i]
        row = []
        for v in range(1 << k):
            t = s if v in s else frozenset(s | {x ^ v for x in s})
            if t not in ids:
                ids[t] = len(spaces)
                spaces.append(t)
            row.append(ids[t])
        rows.append(row)
        i += 1
    dims = np.array([len(s).bit_length() - 1 for s in spaces], dtype=np.int64)
    return np.array(rows, dtype=np.int32), dims


def pe_mc_oracle(
    q: PeQuery, trials: int, rng: np.random.Generator, chunk: int = 200_000
) -> tuple[float, float]:
    """Simulate: uniform k×n generator, i.i.d. erasures, fail iff the unerased
    columns do not span F_2^k. Returns (mean, standard error)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    k, n, eps = q.k, q.n, q.epsilon
    if k > 16:
        raise ValueError("simulation oracle supports k <= 16")
    table, dims = _subspace_automaton(k) if k <= 6 else (None, None)
    failures = 0
    done = 0
    while done < trials:
        b = min(chunk, trials - done)
        cols = rng.integers(0, 1 << k, size=(b, n), dtype=np.int64)
        erased = rng.random((b, n)) < eps
        cols[erased] = 0
        if table is not None:
            state = np.zeros(b, dtype=np.int64)
            for j in range(n):
                state = table[state, cols[:, j]]
            full = dims[state] == k
        else:
            full = _gf2_full_rank_bits(cols, k)
        failures += int(b - full.sum())
        done += b
    mean = failures / trials
    stderr = math.sqrt(max(mean * (1.0 - mean), 0.0) / trials)
    return mean, stderr


def _gf2_full_rank_bits(cols: np.ndarray, k: int) -> np.ndarray:
    """Per-row test that the bit-packed columns span F_2^k (XOR basis insertion)."""
    b, n = cols.shape
    basis = np.zeros((b, k), dtype=np.int64)
    for j in range(n):
        v = cols[:, j].copy()
        for bit in range(k - 1, -1, -1):
            has = (v >> bit) & 1 == 1
            empty = basis[:, bit] == 0
            take = has & empty
            basis[take, bit] = v[take]
            v[take] = 0
            red = has & ~empty
            v[red] ^= basis[red, bit]
    return np.all(basis != 0, axis=1)


def pe_union_bound(p: float, dim: int, dmin: float) -> float:
    """min(1, 2^dim · exp(-p·dmin)): the minimum-distance union bound."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    log_bound = dim * math.log(2.0) - p * dmin
    return 1.0 if log_bound >= 0.0 else math.exp(log_bound)


def binary_entropy(x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def inverse_binary_entropy(y: float, tol: float = 1e-12) -> float:
    """The x in [0, 1/2] with h(x) = y, by bisection."""
    if not 0.0 <= y <= 1.0:
        raise ValueError(f"entropy value {y} outside [0, 1]")
    lo, hi = 0.0, 0.5
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if binary_entropy(mid) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def dmin_gv_estimate(n: int, k: int) -> int:
    """round(n · h⁻¹(1 - k/n)), floored at 1."""
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k} n={n}")
    return max(1, round(n * inverse_binary_entropy(1.0 - k / n)))


@dataclass(frozen=True)
class ThresholdQuery:
    """Solve n^{r+1} · P(ε(p)) = θ for p.

    ``bound_kind`` picks P: ``"exact"`` uses :func:`pe_exact`, ``"union"``
    uses :func:`pe_union_bound` with ``dmin_fn(n, r)``. ``convention``
    selects the erasure argument: ``"pow"`` → ε = 1 - p^{r+1},
    ``"linear"`` → ε = 1 - p.
    """

    n: int
    r: int
    theta: float
    bound_kind: str = "exact"
    dmin_fn: Callable[[int, int], float] = dmin_gv_estimate
    convention: str = "pow"

    def __post_init__(self):
        if self.theta <= 0.0:
            raise ValueError("theta must be positive")
        if self.r < 1 or self.n < self.r:
            raise ValueError(f"need 1 <= r <= n, got n={self.n} r={self.r}")
        if self.bound_kind not in ("exact", "union"):
            raise ValueError(f"unknown bound kind {self.bound_kind!r}")
        if self.convention not in ("pow", "linear"):
            raise ValueError(f"unknown erasure convention {self.convention!r}")


def threshold_objective(q: ThresholdQuery) -> Callable[[float], float]:
    """f(p) = n^{r+1} · P(...), non-increasing in p."""
    n, r = q.n, q.r
    scale = float(n) ** (r + 1)
    expo = r + 1 if q.convention == "pow" else 1
    if q.bound_kind == "exact":
        return lambda p: scale * pe(1.0 - p**expo, r, n)
    dmin = q.dmin_fn(n, r)
    return lambda p: scale * pe_union_bound(p**expo, r, dmin)


def solve_threshold(q: ThresholdQuery, tol: float = 1e-6) -> float:
    """Smallest p in [0, 1] with f(p) <= θ, to absolute tolerance ``tol``.

    Returns 0.0 when f(0) <= θ and :class:`CappedAtOne` when f(1) > θ.
    """
    f = threshold_objective(q)
    if f(0.0) <= q.theta:
        return 0.0
    if f(1.0) > q.theta:
        return CappedAtOne()
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > q.theta:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def p0_unique_consistency(dim_col: int, dim_row: int, d_col: float, d_row: float, theta: float) -> float:
    if d_col < 1 or d_row < 1:
        raise ValueError("minimum distances must be >= 1")
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    return (dim_col * dim_row * math.log(2.0) + math.log(1.0 / theta)) / (d_col * d_row)
