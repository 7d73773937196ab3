"""Factor-graph model for rank-r completion over F_q, the sum-product engine,
and belief-propagation-guided decimation (BPGD).

Variable nodes are the m rows l_i of L and the n columns r_j of R, each
taking one of Q = q^r values (indexed through :class:`~fqcomplete.gf.IndexCodec`).
Every observed entry (i, j) is a factor enforcing l_i ⊗ r_j = X_ij.

Two sum-product flavours are provided:

``mode="collapsed"``
    The collapsed belief iteration: a left belief is the Hadamard product of
    C[:, :, X_ij] · ũ_j over its observed neighbours, computed from the
    previous full beliefs (no exclusion of the target edge).
``mode="extrinsic"``
    Standard per-edge messages; exact on acyclic graphs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .gf import FieldSpec, IndexCodec
from .linalg import FieldMatrix, PartialMatrix, mat_mul

MAX_ASSIGNMENTS = 4096


class Contradiction(RuntimeError):
    """Every assignment of some variable node has been ruled out."""

    def __init__(self, side: str, column: int):
        super().__init__(f"all assignments eliminated for {side} column {column}")
        self.side = side
        self.column = column


@dataclass(frozen=True, eq=False)
class ConstraintTensor:
    """data[k, l, γ] = 1 iff α(k) ⊗ α(l) = γ.

    ``products[k, l]`` holds α(k) ⊗ α(l) directly; ``data`` is its one-hot
    expansion along the last axis.
    """

    field: FieldSpec
    r: int
    products: np.ndarray

    @property
    def size(self) -> int:
        return self.products.shape[0]

    @property
    def data(self) -> np.ndarray:
        q = self.field.order
        return (self.products[:, :, None] == np.arange(q)).astype(np.uint8)

    def slice(self, gamma: int) -> np.ndarray:
        return (self.products == gamma).astype(np.float64)


def build_constraint_tensor(field: FieldSpec, r: int, cap: int = MAX_ASSIGNMENTS) -> ConstraintTensor:
    codec = IndexCodec(field, r)
    if codec.size > cap:
        raise MemoryError(f"q^r = {codec.size} exceeds the cap of {cap} assignments")
    vecs = codec.alpha_table()
    prods = field.dot(vecs[:, None, :], vecs[None, :, :])
    prods.setflags(write=False)
    return ConstraintTensor(field, r, prods)


@dataclass
class BeliefMatrix:
    """Column-stochastic Q × (#variables) matrix; ``role`` is "left" or "right"."""

    data: np.ndarray
    role: str = "left"

    @classmethod
    def uniform(cls, size: int, count: int, role: str = "left") -> BeliefMatrix:
        return cls(np.full((size, count), 1.0 / size), role)

    def copy(self) -> BeliefMatrix:
        return BeliefMatrix(self.data.copy(), self.role)

    @property
    def columns(self) -> int:
        return self.data.shape[1]


def nnz(B: BeliefMatrix | np.ndarray) -> int:
    data = B.data if isinstance(B, BeliefMatrix) else np.asarray(B)
    return int(np.count_nonzero(data > 0))


@dataclass(frozen=True)
class SpParams:
    t_max: int = 50
    eps_min: float | None = None  # None: 1e-6 · (m + n) · q^r
    mode: str = "collapsed"
    # Without clamping, the collapsed update forgets a fix after one iteration.
    clamp_fixed: bool = True

    def __post_init__(self):
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if self.eps_min is not None and self.eps_min <= 0:
            raise ValueError("eps_min must be positive")
        if self.mode not in ("collapsed", "extrinsic"):
            raise ValueError(f"unknown mode {self.mode!r}")

    def resolved_eps(self, m: int, n: int, size: int) -> float:
        if self.eps_min is not None:
            return self.eps_min
        return 1e-6 * (m + n) * size


@dataclass
class DecimationState:
    fixed_left: dict[int, int] = field(default_factory=dict)
    round: int = 0
    b_max: int = 1


@dataclass
class SpOutcome:
    U: BeliefMatrix
    U_tilde: BeliefMatrix
    iterations: int
    converged: bool
    final_eps: float


@dataclass
class CompletionResult:
    X_hat: FieldMatrix
    L_hat: FieldMatrix
    R_hat: FieldMatrix
    observed_consistent: bool
    resolved: bool
    rounds_used: int
    sp_iterations_total: int
    contradiction: bool = False
    wall_time: float = 0.0


class _Graph:
    """Edge lists of Ω grouped by row and by column, for segment reductions."""

    def __init__(self, X_obs: PartialMatrix):
        obs = X_obs.mask.observed
        self.m, self.n = obs.shape
        rows, cols = np.nonzero(obs)  # row-major, so already sorted by row
        self.rows = rows
        self.cols = cols
        self.vals = X_obs.matrix.entries[rows, cols]
        self.row_order = np.arange(rows.size)
        self.col_order = np.argsort(cols, kind="stable")
        self.left_nodes, self.left_starts = self._segments(rows[self.row_order])
        self.right_nodes, self.right_starts = self._segments(cols[self.col_order])
        self.left_seg = self._segment_ids(self.left_starts, rows.size)
        self.right_seg = self._segment_ids(self.right_starts, rows.size)
        q = X_obs.field.order
        by_value = [np.nonzero(self.vals == g)[0] for g in range(q)]
        self.by_value = [(g, idx) for g, idx in enumerate(by_value) if idx.size]

    @staticmethod
    def _segments(sorted_ids: np.ndarray):
        if sorted_ids.size == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        starts = np.concatenate([[0], np.nonzero(np.diff(sorted_ids))[0] + 1])
        return sorted_ids[starts], starts

    @staticmethod
    def _segment_ids(starts: np.ndarray, total: int) -> np.ndarray:
        """Segment number of each position in the sorted edge order."""
        return np.repeat(np.arange(starts.size), np.diff(np.append(starts, total)))

    @property
    def num_edges(self) -> int:
        return self.rows.size


def _normalize_log(logb: np.ndarray, side: str, nodes: np.ndarray) -> np.ndarray:
    """Rows of ``logb`` (one per node) → normalized linear distributions."""
    peak = logb.max(axis=1, keepdims=True)
    dead = ~np.isfinite(peak[:, 0])
    if np.any(dead):
        raise Contradiction(side, int(nodes[np.argmax(dead)]))
    out = np.exp(logb - peak)
    return out / out.sum(axis=1, keepdims=True)


def _segment_log_product(factors: np.ndarray, order: np.ndarray, starts: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        logs = np.log(factors[order])
    return np.add.reduceat(logs, starts, axis=0)


def _collapsed_iteration(g: _Graph, slices: np.ndarray, U: np.ndarray, Ut: np.ndarray):
    """One flooding step of the collapsed update; returns new (U, Ũ)."""
    size = slices.shape[1]
    q = slices.shape[0]
    # E[γ] = C_γ U: shape (q, Q, m); gathered per edge as rows of length Q.
    E = (slices.reshape(q * size, size) @ U).reshape(q, size, -1)
    Et = (slices.reshape(q * size, size) @ Ut).reshape(q, size, -1)
    U_new = U.copy()
    Ut_new = Ut.copy()
    if g.num_edges:
        left_factors = Et[g.vals, :, g.cols]  # (edges, Q)
        right_factors = E[g.vals, :, g.rows]
        logl = _segment_log_product(left_factors, g.row_order, g.left_starts)
        logr = _segment_log_product(right_factors, g.col_order, g.right_starts)
        U_new[:, g.left_nodes] = _normalize_log(logl, "left", g.left_nodes).T
        Ut_new[:, g.right_nodes] = _normalize_log(logr, "right", g.right_nodes).T
    return U_new, Ut_new


class _ExtrinsicState:
    """Per-edge variable→factor messages for the exclude-target schedule."""

    def __init__(self, g: _Graph, slices: np.ndarray, U: np.ndarray, Ut: np.ndarray,
                 prior_left: np.ndarray, prior_right: np.ndarray):
        self.g = g
        self.slices = slices
        self.prior_left = prior_left
        self.prior_right = prior_right
        # messages stored edge-major: (edges, Q)
        self.to_factor_left = U[:, g.rows].T.copy()
        self.to_factor_right = Ut[:, g.cols].T.copy()

    def _factor_messages(self, incoming: np.ndarray) -> np.ndarray:
        """out[e] = C_{X_e} · incoming[e], normalized."""
        g = self.g
        out = np.empty_like(incoming)
        for gamma, sel in g.by_value:
            out[sel] = incoming[sel] @ self.slices[gamma].T
        s = out.sum(axis=1, keepdims=True)
        np.divide(out, s, out=out, where=s > 0)
        return out

    @staticmethod
    def _excluded(msgs: np.ndarray, order: np.ndarray, starts: np.ndarray, seg: np.ndarray,
                  edge_nodes: np.ndarray, nodes: np.ndarray, prior: np.ndarray):
        """Full products per node and the leave-one-out products per edge.

        Zeros are tracked as counts so a zero in the excluded message does not
        poison the division.
        """
        zero = msgs <= 0
        with np.errstate(divide="ignore"):
            logs = np.where(zero, 0.0, np.log(np.where(zero, 1.0, msgs)))
        sum_log = np.add.reduceat(logs[order], starts, axis=0)
        sum_zero = np.add.reduceat(zero[order].astype(np.int64), starts, axis=0)
        # broadcast node totals back to edges
        edge_log = np.empty_like(logs)
        edge_zero = np.empty(zero.shape, dtype=np.int64)
        edge_log[order] = sum_log[seg] - logs[order]
        edge_zero[order] = sum_zero[seg] - zero[order]
        with np.errstate(divide="ignore"):
            prior_log_nodes = np.log(prior[:, nodes].T)
            prior_log_edges = np.log(prior[:, edge_nodes].T)
        belief_log = np.where(sum_zero > 0, -np.inf, sum_log) + prior_log_nodes
        extr_log = np.where(edge_zero > 0, -np.inf, edge_log) + prior_log_edges
        return belief_log, extr_log

    def iterate(self, U: np.ndarray, Ut: np.ndarray):
        g = self.g
        to_left = self._factor_messages(self.to_factor_right)  # factor → l_i
        to_right = self._factor_messages(self.to_factor_left)  # factor → r_j
        U_new, Ut_new = U.copy(), Ut.copy()
        if not g.num_edges:
            return U_new, Ut_new
        bl, el = self._excluded(to_left, g.row_order, g.left_starts, g.left_seg, g.rows,
                                g.left_nodes, self.prior_left)
        br, er = self._excluded(to_right, g.col_order, g.right_starts, g.right_seg, g.cols,
                                g.right_nodes, self.prior_right)
        U_new[:, g.left_nodes] = _normalize_log(bl, "left", g.left_nodes).T
        Ut_new[:, g.right_nodes] = _normalize_log(br, "right", g.right_nodes).T
        self.to_factor_left = self._soft_normalize(el)
        self.to_factor_right = self._soft_normalize(er)
        return U_new, Ut_new

    @staticmethod
    def _soft_normalize(logm: np.ndarray) -> np.ndarray:
        peak = logm.max(axis=1, keepdims=True)
        peak = np.where(np.isfinite(peak), peak, 0.0)
        out = np.exp(logm - peak)
        s = out.sum(axis=1, keepdims=True)
        np.divide(out, s, out=out, where=s > 0)
        return out


def _one_hot(size: int, index: int) -> np.ndarray:
    v = np.zeros(size)
    v[index] = 1.0
    return v


def sp_run(
    X_obs: PartialMatrix,
    C: ConstraintTensor,
    U_init: BeliefMatrix,
    U_tilde_init: BeliefMatrix,
    params: SpParams,
    fixed: DecimationState | None = None,
    *,
    _graph: _Graph | None = None,
    _slices: np.ndarray | None = None,
) -> SpOutcome:
    """Run sum-product from the given beliefs until the L1 change between
    consecutive iterates drops below eps_min or t_max iterations elapse.

    Raises :class:`Contradiction` when a belief column is annihilated.
    """
    m, n = X_obs.shape
    size = C.size
    if U_init.data.shape != (size, m) or U_tilde_init.data.shape != (size, n):
        raise ValueError(
            f"belief shapes {U_init.data.shape}, {U_tilde_init.data.shape} "
            f"do not match Q={size}, m={m}, n={n}"
        )
    if X_obs.field != C.field:
        raise ValueError("observation field and constraint tensor field differ")
    g = _graph if _graph is not None else _Graph(X_obs)
    slices = _slices if _slices is not None else _stack_slices(C)
    fixed_left = fixed.fixed_left if fixed is not None else {}
    eps_min = params.resolved_eps(m, n, size)

    U = U_init.data.astype(np.float64, copy=True)
    Ut = U_tilde_init.data.astype(np.float64, copy=True)

    ext = None
    if params.mode == "extrinsic":
        prior_left = np.full((size, m), 1.0)
        for col, idx in fixed_left.items():
            prior_left[:, col] = _one_hot(size, idx)
        prior_right = np.full((size, n), 1.0)
        ext = _ExtrinsicState(g, slices, U, Ut, prior_left, prior_right)

    eps = np.inf
    t = 0
    while t < params.t_max and eps >= eps_min:
        t += 1
        if ext is None:
            U_new, Ut_new = _collapsed_iteration(g, slices, U, Ut)
        else:
            U_new, Ut_new = ext.iterate(U, Ut)
        if params.clamp_fixed:
            for col, idx in fixed_left.items():
                U_new[:, col] = _one_hot(size, idx)
        change = float(np.abs(U_new - U).sum() + np.abs(Ut_new - Ut).sum())
        eps = min(eps, change)
        U, Ut = U_new, Ut_new
    return SpOutcome(
        BeliefMatrix(U, "left"),
        BeliefMatrix(Ut, "right"),
        iterations=t,
        converged=eps < eps_min,
        final_eps=float(eps),
    )


def _stack_slices(C: ConstraintTensor) -> np.ndarray:
    q = C.field.order
    return np.stack([C.slice(gamma) for gamma in range(q)])


def fix_column(U: BeliefMatrix, col: int, rng: np.random.Generator) -> tuple[BeliefMatrix, int]:
    """Collapse column ``col`` to a one-hot vector drawn from its distribution."""
    probs = U.data[:, col]
    total = probs.sum()
    if not total > 0:
        raise Contradiction(U.role, col)
    idx = _sample_index(probs / total, rng)
    out = U.copy()
    out.data[:, col] = _one_hot(U.data.shape[0], idx)
    return out, idx


def _sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(probs)
    u = rng.random() * cdf[-1]
    idx = int(np.searchsorted(cdf, u, side="right"))
    idx = min(idx, probs.size - 1)
    # never land on a zero-probability entry through round-off
    while probs[idx] <= 0:
        idx -= 1
    return idx


def _sample_factor(B: np.ndarray, codec: IndexCodec, rng: np.random.Generator) -> np.ndarray:
    """Sample every column of B and return the chosen vectors as rows."""
    table = codec.alpha_table()
    picks = [_sample_index(B[:, c] / B[:, c].sum(), rng) for c in range(B.shape[1])]
    return table[np.asarray(picks, dtype=np.int64)]


def bpgd(
    X_obs: PartialMatrix,
    r: int,
    sp: SpParams | None = None,
    b_max: int | None = None,
    rng: np.random.Generator | None = None,
    *,
    C: ConstraintTensor | None = None,
    final_sp: bool = True,
) -> CompletionResult:
    """Complete ``X_obs`` to a rank-≤r matrix by decimating left beliefs.

    Each round runs sum-product, re-imposes earlier fixes, fixes one more
    random left column by sampling, and stops once every belief column of U
    (or of Ũ) is one-hot or ``b_max`` rounds have run. L̂ and R̂ are then
    sampled column by column. A contradiction ends the run with
    ``observed_consistent=False`` and zero factors.
    """
    start = time.perf_counter()
    if r < 1:
        raise ValueError("r must be >= 1")
    sp = sp or SpParams()
    rng = rng if rng is not None else np.random.default_rng()
    F = X_obs.field
    m, n = X_obs.shape
    b_max = m if b_max is None else b_max
    if b_max < 1:
        raise ValueError("b_max must be >= 1")
    C = C if C is not None else build_constraint_tensor(F, r)
    if C.r != r or C.field != F:
        raise ValueError("constraint tensor does not match (field, r)")
    codec = IndexCodec(F, r)
    size = C.size
    g = _Graph(X_obs)
    slices = _stack_slices(C)

    U = BeliefMatrix.uniform(size, m, "left")
    Ut = BeliefMatrix.uniform(size, n, "right")
    state = DecimationState(b_max=b_max)
    total_iters = 0

    def failure() -> CompletionResult:
        L = FieldMatrix.zeros(F, m, r)
        R = FieldMatrix.zeros(F, r, n)
        return CompletionResult(
            mat_mul(L, R), L, R, False, False, state.round, total_iters,
            contradiction=True, wall_time=time.perf_counter() - start,
        )

    try:
        stop = False
        while state.round < b_max and not stop:
            state.round += 1
            out = sp_run(X_obs, C, U, Ut, sp, state, _graph=g, _slices=slices)
            total_iters += out.iterations
            U, Ut = out.U, out.U_tilde
            for col, idx in state.fixed_left.items():
                U.data[:, col] = _one_hot(size, idx)
            free = [c for c in range(m) if c not in state.fixed_left]
            if free:
                col = free[int(rng.integers(len(free)))]
                U, idx = fix_column(U, col, rng)
                state.fixed_left[col] = idx
            if nnz(U) <= m or nnz(Ut) <= n:
                stop = True
        if final_sp:
            out = sp_run(X_obs, C, U, Ut, sp, state, _graph=g, _slices=slices)
            total_iters += out.iterations
            U, Ut = out.U, out.U_tilde
            for col, idx in state.fixed_left.items():
                U.data[:, col] = _one_hot(size, idx)
    except Contradiction:
        return failure()

    resolved = nnz(U) == m and nnz(Ut) == n
    L_hat = FieldMatrix(F, _sample_factor(U.data, codec, rng))
    R_hat = FieldMatrix(F, _sample_factor(Ut.data, codec, rng).T)
    X_hat = mat_mul(L_hat, R_hat)
    return CompletionResult(
        X_hat,
        L_hat,
        R_hat,
        observed_consistent=X_obs.agrees_with(X_hat),
        resolved=resolved,
        rounds_used=state.round,
        sp_iterations_total=total_iters,
        wall_time=time.perf_counter() - start,
    )
