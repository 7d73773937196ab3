"""Brute-force reference computations shared by the BP tests and the
acceptance suite."""

import itertools

import numpy as np

from fqcomplete.gf import IndexCodec, gf
from fqcomplete.linalg import FieldMatrix, ObservationMask, PartialMatrix


def is_forest(m, n, edges):
    parent = list(range(m + n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in edges:
        a, b = find(i), find(m + j)
        if a == b:
            return False
        parent[a] = b
    return True


def forests(m, n):
    """Every edge set of K_{m,n} without a cycle (including the empty one)."""
    all_edges = list(itertools.product(range(m), range(n)))
    for k in range(min(len(all_edges), m + n - 1) + 1):
        for edges in itertools.combinations(all_edges, k):
            if is_forest(m, n, edges):
                yield edges


def tree_instances(q, max_dim=3):
    """(X_obs, edges) for every shape up to max_dim², every forest, every labelling."""
    F = gf(q)
    for m in range(1, max_dim + 1):
        for n in range(1, max_dim + 1):
            for edges in forests(m, n):
                for values in itertools.product(range(q), repeat=len(edges)):
                    yield _partial(F, m, n, edges, values)


def _partial(F, m, n, edges, values):
    vals = np.zeros((m, n), dtype=np.int64)
    for (i, j), v in zip(edges, values):
        vals[i, j] = v
    return PartialMatrix(FieldMatrix(F, vals), ObservationMask.from_pairs(m, n, edges))


def tree_cases(q, max_dim=3):
    """Like :func:`tree_instances` but with brute-force marginals attached:
    yields (m, n, edges, values, marginals-or-None), one forest at a time so
    every labelling of a forest is scored in a single vectorised pass."""
    F = gf(q)
    prods = F.mul(np.arange(q)[:, None], np.arange(q)[None, :])
    for m in range(1, max_dim + 1):
        for n in range(1, max_dim + 1):
            Ls = np.array(list(itertools.product(range(q), repeat=m)), dtype=np.int64)
            Rs = np.array(list(itertools.product(range(q), repeat=n)), dtype=np.int64)
            for edges in forests(m, n):
                labels = np.array(list(itertools.product(range(q), repeat=len(edges))), dtype=np.int64)
                labels = labels.reshape(q ** len(edges), len(edges))
                ok = np.ones((len(labels), len(Ls), len(Rs)), dtype=bool)
                for e, (i, j) in enumerate(edges):
                    ok &= prods[Ls[:, i][:, None], Rs[:, j][None, :]][None] == labels[:, e, None, None]
                counts = ok.sum(axis=(1, 2))
                wl = ok.sum(axis=2)  # labellings × |L|
                wr = ok.sum(axis=1)
                for t, values in enumerate(labels):
                    if counts[t] == 0:
                        yield m, n, edges, tuple(values), None
                        continue
                    left = np.stack([np.bincount(Ls[:, i], weights=wl[t], minlength=q) for i in range(m)], axis=1)
                    right = np.stack([np.bincount(Rs[:, j], weights=wr[t], minlength=q) for j in range(n)], axis=1)
                    yield m, n, edges, tuple(values), (left / counts[t], right / counts[t])


def check_tree_marginals(q, sp_run, params, chunk=256):
    """Compare extrinsic SP against brute force on every tree instance (r = 1).

    Consistent instances are solved in block-diagonal batches: SP on a
    disjoint union factorises, and so does the uniform posterior. Inconsistent
    instances run one by one and must each raise ``Contradiction``.
    Returns (instances checked, max abs error, list of failures).
    """
    from fqcomplete.bp import BeliefMatrix, Contradiction, build_constraint_tensor

    F = gf(q)
    C = build_constraint_tensor(F, 1)
    failures = []
    worst = 0.0
    total = 0
    batch = []

    def flush():
        nonlocal worst
        if not batch:
            return
        M = sum(b[0] for b in batch)
        N = sum(b[1] for b in batch)
        vals = np.zeros((M, N), dtype=np.int64)
        obs = np.zeros((M, N), dtype=bool)
        want_l = np.zeros((q, M))
        want_r = np.zeros((q, N))
        ro = co = 0
        for m, n, edges, values, (left, right) in batch:
            for (i, j), v in zip(edges, values):
                vals[ro + i, co + j] = v
                obs[ro + i, co + j] = True
            want_l[:, ro:ro + m] = left
            want_r[:, co:co + n] = right
            ro += m
            co += n
        X = PartialMatrix(FieldMatrix(F, vals), ObservationMask(obs))
        try:
            out = sp_run(X, C, BeliefMatrix.uniform(q, M), BeliefMatrix.uniform(q, N, "right"), params)
        except Contradiction as exc:
            failures.append(("unexpected contradiction", str(exc)))
            batch.clear()
            return
        worst = max(worst, float(np.abs(out.U.data - want_l).max()), float(np.abs(out.U_tilde.data - want_r).max()))
        batch.clear()

    for case in tree_cases(q):
        total += 1
        m, n, edges, values, marg = case
        if marg is None:
            X = _partial(F, m, n, edges, values)
            try:
                sp_run(X, C, BeliefMatrix.uniform(q, m), BeliefMatrix.uniform(q, n, "right"), params)
                failures.append(("missed contradiction", (m, n, edges, values)))
            except Contradiction:
                pass
            continue
        batch.append(case)
        if len(batch) >= chunk:
            flush()
    flush()
    return total, worst, failures


def brute_marginals(X_obs, r=1):
    """Uniform posterior over factor pairs (L, R) that reproduce X on Ω.

    Returns (left, right) as Q×m and Q×n arrays of marginals, or None when no
    pair is consistent. Index k of a marginal is the assignment α(k).
    """
    F = X_obs.field
    m, n = X_obs.shape
    codec = IndexCodec(F, r)
    table = codec.alpha_table()
    Q = codec.size
    prods = F.dot(table[:, None, :], table[None, :, :])  # Q × Q
    Ls = np.array(list(itertools.product(range(Q), repeat=m)), dtype=np.int64)  # all L as index tuples
    Rs = np.array(list(itertools.product(range(Q), repeat=n)), dtype=np.int64)
    ok = np.ones((len(Ls), len(Rs)), dtype=bool)
    for i, j in zip(*np.nonzero(X_obs.mask.observed)):
        ok &= prods[Ls[:, i][:, None], Rs[:, j][None, :]] == X_obs.matrix.entries[i, j]
    count = ok.sum()
    if count == 0:
        return None
    wl = ok.sum(axis=1)
    wr = ok.sum(axis=0)
    left = np.stack([np.bincount(Ls[:, i], weights=wl, minlength=Q) for i in range(m)], axis=1)
    right = np.stack([np.bincount(Rs[:, j], weights=wr, minlength=Q) for j in range(n)], axis=1)
    return left / count, right / count


def slice_counts(q, r):
    """Closed-form ones per slice: γ ≠ 0 and γ = 0."""
    nonzero = (q**r - 1) * q ** (r - 1)
    zero = q ** (2 * r) - (q - 1) * nonzero
    return zero, nonzero


def count_rank1_completions(X, observed, cap=20):
    """Number of distinct rank-≤1 matrices over F_2 that agree with X on the
    observed entries, or None if no observed entry is 1 or the search is too
    large.

    A nonzero rank-1 binary matrix is the indicator of A × B. Rows and columns
    carrying an observed 1 are forced into A and B; the remaining rows and
    columns that clash with no forced line are free, and a choice of free rows
    S admits every free column with no observed 0 against S.
    """
    ones = observed & (X == 1)
    zeros = observed & (X == 0)
    A1 = np.nonzero(ones.any(axis=1))[0]
    B1 = np.nonzero(ones.any(axis=0))[0]
    if A1.size == 0:
        return None
    if zeros[np.ix_(A1, B1)].any():
        return 0
    in_a = np.zeros(X.shape[0], bool)
    in_a[A1] = True
    in_b = np.zeros(X.shape[1], bool)
    in_b[B1] = True
    free_rows = np.nonzero(~in_a & ~zeros[:, B1].any(axis=1))[0]
    free_cols = np.nonzero(~in_b & ~zeros[A1].any(axis=0))[0]
    if free_rows.size > free_cols.size:
        free_rows, free_cols, zeros = free_cols, free_rows, zeros.T
    if free_rows.size > cap:
        return None
    bits = [sum(1 << b for b in np.nonzero(zeros[i, free_cols])[0]) for i in free_rows]
    blocked = [0] * (1 << len(bits))
    total = 0
    for s in range(1 << len(bits)):
        if s:
            low = (s & -s).bit_length() - 1
            blocked[s] = blocked[s & (s - 1)] | bits[low]
        total += 2 ** (free_cols.size - bin(blocked[s]).count("1"))
    return total
