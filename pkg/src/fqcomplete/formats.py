"""Text formats: matrix files, phase-grid CSV / PGM, threshold CSV.

Matrix file::

    q m n
    modulus c0 c1 ... cm      # optional, extension fields only
    <m lines of n tokens: integers in [0, q) or "?">
"""

from __future__ import annotations

import io
import math
from typing import Iterable

import numpy as np

from .gf import FieldSpec, gf
from .harness import PhaseGrid, ThresholdRow
from .linalg import FieldMatrix, ObservationMask, PartialMatrix

UNOBSERVED = "?"


class MatrixFileError(ValueError):
    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


def format_matrix(M: PartialMatrix | FieldMatrix) -> str:
    if isinstance(M, FieldMatrix):
        M = PartialMatrix(M, ObservationMask.full(*M.shape))
    F = M.field
    m, n = M.shape
    out = [f"{F.order} {m} {n}"]
    if F.degree > 1:
        out.append("modulus " + " ".join(str(c) for c in F.modulus))
    vals, obs = M.matrix.entries, M.mask.observed
    for i in range(m):
        out.append(" ".join(str(vals[i, j]) if obs[i, j] else UNOBSERVED for j in range(n)))
    return "\n".join(out) + "\n"


def parse_matrix(text: str) -> PartialMatrix:
    """Inverse of :func:`format_matrix`; errors carry 1-based line/column."""
    lines = text.splitlines()
    nonblank = [(k + 1, ln) for k, ln in enumerate(lines) if ln.strip()]
    if not nonblank:
        raise MatrixFileError(1, 1, "empty file")
    lineno, header = nonblank[0]
    parts = header.split()
    if len(parts) != 3:
        raise MatrixFileError(lineno, 1, f"header must be 'q m n', got {header!r}")
    try:
        q, m, n = (int(x) for x in parts)
    except ValueError:
        raise MatrixFileError(lineno, 1, f"header must be three integers, got {header!r}") from None
    if m < 1 or n < 1:
        raise MatrixFileError(lineno, 1, "dimensions must be positive")
    body = nonblank[1:]
    modulus = None
    if body and body[0][1].split()[0] == "modulus":
        mline, mtext = body[0]
        try:
            modulus = [int(x) for x in mtext.split()[1:]]
        except ValueError:
            raise MatrixFileError(mline, 1, "modulus coefficients must be integers") from None
        body = body[1:]
    try:
        F: FieldSpec = gf(q, modulus)
    except ValueError as exc:
        raise MatrixFileError(lineno, 1, str(exc)) from None
    if len(body) != m:
        where = body[m][0] if len(body) > m else (body[-1][0] + 1 if body else lineno + 1)
        raise MatrixFileError(where, 1, f"expected {m} matrix rows, found {len(body)}")
    vals = np.zeros((m, n), dtype=np.int64)
    obs = np.zeros((m, n), dtype=bool)
    for i, (ln, row) in enumerate(body):
        toks = row.split()
        if len(toks) != n:
            raise MatrixFileError(ln, 1, f"expected {n} tokens, found {len(toks)}")
        col = 1
        for j, tok in enumerate(toks):
            col = row.index(tok, col - 1) + 1
            if tok == UNOBSERVED:
                continue
            if not tok.isdigit() or int(tok) >= q:
                raise MatrixFileError(ln, col, f"token {tok!r} is not an integer in [0, {q})")
            vals[i, j] = int(tok)
            obs[i, j] = True
            col += len(tok)
    return PartialMatrix(FieldMatrix(F, vals), ObservationMask(obs))


def _num(x: float) -> str:
    return f"{x:.10g}"


PHASE_HEADER = "n,r,kappa,p,trials,successes,success_rate,mean_rounds,mean_sp_iters"


def phase_csv(grid: PhaseGrid) -> str:
    buf = io.StringIO()
    buf.write(PHASE_HEADER + "\n")
    for a, r in enumerate(grid.r_values):
        for b, kappa in enumerate(grid.kappa_values):
            buf.write(
                ",".join(
                    [
                        str(grid.n),
                        str(r),
                        _num(kappa),
                        _num(grid.p_values[a, b]),
                        str(grid.trials),
                        str(int(grid.successes[a, b])),
                        _num(grid.cells[a, b]),
                        _num(grid.mean_rounds[a, b]),
                        _num(grid.mean_sp_iters[a, b]),
                    ]
                )
                + "\n"
            )
    return buf.getvalue()


def phase_pgm(grid: PhaseGrid) -> str:
    """ASCII P2: one row per r value, one column per κ value, white = all succeeded."""
    rates = grid.cells
    h, w = rates.shape
    pixels = np.floor(255 * rates + 0.5).astype(int)
    lines = ["P2", f"{w} {h}", "255"]
    lines += [" ".join(str(v) for v in row) for row in pixels]
    return "\n".join(lines) + "\n"


def parse_pgm(text: str) -> np.ndarray:
    toks = [t for line in text.splitlines() if not line.startswith("#") for t in line.split()]
    if not toks or toks[0] != "P2":
        raise ValueError("not an ASCII PGM")
    w, h, maxval = int(toks[1]), int(toks[2]), int(toks[3])
    data = np.array([int(t) for t in toks[4:]], dtype=int)
    if data.size != w * h or data.max(initial=0) > maxval:
        raise ValueError("PGM payload does not match header")
    return data.reshape(h, w)


THRESHOLD_HEADER = "n,p_tilde,p_prime,capped_prime"


def threshold_csv(rows: Iterable[ThresholdRow]) -> str:
    out = [THRESHOLD_HEADER]
    for row in rows:
        out.append(f"{row.n},{row.p_tilde:.6f},{row.p_prime:.6f},{int(row.capped_prime)}")
    return "\n".join(out) + "\n"


def pe_csv(points: Iterable[tuple[float, float]]) -> str:
    out = ["p,ln_pe"]
    for p, pe in points:
        ln = math.log(pe) if pe > 0 else float("-inf")
        out.append(f"{_num(p)},{ln:.6f}")
    return "\n".join(out) + "\n"
