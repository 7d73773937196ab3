"""Reproducible Monte-Carlo experiments: single trials, (r, κ) phase grids and
threshold curves.

Every random stream is derived from a master seed and the experiment
parameters through :func:`derive_seed`, so results do not depend on the
order or process in which trials run.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from . import bounds
from .baseline import UnsupportedField, complete_baseline
from .bp import ConstraintTensor, SpParams, bpgd, build_constraint_tensor
from .gf import gf
from .linalg import FieldMatrix, PartialMatrix, random_rank_r, sample_mask

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _part_hash(part) -> int:
    blob = json.dumps(part, sort_keys=True, separators=(",", ":")).encode()
    return int.from_bytes(hashlib.blake2b(blob, digest_size=8).digest(), "little")


def derive_seed(*parts) -> int:
    """Chain ``state = splitmix64(state ^ blake2b64(json(part)))`` over parts."""
    state = 0
    for part in parts:
        state = splitmix64(state ^ _part_hash(part))
    return state


def kappa_to_p(kappa: float, r: int, m: int, n: int) -> float:
    """κ · r(m + n - r) / (mn), i.e. κ · r(2n - r)/n² for square matrices."""
    return kappa * r * (m + n - r) / (m * n)


@dataclass(frozen=True)
class TrialConfig:
    m: int
    n: int
    r: int
    q: int = 2
    p: float | None = None
    kappa: float | None = None
    method: str = "bpgd"
    seed: int = 0
    t_max: int = 50
    eps_min: float | None = None
    mode: str = "collapsed"
    clamp_fixed: bool = True
    b_max: int | None = None
    final_sp: bool = True
    restarts: int = 0

    def __post_init__(self):
        if (self.p is None) == (self.kappa is None):
            raise ValueError("give exactly one of p and kappa")
        if self.method not in ("bpgd", "baseline"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")
        if self.p is not None and not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p={self.p} outside [0, 1]")

    def observation_probability(self) -> tuple[float, bool]:
        """(p, clamped): κ is converted and clamped to 1 when it overshoots."""
        if self.p is not None:
            return self.p, False
        p = kappa_to_p(self.kappa, self.r, self.m, self.n)
        return (1.0, True) if p > 1.0 else (p, False)

    def sp_params(self) -> SpParams:
        return SpParams(self.t_max, self.eps_min, self.mode, self.clamp_fixed)


@dataclass(frozen=True)
class TrialResult:
    exact_success: bool
    observed_consistent: bool
    hamming_accuracy: float
    rounds_used: int
    sp_iterations: int
    wall_time: float
    attempts: int = 1
    p: float = 0.0
    p_clamped: bool = False
    status: str = ""


@lru_cache(maxsize=32)
def _tensor(q: int, r: int) -> ConstraintTensor:
    return build_constraint_tensor(gf(q), r)


def make_instance(cfg: TrialConfig) -> tuple[FieldMatrix, PartialMatrix]:
    """The ground truth X and its observed view for ``cfg``, as run_trial sees them."""
    F = gf(cfg.q)
    p, _ = cfg.observation_probability()
    rng = np.random.default_rng(derive_seed("trial", asdict(cfg)))
    X, _, _ = random_rank_r(cfg.m, cfg.n, cfg.r, F, rng)
    return X, PartialMatrix(X, sample_mask(cfg.m, cfg.n, p, rng))


def run_trial(cfg: TrialConfig) -> TrialResult:
    """Generate X = LR, sample Ω, complete, and score against the ground truth.

    Reruns (up to ``cfg.restarts``) are triggered by an output that disagrees
    with the observations, each with a fresh derived seed.
    """
    if cfg.method == "baseline" and cfg.q != 2:
        raise UnsupportedField("baseline completion needs q = 2")
    p, clamped = cfg.observation_probability()
    base = derive_seed("trial", asdict(cfg))
    X, X_obs = make_instance(cfg)

    start = time.perf_counter()
    rounds = iters = 0
    attempt = 0
    for attempt in range(cfg.restarts + 1):
        if cfg.method == "bpgd":
            res = bpgd(
                X_obs,
                cfg.r,
                cfg.sp_params(),
                cfg.b_max,
                np.random.default_rng(derive_seed(base, "attempt", attempt)),
                C=_tensor(cfg.q, cfg.r),
                final_sp=cfg.final_sp,
            )
            X_hat, consistent = res.X_hat, res.observed_consistent
            rounds += res.rounds_used
            iters += res.sp_iterations_total
            status = "resolved" if res.resolved else ("contradiction" if res.contradiction else "unresolved")
        else:
            res = complete_baseline(X_obs, cfg.r)
            X_hat, status = res.X_hat, res.status
            consistent = X_hat is not None and X_obs.agrees_with(X_hat)
        if consistent:
            break
    wall = time.perf_counter() - start

    if X_hat is None:
        exact, accuracy = False, 0.0
    else:
        agree = X_hat.entries == X.entries
        exact = bool(agree.all())
        accuracy = float(agree.mean())
    return TrialResult(
        exact_success=exact,
        observed_consistent=bool(consistent),
        hamming_accuracy=accuracy,
        rounds_used=rounds,
        sp_iterations=iters,
        wall_time=wall,
        attempts=attempt + 1,
        p=p,
        p_clamped=clamped,
        status=status,
    )


@dataclass
class PhaseGrid:
    n: int
    q: int
    trials: int
    method: str
    r_values: list[int]
    kappa_values: list[float]
    successes: np.ndarray  # (len(r_values), len(kappa_values)) int
    p_values: np.ndarray
    p_clamped: np.ndarray
    mean_rounds: np.ndarray
    mean_sp_iters: np.ndarray
    results: list[list[list[TrialResult]]] = field(default_factory=list, repr=False)

    @property
    def cells(self) -> np.ndarray:
        return self.successes / self.trials


def phase_diagram(
    n: int,
    q: int,
    r_values: Sequence[int],
    kappa_values: Sequence[float],
    trials: int,
    method: str = "bpgd",
    master_seed: int = 0,
    *,
    workers: int = 1,
    template: TrialConfig | None = None,
) -> PhaseGrid:
    """Success rate of ``method`` for each (r, κ) cell of an n×n grid.

    ``template`` carries SP / decimation / restart settings; its dimensions,
    rank, κ and seed are overridden per trial.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    r_values = [int(r) for r in r_values]
    kappa_values = [float(k) for k in kappa_values]
    template = template or TrialConfig(m=n, n=n, r=1, q=q, kappa=1.0, method=method)
    configs = []
    for r in r_values:
        for ki, kappa in enumerate(kappa_values):
            for t in range(trials):
                configs.append(
                    replace(
                        template, m=n, n=n, r=r, q=q, p=None, kappa=kappa, method=method,
                        seed=derive_seed(master_seed, r, ki, t),
                    )
                )
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            flat = list(pool.map(run_trial, configs, chunksize=max(1, trials // 2)))
    else:
        flat = [run_trial(c) for c in configs]

    shape = (len(r_values), len(kappa_values))
    successes = np.zeros(shape, dtype=np.int64)
    p_values = np.zeros(shape)
    clamped = np.zeros(shape, dtype=bool)
    mean_rounds = np.zeros(shape)
    mean_iters = np.zeros(shape)
    nested: list[list[list[TrialResult]]] = []
    it = iter(flat)
    for a in range(shape[0]):
        row = []
        for b in range(shape[1]):
            cell = [next(it) for _ in range(trials)]
            row.append(cell)
            successes[a, b] = sum(t.exact_success for t in cell)
            p_values[a, b] = cell[0].p
            clamped[a, b] = cell[0].p_clamped
            mean_rounds[a, b] = np.mean([t.rounds_used for t in cell])
            mean_iters[a, b] = np.mean([t.sp_iterations for t in cell])
        nested.append(row)
    if clamped.any():
        log.warning("observation probability clamped to 1 in %d cell(s)", int(clamped.sum()))
    return PhaseGrid(
        n, q, trials, method, r_values, kappa_values, successes, p_values, clamped,
        mean_rounds, mean_iters, nested,
    )


@dataclass(frozen=True)
class ThresholdRow:
    n: int
    p_tilde: float
    p_prime: float
    capped_prime: bool
    capped_tilde: bool = False


def threshold_curves(
    n_range: Iterable[int],
    r: int,
    theta: float,
    dmin_fn: Callable[[int, int], float] = bounds.dmin_gv_estimate,
    convention: str = "pow",
) -> list[ThresholdRow]:
    rows = []
    for n in n_range:
        exact = bounds.solve_threshold(bounds.ThresholdQuery(n, r, theta, "exact", dmin_fn, convention))
        union = bounds.solve_threshold(bounds.ThresholdQuery(n, r, theta, "union", dmin_fn, convention))
        rows.append(
            ThresholdRow(
                n, float(exact), float(union),
                isinstance(union, bounds.CappedAtOne), isinstance(exact, bounds.CappedAtOne),
            )
        )
    return rows
