"""Command line entry point: ``fqcomplete {gen,complete,bounds,phase}``.

Exit codes: 0 success, 1 completion inconsistent with the observations,
2 output not writable, 64 usage / configuration error, 65 unparseable input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bounds, formats
from .baseline import UnsupportedField, complete_baseline
from .bp import SpParams, bpgd
from .gf import FieldError, gf
from .harness import TrialConfig, derive_seed, phase_diagram, threshold_curves
from .linalg import PartialMatrix, random_rank_r, sample_mask

EXIT_OK = 0
EXIT_INCONSISTENT = 1
EXIT_IO = 2
EXIT_USAGE = 64
EXIT_DATA = 65

log = logging.getLogger("fqcomplete")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write(path: str | Path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _add_sp_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("sum-product / decimation")
    g.add_argument("--t-max", type=int, help="max SP iterations per round (default 50)")
    g.add_argument("--eps-min", type=float, help="SP convergence threshold (default 1e-6·(m+n)·q^r)")
    g.add_argument("--b-max", type=int, help="max decimation rounds (default m)")
    g.add_argument("--mode", choices=["collapsed", "extrinsic"], help="SP update rule (default collapsed)")
    g.add_argument("--no-clamp", dest="clamp_fixed", action="store_false", default=None,
                   help="re-impose fixed columns only between SP runs")
    g.add_argument("--no-final-sp", dest="final_sp", action="store_false", default=None,
                   help="sample L, R from the last in-loop beliefs")


def cmd_gen(args) -> int:
    if not 0.0 <= args.p <= 1.0:
        raise UsageError(f"--p {args.p} outside [0, 1]")
    if not 1 <= args.r <= min(args.m, args.n):
        raise UsageError("--r must satisfy 1 <= r <= min(m, n)")
    try:
        F = gf(args.q)
    except FieldError as exc:
        raise UsageError(f"--q: {exc}") from None
    rng = np.random.default_rng(derive_seed("gen", args.m, args.n, args.r, args.q, args.p, args.seed))
    X, _, _ = random_rank_r(args.m, args.n, args.r, F, rng)
    mask = sample_mask(args.m, args.n, args.p, rng)
    truth = f"{args.out}_truth.txt"
    masked = f"{args.out}_masked.txt"
    _write(truth, formats.format_matrix(X))
    _write(masked, formats.format_matrix(PartialMatrix(X, mask)))
    print(f"wrote {truth} and {masked}")
    return EXIT_OK


def cmd_complete(args) -> int:
    try:
        text = Path(args.input).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc.strerror}") from None
    X_obs = formats.parse_matrix(text)
    m, n = X_obs.shape
    if args.r < 1:
        raise UsageError("--r must be >= 1")
    report = {"input": str(args.input), "method": args.method, "r": args.r, "m": m, "n": n,
              "q": X_obs.field.order, "observed": len(X_obs.mask)}
    if args.method == "baseline":
        try:
            res = complete_baseline(X_obs, args.r)
        except UnsupportedField as exc:
            raise UsageError(str(exc)) from None
        X_hat = res.X_hat
        consistent = X_hat is not None and X_obs.agrees_with(X_hat)
        report.update(status=res.status, k1=res.k1, k2=res.k2, observed_consistent=consistent,
                      resolved=res.status == "unique", rounds=0, iterations=0)
    else:
        sp = SpParams(
            t_max=args.t_max or 50,
            eps_min=args.eps_min,
            mode=args.mode or "collapsed",
            clamp_fixed=True if args.clamp_fixed is None else args.clamp_fixed,
        )
        res = bpgd(X_obs, args.r, sp, args.b_max, np.random.default_rng(args.seed),
                   final_sp=True if args.final_sp is None else args.final_sp)
        X_hat, consistent = res.X_hat, res.observed_consistent
        report.update(observed_consistent=consistent, resolved=res.resolved,
                      contradiction=res.contradiction, rounds=res.rounds_used,
                      iterations=res.sp_iterations_total, wall_time=res.wall_time)
    if X_hat is not None and args.out:
        _write(args.out, formats.format_matrix(X_hat))
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.report:
        _write(args.report, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if consistent else EXIT_INCONSISTENT


def cmd_bounds(args) -> int:
    if args.kind == "pe":
        if args.k is None or args.n is None:
            raise UsageError("pe mode needs --k and --n")
        if not 1 <= args.k <= args.n:
            raise UsageError("need 1 <= k <= n")
        if args.p_values:
            ps = [float(x) for x in args.p_values.split(",")]
        else:
            count = int(round((args.p_max - args.p_min) / args.p_step)) + 1
            ps = [round(args.p_min + i * args.p_step, 12) for i in range(count)]
        if any(not 0.0 <= p <= 1.0 for p in ps):
            raise UsageError("p values must lie in [0, 1]")
        text = formats.pe_csv((p, bounds.pe(1.0 - p, args.k, args.n)) for p in ps)
    else:
        if not 0.0 < args.theta < 1.0:
            raise UsageError(f"--theta {args.theta} outside (0, 1)")
        if args.r < 1 or args.n_min < max(args.r + 1, 1) or args.n_max < args.n_min:
            raise UsageError("need r >= 1 and r < n-min <= n-max")
        rows = threshold_curves(range(args.n_min, args.n_max + 1), args.r, args.theta,
                                bounds.dmin_gv_estimate, args.convention)
        text = formats.threshold_csv(rows)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


PHASE_KEYS = {
    "n": int, "q": int, "r_values": list, "kappa_values": list, "trials": int,
    "method": str, "seed": int, "workers": int, "t_max": int, "eps_min": float,
    "mode": str, "clamp_fixed": bool, "b_max": int, "final_sp": bool, "restarts": int,
}
PHASE_DEFAULTS = {"n": 20, "q": 2, "r_values": [1, 2], "kappa_values": [1, 2, 3, 4],
                  "trials": 10, "method": "bpgd", "seed": 0, "workers": 1, "t_max": 50,
                  "eps_min": None, "mode": "collapsed", "clamp_fixed": True, "b_max": None,
                  "final_sp": True, "restarts": 0}


def _csv_list(text: str, cast):
    try:
        return [cast(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"cannot parse list {text!r}") from None


def load_phase_config(path: str | None, overrides: dict) -> dict:
    cfg = dict(PHASE_DEFAULTS)
    if path:
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise UsageError("config must be a JSON object")
        for key, value in raw.items():
            if key not in PHASE_KEYS:
                raise UsageError(f"unknown config key {key!r}")
            cfg[key] = value
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    for key, typ in PHASE_KEYS.items():
        val = cfg[key]
        if val is None:
            continue
        if typ is float and isinstance(val, int) and not isinstance(val, bool):
            continue
        if not isinstance(val, typ) or (typ is int and isinstance(val, bool)):
            raise UsageError(f"config key {key!r} must be {typ.__name__}, got {val!r}")
    if cfg["method"] not in ("bpgd", "baseline"):
        raise UsageError("config key 'method' must be bpgd or baseline")
    if cfg["mode"] not in ("collapsed", "extrinsic"):
        raise UsageError("config key 'mode' must be collapsed or extrinsic")
    if cfg["trials"] < 1 or not cfg["r_values"] or not cfg["kappa_values"]:
        raise UsageError("need trials >= 1 and non-empty r_values / kappa_values")
    if cfg["method"] == "baseline" and cfg["q"] != 2:
        raise UsageError("baseline needs q = 2")
    return cfg


def cmd_phase(args) -> int:
    overrides = {
        "n": args.n, "q": args.q, "trials": args.trials, "method": args.method,
        "seed": args.seed, "workers": args.workers, "t_max": args.t_max,
        "eps_min": args.eps_min, "mode": args.mode, "clamp_fixed": args.clamp_fixed,
        "b_max": args.b_max, "final_sp": args.final_sp, "restarts": args.restarts,
        "r_values": _csv_list(args.r_values, int) if args.r_values else None,
        "kappa_values": _csv_list(args.kappa_values, float) if args.kappa_values else None,
    }
    cfg = load_phase_config(args.config, overrides)
    try:
        gf(cfg["q"])
    except FieldError as exc:
        raise UsageError(f"q: {exc}") from None
    template = TrialConfig(
        m=cfg["n"], n=cfg["n"], r=1, q=cfg["q"], kappa=1.0, method=cfg["method"],
        t_max=cfg["t_max"], eps_min=cfg["eps_min"], mode=cfg["mode"],
        clamp_fixed=cfg["clamp_fixed"], b_max=cfg["b_max"], final_sp=cfg["final_sp"],
        restarts=cfg["restarts"],
    )
    if any(not 1 <= r <= cfg["n"] for r in cfg["r_values"]):
        raise UsageError("every r must satisfy 1 <= r <= n")
    grid = phase_diagram(
        cfg["n"], cfg["q"], cfg["r_values"], cfg["kappa_values"], cfg["trials"],
        cfg["method"], cfg["seed"], workers=cfg["workers"], template=template,
    )
    csv_text = formats.phase_csv(grid)
    if args.out_csv:
        _write(args.out_csv, csv_text)
    else:
        sys.stdout.write(csv_text)
    if args.out_pgm:
        _write(args.out_pgm, formats.phase_pgm(grid))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fqcomplete", description="Low-rank matrix completion over finite fields.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a random rank-r instance and its masked view")
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--r", type=int, required=True)
    g.add_argument("--q", type=int, default=2)
    g.add_argument("--p", type=float, required=True, help="observation probability")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="instance",
                   help="output prefix; writes PREFIX_truth.txt and PREFIX_masked.txt")
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("complete", help="complete a masked matrix file")
    c.add_argument("input")
    c.add_argument("--r", type=int, required=True)
    c.add_argument("--method", choices=["bpgd", "baseline"], default="bpgd")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", help="completed matrix file")
    c.add_argument("--report", help="JSON report path (default stdout)")
    _add_sp_flags(c)
    c.set_defaults(func=cmd_complete)

    b = sub.add_parser("bounds", help="recovery thresholds or ln P_e curves")
    b.add_argument("--kind", choices=["threshold", "pe"], default="threshold")
    b.add_argument("--n-min", type=int, default=20)
    b.add_argument("--n-max", type=int, default=50)
    b.add_argument("--r", type=int, default=2)
    b.add_argument("--theta", type=float, default=0.1)
    b.add_argument("--convention", choices=["pow", "linear"], default="pow",
                   help="erasure argument: 1-p^(r+1) (pow) or 1-p (linear)")
    b.add_argument("--k", type=int, help="code dimension (pe mode)")
    b.add_argument("--n", type=int, help="block length (pe mode)")
    b.add_argument("--p-min", type=float, default=0.1)
    b.add_argument("--p-max", type=float, default=0.99)
    b.add_argument("--p-step", type=float, default=0.005)
    b.add_argument("--p-values", help="explicit comma-separated p list (pe mode)")
    b.add_argument("--out", help="CSV path (default stdout)")
    b.set_defaults(func=cmd_bounds)

    ph = sub.add_parser("phase", help="(r, kappa) success-rate grid")
    ph.add_argument("--config", help="JSON config; flags override its values")
    ph.add_argument("--n", type=int)
    ph.add_argument("--q", type=int)
    ph.add_argument("--r-values", help="comma-separated ranks")
    ph.add_argument("--kappa-values", help="comma-separated oversampling factors")
    ph.add_argument("--trials", type=int)
    ph.add_argument("--method", choices=["bpgd", "baseline"])
    ph.add_argument("--seed", type=int)
    ph.add_argument("--workers", type=int)
    ph.add_argument("--restarts", type=int)
    ph.add_argument("--out-csv")
    ph.add_argument("--out-pgm")
    _add_sp_flags(ph)
    ph.set_defaults(func=cmd_phase)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"fqcomplete {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except formats.MatrixFileError as exc:
        print(f"fqcomplete {args.command}: {getattr(args, 'input', '')}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"fqcomplete {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
