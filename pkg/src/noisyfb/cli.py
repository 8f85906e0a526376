"""Command-line entry point ``noisyfb``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import exponents as ex
from .errors import ConfigError, DomainError
from .harness import (CSV_COLUMNS, RunConfig, RunStats, compare_arms,
                      expand_grid, read_csv, run_trials, sweep, write_csv)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
GAP_TOL = 1e-9  # rounding allowance when counting negative gaps


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}") from exc


def _add_run_flags(p):
    p.add_argument("--config", help="flat JSON config file")
    p.add_argument("--scheme", choices=("feedback_one_switch", "baseline_no_feedback",
                                        "naive_feedback"))
    p.add_argument("--A", type=float, help="power per channel use")
    p.add_argument("--nA", type=float, help="total block energy (instead of --A)")
    p.add_argument("--sigma2", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--M", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--tau2", type=float)
    p.add_argument("--tau3", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int, dest="decoder.samples")
    p.add_argument("--workers", type=int)
    p.add_argument("--output", help="CSV file for the result row")


def _run_config(args) -> RunConfig:
    d = {}
    if args.config:
        try:
            with open(args.config) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    for key in ("scheme", "A", "nA", "sigma2", "n", "M", "beta", "tau2", "tau3",
                "trials", "seed", "decoder.samples", "workers", "output"):
        v = getattr(args, key, None)
        if v is not None:
            d[key] = v
    if "nA" in d and "A" in d and args.A is None:
        d.pop("A")
    return RunConfig.from_dict(d)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    return str(o)


def cmd_simulate(args) -> int:
    cfg = _run_config(args)
    st = run_trials(cfg)
    print(json.dumps(st.to_dict(), indent=1, default=_json_default))
    if cfg.output:
        write_csv([st.csv_row()], cfg.output)
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        with open(args.grid) as fh:
            grid_def = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read grid {args.grid}: {exc}") from exc
    if "cells" in grid_def:
        flat = grid_def["cells"]
    else:
        flat = expand_grid(grid_def.get("base", {}), grid_def.get("grid", {}))
    configs = [RunConfig.from_dict(d) for d in flat]
    results = sweep(configs, args.output, args.manifest)
    failed = sum(r is None for r in results)
    for cfg, r in zip(configs, results):
        p = cfg.params
        tag = "ERROR" if r is None else f"p_hat={r.p_hat:.4g} [{r.ci_low:.3g}, {r.ci_high:.3g}]"
        print(f"{cfg.scheme} n={p.n} M={p.M} A={p.A:g} sigma2={p.sigma2:g}: {tag}")
    return EXIT_RUNTIME if failed else EXIT_OK


def _exp_params(args):
    return ex.ExponentParams(beta=args.beta, tau2=args.tau2, tau3=args.tau3,
                             sigma2=args.sigma2, A=args.A)


def cmd_exponents(args) -> int:
    rep = ex.overall(_exp_params(args))
    print(f"{'quantity':<24}{'value':>14}")
    rows = [("no feedback (A/4)", ex.exponent_no_feedback(args.A)),
            ("noiseless feedback (A/2)", ex.exponent_noiseless_feedback(args.A)),
            ("theorem A(1-s2)/3", ex.exponent_theorem(args.A, args.sigma2)[0]),
            ("e_k2", rep.e_k2), ("e_k0", rep.e_k0), ("  e_S2", rep.e_S2),
            ("  e_S3", rep.e_S3), ("  e_S4", rep.e_S4), ("e_k3", rep.e_k3),
            ("e_k3 (full form)", rep.e_k3_full), ("e_k4", rep.e_k4),
            ("overall (A1 units)", rep.overall), ("overall per n", rep.per_n)]
    for name, v in rows:
        print(f"{name:<24}{v:>14.8f}")
    for name, ok in rep.flags.items():
        print(f"{name:<24}{str(ok):>14}")
    if rep.vacuous:
        print("bound is vacuous (sigma2 > 1)")
    return EXIT_OK


def cmd_verify(args) -> int:
    rows = []
    for b in _floats(args.beta):
        for t2 in _floats(args.tau2):
            for t3 in _floats(args.tau3):
                for s2 in _floats(args.sigma2):
                    rows.append(ex.verify_point(ex.ExponentParams(b, t2, t3, s2, args.A)))
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    if args.output:
        write_csv(rows, args.output, cols)
    else:
        w = sys.stdout
        w.write(",".join(cols) + "\n")
        for r in rows:
            w.write(",".join("" if r.get(c) is None else repr(r.get(c)) if isinstance(r.get(c), float)
                             else str(r.get(c)) for c in cols) + "\n")
    neg = {}
    for r in rows:
        for k, v in r.items():
            if k.startswith("gap_") and v < -GAP_TOL:
                neg[k] = neg.get(k, 0) + 1
    detail = ", ".join(f"{k}: {v}" for k, v in neg.items()) or "none"
    print(f"# {len(rows)} points; negative gaps (< -{GAP_TOL:g}): {detail}",
          file=sys.stderr)
    return EXIT_OK


def _stats_from_row(row) -> RunStats:
    missing = [c for c in CSV_COLUMNS[:14] if row.get(c) is None]
    if missing:
        raise ConfigError(f"result row lacks {missing}")
    cfg = {k: row[k] for k in ("scheme", "n", "M", "A", "sigma2", "beta", "tau2",
                                "tau3", "seed")}
    return RunStats(config=cfg, trials=row["trials"], errors=row["errors"],
                    p_hat=row["p_hat"], ci_low=row["ci_low"], ci_high=row["ci_high"],
                    exponent_hat=row["exponent_hat"], k_freq=None,
                    coord_fail_freq=row.get("coord_fail_freq"),
                    per_message_trials=[], per_message_errors=[])


def cmd_compare(args) -> int:
    arms = []
    for path in (args.a, args.b):
        try:
            rows = read_csv(path)
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        if not rows:
            raise ConfigError(f"{path} has no result rows")
        arms.append(_stats_from_row(rows[0]))
    c = compare_arms(*arms)
    print(f"a: {arms[0].config['scheme']} p_hat={c.p_a:.4g} "
          f"[{arms[0].ci_low:.4g}, {arms[0].ci_high:.4g}]")
    print(f"b: {arms[1].config['scheme']} p_hat={c.p_b:.4g} "
          f"[{arms[1].ci_low:.4g}, {arms[1].ci_high:.4g}]")
    print(f"z={c.z:.3f} p={c.p_value:.3g} overlap={c.ci_overlap} verdict={c.verdict}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="noisyfb", description=(
        "Simulate one-switch coding over an AWGN channel with noisy feedback "
        "and check its error-exponent bounds."))
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run one Monte Carlo configuration")
    _add_run_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run a grid of configurations")
    p.add_argument("grid", help="JSON with {'base': {...}, 'grid': {key: [values]}} "
                                "or {'cells': [...]}")
    p.add_argument("--output", help="results CSV")
    p.add_argument("--manifest", help="JSON manifest")
    p.set_defaults(func=cmd_sweep)

    for name, func, hlp in (("exponents", cmd_exponents, "closed-form exponent table"),
                            ("verify", cmd_verify, "numeric infima vs closed forms")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--A", type=float, default=1.0)
        if name == "exponents":
            p.add_argument("--sigma2", type=float, default=0.0)
            p.add_argument("--beta", type=float, default=0.5)
            p.add_argument("--tau2", type=float, default=0.15)
            p.add_argument("--tau3", type=float, default=0.05)
        else:
            p.add_argument("--sigma2", default="0.01,0.1,0.5,1.0",
                           help="comma-separated values")
            p.add_argument("--beta", default="0.5")
            p.add_argument("--tau2", default="0.15")
            p.add_argument("--tau3", default="0.05")
            p.add_argument("--output", help="CSV file (default: stdout)")
        p.set_defaults(func=func)

    p = sub.add_parser("compare", help="compare two result CSV files")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"noisyfb: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"noisyfb: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
