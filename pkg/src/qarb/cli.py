"""``qarb`` command line.

Exit codes: 0 success, 2 invalid input or usage, 1 runtime failure. Every JSON
report echoes the effective configuration and seed. The seed comes from
``--seed``, else ``QARB_SEED``, else 0.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .arbitrage import (
    PRICE_TRANSFORMS,
    EnsembleSpec,
    Portfolio,
    PortfolioPool,
    ScreenConfig,
    complexity_experiment,
    exhaustive_pool,
    portfolio_seed,
    preselection_block,
    screen_fixed,
    screen_progressive,
)
from .data import KIND_ALIASES, KINDS, SynthSpec, dumps_report, load_csv, save_csv, save_report, synth
from .econometrics import QlrContract, engle_granger
from .econometrics.critical import DEFAULT_SEED, calibrate, write_table
from .embedding import build_embedding, exact_condition_number
from .errors import QarbError, ValidationError
from .qcnc import Comparator
from .vtpa import VtpaConfig, vtpa

SEED_ENV = "QARB_SEED"


class UsageError(ValidationError):
    pass


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None


def _window(text):
    if text is None:
        return None
    try:
        a, b = text.split(":")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must look like START:STOP, got {text!r}") from None


def _stocks(text):
    try:
        return tuple(int(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"stocks must be comma-separated indices, got {text!r}") from None


def _emit(payload: dict, out) -> None:
    if out:
        save_report(payload, out)
    else:
        sys.stdout.write(dumps_report(payload))


def _table(rows, headers):
    widths = [max(len(str(h)), *(len(str(r[i])) for r in rows)) if rows else len(str(h))
              for i, h in enumerate(headers)]
    line = "  ".join(str(h).ljust(w) for h, w in zip(headers, widths))
    print(line, file=sys.stderr)
    for r in rows:
        print("  ".join(str(c).ljust(w) for c, w in zip(r, widths)), file=sys.stderr)


def _screen_config(args) -> ScreenConfig:
    return ScreenConfig(epsilon=args.epsilon, boost=args.boost, extra_bits=args.extra_bits,
                        input_mode=args.input_mode, lag=args.lag, level=args.level,
                        qlr_epsilon=args.qlr_epsilon, price_transform=args.price_transform)


def _pool_from_args(args, panel) -> PortfolioPool:
    if getattr(args, "pool", None):
        return PortfolioPool.load(args.pool)
    if getattr(args, "stocks", None):
        window = args.window or (0, panel.T)
        return PortfolioPool((Portfolio(args.stocks, window),), len(args.stocks), panel.J, panel.T)
    raise UsageError("give --pool or --stocks")


# -- subcommands ------------------------------------------------------------------

def cmd_synth(args, seed):
    spec = SynthSpec(kind=args.kind, T=args.T, J=args.J, seed=seed, sigma=args.sigma, beta=tuple(args.beta),
                     phi=args.phi, sigma_noise=args.sigma_noise, kappa=args.kappa)
    panel = synth(spec)
    save_csv(panel, args.out)
    if args.meta:
        save_report({"command": "synth", "seed": seed, "config": spec.to_dict(), "metadata": panel.metadata},
                    args.meta)
    _table([(spec.kind, panel.T, panel.J, args.out)], ["kind", "T", "J", "file"])


def cmd_ingest(args, seed):
    panel = load_csv(args.panel)
    payload = {
        "command": "ingest", "seed": seed,
        "config": {"panel": args.panel, "pool_d": args.pool_d, "pool_cap": args.pool_cap},
        "T": panel.T, "J": panel.J, "tickers": list(panel.tickers),
        "first": panel.timestamps[0], "last": panel.timestamps[-1],
    }
    if args.pool_d:
        pool = exhaustive_pool(panel.J, args.pool_d, panel.T, cap=args.pool_cap, source=args.panel)
        pool.save(args.pool_out)
        payload["pool"] = {"path": args.pool_out, "size": len(pool)}
    _emit(payload, args.out)
    _table([(panel.T, panel.J, panel.timestamps[0], panel.timestamps[-1])], ["T", "J", "first", "last"])


def cmd_preselect(args, seed):
    panel = load_csv(args.panel)
    pool = _pool_from_args(args, panel)
    cfg = VtpaConfig(args.kappa0, args.epsilon, args.boost, args.extra_bits)
    rows, results = [], {}
    for p in pool.portfolios:
        block = preselection_block(panel, p, args.price_transform)
        comp = Comparator(build_embedding(block), args.input_mode)
        out = vtpa(comp.emb, args.input_mode, cfg, np.random.default_rng(portfolio_seed(seed, p, 1)),
                   comparator=comp)
        entry = out.to_dict()
        if args.oracle:
            entry["oracle_kappa"] = exact_condition_number(block).kappa
        results[p.key] = entry
        rows.append((p.key, entry["clock_pattern"], "pass" if not out.stopped else "stop"))
    payload = {"command": "preselect", "seed": seed,
               "config": {"panel": args.panel, "pool": args.pool, "kappa0": args.kappa0, "epsilon": args.epsilon,
                          "boost": args.boost, "extra_bits": args.extra_bits, "input_mode": args.input_mode,
                          "price_transform": args.price_transform},
               "results": results}
    _emit(payload, args.out)
    _table(rows, ["portfolio", "clocks", "verdict"])


def cmd_cointegrate(args, seed):
    panel = load_csv(args.panel)
    window = args.window or (0, panel.T)
    prices = panel.block(args.stocks, window)
    res = engle_granger(prices[:, 1:], prices[:, 0], args.lag, QlrContract(args.qlr_epsilon, seed), args.level)
    payload = {"command": "cointegrate", "seed": seed,
               "config": {"panel": args.panel, "stocks": list(args.stocks), "window": list(window),
                          "lag": args.lag, "level": args.level, "qlr_epsilon": args.qlr_epsilon},
               "result": res.to_dict()}
    _emit(payload, args.out)
    _table([(",".join(map(str, args.stocks)), res.flag, f"{res.adf.df_tau:.4f}",
             " ".join(f"{b:.4f}" for b in res.beta))], ["stocks", "cointegrated", "DF_tau", "beta"])


def _screen_summary(report):
    rows = [(p.key, f"{r.adf.df_tau:.3f}", " ".join(f"{b:.4f}" for b in r.beta)) for p, r in report.survivors]
    print(f"{len(report.survivors)} survivor(s); {len(report.preselected)} preselected; "
          f"queries {report.total_queries:.4g}", file=sys.stderr)
    if rows:
        _table(rows, ["survivor", "DF_tau", "beta"])


def cmd_screen_fixed(args, seed):
    panel = load_csv(args.panel)
    pool = PortfolioPool.load(args.pool)
    rep = screen_fixed(pool, panel, args.kappa0, _screen_config(args), seed, args.threads, args.timing)
    rep.config.update(pool=args.pool, panel=args.panel)
    _emit(rep.to_dict(), args.out)
    _screen_summary(rep)


def cmd_screen_progressive(args, seed):
    panel = load_csv(args.panel)
    pool = PortfolioPool.load(args.pool)
    rep = screen_progressive(pool, panel, args.k, args.j_max, _screen_config(args), seed, args.threads,
                             args.timing)
    rep.config.update(pool=args.pool, panel=args.panel)
    _emit(rep.to_dict(), args.out)
    _screen_summary(rep)


def cmd_calibrate_df(args, seed):
    trends = (True,) if args.trend else (False,) if args.no_trend else (False, True)
    table = calibrate(args.n, args.trials, seed if args.seed is not None or SEED_ENV in os.environ else DEFAULT_SEED,
                      trends)
    write_table(table, args.out)
    rows = [(key, n, *(f"{v:.4f}" for v in vals))
            for key, by_n in table["values"].items() for n, vals in sorted(by_n.items(), key=lambda kv: int(kv[0]))]
    _table(rows, ["case", "n", *(f"{q:.0%}" for q in table["levels"])])


def cmd_scaling(args, seed):
    spec = EnsembleSpec(n_rows=args.n_rows, d=args.d, kappa_range=(args.kappa_min, args.kappa_max),
                        trials=args.trials, seed=seed, spectrum=args.spectrum, epsilon=args.epsilon,
                        boost=args.boost)
    rep = complexity_experiment(spec, args.kappa0, args.d_grid, args.d_kappa0)
    payload = {"command": "scaling", "seed": seed, "config": rep.pop("ensemble"), **rep}
    _emit(payload, args.out)
    _table([(k, f"{t:.4g}", f"{e:.4g}") for k, t, e in zip(rep["kappa0_grid"], rep["T_avg"], rep["envelope"])],
           ["kappa0", "T_avg", "envelope"])
    print(f"slope vs log kappa0: {rep['slope']:.3f}" if rep["slope"] is not None else "slope: n/a",
          file=sys.stderr)


# -- parser ---------------------------------------------------------------------------

def _common(p, out_required=False):
    p.add_argument("--seed", type=int, default=None, help=f"random seed (overrides ${SEED_ENV})")
    p.add_argument("--out", required=out_required, help="output path (JSON report unless noted)")


def _vtpa_flags(p):
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--boost", type=float, default=3.0)
    p.add_argument("--extra-bits", type=int, default=2)
    p.add_argument("--input-mode", choices=("uniform", "data"), default="uniform")
    p.add_argument("--price-transform", choices=PRICE_TRANSFORMS, default="levels",
                   help="series the preselection embeds (cointegration always uses levels)")


def _eg_flags(p):
    p.add_argument("--lag", type=int, default=1)
    p.add_argument("--level", type=float, default=0.05, choices=(0.01, 0.05, 0.10))
    p.add_argument("--qlr-epsilon", type=float, default=0.0)


def _parallel_flags(p):
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--timing", action="store_true", help="add wall-clock stats (breaks byte determinism)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qarb", description="Condition-number preselection and cointegration screening for statistical arbitrage.")
    parser.add_argument("--version", action="version", version=f"qarb {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic price panel (CSV)")
    _common(p, out_required=True)
    p.add_argument("--kind", required=True, choices=(*KINDS, *KIND_ALIASES))
    p.add_argument("--T", type=int, default=500)
    p.add_argument("--J", type=int, default=2)
    p.add_argument("--beta", type=float, nargs="+", default=[2.0])
    p.add_argument("--phi", type=float, default=0.5)
    p.add_argument("--sigma", type=float, default=0.01)
    p.add_argument("--sigma-noise", type=float, default=0.05)
    p.add_argument("--kappa", type=float, default=8.0)
    p.add_argument("--meta", help="also write generation metadata as JSON")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="validate a price CSV, optionally emit an exhaustive pool")
    _common(p)
    p.add_argument("--panel", required=True)
    p.add_argument("--pool-d", type=int, default=None, help="stocks per portfolio for the pool")
    p.add_argument("--pool-cap", type=int, default=100_000)
    p.add_argument("--pool-out", default="pool.json")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("preselect", help="run the preselection cascade on portfolios")
    _common(p)
    p.add_argument("--panel", required=True)
    p.add_argument("--pool")
    p.add_argument("--stocks", type=_stocks)
    p.add_argument("--window", type=_window)
    p.add_argument("--kappa0", type=float, required=True)
    p.add_argument("--oracle", action="store_true", help="also report the exact condition number")
    _vtpa_flags(p)
    p.set_defaults(func=cmd_preselect)

    p = sub.add_parser("cointegrate", help="Engle-Granger test; first stock is the dependent series")
    _common(p)
    p.add_argument("--panel", required=True)
    p.add_argument("--stocks", type=_stocks, required=True)
    p.add_argument("--window", type=_window)
    _eg_flags(p)
    p.set_defaults(func=cmd_cointegrate)

    for name, func in (("screen-fixed", cmd_screen_fixed), ("screen-progressive", cmd_screen_progressive)):
        p = sub.add_parser(name, help=f"{name.split('-')[1]} preselection followed by cointegration")
        _common(p)
        p.add_argument("--pool", required=True)
        p.add_argument("--panel", required=True)
        if name == "screen-fixed":
            p.add_argument("--kappa0", type=float, required=True)
        else:
            p.add_argument("--k", type=int, required=True)
            p.add_argument("--j-max", type=int, default=30)
        _vtpa_flags(p)
        _eg_flags(p)
        _parallel_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("calibrate-df", help="Monte-Carlo Dickey-Fuller critical values")
    _common(p)
    p.add_argument("--n", type=int, nargs="+", default=[500])
    p.add_argument("--trials", type=int, default=100_000)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--trend", action="store_true", help="constant and trend only")
    g.add_argument("--no-trend", action="store_true", help="constant only")
    p.set_defaults(func=cmd_calibrate_df, out="df_critical_values.json")

    p = sub.add_parser("scaling", help="average cascade cost versus kappa0 and d")
    _common(p)
    p.add_argument("--kappa0", type=float, nargs="+", default=[4, 8, 16, 32])
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--n-rows", type=int, default=8)
    p.add_argument("--kappa-min", type=float, default=1.5)
    p.add_argument("--kappa-max", type=float, default=128.0)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--spectrum", choices=("uniform", "clustered"), default="uniform")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--boost", type=float, default=1.0)
    p.add_argument("--d-grid", type=int, nargs="+", default=None)
    p.add_argument("--d-kappa0", type=float, default=16.0)
    p.set_defaults(func=cmd_scaling)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        seed = _seed(args)
        args.func(args, seed)
    except (ValidationError, FileNotFoundError, argparse.ArgumentTypeError) as exc:
        print(f"qarb {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (QarbError, OSError, RuntimeError, ValueError) as exc:
        print(f"qarb {args.command}: failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
