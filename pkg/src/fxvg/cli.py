"""Command-line interface.

Subcommands: price, simulate, fit-historical, fit-weekly, evaluate, generate.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
import argparse
import datetime as dt
import json
import logging
import math
import os
import sys
from dataclasses import asdict, replace

import numpy as np

from . import calibration, evaluation, marketdata
from .calibration import GK, SYMMETRIC_VG, VG, CalibrationError, SimplexConfig
from .marketdata import DataError, GeneratorConfig, RegimeConfig
from .pricing import OptionSpec, price
from .specfun import QuadratureError
from .vgcore import DAILY_T, DomainError, GkParams, MarketEnv, VgParams, omega

logger = logging.getLogger("fxvg")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
MODEL_ALIASES = {"gk": GK, "vg": VG, "svg": SYMMETRIC_VG, "symmetric_vg": SYMMETRIC_VG}
DEFAULT_SEED = 42


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _model(text):
    try:
        return MODEL_ALIASES[text.lower()]
    except KeyError:
        raise argparse.ArgumentTypeError(
            f"unknown model {text!r} (choose from {', '.join(sorted(MODEL_ALIASES))})") from None


def _date(text):
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an ISO date: {text!r}") from None


def _params_from_flags(model, sigma, nu, theta):
    if sigma is None:
        raise UsageError("--sigma is required")
    if model == GK:
        return GkParams(sigma)
    if nu is None:
        raise UsageError(f"--nu is required for model {model}")
    return VgParams(sigma, nu, 0.0 if model == SYMMETRIC_VG else (theta or 0.0))


def _read_params(path, model):
    """Parameters from a JSON file: a bare mapping or a fit result."""
    try:
        with open(path) as handle:
            data = json.load(handle)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read parameters from {path}: {exc}") from None
    if model in data:
        data = data[model]
    data = data.get("params", data)
    try:
        return _params_from_flags(model, data.get("sigma"), data.get("nu"), data.get("theta"))
    except UsageError as exc:
        raise DataError(f"{path}: {exc}") from None


def _finite(value):
    """Replace non-finite floats with None; JSON has no infinities."""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    return value


def _write_json(payload, path):
    text = json.dumps(_finite(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w") as handle:
        handle.write(text)


# -- configuration -------------------------------------------------------------

CONFIG_KEYS = {
    "quotes", "returns", "out_dir", "r_d", "r_f", "regimes", "simplex", "quad", "seed",
    "workers", "min_volume", "models",
}


def load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as handle:
            data = json.load(handle)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    return data


def resolve(args, config, name, default=None):
    """Flag value if given, else config file value, else default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    return config.get(name, default)


def _simplex(config, base):
    overrides = config.get("simplex") or {}
    try:
        return replace(base, **overrides)
    except TypeError as exc:
        raise UsageError(f"bad simplex override: {exc}") from None


def _quad(config, base):
    overrides = config.get("quad") or {}
    try:
        return replace(base, **overrides)
    except TypeError as exc:
        raise UsageError(f"bad quadrature override: {exc}") from None


def _regimes(config):
    data = config.get("regimes")
    return RegimeConfig.from_dict(data) if data else marketdata.DEFAULT_REGIMES


def _load_quotes(path, args, config):
    if path is None:
        raise UsageError("--quotes is required")
    loaded = marketdata.load_quotes(path, resolve(args, config, "r_d"), resolve(args, config, "r_f"))
    for r in loaded.rejects:
        logger.warning("%s: line %d rejected: %s", path, r.line_number, r.reason)
    return loaded


def _returns(args, config, quotes=None):
    path = resolve(args, config, "returns")
    if path is not None:
        return marketdata.load_returns(path)[1]
    if quotes is None:
        raise UsageError("--returns is required")
    return marketdata.daily_spot_returns(quotes)[1]


# -- commands --------------------------------------------------------------------


def cmd_price(args, config):
    env = MarketEnv(args.spot, args.rd, args.rf)
    opt = OptionSpec.from_days(args.strike, args.t)
    params = (_read_params(args.params, args.model) if args.params
              else _params_from_flags(args.model, args.sigma, args.nu, args.theta))
    quad = _quad(config, calibration.DEFAULT_QUAD)
    result = price(env, params, opt, quad)
    print(f"{result.price:.8g} {result.method}")
    return EXIT_OK


def cmd_simulate(args, config):
    """Daily log returns under VG dynamics with the given physical drift."""
    vg = _params_from_flags(VG, args.sigma, args.nu, args.theta)
    seed = resolve(args, config, "seed", DEFAULT_SEED)
    rng = np.random.default_rng(seed)
    t = DAILY_T
    gap = rng.gamma(t / vg.nu, vg.nu, args.days)
    x = vg.theta * gap + vg.sigma * np.sqrt(gap) * rng.standard_normal(args.days)
    z = x + (args.drift + omega(vg)) * t
    days, d = [], args.start
    while len(days) < args.days:
        if d.weekday() < 5:
            days.append(d)
        d += dt.timedelta(days=1)
    marketdata.write_returns(days, z, args.out)
    print(f"wrote {args.days} daily returns to {args.out}")
    return EXIT_OK


def cmd_fit_historical(args, config):
    _, returns = marketdata.load_returns(args.returns)
    res = calibration.fit_historical(returns, args.model, _simplex(config, SimplexConfig()))
    payload = {"model": args.model, **res.to_dict()}
    _write_json(payload, args.out)
    summary = " ".join(f"{k}={v:.6g}" for k, v in res.values.items())
    print(f"{args.model}: {summary} loss={res.loss:.8g} converged={res.converged}",
          file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return EXIT_OK


def cmd_fit_weekly(args, config):
    loaded = _load_quotes(resolve(args, config, "quotes"), args, config)
    quotes = marketdata.liquidity_filter(loaded.quotes, resolve(args, config, "min_volume",
                                                                marketdata.DEFAULT_MIN_VOLUME))
    by_week = marketdata.group_by_week(quotes)
    if args.week:
        if args.week not in by_week:
            raise DataError(f"no liquid quotes in week {args.week}")
        by_week = {args.week: by_week[args.week]}
    if args.initial:
        initial = _read_params(args.initial, args.model)
    else:
        initial = evaluation.historical_initials(_returns(args, config, quotes),
                                                 [args.model])[args.model].params
    simplex = _simplex(config, evaluation.PIPELINE_SIMPLEX)
    quad = _quad(config, evaluation.PIPELINE_QUAD)
    out = {}
    for week, chain in by_week.items():
        if args.model != GK and len(chain) < evaluation.MIN_VG_QUOTES:
            logger.warning("week %s: %d quotes, too few to fit %s", week, len(chain), args.model)
            continue
        res = calibration.fit_weekly_risk_neutral(chain, args.model, initial, simplex, quad)
        out[week] = res.to_dict()
        summary = " ".join(f"{k}={v:.6g}" for k, v in res.values.items())
        print(f"{week} n={len(chain)} {summary} loss={res.loss:.6g} converged={res.converged}",
              file=sys.stderr)
    _write_json({"model": args.model, "weeks": out}, args.out)
    return EXIT_OK


def cmd_evaluate(args, config):
    quotes_path = resolve(args, config, "quotes")
    out_dir = resolve(args, config, "out_dir")
    if out_dir is None:
        raise UsageError("--out-dir is required")
    loaded = _load_quotes(quotes_path, args, config)
    returns_path = resolve(args, config, "returns")
    returns = marketdata.load_returns(returns_path)[1] if returns_path else None
    models = tuple(_model(m) for m in config.get("models", ("gk", "svg", "vg")))
    pconf = evaluation.PipelineConfig(
        min_volume=resolve(args, config, "min_volume", marketdata.DEFAULT_MIN_VOLUME),
        regimes=_regimes(config),
        simplex=_simplex(config, evaluation.PIPELINE_SIMPLEX),
        quad=_quad(config, evaluation.PIPELINE_QUAD),
        models=models,
        workers=max(1, int(resolve(args, config, "workers", 1))),
    )
    result = evaluation.run_pipeline(loaded.quotes, pconf, returns)
    # the worker count is deliberately left out: outputs must not depend on it
    manifest = {
        "quotes": quotes_path,
        "returns": returns_path,
        "seed": resolve(args, config, "seed", DEFAULT_SEED),
        "min_volume": pconf.min_volume,
        "models": list(models),
        "regimes": pconf.regimes.as_dict(),
        "simplex": asdict(pconf.simplex),
        "quad": asdict(pconf.quad),
        "r_d": resolve(args, config, "r_d"),
        "r_f": resolve(args, config, "r_f"),
        "counts": {
            "loaded": len(loaded.quotes),
            "rejected": len(loaded.rejects),
            "illiquid": result.n_filtered,
            "weeks": len(result.weeks),
            "records": len(result.records),
            "skipped": len(result.skipped),
        },
    }
    evaluation.write_outputs(result, out_dir, loaded.rejects, manifest)
    overall = result.reports["overall"]
    for cell in overall.cells:
        mean = "n/a" if cell.mean is None else f"{cell.mean:.6g}"
        print(f"{cell.model}: overall MAPE {mean} over {cell.n} quotes "
              f"({cell.n_skipped} skipped)")
    return EXIT_OK


def cmd_generate(args, config):
    seed = resolve(args, config, "seed", DEFAULT_SEED)
    base = (_read_params(args.params, VG) if args.params
            else _params_from_flags(VG, args.sigma, args.nu, args.theta))
    gconf = GeneratorConfig(
        weeks=args.weeks, quotes_per_week=args.quotes_per_week, noise=args.noise, seed=seed,
        start=args.start, spot=args.spot, r_d=args.rd, r_f=args.rf,
        illiquid_fraction=args.illiquid_fraction, drift=args.drift,
    )
    truth = marketdata.weekly_truth(base, gconf.weeks, gconf.drift)
    quotes, days, spots = marketdata.generate_quotes(truth, gconf)
    marketdata.write_quotes(quotes, args.out)
    if args.returns_out:
        marketdata.write_returns(days[1:], np.diff(np.log(spots)), args.returns_out)
    if args.truth_out:
        weeks = [marketdata.iso_week(gconf.start + dt.timedelta(days=7 * w))
                 for w in range(gconf.weeks)]
        _write_json({"config": gconf.as_dict(),
                     "weeks": {w: p.as_dict() for w, p in zip(weeks, truth)}}, args.truth_out)
    print(f"wrote {len(quotes)} quotes over {gconf.weeks} weeks to {args.out}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def _add_params(p, required_sigma=False):
    p.add_argument("--sigma", type=float, required=required_sigma)
    p.add_argument("--nu", type=float)
    p.add_argument("--theta", type=float)


def build_parser():
    parser = _Parser(prog="fxvg", description="Variance gamma currency-option toolkit.")
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("price", help="price one European call")
    p.add_argument("--model", type=_model, required=True)
    p.add_argument("--spot", type=float, required=True)
    p.add_argument("--strike", type=float, required=True)
    p.add_argument("--t", "--expiry-days", dest="t", type=float, required=True,
                   help="calendar days to expiry")
    p.add_argument("--rd", type=float, default=0.0)
    p.add_argument("--rf", type=float, default=0.0)
    _add_params(p)
    p.add_argument("--params", help="JSON file with sigma/nu/theta")
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("simulate", help="simulate daily VG log returns")
    _add_params(p, required_sigma=True)
    p.add_argument("--days", type=int, default=5000)
    p.add_argument("--drift", type=float, default=0.0, help="annual drift of the log rate")
    p.add_argument("--start", type=_date, default=dt.date(2000, 1, 3))
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit-historical", help="fit a model to daily log returns")
    p.add_argument("--returns", required=True)
    p.add_argument("--model", type=_model, required=True)
    p.add_argument("--out", help="output JSON (default stdout)")
    p.set_defaults(func=cmd_fit_historical)

    p = sub.add_parser("fit-weekly", help="risk-neutral fit to weekly option chains")
    p.add_argument("--quotes")
    p.add_argument("--returns", help="daily returns CSV for the initial guess")
    p.add_argument("--model", type=_model, required=True)
    p.add_argument("--week", help="ISO week key such as 2011-W05 (default: all)")
    p.add_argument("--initial", help="JSON file with initial parameters")
    p.add_argument("--min-volume", dest="min_volume", type=float)
    p.add_argument("--rd", dest="r_d", type=float, help="domestic rate when the CSV has none")
    p.add_argument("--rf", dest="r_f", type=float, help="foreign rate when the CSV has none")
    p.add_argument("--out", help="output JSON (default stdout)")
    p.set_defaults(func=cmd_fit_weekly)

    p = sub.add_parser("evaluate", help="weekly fits and walk-forward evaluation")
    p.add_argument("--quotes")
    p.add_argument("--returns")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--min-volume", dest="min_volume", type=float)
    p.add_argument("--rd", dest="r_d", type=float, help="domestic rate when the CSV has none")
    p.add_argument("--rf", dest="r_f", type=float, help="foreign rate when the CSV has none")
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("generate", help="write a synthetic quote CSV")
    p.add_argument("--weeks", type=int, default=92)
    p.add_argument("--quotes-per-week", dest="quotes_per_week", type=int, default=80)
    _add_params(p)
    p.add_argument("--params", help="JSON file with sigma/nu/theta")
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--drift", type=float, default=0.0,
                   help="relative amplitude of the slow drift in sigma and nu")
    p.add_argument("--illiquid-fraction", dest="illiquid_fraction", type=float, default=0.1)
    p.add_argument("--spot", type=float, default=45.0)
    p.add_argument("--rd", type=float, default=0.07)
    p.add_argument("--rf", type=float, default=0.01)
    p.add_argument("--start", type=_date, default=dt.date(2010, 11, 1))
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--returns-out", dest="returns_out")
    p.add_argument("--truth-out", dest="truth_out")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        return args.func(args, config)
    except (UsageError, DomainError) as exc:
        print(f"fxvg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CalibrationError) as exc:
        print(f"fxvg: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (QuadratureError, OverflowError, FloatingPointError) as exc:
        print(f"fxvg: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"fxvg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"fxvg: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
