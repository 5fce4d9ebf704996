"""Walk-forward out-of-sample evaluation and report tables.

Week t's fitted parameters price week t+1's quotes; absolute relative
errors are summarised per model and per bucket (regime, maturity,
moneyness, overall).
"""
import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .calibration import (
    GK,
    SYMMETRIC_VG,
    VG,
    CalibrationError,
    CalibrationResult,
    Chain,
    SimplexConfig,
    fit_historical,
    fit_weekly_risk_neutral,
    model_prices,
)
from .marketdata import (
    DEFAULT_MIN_VOLUME,
    DEFAULT_REGIMES,
    MATURITY_LABELS,
    MONEYNESS_LABELS,
    REGIME_LABELS,
    bucket,
    daily_spot_returns,
    group_by_week,
    liquidity_filter,
    write_rejects,
)
from .specfun import DEFAULT_QUAD, QuadratureError, QuadratureSpec
from .vgcore import DomainError, GkParams, VgParams

logger = logging.getLogger(__name__)

MODEL_ORDER = (GK, SYMMETRIC_VG, VG)
DIMENSIONS = ("overall", "regime", "maturity", "moneyness")
GROUP_VALUES = {
    "overall": ("all",),
    "regime": REGIME_LABELS,
    "maturity": MATURITY_LABELS,
    "moneyness": MONEYNESS_LABELS,
}
REPORT_COLUMNS = ("model", "group_dimension", "group_value", "n", "mean", "sd", "max", "min",
                  "n_skipped")
MIN_VG_QUOTES = 3
CARRIED_FORWARD = "carried_forward"

# calibration settings for the weekly pipeline; looser than the library
# defaults so a two-year run stays within minutes
PIPELINE_SIMPLEX = SimplexConfig(x_tol=1e-5, f_tol=1e-6, restarts=1)
PIPELINE_QUAD = QuadratureSpec(rel_tol=1e-8, abs_tol=1e-10)
DEFAULT_INITIAL = {
    GK: GkParams(0.1),
    SYMMETRIC_VG: VgParams(0.1, 0.1, 0.0),
    VG: VgParams(0.1, 0.1, 0.0),
}


@dataclass(frozen=True)
class EvalRecord:
    quote: object
    model_price: float
    abs_rel_error: float
    bucket: object
    week: str
    model: str


@dataclass(frozen=True)
class SkippedQuote:
    quote: object
    week: str
    model: str
    reason: str


@dataclass(frozen=True)
class ReportCell:
    model: str
    group_dimension: str
    group_value: str
    n: int
    mean: float = None
    sd: float = None
    max: float = None
    min: float = None
    n_skipped: int = 0

    def as_dict(self):
        return {c: getattr(self, c) for c in REPORT_COLUMNS}


@dataclass(frozen=True)
class EvalReport:
    cells: tuple = ()

    def cell(self, model, dimension, value):
        for c in self.cells:
            if (c.model, c.group_dimension, c.group_value) == (model, dimension, value):
                return c
        raise KeyError((model, dimension, value))


def abs_rel_error(market, model):
    return abs(market - model) / market


def mape(records):
    """Mean absolute relative error, (1/n) sum |C_market - C_model| / C_market.

    Accepts EvalRecords or plain error values.
    """
    errors = [r.abs_rel_error if isinstance(r, EvalRecord) else float(r) for r in records]
    if not errors:
        raise ValueError("mape of an empty record set")
    return math.fsum(errors) / len(errors)


def _summary(values):
    n = len(values)
    if n == 0:
        return dict(n=0)
    mean = math.fsum(values) / n
    sd = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1)) if n > 1 else None
    return dict(n=n, mean=mean, sd=sd, max=max(values), min=min(values))


def _price_quotes(quotes, params, quad):
    """Model prices for a list of quotes, isolating quotes that fail."""
    chain = Chain.from_quotes(quotes)
    try:
        prices, _ = model_prices(chain, params, quad)
        return [(float(p), None) for p in prices]
    except (DomainError, QuadratureError):
        pass
    out = []
    for q in quotes:
        try:
            prices, _ = model_prices(Chain.from_quotes([q]), params, quad)
            out.append((float(prices[0]), None))
        except (DomainError, QuadratureError) as exc:
            out.append((None, f"pricing failed: {exc}"))
    return out


def walk_forward(weekly_params, quotes_by_week, model, quad=DEFAULT_QUAD, regimes=DEFAULT_REGIMES):
    """Price each week's quotes with the previous week's fit.

    ``weekly_params`` maps week key to CalibrationResult. Returns
    ``(records, skipped)``; the first week yields nothing.
    """
    records, skipped = [], []
    weeks = list(quotes_by_week)
    for prev, week in zip(weeks, weeks[1:]):
        quotes = quotes_by_week[week]
        fit = weekly_params.get(prev)
        reason = None
        if fit is None or fit.params is None:
            reason = f"no fit for week {prev}"
        elif not (fit.converged or CARRIED_FORWARD in fit.flags):
            reason = f"fit for week {prev} did not converge"
        if reason:
            skipped.extend(SkippedQuote(q, week, model, reason) for q in quotes)
            continue
        for q, (price, why) in zip(quotes, _price_quotes(quotes, fit.params, quad)):
            if why is None and not price > 0:
                why = f"non-positive model price {price!r}"
            if why is not None:
                skipped.append(SkippedQuote(q, week, model, why))
                continue
            records.append(EvalRecord(q, price, abs_rel_error(q.market_price, price),
                                      bucket(q, regimes), week, model))
    return records, skipped


def _group_value(item, dimension, regimes):
    if dimension == "overall":
        return "all"
    label = item.bucket if isinstance(item, EvalRecord) else bucket(item.quote, regimes)
    return getattr(label, dimension)


def report(records, group_by, skipped=(), regimes=DEFAULT_REGIMES):
    """Per-model, per-bucket statistics of absolute relative errors.

    Every label of the dimension gets a cell; cells without records carry
    n = 0 and empty statistics. ``sd`` is the sample standard deviation.
    """
    if group_by not in GROUP_VALUES:
        raise ValueError(f"unknown group dimension {group_by!r}")
    errors, skips = {}, {}
    for r in records:
        errors.setdefault((r.model, _group_value(r, group_by, regimes)), []).append(r.abs_rel_error)
    for s in skipped:
        key = (s.model, _group_value(s, group_by, regimes))
        skips[key] = skips.get(key, 0) + 1
    present = {k[0] for k in errors} | {k[0] for k in skips}
    models = [m for m in MODEL_ORDER if m in present] + sorted(present - set(MODEL_ORDER))
    cells = []
    for model in models:
        for value in GROUP_VALUES[group_by]:
            stats = _summary(errors.get((model, value), []))
            cells.append(ReportCell(model, group_by, value, n_skipped=skips.get((model, value), 0),
                                    **stats))
    return EvalReport(tuple(cells))


def parameter_report(weekly_params):
    """Mean/sd/max/min of each fitted parameter across weeks, per model.

    ``weekly_params`` maps model to {week: CalibrationResult}. Carried-forward
    weeks are excluded from the statistics and counted in ``n_skipped``.
    """
    cells = []
    for model in [m for m in MODEL_ORDER if m in weekly_params]:
        fits = weekly_params[model].values()
        names = list(DEFAULT_INITIAL[model].as_dict())
        for name in names:
            values = [f.values[name] for f in fits
                      if f.params is not None and CARRIED_FORWARD not in f.flags]
            carried = sum(1 for f in fits if CARRIED_FORWARD in f.flags)
            cells.append(ReportCell(model, "parameter", name, n_skipped=carried, **_summary(values)))
    return EvalReport(tuple(cells))


def historical_report(results):
    """Single-row parameter summary of historical fits, one cell per parameter."""
    cells = []
    for model in [m for m in MODEL_ORDER if m in results]:
        for name, value in results[model].values.items():
            cells.append(ReportCell(model, "historical", name, **_summary([value])))
    return EvalReport(tuple(cells))


# -- emission ------------------------------------------------------------------


def _six(value):
    if value is None or not math.isfinite(value):
        return None
    return float(f"{value:.6g}")


def _cell_row(cell):
    row = cell.as_dict()
    for key in ("mean", "sd", "max", "min"):
        row[key] = _six(row[key])
    return row


def emit_report(report, fmt, path):
    """Write a report as CSV or JSON with 6 significant digits.

    Output is byte-stable for identical reports.
    """
    rows = [_cell_row(c) for c in report.cells]
    try:
        if fmt == "csv":
            with open(path, "w", newline="") as handle:
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(REPORT_COLUMNS)
                for row in rows:
                    writer.writerow(["" if row[c] is None else (f"{row[c]:.6g}" if isinstance(
                        row[c], float) else row[c]) for c in REPORT_COLUMNS])
        elif fmt == "json":
            with open(path, "w") as handle:
                json.dump(rows, handle, sort_keys=True, indent=2, allow_nan=False)
                handle.write("\n")
        else:
            raise ValueError(f"unknown report format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror}") from exc


def read_report(path):
    """Parse a report written by :func:`emit_report` back into an EvalReport."""
    if str(path).endswith(".json"):
        with open(path) as handle:
            rows = json.load(handle)
    else:
        with open(path, newline="") as handle:
            rows = []
            for row in csv.DictReader(handle):
                for key in ("n", "n_skipped"):
                    row[key] = int(row[key])
                for key in ("mean", "sd", "max", "min"):
                    row[key] = float(row[key]) if row[key] != "" else None
                rows.append(row)
    return EvalReport(tuple(ReportCell(**{c: r[c] for c in REPORT_COLUMNS}) for r in rows))


# -- pipeline ------------------------------------------------------------------


@dataclass(frozen=True)
class PipelineConfig:
    min_volume: float = DEFAULT_MIN_VOLUME
    regimes: object = DEFAULT_REGIMES
    simplex: SimplexConfig = PIPELINE_SIMPLEX
    quad: QuadratureSpec = PIPELINE_QUAD
    models: tuple = MODEL_ORDER
    workers: int = 1


@dataclass
class PipelineResult:
    historical: dict
    weekly: dict
    records: list
    skipped: list
    reports: dict = field(default_factory=dict)
    n_filtered: int = 0
    weeks: tuple = ()


def historical_initials(returns, models, simplex=None):
    """Historical fits used as weekly initial guesses, with a fixed fallback."""
    out = {}
    for model in models:
        try:
            res = fit_historical(returns, model, simplex)
            if res.params is None:
                raise CalibrationError("degenerate historical fit")
        except CalibrationError as exc:
            logger.warning("historical %s fit unavailable (%s); using default start", model, exc)
            res = CalibrationResult(DEFAULT_INITIAL[model], loss=math.nan, flags=("default",))
        out[model] = res
    return out


def _fit_task(args):
    chain, model, initial, simplex, quad = args
    try:
        return fit_weekly_risk_neutral(chain, model, initial, simplex, quad)
    except (CalibrationError, DomainError, QuadratureError) as exc:
        return CalibrationResult(None, loss=math.inf, flags=(f"failed: {exc}",))


def fit_all_weeks(quotes_by_week, historical, config):
    """Weekly fits for every model. Weeks with too few quotes for a model
    carry the previous week's parameters forward (or the historical start
    for the first week)."""
    tasks, keys = [], []
    for model in config.models:
        need = 1 if model == GK else MIN_VG_QUOTES
        initial = historical[model].params
        for week, quotes in quotes_by_week.items():
            if len(quotes) >= need:
                keys.append((model, week))
                tasks.append((Chain.from_quotes(quotes), model, initial, config.simplex,
                              config.quad))
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_fit_task, tasks, chunksize=1))
    else:
        results = [_fit_task(t) for t in tasks]
    fitted = dict(zip(keys, results))

    weekly = {}
    for model in config.models:
        weekly[model] = {}
        previous = historical[model]
        for week in quotes_by_week:
            res = fitted.get((model, week))
            if res is None:
                res = CalibrationResult(previous.params, loss=math.nan, converged=False,
                                        flags=(CARRIED_FORWARD,))
                logger.info("%s week %s: too few quotes, parameters carried forward", model, week)
            elif res.params is None:
                logger.warning("%s week %s: %s", model, week, res.flags[0])
            weekly[model][week] = res
            if res.params is not None:
                previous = res
    return weekly


def run_pipeline(quotes, config=PipelineConfig(), returns=None):
    """Filter, group, fit weekly, walk forward and build all reports."""
    liquid = liquidity_filter(quotes, config.min_volume)
    by_week = group_by_week(liquid)
    if returns is None:
        _, returns = daily_spot_returns(liquid)
    historical = historical_initials(returns, config.models)
    weekly = fit_all_weeks(by_week, historical, config)
    records, skipped = [], []
    for model in config.models:
        r, s = walk_forward(weekly[model], by_week, model, config.quad, config.regimes)
        records.extend(r)
        skipped.extend(s)
    reports = {dim: report(records, dim, skipped, config.regimes) for dim in DIMENSIONS}
    reports["parameters"] = parameter_report(weekly)
    reports["historical"] = historical_report(historical)
    return PipelineResult(historical, weekly, records, skipped, reports,
                          n_filtered=len(quotes) - len(liquid), weeks=tuple(by_week))


def _json_number(value):
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return None
    return value


def write_outputs(result, out_dir, rejects=(), manifest=None):
    """Write the run's output tree.

    params/week-<iso>.json, reports/<dimension>.csv|json, reports/records.csv,
    rejects.csv and run-manifest.json.
    """
    params_dir = os.path.join(out_dir, "params")
    reports_dir = os.path.join(out_dir, "reports")
    os.makedirs(params_dir, exist_ok=True)
    os.makedirs(reports_dir, exist_ok=True)
    for week in result.weeks:
        payload = {}
        for model, fits in result.weekly.items():
            d = fits[week].to_dict()
            d["loss"] = _json_number(d["loss"])
            payload[model] = d
        with open(os.path.join(params_dir, f"week-{week}.json"), "w") as handle:
            json.dump(payload, handle, sort_keys=True, indent=2, allow_nan=False)
            handle.write("\n")
    for name, rep in result.reports.items():
        emit_report(rep, "csv", os.path.join(reports_dir, f"{name}.csv"))
        emit_report(rep, "json", os.path.join(reports_dir, f"{name}.json"))
    with open(os.path.join(reports_dir, "records.csv"), "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["model", "week", "trade_date", "expiry_date", "strike", "spot",
                         "market_price", "model_price", "abs_rel_error", "moneyness",
                         "maturity", "regime", "skip_reason"])
        for r in result.records:
            q = r.quote
            writer.writerow([r.model, r.week, q.trade_date.isoformat(), q.expiry_date.isoformat(),
                             repr(q.strike), repr(q.spot), repr(q.market_price),
                             f"{r.model_price:.10g}", f"{r.abs_rel_error:.10g}",
                             r.bucket.moneyness, r.bucket.maturity, r.bucket.regime, ""])
        for s in result.skipped:
            q = s.quote
            writer.writerow([s.model, s.week, q.trade_date.isoformat(), q.expiry_date.isoformat(),
                             repr(q.strike), repr(q.spot), repr(q.market_price), "", "", "", "",
                             "", s.reason])
    write_rejects(rejects, os.path.join(out_dir, "rejects.csv"))
    if manifest is not None:
        with open(os.path.join(out_dir, "run-manifest.json"), "w") as handle:
            json.dump(manifest, handle, sort_keys=True, indent=2)
            handle.write("\n")


__all__ = [
    "DIMENSIONS", "EvalRecord", "EvalReport", "PIPELINE_QUAD", "PIPELINE_SIMPLEX",
    "PipelineConfig", "PipelineResult", "ReportCell", "SkippedQuote", "abs_rel_error",
    "emit_report", "fit_all_weeks", "historical_initials", "historical_report", "mape",
    "parameter_report", "read_report", "report", "run_pipeline", "walk_forward",
    "write_outputs",
]
