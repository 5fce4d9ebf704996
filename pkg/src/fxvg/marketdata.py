"""Quote ingestion, liquidity filtering, bucket classification, weekly
grouping, and a synthetic option-chain generator."""
import csv
import datetime as dt
import logging
import math
from collections import OrderedDict
from dataclasses import dataclass, fields

import numpy as np

from .pricing import price_vg_batch
from .vgcore import CALENDAR_DAYS, DAILY_T, VgParams, omega

logger = logging.getLogger(__name__)

QUOTE_COLUMNS = ("trade_date", "expiry_date", "strike", "price", "volume", "spot", "r_d", "r_f")
RETURN_COLUMNS = ("date", "log_return")
REJECT_COLUMNS = ("line_number", "reason")

ITM, ATM, OTM = "ITM", "ATM", "OTM"
SHORT, MEDIUM, LONG = "short", "medium", "long"
LOW_VOL, HIGH_VOL = "low_vol", "high_vol"
MONEYNESS_LABELS = (ITM, ATM, OTM)
MATURITY_LABELS = (SHORT, MEDIUM, LONG)
REGIME_LABELS = (LOW_VOL, HIGH_VOL)

DEFAULT_MIN_VOLUME = 100
# smallest quoted premium used by the generator (one price tick)
PRICE_TICK = 0.0025
STRIKE_TICK = 0.25


class DataError(ValueError):
    """Input data cannot be used."""


@dataclass(frozen=True)
class OptionQuote:
    trade_date: dt.date
    expiry_date: dt.date
    strike: float
    market_price: float
    volume: float
    spot: float
    r_d: float
    r_f: float

    def __post_init__(self):
        if not self.expiry_date > self.trade_date:
            raise DataError("expiry_date must be after trade_date")
        for name in ("strike", "market_price", "spot"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DataError(f"{name} must be positive, got {value}")
        if not (math.isfinite(self.volume) and self.volume >= 0):
            raise DataError(f"volume must be non-negative, got {self.volume}")
        if not (math.isfinite(self.r_d) and math.isfinite(self.r_f)):
            raise DataError("rates must be finite")

    @property
    def days(self):
        return (self.expiry_date - self.trade_date).days

    @property
    def maturity_t(self):
        return self.days / CALENDAR_DAYS

    @property
    def iso_week(self):
        return iso_week(self.trade_date)


@dataclass(frozen=True)
class Reject:
    line_number: int
    reason: str


@dataclass(frozen=True)
class LoadResult:
    quotes: tuple
    rejects: tuple


@dataclass(frozen=True)
class BucketLabel:
    moneyness: str
    maturity: str
    regime: str


@dataclass(frozen=True)
class RegimeConfig:
    """Regime calendar: low volatility from ``start`` up to ``split``, high
    volatility from ``split`` to ``end`` inclusive."""

    start: dt.date = dt.date(2010, 11, 1)
    split: dt.date = dt.date(2011, 7, 28)
    end: dt.date = dt.date(2012, 9, 28)

    def __post_init__(self):
        if not self.start <= self.split <= self.end:
            raise ValueError("regime dates must satisfy start <= split <= end")

    def as_dict(self):
        return {"start": self.start.isoformat(), "split": self.split.isoformat(),
                "end": self.end.isoformat()}

    @classmethod
    def from_dict(cls, data):
        return cls(**{k: parse_date(v) for k, v in data.items()})


DEFAULT_REGIMES = RegimeConfig()


def parse_date(text):
    try:
        return dt.date.fromisoformat(str(text).strip())
    except ValueError:
        raise DataError(f"not an ISO-8601 date: {text!r}") from None


def iso_week(day):
    year, week, _ = day.isocalendar()
    return f"{year:04d}-W{week:02d}"


def _parse_float(text, name):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise DataError(f"{name}: not a number: {text!r}") from None
    if not math.isfinite(value):
        raise DataError(f"{name}: not finite: {text!r}")
    return value


# -- CSV I/O -----------------------------------------------------------------


def load_quotes(path, default_r_d=None, default_r_f=None):
    """Read a quote CSV.

    Malformed rows become line-numbered rejects rather than errors. When the
    ``r_d``/``r_f`` columns are absent, the defaults fill them (constant-rate
    mode). Raises DataError for a missing file, empty file or missing column.
    """
    defaults = {"r_d": default_r_d, "r_f": default_r_f}
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in header]
        missing = [c for c in QUOTE_COLUMNS if c not in header
                   and not (c in defaults and defaults[c] is not None)]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
        index = {name: header.index(name) for name in QUOTE_COLUMNS if name in header}
        quotes, rejects = [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            try:
                if len(row) != len(header):
                    raise DataError(f"expected {len(header)} fields, got {len(row)}")
                get = {k: row[i] for k, i in index.items()}
                rate = {k: (_parse_float(get[k], k) if k in get else float(defaults[k]))
                        for k in ("r_d", "r_f")}
                quotes.append(OptionQuote(
                    trade_date=parse_date(get["trade_date"]),
                    expiry_date=parse_date(get["expiry_date"]),
                    strike=_parse_float(get["strike"], "strike"),
                    market_price=_parse_float(get["price"], "price"),
                    volume=_parse_float(get["volume"], "volume"),
                    spot=_parse_float(get["spot"], "spot"),
                    **rate,
                ))
            except DataError as exc:
                rejects.append(Reject(line, str(exc)))
    if not quotes and not rejects:
        raise DataError(f"{path}: no data rows")
    return LoadResult(tuple(quotes), tuple(rejects))


def _fmt(value):
    # repr of a float round-trips exactly
    return repr(float(value))


def write_quotes(quotes, path):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(QUOTE_COLUMNS)
        for q in quotes:
            volume = int(q.volume) if float(q.volume).is_integer() else _fmt(q.volume)
            writer.writerow([q.trade_date.isoformat(), q.expiry_date.isoformat(), _fmt(q.strike),
                             _fmt(q.market_price), volume, _fmt(q.spot), _fmt(q.r_d), _fmt(q.r_f)])


def write_rejects(rejects, path):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(REJECT_COLUMNS)
        for r in rejects:
            writer.writerow([r.line_number, r.reason])


def load_returns(path):
    """Read a returns CSV (date, log_return); returns ``(dates, values)``.

    Unlike quotes, a malformed returns row is an error naming its line.
    """
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    dates, values = [], []
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if "log_return" not in header:
            raise DataError(f"{path}: missing column log_return")
        i_val = header.index("log_return")
        i_date = header.index("date") if "date" in header else None
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            try:
                values.append(_parse_float(row[i_val], "log_return"))
                dates.append(parse_date(row[i_date]) if i_date is not None else None)
            except (DataError, IndexError) as exc:
                raise DataError(f"{path}: line {reader.line_num}: {exc}") from None
    if not values:
        raise DataError(f"{path}: no data rows")
    return dates, np.array(values)


def write_returns(dates, values, path):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(RETURN_COLUMNS)
        for d, v in zip(dates, values):
            writer.writerow([d.isoformat(), _fmt(v)])


# -- filtering and classification ----------------------------------------------


def liquidity_filter(quotes, min_volume=DEFAULT_MIN_VOLUME):
    """Keep quotes whose volume is strictly greater than ``min_volume``."""
    return [q for q in quotes if q.volume > min_volume]


def classify_moneyness(spot, strike):
    """ATM for 0.95 < S/K < 1.05, ITM for S/K >= 1.05, OTM for S/K <= 0.95."""
    if not (spot > 0 and strike > 0):
        raise DataError("spot and strike must be positive")
    ratio = spot / strike
    if ratio >= 1.05:
        return ITM
    if ratio <= 0.95:
        return OTM
    return ATM


def classify_maturity(trade_date, expiry_date):
    """Calendar days to expiry: short below 30, medium 30 to 60, long above 60."""
    days = (expiry_date - trade_date).days
    if days <= 0:
        raise DataError("expiry must be after the trade date")
    if days < 30:
        return SHORT
    if days <= 60:
        return MEDIUM
    return LONG


def classify_regime(trade_date, regimes=DEFAULT_REGIMES):
    """low_vol before the split date, high_vol on or after it."""
    if not regimes.start <= trade_date <= regimes.end:
        raise DataError(
            f"trade date {trade_date} outside the configured regime span "
            f"{regimes.start}..{regimes.end}"
        )
    return LOW_VOL if trade_date < regimes.split else HIGH_VOL


def bucket(quote, regimes=DEFAULT_REGIMES):
    return BucketLabel(
        classify_moneyness(quote.spot, quote.strike),
        classify_maturity(quote.trade_date, quote.expiry_date),
        classify_regime(quote.trade_date, regimes),
    )


def group_by_week(quotes):
    """Chronologically ordered mapping of ISO week key to its quotes.

    Quotes keep their input order within a week.
    """
    groups = {}
    for q in quotes:
        groups.setdefault(q.iso_week, []).append(q)
    return OrderedDict(sorted(groups.items()))


def daily_spot_returns(quotes):
    """Daily log returns of the spot implied by the quotes.

    Each trade date contributes the median spot of its quotes.
    """
    by_day = {}
    for q in quotes:
        by_day.setdefault(q.trade_date, []).append(q.spot)
    days = sorted(by_day)
    spots = np.array([np.median(by_day[d]) for d in days])
    return days[1:], np.diff(np.log(spots))


# -- synthetic data -------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorConfig:
    weeks: int = 92
    quotes_per_week: int = 80
    noise: float = 0.01
    seed: int = 42
    start: dt.date = dt.date(2010, 11, 1)
    spot: float = 45.0
    r_d: float = 0.07
    r_f: float = 0.01
    illiquid_fraction: float = 0.1
    # relative amplitude of the slow sinusoidal drift in sigma and nu
    drift: float = 0.0
    moneyness_range: tuple = (0.9, 1.1)
    expiries: int = 3

    def __post_init__(self):
        if self.weeks < 1 or self.quotes_per_week < 1:
            raise ValueError("weeks and quotes_per_week must be >= 1")
        if not self.noise >= 0:
            raise ValueError("noise must be non-negative")
        if not 0 <= self.illiquid_fraction <= 1:
            raise ValueError("illiquid_fraction must lie in [0, 1]")
        if not 0 <= self.drift < 1:
            raise ValueError("drift must lie in [0, 1)")

    def as_dict(self):
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = value.isoformat() if isinstance(value, dt.date) else (
                list(value) if isinstance(value, tuple) else value)
        return out


def weekly_truth(base, weeks, drift=0.0):
    """Per-week VG parameters drifting slowly around ``base``."""
    out = []
    for w in range(weeks):
        phase = 2.0 * math.pi * w / max(weeks, 1)
        out.append(VgParams(base.sigma * (1.0 + drift * math.sin(phase)),
                            base.nu * (1.0 + drift * math.cos(phase)), base.theta))
    return out


def _monthly_expiries(day, count):
    """The next ``count`` month-end expiries (last weekday of the month) after ``day``."""
    out = []
    year, month = day.year, day.month
    while len(out) < count:
        nxt = dt.date(year + month // 12, month % 12 + 1, 1)
        last = nxt - dt.timedelta(days=1)
        while last.weekday() > 4:
            last -= dt.timedelta(days=1)
        if last > day:
            out.append(last)
        year, month = nxt.year, nxt.month
    return out


def generate_quotes(truth, config=GeneratorConfig()):
    """Synthetic weekly call chains priced by the VG closed form.

    ``truth`` is a VgParams (constant) or a sequence with one entry per
    week. The spot follows daily VG increments under the weekly truth;
    quotes are spread over the five weekdays, strikes across ITM/ATM/OTM,
    maturities over the next monthly expiries. Market prices carry
    multiplicative lognormal noise. Returns ``(quotes, spot_dates, spots)``.
    """
    if isinstance(truth, VgParams):
        truth = [truth] * config.weeks
    if len(truth) != config.weeks:
        raise ValueError("need one truth parameter set per week")
    rng = np.random.default_rng(config.seed)
    start = config.start - dt.timedelta(days=config.start.weekday())
    quotes, days, spots = [], [], []
    spot = config.spot
    lo, hi = config.moneyness_range
    for w, vg in enumerate(truth):
        week_days = [start + dt.timedelta(days=7 * w + k) for k in range(5)]
        week_spots = []
        for _ in week_days:
            g = rng.gamma(DAILY_T / vg.nu, vg.nu)
            x = vg.theta * g + vg.sigma * math.sqrt(g) * rng.standard_normal()
            spot = spot * math.exp(x + omega(vg) * DAILY_T)
            week_spots.append(spot)
        days.extend(week_days)
        spots.extend(week_spots)

        n = config.quotes_per_week
        day_idx = np.arange(n) % 5
        exp_idx = rng.integers(0, config.expiries, n)
        ratio = rng.uniform(lo, hi, n)
        trade = [week_days[i] for i in day_idx]
        expiry = [_monthly_expiries(trade[i], config.expiries)[exp_idx[i]] for i in range(n)]
        s = np.array([week_spots[i] for i in day_idx])
        t = np.array([(e - d).days for e, d in zip(expiry, trade)]) / CALENDAR_DAYS
        strike = np.maximum(np.round(s / ratio / STRIKE_TICK) * STRIKE_TICK, STRIKE_TICK)
        rd = np.full(n, config.r_d)
        rf = np.full(n, config.r_f)
        price, _ = price_vg_batch(s, strike, t, rd, rf, vg)
        # quotes worth less than a tick move their strike halfway to the money
        for _ in range(40):
            cheap = price < PRICE_TICK
            if not np.any(cheap):
                break
            strike[cheap] = np.round((strike[cheap] + s[cheap]) / 2.0 / STRIKE_TICK) * STRIKE_TICK
            price[cheap], _ = price_vg_batch(s[cheap], strike[cheap], t[cheap], rd[cheap],
                                             rf[cheap], vg)
        noise = np.exp(config.noise * rng.standard_normal(n))
        illiquid = rng.uniform(size=n) < config.illiquid_fraction
        volume = np.where(illiquid, rng.integers(0, 101, n), rng.integers(101, 5001, n))
        for i in range(n):
            quotes.append(OptionQuote(trade[i], expiry[i], float(strike[i]),
                                      float(price[i] * noise[i]), float(volume[i]),
                                      float(s[i]), config.r_d, config.r_f))
    return quotes, days, np.array(spots)


__all__ = [
    "ATM", "BucketLabel", "DEFAULT_MIN_VOLUME", "DEFAULT_REGIMES", "DataError",
    "GeneratorConfig", "HIGH_VOL", "ITM", "LONG", "LOW_VOL", "LoadResult", "MATURITY_LABELS",
    "MEDIUM", "MONEYNESS_LABELS", "OTM", "OptionQuote", "QUOTE_COLUMNS", "REGIME_LABELS",
    "RegimeConfig", "Reject", "SHORT", "bucket", "classify_maturity", "classify_moneyness",
    "classify_regime", "daily_spot_returns", "generate_quotes", "group_by_week", "iso_week",
    "liquidity_filter", "load_quotes", "load_returns", "parse_date", "weekly_truth",
    "write_quotes", "write_rejects", "write_returns",
]
