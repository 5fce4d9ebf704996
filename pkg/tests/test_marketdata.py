import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fxvg.marketdata import (
    ATM,
    HIGH_VOL,
    ITM,
    LONG,
    LOW_VOL,
    MEDIUM,
    OTM,
    SHORT,
    BucketLabel,
    DataError,
    GeneratorConfig,
    OptionQuote,
    RegimeConfig,
    bucket,
    classify_maturity,
    classify_moneyness,
    classify_regime,
    daily_spot_returns,
    generate_quotes,
    group_by_week,
    iso_week,
    liquidity_filter,
    load_quotes,
    load_returns,
    weekly_truth,
    write_quotes,
    write_returns,
)
from fxvg.vgcore import VgParams

HEADER = "trade_date,expiry_date,strike,price,volume,spot,r_d,r_f\n"
D = dt.date


def quote(day=D(2011, 3, 1), days=30, strike=45.0, price=1.0, volume=500, spot=45.0):
    return OptionQuote(day, day + dt.timedelta(days=days), strike, price, volume, spot, 0.07, 0.01)


class TestOptionQuote:
    @pytest.mark.parametrize("kwargs", [dict(days=0), dict(price=0.0), dict(strike=-1.0),
                                        dict(volume=-1), dict(spot=math.nan)])
    def test_invalid(self, kwargs):
        with pytest.raises(DataError):
            quote(**kwargs)

    def test_derived(self):
        q = quote(day=D(2011, 1, 3), days=73)
        assert q.maturity_t == pytest.approx(0.2)
        assert q.iso_week == "2011-W01"


class TestLoadQuotes:
    def test_three_rows(self, tmp_path):
        p = tmp_path / "q.csv"
        p.write_text(HEADER + "".join(f"2011-03-0{i},2011-04-28,45,1.2,500,45.1,0.07,0.01\n" for i in (1, 2, 3)))
        res = load_quotes(p)
        assert len(res.quotes) == 3 and not res.rejects
        assert res.quotes[0].trade_date == D(2011, 3, 1)

    def test_bad_volume_rejected_with_line(self, tmp_path):
        p = tmp_path / "q.csv"
        rows = ["2011-03-01,2011-04-28,45,1.2,500,45.1,0.07,0.01",
                "2011-03-02,2011-04-28,45,1.2,abc,45.1,0.07,0.01",
                "2011-03-03,2011-04-28,45,1.2,500,45.1,0.07,0.01"]
        p.write_text(HEADER + "\n".join(rows) + "\n")
        res = load_quotes(p)
        assert len(res.quotes) == 2
        assert len(res.rejects) == 1 and res.rejects[0].line_number == 3
        assert "volume" in res.rejects[0].reason

    @pytest.mark.parametrize("row", ["2011-03-01,2011-02-01,45,1.2,500,45,0.07,0.01",
                                     "2011-03-01,2011-04-28,45,0,500,45,0.07,0.01",
                                     "03/01/2011,2011-04-28,45,1.2,500,45,0.07,0.01",
                                     "2011-03-01,2011-04-28,45,1.2,500"])
    def test_invalid_rows_become_rejects(self, tmp_path, row):
        p = tmp_path / "q.csv"
        p.write_text(HEADER + row + "\n")
        res = load_quotes(p)
        assert not res.quotes and len(res.rejects) == 1

    def test_empty_file(self, tmp_path):
        p = tmp_path / "q.csv"
        p.write_text("")
        with pytest.raises(DataError):
            load_quotes(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_quotes(tmp_path / "absent.csv")

    def test_constant_rate_mode(self, tmp_path):
        p = tmp_path / "q.csv"
        p.write_text("trade_date,expiry_date,strike,price,volume,spot\n2011-03-01,2011-04-28,45,1.2,500,45\n")
        with pytest.raises(DataError):
            load_quotes(p)
        res = load_quotes(p, default_r_d=0.06, default_r_f=0.02)
        assert (res.quotes[0].r_d, res.quotes[0].r_f) == (0.06, 0.02)

    def test_generator_round_trip_is_lossless(self, tmp_path):
        quotes, _, _ = generate_quotes(VgParams(0.116, 0.099, 0.0026),
                                       GeneratorConfig(weeks=3, quotes_per_week=20))
        p = tmp_path / "q.csv"
        write_quotes(quotes, p)
        res = load_quotes(p)
        assert list(res.quotes) == quotes and not res.rejects
        q2 = tmp_path / "q2.csv"
        write_quotes(res.quotes, q2)
        assert p.read_bytes() == q2.read_bytes()


class TestReturnsFile:
    def test_round_trip(self, tmp_path):
        dates = [D(2011, 1, 3) + dt.timedelta(days=i) for i in range(5)]
        values = [0.001, -0.0023, 1e-17, 0.0, 0.1 / 3]
        p = tmp_path / "r.csv"
        write_returns(dates, values, p)
        got_dates, got_values = load_returns(p)
        assert list(got_dates) == dates and list(got_values) == values

    def test_bad_row_names_line(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text("date,log_return\n2011-01-03,0.1\n2011-01-04,x\n")
        with pytest.raises(DataError, match="line 3"):
            load_returns(p)


class TestLiquidity:
    def test_strict_threshold(self):
        kept = liquidity_filter([quote(volume=100), quote(volume=101)])
        assert [q.volume for q in kept] == [101]

    def test_empty(self):
        assert list(liquidity_filter([])) == []

    def test_idempotent(self):
        qs = [quote(volume=v) for v in (0, 50, 100, 101, 900)]
        once = liquidity_filter(qs)
        assert list(liquidity_filter(once)) == list(once)


class TestClassifiers:
    @pytest.mark.parametrize("ratio,label", [(1.00, ATM), (1.06, ITM), (0.94, OTM), (1.05, ITM), (0.95, OTM)])
    def test_moneyness(self, ratio, label):
        assert classify_moneyness(ratio * 40.0, 40.0) == label

    @given(st.floats(0.5, 2.0), st.floats(0.01, 100.0))
    @settings(max_examples=200)
    def test_moneyness_scale_invariant(self, ratio, scale):
        assert classify_moneyness(ratio * 50.0, 50.0) in (ITM, ATM, OTM)
        # exact scaling by a power of two keeps S/K bit-identical
        assert classify_moneyness(ratio * 50.0 * 4.0, 200.0) == classify_moneyness(ratio * 50.0, 50.0)

    @pytest.mark.parametrize("days,label", [(15, SHORT), (29, SHORT), (30, MEDIUM), (45, MEDIUM),
                                            (60, MEDIUM), (61, LONG), (90, LONG)])
    def test_maturity(self, days, label):
        day = D(2011, 3, 1)
        assert classify_maturity(day, day + dt.timedelta(days=days)) == label

    def test_maturity_requires_order(self):
        with pytest.raises(DataError):
            classify_maturity(D(2011, 3, 1), D(2011, 3, 1))

    @pytest.mark.parametrize("day,label", [(D(2011, 5, 1), LOW_VOL), (D(2012, 1, 15), HIGH_VOL),
                                           (D(2011, 7, 28), HIGH_VOL), (D(2011, 7, 27), LOW_VOL),
                                           (D(2010, 11, 1), LOW_VOL), (D(2012, 9, 28), HIGH_VOL)])
    def test_regime(self, day, label):
        assert classify_regime(day) == label

    @pytest.mark.parametrize("day", [D(2010, 10, 31), D(2012, 9, 29)])
    def test_regime_outside_span(self, day):
        with pytest.raises(DataError):
            classify_regime(day)

    def test_regime_config(self):
        cfg = RegimeConfig(D(2020, 1, 1), D(2020, 6, 1), D(2020, 12, 31))
        assert classify_regime(D(2020, 7, 1), cfg) == HIGH_VOL
        assert RegimeConfig.from_dict(cfg.as_dict()) == cfg
        with pytest.raises(ValueError):
            RegimeConfig(D(2020, 6, 1), D(2020, 1, 1), D(2020, 12, 31))

    def test_bucket(self):
        q = quote(day=D(2011, 5, 2), days=45, strike=40.0, spot=45.0)
        assert bucket(q) == BucketLabel(ITM, MEDIUM, LOW_VOL)


class TestGrouping:
    def test_same_iso_week(self):
        groups = group_by_week([quote(day=D(2011, 3, 4)), quote(day=D(2011, 2, 28))])
        assert list(groups) == ["2011-W09"] and len(groups["2011-W09"]) == 2

    def test_year_boundary(self):
        assert iso_week(D(2010, 12, 31)) == "2010-W52"
        assert iso_week(D(2011, 1, 3)) == "2011-W01"
        assert iso_week(D(2012, 1, 1)) == "2011-W52"
        groups = group_by_week([quote(day=D(2011, 1, 3)), quote(day=D(2010, 12, 31))])
        assert list(groups) == ["2010-W52", "2011-W01"]

    def test_multiplicity_and_order(self):
        rng = np.random.default_rng(0)
        qs = [quote(day=D(2011, 1, 3) + dt.timedelta(days=int(d))) for d in rng.integers(0, 300, 500)]
        groups = group_by_week(qs)
        assert sum(len(v) for v in groups.values()) == 500
        assert list(groups) == sorted(groups)
        for key, members in groups.items():
            assert all(q.iso_week == key for q in members)

    def test_synthetic_weekly_count(self):
        quotes, _, _ = generate_quotes(VgParams(0.116, 0.099, 0.0026), GeneratorConfig(weeks=96))
        groups = group_by_week(liquidity_filter(quotes))
        mean = sum(len(v) for v in groups.values()) / len(groups)
        assert len(groups) == 96
        assert 65 <= mean <= 80


class TestGenerator:
    def test_deterministic(self):
        cfg = GeneratorConfig(weeks=4, quotes_per_week=30, seed=9)
        a = generate_quotes(VgParams(0.1, 0.2, 0.0), cfg)
        b = generate_quotes(VgParams(0.1, 0.2, 0.0), cfg)
        assert a[0] == b[0] and a[1] == b[1] and np.array_equal(a[2], b[2])

    def test_noiseless_prices_match_model(self):
        from fxvg.pricing import price_vg_batch

        vg = VgParams(0.116, 0.099, 0.0026)
        quotes, _, _ = generate_quotes(vg, GeneratorConfig(weeks=2, quotes_per_week=25, noise=0.0))
        prices, _ = price_vg_batch(np.array([q.spot for q in quotes]), np.array([q.strike for q in quotes]),
                                   np.array([q.maturity_t for q in quotes]), 0.07, 0.01, vg)
        np.testing.assert_allclose([q.market_price for q in quotes], prices, rtol=1e-15)

    def test_quotes_valid_and_mixed(self):
        quotes, days, spots = generate_quotes(VgParams(0.116, 0.099, 0.0026), GeneratorConfig(weeks=8))
        assert len(quotes) == 8 * 80 and len(days) == 8 * 5 == spots.size
        assert all(q.market_price >= 0.0025 * 0.9 for q in quotes)
        assert {bucket(q).moneyness for q in quotes} == {ITM, ATM, OTM}
        assert any(q.volume <= 100 for q in quotes) and any(q.volume > 100 for q in quotes)
        assert all(d.weekday() < 5 for d in days)

    def test_weekly_truth(self):
        base = VgParams(0.1, 0.2, -0.01)
        truth = weekly_truth(base, 10, drift=0.1)
        assert len(truth) == 10 and truth[0].sigma == 0.1 and truth[0].nu == pytest.approx(0.22)
        assert all(v.theta == -0.01 for v in truth)
        assert weekly_truth(base, 3) == [base] * 3

    def test_daily_spot_returns(self):
        quotes, days, spots = generate_quotes(VgParams(0.116, 0.099, 0.0026),
                                              GeneratorConfig(weeks=2, quotes_per_week=10))
        dates, returns = daily_spot_returns(quotes)
        assert list(dates) == days[1:]
        np.testing.assert_allclose(returns, np.diff(np.log(spots)), rtol=1e-12)

    @pytest.mark.parametrize("kwargs", [dict(weeks=0), dict(noise=-0.1), dict(illiquid_fraction=2.0),
                                        dict(drift=1.0)])
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            GeneratorConfig(**kwargs)
