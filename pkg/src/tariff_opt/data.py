"""Half-hourly meter data: ingestion, validation, aggregation, synthesis.

The canonical CSV layout is

    timestamp,demand_kwh,price_p_kwh,temp_c,apparent_temp_c,humidity,holiday

with ISO-8601 naive timestamps at exact 30-minute steps.  Series are stored
column-wise as numpy arrays; the record view is available when convenient.

The synthesizer plants a known linear demand process over the same feature
definitions the regression module builds (weather, demand lags at 48 and
336 slots, the 24h rolling mean ending at lag 48, calendar dummies, price),
so fitted coefficients can be checked against ground truth and a noise-free
run reproduces demand exactly.
"""

from __future__ import annotations

import csv
import datetime as _dt
import sys
from dataclasses import dataclass, field, fields as dc_fields

import numpy as np

from . import kernels
from .errors import (
    InvalidConfigError,
    MisalignedSeriesError,
    MissingColumnError,
    NonMonotoneTimeError,
    RowValidationError,
    TimestampGapError,
)
from .rng import STREAM_HOUSEHOLD, STREAM_SYNTH, stream_rng

CSV_COLUMNS = (
    "timestamp",
    "demand_kwh",
    "price_p_kwh",
    "temp_c",
    "apparent_temp_c",
    "humidity",
    "holiday",
)

STEP = np.timedelta64(30, "m")


@dataclass(frozen=True)
class MeterRecord:
    timestamp: _dt.datetime
    demand: float                 # kWh per half-hour
    price: float                  # p/kWh
    temperature: float            # degrees C
    apparent_temperature: float
    humidity: float               # fraction in [0, 1]
    holiday: bool


@dataclass(frozen=True)
class MeterSeries:
    timestamps: np.ndarray        # datetime64[m], strictly increasing 30-min grid
    demand: np.ndarray
    price: np.ndarray
    temperature: np.ndarray
    apparent_temperature: np.ndarray
    humidity: np.ndarray
    holiday: np.ndarray           # bool
    aggregation_count: int = 1
    imputed_slots: tuple = ()

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[m]")
        object.__setattr__(self, "timestamps", ts)
        for name in ("demand", "price", "temperature", "apparent_temperature", "humidity"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        object.__setattr__(self, "holiday", np.asarray(self.holiday, dtype=bool))
        n = ts.size
        for name in ("demand", "price", "temperature", "apparent_temperature", "humidity", "holiday"):
            if getattr(self, name).size != n:
                raise InvalidConfigError(f"column {name} has wrong length")
        if n > 1:
            deltas = np.diff(ts)
            bad = np.flatnonzero(deltas <= np.timedelta64(0, "m"))
            if bad.size:
                raise NonMonotoneTimeError(int(bad[0]) + 1)
            gaps = np.flatnonzero(deltas != STEP)
            if gaps.size:
                detail = [
                    (str(ts[i]), str(ts[i + 1]), int(deltas[i] / STEP) - 1) for i in gaps
                ]
                raise TimestampGapError(detail)
        problems = []
        if np.any(self.demand < 0):
            problems += [(int(i), "negative demand") for i in np.flatnonzero(self.demand < 0)[:10]]
        if np.any(self.price <= 0):
            problems += [(int(i), "nonpositive price") for i in np.flatnonzero(self.price <= 0)[:10]]
        bad_h = (self.humidity < 0) | (self.humidity > 1)
        if np.any(bad_h):
            problems += [(int(i), "humidity outside [0, 1]") for i in np.flatnonzero(bad_h)[:10]]
        if problems:
            raise RowValidationError(problems)

    def __len__(self):
        return self.timestamps.size

    @property
    def records(self):
        out = []
        for i in range(len(self)):
            out.append(
                MeterRecord(
                    timestamp=self.timestamps[i].astype(_dt.datetime),
                    demand=float(self.demand[i]),
                    price=float(self.price[i]),
                    temperature=float(self.temperature[i]),
                    apparent_temperature=float(self.apparent_temperature[i]),
                    humidity=float(self.humidity[i]),
                    holiday=bool(self.holiday[i]),
                )
            )
        return out

    def dates(self) -> np.ndarray:
        return self.timestamps.astype("datetime64[D]")

    def slot_of_day(self) -> np.ndarray:
        mins = (self.timestamps - self.timestamps.astype("datetime64[D]")).astype("timedelta64[m]")
        return (mins / STEP).astype(np.int64)

    def day_of_week(self) -> np.ndarray:
        # 0 = Monday; 1970-01-01 was a Thursday
        days = self.timestamps.astype("datetime64[D]").astype(np.int64)
        return (days + 3) % 7

    def month(self) -> np.ndarray:
        return self.timestamps.astype("datetime64[M]").astype(np.int64) % 12 + 1

    def restrict(self, mask) -> "MeterSeries":
        mask = np.asarray(mask, dtype=bool)
        return MeterSeries(
            timestamps=self.timestamps[mask],
            demand=self.demand[mask],
            price=self.price[mask],
            temperature=self.temperature[mask],
            apparent_temperature=self.apparent_temperature[mask],
            humidity=self.humidity[mask],
            holiday=self.holiday[mask],
            aggregation_count=self.aggregation_count,
        )

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            np.savez(
                fh,
                format_version=1,
                timestamps=self.timestamps.astype("datetime64[m]"),
                demand=self.demand,
                price=self.price,
                temperature=self.temperature,
                apparent_temperature=self.apparent_temperature,
                humidity=self.humidity,
                holiday=self.holiday,
                aggregation_count=self.aggregation_count,
                imputed_slots=np.asarray(self.imputed_slots, dtype=np.int64),
            )

    @staticmethod
    def load(path) -> "MeterSeries":
        with np.load(path) as z:
            return MeterSeries(
                timestamps=z["timestamps"],
                demand=z["demand"],
                price=z["price"],
                temperature=z["temperature"],
                apparent_temperature=z["apparent_temperature"],
                humidity=z["humidity"],
                holiday=z["holiday"],
                aggregation_count=int(z["aggregation_count"]),
                imputed_slots=tuple(int(i) for i in z["imputed_slots"]),
            )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for i in range(len(self)):
                ts = self.timestamps[i].astype(_dt.datetime)
                writer.writerow(
                    [
                        ts.strftime("%Y-%m-%dT%H:%M"),
                        repr(float(self.demand[i])),
                        repr(float(self.price[i])),
                        repr(float(self.temperature[i])),
                        repr(float(self.apparent_temperature[i])),
                        repr(float(self.humidity[i])),
                        int(self.holiday[i]),
                    ]
                )


@dataclass(frozen=True)
class SplitSpec:
    """Three ordered, disjoint date ranges (inclusive bounds)."""

    train: tuple            # (date, date)
    validation: tuple
    test: tuple

    def __post_init__(self):
        ranges = [self.train, self.validation, self.test]
        parsed = []
        for r in ranges:
            a, b = (_as_date(r[0]), _as_date(r[1]))
            if a > b:
                raise InvalidConfigError(f"range {r} is reversed")
            parsed.append((a, b))
        object.__setattr__(self, "train", parsed[0])
        object.__setattr__(self, "validation", parsed[1])
        object.__setattr__(self, "test", parsed[2])
        if not (parsed[0][1] < parsed[1][0] and parsed[1][1] < parsed[2][0]):
            raise InvalidConfigError("ranges must be disjoint and ordered train < validation < test")

    def mask(self, dates: np.ndarray, which: str) -> np.ndarray:
        a, b = getattr(self, which)
        return (dates >= np.datetime64(a)) & (dates <= np.datetime64(b))

    @staticmethod
    def from_toml(path) -> "SplitSpec":
        raw = _load_toml(path)
        return SplitSpec(
            train=(raw["train"]["start"], raw["train"]["end"]),
            validation=(raw["validation"]["start"], raw["validation"]["end"]),
            test=(raw["test"]["start"], raw["test"]["end"]),
        )

    def to_dict(self):
        return {
            "train": [self.train[0].isoformat(), self.train[1].isoformat()],
            "validation": [self.validation[0].isoformat(), self.validation[1].isoformat()],
            "test": [self.test[0].isoformat(), self.test[1].isoformat()],
        }

    @staticmethod
    def from_dict(d) -> "SplitSpec":
        return SplitSpec(train=tuple(d["train"]), validation=tuple(d["validation"]), test=tuple(d["test"]))


def _as_date(x):
    if isinstance(x, _dt.datetime):
        return x.date()
    if isinstance(x, _dt.date):
        return x
    return _dt.date.fromisoformat(str(x))


def _load_toml(path):
    if sys.version_info >= (3, 11):
        import tomllib as toml
    else:  # pragma: no cover
        import tomli as toml
    with open(path, "rb") as fh:
        return toml.load(fh)


def ingest_csv(path, schema=None, interpolate_gaps=False) -> MeterSeries:
    """Read and validate a meter CSV.

    ``schema`` maps canonical column names to the file's header names when
    they differ.  Bad rows raise with their (1-based data) row numbers.
    With ``interpolate_gaps`` enabled, gaps of at most 2 slots are filled
    linearly and flagged in ``imputed_slots``; longer gaps always raise.
    """
    schema = dict(schema or {})
    colmap = {name: schema.get(name, name) for name in CSV_COLUMNS}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumnError(CSV_COLUMNS) from None
        positions = {}
        missing = []
        for name in CSV_COLUMNS:
            try:
                positions[name] = header.index(colmap[name])
            except ValueError:
                missing.append(colmap[name])
        if missing:
            raise MissingColumnError(missing)
        rows = list(reader)

    n = len(rows)
    ts = np.empty(n, dtype="datetime64[m]")
    cols = {name: np.empty(n) for name in CSV_COLUMNS[1:-1]}
    holiday = np.empty(n, dtype=bool)
    problems = []
    for i, row in enumerate(rows):
        rownum = i + 1
        try:
            ts[i] = np.datetime64(_dt.datetime.fromisoformat(row[positions["timestamp"]]))
        except ValueError:
            problems.append((rownum, f"bad timestamp {row[positions['timestamp']]!r}"))
            continue
        for name in CSV_COLUMNS[1:-1]:
            try:
                cols[name][i] = float(row[positions[name]])
            except ValueError:
                problems.append((rownum, f"bad {name} {row[positions[name]]!r}"))
        raw_h = row[positions["holiday"]].strip().lower()
        if raw_h in ("1", "true", "yes"):
            holiday[i] = True
        elif raw_h in ("0", "false", "no", ""):
            holiday[i] = False
        else:
            problems.append((rownum, f"bad holiday flag {raw_h!r}"))
    if np.any(cols["demand_kwh"] < 0):
        problems += [(int(i) + 1, "negative demand") for i in np.flatnonzero(cols["demand_kwh"] < 0)]
    if np.any(cols["price_p_kwh"] <= 0):
        problems += [(int(i) + 1, "nonpositive price") for i in np.flatnonzero(cols["price_p_kwh"] <= 0)]
    bad_h = (cols["humidity"] < 0) | (cols["humidity"] > 1)
    if np.any(bad_h):
        problems += [(int(i) + 1, "humidity outside [0, 1]") for i in np.flatnonzero(bad_h)]
    if problems:
        raise RowValidationError(sorted(problems))

    deltas = np.diff(ts)
    if np.any(deltas <= np.timedelta64(0, "m")):
        raise NonMonotoneTimeError(int(np.flatnonzero(deltas <= np.timedelta64(0, "m"))[0]) + 2)
    imputed = []
    if np.any(deltas != STEP):
        gap_idx = np.flatnonzero(deltas != STEP)
        gaps = [(str(ts[i]), str(ts[i + 1]), int(deltas[i] / STEP) - 1) for i in gap_idx]
        if not interpolate_gaps or any(g[2] > 2 for g in gaps):
            raise TimestampGapError(gaps)
        full = np.arange(ts[0], ts[-1] + STEP, STEP)
        pos = ((ts - ts[0]) / STEP).astype(np.int64)
        new_cols = {}
        grid = np.arange(full.size)
        for name in CSV_COLUMNS[1:-1]:
            new_cols[name] = np.interp(grid, pos, cols[name])
        hol_full = np.zeros(full.size, dtype=bool)
        hol_full[pos] = holiday
        missing_pos = np.setdiff1d(grid, pos)
        for p in missing_pos:
            prev = pos[pos < p].max()
            hol_full[p] = hol_full[prev]
        imputed = [int(p) for p in missing_pos]
        ts, cols, holiday = full, new_cols, hol_full

    return MeterSeries(
        timestamps=ts,
        demand=cols["demand_kwh"],
        price=cols["price_p_kwh"],
        temperature=cols["temp_c"],
        apparent_temperature=cols["apparent_temp_c"],
        humidity=cols["humidity"],
        holiday=holiday,
        imputed_slots=tuple(imputed),
    )


def aggregate_households(per_household) -> MeterSeries:
    """Average demand across households sharing the same exogenous inputs.

    Per-slot sums use exactly-rounded summation, so the result does not
    depend on the order of the household list.
    """
    import math

    if not per_household:
        raise MisalignedSeriesError("no series given")
    first = per_household[0]
    for s in per_household[1:]:
        if not np.array_equal(s.timestamps, first.timestamps):
            raise MisalignedSeriesError("timestamps differ between households")
        for name in ("price", "temperature", "apparent_temperature", "humidity", "holiday"):
            if not np.array_equal(getattr(s, name), getattr(first, name)):
                raise MisalignedSeriesError(f"exogenous column {name} differs between households")
    stacked = np.stack([s.demand for s in per_household])
    count = len(per_household)
    demand = np.array([math.fsum(stacked[:, i]) / count for i in range(stacked.shape[1])])
    return MeterSeries(
        timestamps=first.timestamps,
        demand=demand,
        price=first.price,
        temperature=first.temperature,
        apparent_temperature=first.apparent_temperature,
        humidity=first.humidity,
        holiday=first.holiday,
        aggregation_count=sum(s.aggregation_count for s in per_household),
    )


# ---------------------------------------------------------------------------
# synthetic data

PRICE_LEVELS = (3.99, 11.76, 67.20)  # low / normal / high retail signal


@dataclass(frozen=True)
class SynthConfig:
    """Planted-model parameters for the synthetic generator.

    Demand follows
        d[t] = intercept + w.temp + w.apparent + w.humidity
             + c48 d[t-48] + c336 d[t-336] + c_roll mean(d[t-95..t-48])
             + dow[weekday] + month[m] + c_holiday 1{holiday}
             + beta_price price[t] + sigma N(0,1)
    which is exactly representable in the wide regression feature set.
    """

    start: str = "2013-01-01"
    days: int = 90
    aggregation_count: int = 1100
    price_levels: tuple = PRICE_LEVELS
    price_probs: tuple = (0.15, 0.70, 0.15)
    beta_price: float = -0.36          # kWh per p/kWh
    noise_sigma: float = 8.0
    intercept: float = 60.0
    coef_temp: float = -1.0
    coef_apparent: float = -0.3
    coef_humidity: float = 5.0
    coef_lag48: float = 0.35
    coef_lag336: float = 0.25
    coef_rollmean: float = 0.20
    dow_effects: tuple = (0.0, -1.0, -1.5, -1.0, 0.5, 4.0, 5.0)   # Mon..Sun
    month_effects: tuple = tuple(3.0 * np.cos(2 * np.pi * (m - 1) / 12.0) for m in range(1, 13))
    coef_holiday: float = 6.0
    holidays: tuple = ()               # ISO dates; default picks 1st of each month + Dec 25/26
    household_sigma: float = 12.0      # idiosyncratic spread used by synthesize_households

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise InvalidConfigError("noise_sigma must be nonnegative")
        if self.days < 1:
            raise InvalidConfigError("days must be positive")
        if len(self.price_levels) != len(self.price_probs):
            raise InvalidConfigError("price_levels and price_probs must have equal length")
        if abs(sum(self.price_probs) - 1.0) > 1e-9:
            raise InvalidConfigError("price_probs must sum to 1")
        if any(p <= 0 for p in self.price_levels):
            raise InvalidConfigError("price levels must be positive")

    @staticmethod
    def from_toml(path) -> "SynthConfig":
        raw = _load_toml(path)
        known = {f.name for f in dc_fields(SynthConfig)}
        unknown = set(raw) - known
        if unknown:
            raise InvalidConfigError(f"unknown synth config keys: {sorted(unknown)}")
        for key in ("price_levels", "price_probs", "dow_effects", "month_effects", "holidays"):
            if key in raw:
                raw[key] = tuple(raw[key])
        return SynthConfig(**raw)

    def holiday_dates(self):
        if self.holidays:
            return {_as_date(h) for h in self.holidays}
        start = _as_date(self.start)
        end = start + _dt.timedelta(days=self.days - 1)
        out = set()
        d = start.replace(day=1)
        while d <= end:
            out.add(d)
            d = (d + _dt.timedelta(days=32)).replace(day=1)
        for year in range(start.year, end.year + 1):
            out.add(_dt.date(year, 12, 25))
            out.add(_dt.date(year, 12, 26))
        return {d for d in out if start <= d <= end}


def synthesize(config: SynthConfig, seed: int) -> MeterSeries:
    """Generate one aggregate series; deterministic for a fixed seed."""
    exog, ts, price, temp, atemp, humid, holiday = _exogenous(config, seed)
    n = ts.size
    rng = stream_rng(seed, STREAM_SYNTH, 1)
    noise = config.noise_sigma * rng.standard_normal(n)
    seed_block = _seed_block(config, seed)
    demand = kernels.simulate_demand(
        seed_block, exog, config.coef_lag48, config.coef_lag336, config.coef_rollmean, noise
    )
    if np.any(demand < 0):
        raise InvalidConfigError(
            "planted parameters produced negative demand; raise the intercept or lower the noise"
        )
    return MeterSeries(
        timestamps=ts,
        demand=demand,
        price=price,
        temperature=temp,
        apparent_temperature=atemp,
        humidity=humid,
        holiday=holiday,
        aggregation_count=config.aggregation_count,
    )


def synthesize_households(config: SynthConfig, count: int, seed: int):
    """Per-household series sharing one exogenous draw.

    Household demand is the aggregate process plus idiosyncratic noise, so
    averaging the output reduces variance relative to any single household.
    """
    base = synthesize(config, seed)
    out = []
    for h in range(count):
        rng = stream_rng(seed, STREAM_HOUSEHOLD, h)
        noise = config.household_sigma * rng.standard_normal(len(base))
        demand = np.maximum(base.demand + noise, 0.0)
        out.append(
            MeterSeries(
                timestamps=base.timestamps,
                demand=demand,
                price=base.price,
                temperature=base.temperature,
                apparent_temperature=base.apparent_temperature,
                humidity=base.humidity,
                holiday=base.holiday,
                aggregation_count=1,
            )
        )
    return out


def _exogenous(config: SynthConfig, seed: int):
    start = _as_date(config.start)
    n = config.days * 48
    t0 = np.datetime64(f"{start.isoformat()}T00:00")
    ts = t0 + np.arange(n) * STEP
    rng = stream_rng(seed, STREAM_SYNTH, 0)

    doy = ((ts.astype("datetime64[D]") - ts.astype("datetime64[Y]")) / np.timedelta64(1, "D")).astype(
        np.float64
    )
    slot = ((ts - ts.astype("datetime64[D]")) / STEP).astype(np.float64)
    annual = -np.cos(2 * np.pi * (doy + 10.0) / 365.0)
    diurnal = np.sin(2 * np.pi * (slot - 17.0) / 48.0)
    temp = 10.0 + 8.0 * annual + 4.0 * diurnal + _ar1(rng, n, 0.95, 0.6)
    atemp = 0.9 * temp - 2.0 + _ar1(rng, n, 0.9, 1.0)
    humid = np.clip(0.75 - 0.01 * (temp - 10.0) + _ar1(rng, n, 0.9, 0.05), 0.02, 0.98)

    levels = np.asarray(config.price_levels)
    price = levels[rng.choice(len(levels), size=n, p=np.asarray(config.price_probs))]

    dates = ts.astype("datetime64[D]")
    hol_set = config.holiday_dates()
    holiday = np.array([d.astype(_dt.date) in hol_set for d in dates])
    dow = (dates.astype(np.int64) + 3) % 7
    month = dates.astype("datetime64[M]").astype(np.int64) % 12

    exog = (
        config.intercept
        + config.coef_temp * temp
        + config.coef_apparent * atemp
        + config.coef_humidity * humid
        + np.asarray(config.dow_effects)[dow]
        + np.asarray(config.month_effects)[month]
        + config.coef_holiday * holiday
        + config.beta_price * price
    )
    return exog, ts, price, temp, atemp, humid, holiday


def _seed_block(config: SynthConfig, seed: int):
    rng = stream_rng(seed, STREAM_SYNTH, 2)
    slot = np.arange(336) % 48
    steady = config.intercept / max(1e-9, 1.0 - config.coef_lag48 - config.coef_lag336 - config.coef_rollmean)
    profile = steady * (1.0 + 0.15 * np.sin(2 * np.pi * (slot - 16.0) / 48.0))
    return np.maximum(profile + rng.normal(0.0, 1.0, 336), 1.0)


def _ar1(rng, n, phi, sigma):
    eps = rng.normal(0.0, sigma, n)
    out = np.empty(n)
    out[0] = eps[0] / np.sqrt(1.0 - phi * phi)
    for i in range(1, n):
        out[i] = phi * out[i - 1] + eps[i]
    return out
