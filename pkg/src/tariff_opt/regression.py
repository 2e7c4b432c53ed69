"""Demand regression: feature building, OLS fits, model comparison metrics.

Three model families are supported.  The compact one uses weather, two
demand lags, month dummies, the price signal, and three interaction terms.
The wide one adds temperature, a fitted annual-trend spline, day-of-week
dummies, the full lag ladder for demand and temperature, 24-hour rolling
statistics and a holiday flag.  The per-slot family fits one wide model per
half-hour of the day.

Lags start at 48 slots so every predictor is known a day ahead; the rolling
24h window therefore covers lags 48..95 (the day before the information
cutoff).  Rows whose lags fall off the start of the series are dropped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import LSQUnivariateSpline

from .data import MeterSeries, SplitSpec
from .errors import (
    DegenerateKnotsError,
    InsufficientHistoryError,
    InvalidConfigError,
    RankDeficientError,
    SchemaMismatchError,
)

SMALL = "small"
LARGE = "large"
COMBINED = "combined"

SMALL_LAGS = (48, 336)
LARGE_LAGS = (48, 96, 144, 192, 240, 288, 336)
MAX_LAG = 336
ROLL_LAGS = (48, 95)          # inclusive lag range of the 24h rolling window
CONDITION_LIMIT = 1e10


@dataclass(frozen=True)
class FeatureSpec:
    model_kind: str
    lag_offsets: tuple = ()
    spline_knots: int = 6
    include_interactions: bool = False

    def __post_init__(self):
        if self.model_kind not in (SMALL, LARGE, COMBINED):
            raise InvalidConfigError(f"unknown model kind {self.model_kind!r}")
        lags = self.lag_offsets or (SMALL_LAGS if self.model_kind == SMALL else LARGE_LAGS)
        object.__setattr__(self, "lag_offsets", tuple(int(l) for l in lags))
        if any(l < 48 for l in self.lag_offsets):
            raise InvalidConfigError("lag offsets below 48 slots would leak next-day information")
        if self.model_kind == SMALL:
            object.__setattr__(self, "include_interactions", True)

    @staticmethod
    def small() -> "FeatureSpec":
        return FeatureSpec(SMALL)

    @staticmethod
    def large() -> "FeatureSpec":
        return FeatureSpec(LARGE)

    @staticmethod
    def combined() -> "FeatureSpec":
        return FeatureSpec(COMBINED)

    @property
    def wide(self) -> bool:
        return self.model_kind in (LARGE, COMBINED)


@dataclass(frozen=True)
class Standardization:
    means: np.ndarray
    scales: np.ndarray       # sample std (ddof=1); intercept gets scale 1
    y_mean: float
    y_scale: float
    kind: str = "sample"


@dataclass(frozen=True)
class DesignMatrix:
    X: np.ndarray
    y: np.ndarray
    column_names: tuple
    standardization: Standardization
    timestamps: np.ndarray
    slot_of_day: np.ndarray
    price_index: int
    subset: str

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def k(self):
        return self.X.shape[1]


@dataclass(frozen=True)
class RegressionFit:
    beta: np.ndarray
    residuals: np.ndarray
    sigma2_eps: float            # unbiased, denominator n - k
    price_index: int
    column_names: tuple
    n: int
    k: int
    standardization: Standardization
    r2_train: float
    model_kind: str = LARGE
    slot: int | None = None      # set for the per-slot family members

    def predict(self, dm: DesignMatrix) -> np.ndarray:
        if tuple(dm.column_names) != tuple(self.column_names):
            raise SchemaMismatchError("design matrix columns do not match the fit")
        return dm.X @ self.beta

    def price_free_component(self, dm: DesignMatrix) -> np.ndarray:
        """Baseline demand with the price term removed (per-slot D-hat)."""
        return self.predict(dm) - self.beta[self.price_index] * dm.X[:, dm.price_index]


@dataclass(frozen=True)
class FitMetrics:
    mae_train: float
    rmse_train: float
    mae_test: float
    rmse_test: float
    r2: float

    def __post_init__(self):
        if self.rmse_train + 1e-12 < self.mae_train or self.rmse_test + 1e-12 < self.mae_test:
            raise InvalidConfigError("rmse cannot be below mae")


@dataclass(frozen=True)
class CombinedFit:
    fits: tuple                  # 48 RegressionFit entries indexed by slot
    train_y: np.ndarray          # pooled training targets, slot-major order

    @property
    def column_names(self):
        return self.fits[0].column_names

    def predict(self, dm: DesignMatrix) -> np.ndarray:
        out = np.empty(dm.n)
        for s in range(48):
            mask = dm.slot_of_day == s
            if not np.any(mask):
                continue
            sub = dm.X[mask]
            if tuple(dm.column_names) != tuple(self.fits[s].column_names):
                raise SchemaMismatchError("design matrix columns do not match the fit")
            out[mask] = sub @ self.fits[s].beta
        return out

    def pooled_train_residuals(self) -> np.ndarray:
        return np.concatenate([f.residuals for f in self.fits])


# ---------------------------------------------------------------------------
# spline trend


class SplineTrend:
    """Least-squares cubic trend of demand against time.

    Evaluation outside the fitted span continues the boundary polynomial,
    clamped to the range of fitted values widened by 20 percent to keep the
    cubic from running away.
    """

    def __init__(self, spline, clamp_lo, clamp_hi, span):
        self._spline = spline
        self.clamp = (clamp_lo, clamp_hi)
        self.span = span

    def __call__(self, t):
        vals = self._spline(np.asarray(t, dtype=np.float64), ext=0)
        return np.clip(vals, self.clamp[0], self.clamp[1])


def fit_spline(series: MeterSeries, knots: int = 6) -> SplineTrend:
    t = _time_axis(series.timestamps)
    return _fit_spline_raw(t, series.demand, knots)


def _fit_spline_raw(t, y, knots) -> SplineTrend:
    if knots < 2:
        raise DegenerateKnotsError(f"need at least 2 knots, got {knots}")
    if np.unique(t).size < max(knots, 4):
        raise DegenerateKnotsError("training span has too few distinct points")
    interior = np.linspace(t[0], t[-1], knots + 2)[1:-1]
    spline = LSQUnivariateSpline(t, y, interior, k=3)
    fitted = spline(t)
    lo, hi = float(np.min(fitted)), float(np.max(fitted))
    pad = 0.2 * (hi - lo) if hi > lo else 0.2 * max(1.0, abs(hi))
    return SplineTrend(spline, lo - pad, hi + pad, (float(t[0]), float(t[-1])))


def _time_axis(timestamps) -> np.ndarray:
    t0 = timestamps[0]
    return ((timestamps - t0) / np.timedelta64(1, "D")).astype(np.float64)


# ---------------------------------------------------------------------------
# feature construction


def build_features(
    series: MeterSeries, spec: FeatureSpec, split: SplitSpec, subset: str = "train"
) -> DesignMatrix:
    """Materialize the design matrix for one data subset.

    Train-derived quantities (month dummy levels, interaction centers, the
    trend spline) are always computed from the training rows, so matrices
    built for validation or test stay schema-compatible with the fit.
    """
    n = len(series)
    if n <= MAX_LAG:
        raise InsufficientHistoryError(
            f"series has {n} slots, need more than {MAX_LAG} to materialize the longest lag"
        )
    valid = np.arange(MAX_LAG, n)
    dates = series.dates()
    labels = np.full(n, "none", dtype=object)
    for which in ("train", "validation", "test"):
        labels[split.mask(dates, which)] = which
    if subset == "all":
        rows = valid
    else:
        rows = valid[labels[valid] == subset]
    if rows.size == 0:
        raise InsufficientHistoryError(f"no usable rows in subset {subset!r}")
    train_rows = valid[labels[valid] == "train"]
    if train_rows.size == 0:
        raise InsufficientHistoryError("training range contains no usable rows")

    month = series.month()
    dow = series.day_of_week()
    demand = series.demand
    temp = series.temperature

    month_levels = tuple(sorted(np.unique(month[train_rows]))[1:])  # first level is the reference
    centers = {
        "month": float(np.mean(month[train_rows])),
        "apparent": float(np.mean(series.apparent_temperature[train_rows])),
    }
    for lag in SMALL_LAGS:
        centers[f"lag{lag}"] = float(np.mean(demand[train_rows - lag]))

    names = ["intercept"]
    cols = [np.ones(rows.size)]

    def add(name, values):
        names.append(name)
        cols.append(np.asarray(values, dtype=np.float64))

    add("apparent_temp", series.apparent_temperature[rows])
    add("humidity", series.humidity[rows])
    for lag in spec.lag_offsets:
        add(f"demand_lag_{lag}", demand[rows - lag])
    for m in month_levels:
        add(f"month_{int(m):02d}", (month[rows] == m).astype(np.float64))
    add("price", series.price[rows])

    if spec.include_interactions:
        cm = month[rows] - centers["month"]
        add("month_x_demand_lag_48", cm * (demand[rows - 48] - centers["lag48"]))
        add("month_x_demand_lag_336", cm * (demand[rows - 336] - centers["lag336"]))
        add(
            "month_x_apparent_temp",
            cm * (series.apparent_temperature[rows] - centers["apparent"]),
        )

    if spec.wide:
        add("temperature", temp[rows])
        t_axis = _time_axis(series.timestamps)
        trend = _fit_spline_raw(t_axis[train_rows], demand[train_rows], spec.spline_knots)
        add("trend_spline", trend(t_axis[rows]))
        for d in range(1, 7):  # Monday is the reference
            add(f"dow_{d}", (dow[rows] == d).astype(np.float64))
        for lag in spec.lag_offsets:
            add(f"temp_lag_{lag}", temp[rows - lag])
        lo, hi = ROLL_LAGS
        dem_win = np.stack([demand[rows - l] for l in range(lo, hi + 1)])
        tmp_win = np.stack([temp[rows - l] for l in range(lo, hi + 1)])
        add("demand_min_24h", dem_win.min(axis=0))
        add("demand_max_24h", dem_win.max(axis=0))
        add("demand_mean_24h", dem_win.mean(axis=0))
        add("temp_min_24h", tmp_win.min(axis=0))
        add("temp_max_24h", tmp_win.max(axis=0))
        add("temp_mean_24h", tmp_win.mean(axis=0))
        add("holiday", series.holiday[rows].astype(np.float64))

    X = np.column_stack(cols)
    if subset == "train":
        spread = X.max(axis=0) - X.min(axis=0)
        flat = [names[j] for j in np.flatnonzero(spread == 0.0)[1:]]  # skip intercept
        if "intercept" != names[0]:
            raise InvalidConfigError("first column must be the intercept")
        if flat:
            raise RankDeficientError(flat)
        if X.shape[0] <= X.shape[1]:
            raise InsufficientHistoryError(
                f"{X.shape[0]} rows cannot identify {X.shape[1]} coefficients"
            )

    y = demand[rows]
    means = X.mean(axis=0)
    scales = X.std(axis=0, ddof=1) if X.shape[0] > 1 else np.ones(X.shape[1])
    means[0], scales[0] = 0.0, 1.0
    scales = np.where(scales == 0.0, 1.0, scales)
    std = Standardization(
        means=means,
        scales=scales,
        y_mean=float(np.mean(y)),
        y_scale=float(np.std(y, ddof=1)) if y.size > 1 else 1.0,
    )
    return DesignMatrix(
        X=X,
        y=y,
        column_names=tuple(names),
        standardization=std,
        timestamps=series.timestamps[rows],
        slot_of_day=series.slot_of_day()[rows],
        price_index=names.index("price"),
        subset=subset,
    )


# ---------------------------------------------------------------------------
# fitting


def fit_ols(dm: DesignMatrix) -> RegressionFit:
    """Least squares through a rank-revealing SVD; never the normal equations."""
    X, y = dm.X, dm.y
    n, k = X.shape
    if n <= k:
        raise InsufficientHistoryError(f"{n} rows cannot identify {k} coefficients")
    norms = np.linalg.norm(X, axis=0)
    norms = np.where(norms == 0.0, 1.0, norms)
    sv = np.linalg.svd(X / norms, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    if cond > CONDITION_LIMIT:
        _, _, vt = np.linalg.svd(X / norms)
        null = np.abs(vt[-1])
        suspects = [dm.column_names[j] for j in np.flatnonzero(null > 0.3 * null.max())]
        raise RankDeficientError(suspects, condition=cond)
    beta, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    residuals = y - X @ beta
    rss = float(residuals @ residuals)
    sigma2 = rss / (n - k)
    tss = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    return RegressionFit(
        beta=beta,
        residuals=residuals,
        sigma2_eps=sigma2,
        price_index=dm.price_index,
        column_names=dm.column_names,
        n=n,
        k=k,
        standardization=dm.standardization,
        r2_train=r2,
    )


def fit_combined(series: MeterSeries, spec: FeatureSpec, split: SplitSpec) -> CombinedFit:
    """One wide fit per half-hour slot of the day."""
    if spec.model_kind != COMBINED:
        raise InvalidConfigError("fit_combined expects a combined feature spec")
    dm = build_features(series, spec, split, subset="train")
    fits = []
    pooled_y = []
    for s in range(48):
        mask = dm.slot_of_day == s
        n_s = int(np.sum(mask))
        if n_s <= dm.k:
            raise InsufficientHistoryError(f"slot {s}: {n_s} rows for {dm.k} coefficients")
        pooled_y.append(dm.y[mask])
        sub = DesignMatrix(
            X=dm.X[mask],
            y=dm.y[mask],
            column_names=dm.column_names,
            standardization=dm.standardization,
            timestamps=dm.timestamps[mask],
            slot_of_day=dm.slot_of_day[mask],
            price_index=dm.price_index,
            subset=dm.subset,
        )
        fit = fit_ols(sub)
        fits.append(
            RegressionFit(
                beta=fit.beta,
                residuals=fit.residuals,
                sigma2_eps=fit.sigma2_eps,
                price_index=fit.price_index,
                column_names=fit.column_names,
                n=fit.n,
                k=fit.k,
                standardization=fit.standardization,
                r2_train=fit.r2_train,
                model_kind=COMBINED,
                slot=s,
            )
        )
    return CombinedFit(fits=tuple(fits), train_y=np.concatenate(pooled_y))


def evaluate(fit, dm_test: DesignMatrix) -> FitMetrics:
    """Train metrics come from the stored residuals, test metrics from
    ``dm_test``; R-squared is reported on the training set."""
    if isinstance(fit, CombinedFit):
        train_res = fit.pooled_train_residuals()
        rss = float(train_res @ train_res)
        tss = float(np.sum((fit.train_y - np.mean(fit.train_y)) ** 2))
        r2 = 1.0 - rss / tss if tss > 0 else 1.0
    else:
        train_res = fit.residuals
        r2 = fit.r2_train
    pred = fit.predict(dm_test)
    err = dm_test.y - pred
    return FitMetrics(
        mae_train=float(np.mean(np.abs(train_res))),
        rmse_train=float(np.sqrt(np.mean(train_res**2))),
        mae_test=float(np.mean(np.abs(err))),
        rmse_test=float(np.sqrt(np.mean(err**2))),
        r2=r2,
    )


def standardized_price_impact(fit: RegressionFit) -> float:
    """Share (percent) of the standardized price coefficient among all
    standardized coefficients, intercept excluded."""
    std = fit.standardization
    mags = np.abs(fit.beta * std.scales)
    mags[list(fit.column_names).index("intercept")] = 0.0
    total = float(np.sum(mags))
    if total == 0.0:
        return 0.0
    return 100.0 * float(mags[fit.price_index]) / total


@dataclass(frozen=True)
class PriceAblation:
    with_price: FitMetrics
    without_price: FitMetrics

    @property
    def deltas(self):
        return {
            "mae_train": self.without_price.mae_train - self.with_price.mae_train,
            "rmse_train": self.without_price.rmse_train - self.with_price.rmse_train,
            "mae_test": self.without_price.mae_test - self.with_price.mae_test,
            "rmse_test": self.without_price.rmse_test - self.with_price.rmse_test,
        }


def ablate_price(series: MeterSeries, spec: FeatureSpec, split: SplitSpec) -> PriceAblation:
    """Refit from scratch without the price column and compare metrics."""
    dm_tr = build_features(series, spec, split, "train")
    dm_te = build_features(series, spec, split, "test")
    full = evaluate(fit_ols(dm_tr), dm_te)
    reduced = evaluate(fit_ols(_drop_price(dm_tr)), _drop_price(dm_te))
    return PriceAblation(with_price=full, without_price=reduced)


def _drop_price(dm: DesignMatrix) -> DesignMatrix:
    keep = [j for j in range(dm.k) if j != dm.price_index]
    names = tuple(dm.column_names[j] for j in keep)
    std = Standardization(
        means=dm.standardization.means[keep],
        scales=dm.standardization.scales[keep],
        y_mean=dm.standardization.y_mean,
        y_scale=dm.standardization.y_scale,
    )
    return DesignMatrix(
        X=dm.X[:, keep],
        y=dm.y,
        column_names=names,
        standardization=std,
        timestamps=dm.timestamps,
        slot_of_day=dm.slot_of_day,
        price_index=-1,
        subset=dm.subset,
    )


# ---------------------------------------------------------------------------
# fit serialization


def save_fit(fit, path, split: SplitSpec | None = None, extra: dict | None = None) -> None:
    def encode(f: RegressionFit):
        return {
            "beta": f.beta.tolist(),
            "sigma2_eps": f.sigma2_eps,
            "price_index": f.price_index,
            "column_names": list(f.column_names),
            "n": f.n,
            "k": f.k,
            "r2_train": f.r2_train,
            "slot": f.slot,
            "standardization": {
                "means": f.standardization.means.tolist(),
                "scales": f.standardization.scales.tolist(),
                "y_mean": f.standardization.y_mean,
                "y_scale": f.standardization.y_scale,
                "kind": f.standardization.kind,
            },
        }

    payload = {"format_version": 1}
    if isinstance(fit, CombinedFit):
        payload["model_kind"] = COMBINED
        payload["slots"] = [encode(f) for f in fit.fits]
    else:
        payload["model_kind"] = fit.model_kind
        payload["fit"] = encode(fit)
    if split is not None:
        payload["split"] = split.to_dict()
    if extra:
        payload["extra"] = extra
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True))


def load_fit(path):
    raw = json.loads(Path(path).read_text())

    def decode(d, kind):
        std = d["standardization"]
        return RegressionFit(
            beta=np.asarray(d["beta"]),
            residuals=np.zeros(0),
            sigma2_eps=float(d["sigma2_eps"]),
            price_index=int(d["price_index"]),
            column_names=tuple(d["column_names"]),
            n=int(d["n"]),
            k=int(d["k"]),
            standardization=Standardization(
                means=np.asarray(std["means"]),
                scales=np.asarray(std["scales"]),
                y_mean=float(std["y_mean"]),
                y_scale=float(std["y_scale"]),
                kind=std.get("kind", "sample"),
            ),
            r2_train=float(d["r2_train"]),
            model_kind=kind,
            slot=d.get("slot"),
        )

    split = SplitSpec.from_dict(raw["split"]) if "split" in raw else None
    if raw["model_kind"] == COMBINED:
        fit = CombinedFit(
            fits=tuple(decode(d, COMBINED) for d in raw["slots"]), train_y=np.zeros(0)
        )
    else:
        fit = decode(raw["fit"], raw["model_kind"])
    return fit, split
