"""Scenario generation from historical daily paths and reduction by impact
on the deterministic objective.

Generation follows a nearest-date resampling scheme: for every training
date the closest historical days (by Euclidean distance between daily
paths) from other years define empirical distributions of day-of-year and
year offsets; sampling those offsets and fetching the path at the displaced
date produces new, seasonally consistent daily paths.

Reduction solves the risk-neutral single-scenario problem for every raw
scenario, clusters the resulting scalar objectives with flat-kernel mean
shift, keeps the scenario nearest each cluster center and hands it the
cluster's total probability.
"""

from __future__ import annotations

import csv
import datetime as _dt
from dataclasses import dataclass

import numpy as np

from . import kernels
from .data import SplitSpec
from .errors import (
    EmptyComparisonSetError,
    InvalidConfigError,
    LengthMismatchError,
    NoPathInRangeError,
    SolverFailureError,
    TariffOptError,
    ZeroBandwidthError,
)
from .rng import STREAM_PATHS, stream_rng

POOL = "pool"
SOLAR = "solar"

NEAREST_WINDOW_DAYS = 7
N_CLOSEST = 3


@dataclass(frozen=True)
class PathLibrary:
    """Daily 48-slot paths keyed by calendar date.

    Pool prices arrive hourly and are upsampled to half-hourly by
    duplication at load time; solar availability is half-hourly already.
    """

    role: str
    dates: np.ndarray            # datetime64[D], strictly increasing
    paths: np.ndarray            # (n_dates, 48)

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        paths = np.asarray(self.paths, dtype=np.float64)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "paths", paths)
        if self.role not in (POOL, SOLAR):
            raise InvalidConfigError(f"unknown path role {self.role!r}")
        if paths.ndim != 2 or paths.shape[1] != 48:
            raise InvalidConfigError("paths must have exactly 48 slots per date")
        if dates.size != paths.shape[0]:
            raise InvalidConfigError("dates and paths disagree in length")
        if dates.size > 1 and np.any(np.diff(dates) <= np.timedelta64(0, "D")):
            raise InvalidConfigError("dates must be strictly increasing")
        if self.role == SOLAR and (paths.min() < 0.0 or paths.max() > 1.0):
            raise InvalidConfigError("solar availability must lie in [0, 1]")
        if self.role == POOL and paths.min() <= 0.0:
            raise InvalidConfigError("pool prices must be positive")

    def __len__(self):
        return self.dates.size

    def path_at(self, date) -> np.ndarray:
        i = int(np.searchsorted(self.dates, np.datetime64(date, "D")))
        if i >= len(self) or self.dates[i] != np.datetime64(date, "D"):
            raise KeyError(f"no path for {date}")
        return self.paths[i]

    @staticmethod
    def from_csv(path, role) -> "PathLibrary":
        """Long-format CSV with columns timestamp,value.

        Each date must contribute 24 (hourly, pool only) or 48 values.
        """
        by_date = {}
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [h.strip() for h in header[:2]] != ["timestamp", "value"]:
                raise InvalidConfigError("path CSV must have a timestamp,value header")
            for row in reader:
                ts = _dt.datetime.fromisoformat(row[0])
                by_date.setdefault(ts.date(), []).append(float(row[1]))
        dates = sorted(by_date)
        paths = []
        for d in dates:
            vals = by_date[d]
            if len(vals) == 48:
                paths.append(np.asarray(vals))
            elif len(vals) == 24 and role == POOL:
                paths.append(np.repeat(np.asarray(vals), 2))
            else:
                raise InvalidConfigError(f"{d}: expected 24 or 48 values, got {len(vals)}")
        return PathLibrary(role=role, dates=np.array(dates, dtype="datetime64[D]"), paths=np.stack(paths))

    def to_csv(self, path) -> None:
        step = np.timedelta64(30, "m")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["timestamp", "value"])
            for d, p in zip(self.dates, self.paths):
                t0 = d.astype("datetime64[m]")
                if self.role == POOL:
                    # stored half-hourly but hourly by construction; emit hourly
                    for h in range(24):
                        ts = (t0 + 2 * h * step).astype(_dt.datetime)
                        writer.writerow([ts.strftime("%Y-%m-%dT%H:%M"), repr(float(p[2 * h]))])
                else:
                    for s in range(48):
                        ts = (t0 + s * step).astype(_dt.datetime)
                        writer.writerow([ts.strftime("%Y-%m-%dT%H:%M"), repr(float(p[s]))])


@dataclass(frozen=True)
class DateDistanceDistributions:
    day_offsets: np.ndarray      # absolute day-of-year offsets
    day_probs: np.ndarray
    year_offsets: np.ndarray     # absolute year offsets
    year_probs: np.ndarray

    def __post_init__(self):
        for probs in (self.day_probs, self.year_probs):
            if abs(float(np.sum(probs)) - 1.0) > 1e-9:
                raise InvalidConfigError("offset probabilities must sum to 1")


@dataclass(frozen=True)
class Scenario:
    pool: np.ndarray             # p/kWh per slot
    availability: np.ndarray     # [0, 1] per slot
    beta: float                  # kWh per p/kWh
    probability: float


@dataclass(frozen=True)
class ScenarioSet:
    pool: np.ndarray             # (n, T)
    availability: np.ndarray     # (n, T)
    beta: np.ndarray             # (n,)
    probabilities: np.ndarray    # (n,), sums to 1
    provenance: str = "raw"
    cluster_map: np.ndarray | None = None      # raw index -> cluster id (reduced sets)
    objective_values: np.ndarray | None = None  # f(s) of the kept scenarios
    raw_objectives: np.ndarray | None = None    # f(s) of every raw scenario
    bandwidth: float | None = None
    beta_mean: float | None = None              # sampling distribution metadata
    beta_std: float | None = None

    def __post_init__(self):
        pool = np.atleast_2d(np.asarray(self.pool, dtype=np.float64))
        avail = np.atleast_2d(np.asarray(self.availability, dtype=np.float64))
        beta = np.atleast_1d(np.asarray(self.beta, dtype=np.float64))
        probs = np.atleast_1d(np.asarray(self.probabilities, dtype=np.float64))
        for name, arr in (("pool", pool), ("availability", avail)):
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "probabilities", probs)
        n = beta.size
        if pool.shape[0] != n or avail.shape[0] != n or probs.size != n:
            raise LengthMismatchError("scenario arrays disagree in count")
        if pool.shape[1] != avail.shape[1]:
            raise LengthMismatchError("pool and availability disagree in horizon")
        if abs(float(np.sum(probs)) - 1.0) > 1e-12:
            raise InvalidConfigError("scenario probabilities must sum to 1")
        if avail.min() < 0.0 or avail.max() > 1.0:
            raise InvalidConfigError("availability must lie in [0, 1]")

    @property
    def n_scenarios(self):
        return self.beta.size

    @property
    def horizon(self):
        return self.pool.shape[1]

    @property
    def scenarios(self):
        return [
            Scenario(
                pool=self.pool[i],
                availability=self.availability[i],
                beta=float(self.beta[i]),
                probability=float(self.probabilities[i]),
            )
            for i in range(self.n_scenarios)
        ]

    def save(self, path) -> None:
        extras = {}
        for name in ("cluster_map", "objective_values", "raw_objectives"):
            val = getattr(self, name)
            if val is not None:
                extras[name] = val
        meta = {}
        for name in ("bandwidth", "beta_mean", "beta_std"):
            val = getattr(self, name)
            if val is not None:
                meta[name] = float(val)
        with open(path, "wb") as fh:
            np.savez(
                fh,
                format_version=1,
                horizon=self.horizon,
                pool=self.pool,
                availability=self.availability,
                beta=self.beta,
                probabilities=self.probabilities,
                provenance=self.provenance,
                meta_names=np.array(sorted(meta), dtype="U32"),
                meta_values=np.array([meta[k] for k in sorted(meta)]),
                **extras,
            )

    @staticmethod
    def load(path) -> "ScenarioSet":
        with np.load(path) as z:
            meta = dict(zip([str(s) for s in z["meta_names"]], z["meta_values"]))
            kwargs = {}
            for name in ("cluster_map", "objective_values", "raw_objectives"):
                if name in z.files:
                    kwargs[name] = z[name]
            return ScenarioSet(
                pool=z["pool"],
                availability=z["availability"],
                beta=z["beta"],
                probabilities=z["probabilities"],
                provenance=str(z["provenance"]),
                bandwidth=meta.get("bandwidth"),
                beta_mean=meta.get("beta_mean"),
                beta_std=meta.get("beta_std"),
                **kwargs,
            )


# ---------------------------------------------------------------------------
# nearest-date distributions


def _doy(dates) -> np.ndarray:
    years = dates.astype("datetime64[Y]")
    return (dates - years).astype("timedelta64[D]").astype(np.int64) + 1


def _years(dates) -> np.ndarray:
    return dates.astype("datetime64[Y]").astype(np.int64) + 1970


def fit_date_distributions(lib: PathLibrary, split: SplitSpec) -> DateDistanceDistributions:
    """Empirical offset distributions from the 3 nearest historical days.

    Training dates are the library dates inside the split's training range;
    the comparison set is every library date from a different year than the
    test range.  Ties in path distance break toward the earlier date.
    """
    target_year = split.test[0].year
    dates = lib.dates
    train_mask = split.mask(dates, "train")
    comp_mask = _years(dates) != target_year
    if not np.any(comp_mask):
        raise EmptyComparisonSetError("no library dates outside the target year")
    if not np.any(train_mask):
        raise InvalidConfigError("no library dates inside the training range")

    train_dates = dates[train_mask]
    comp_dates = dates[comp_mask]
    dists = kernels.pairwise_sq_dists(lib.paths[train_mask], lib.paths[comp_mask])

    k = min(N_CLOSEST, comp_dates.size)
    day_off = []
    year_off = []
    t_doy = _doy(train_dates)
    t_year = _years(train_dates)
    c_doy = _doy(comp_dates)
    c_year = _years(comp_dates)
    order_key = np.argsort(comp_dates, kind="stable")
    for i in range(train_dates.size):
        # stable argsort on distance, ties toward earlier dates
        idx = np.lexsort((order_key, dists[i]))[:k]
        for j in idx:
            day_off.append(abs(int(c_doy[j]) - int(t_doy[i])))
            year_off.append(abs(int(c_year[j]) - int(t_year[i])))
    day_vals, day_counts = np.unique(day_off, return_counts=True)
    year_vals, year_counts = np.unique(year_off, return_counts=True)
    return DateDistanceDistributions(
        day_offsets=day_vals,
        day_probs=day_counts / day_counts.sum(),
        year_offsets=year_vals,
        year_probs=year_counts / year_counts.sum(),
    )


def _shift_years(date: _dt.date, years: int) -> _dt.date:
    try:
        return date.replace(year=date.year + years)
    except ValueError:  # Feb 29
        return date.replace(year=date.year + years, day=28)


def sample_paths(lib: PathLibrary, dists: DateDistanceDistributions, target_dates, count: int,
                 seed: int, substream: int = 0):
    """Sample ``count`` horizon paths for the given consecutive dates.

    Per date a day and a year offset are drawn independently; the historical
    path at the displaced date is fetched, falling back to the nearest
    library date within 7 days.  Year displacement prefers the past when
    both directions exist; the day-offset sign is drawn at random.

    ``substream`` decorrelates different draws under one seed (the CLI uses
    0 for pool prices and 1 for solar availability).
    """
    targets = [np.datetime64(d, "D").astype(_dt.date) for d in np.asarray(target_dates, dtype="datetime64[D]")]
    out = np.empty((count, 48 * len(targets)))
    lib_dates = lib.dates
    for draw in range(count):
        rng = stream_rng(seed, STREAM_PATHS, (int(substream) << 32) + draw)
        for di, target in enumerate(targets):
            day_off = int(rng.choice(dists.day_offsets, p=dists.day_probs))
            year_off = int(rng.choice(dists.year_offsets, p=dists.year_probs))
            path = _fetch_displaced(lib, lib_dates, target, day_off, year_off, rng)
            out[draw, 48 * di : 48 * (di + 1)] = path
    return out


def _fetch_displaced(lib, lib_dates, target, day_off, year_off, rng):
    year_signs = [0] if year_off == 0 else [-1, 1]
    if day_off == 0:
        day_signs = [0]
    else:
        day_signs = [1, -1] if rng.random() < 0.5 else [-1, 1]
    for ys in year_signs:
        base = _shift_years(target, ys * year_off)
        for ds in day_signs:
            cand = np.datetime64(base + _dt.timedelta(days=ds * day_off), "D")
            i = int(np.searchsorted(lib_dates, cand))
            best = None
            for j in (i - 1, i, i + 1):
                if 0 <= j < lib_dates.size:
                    dist = abs(int((lib_dates[j] - cand) / np.timedelta64(1, "D")))
                    if dist <= NEAREST_WINDOW_DAYS and (best is None or dist < best[0]):
                        best = (dist, j)
            if best is not None:
                return lib.paths[best[1]]
    raise NoPathInRangeError(target)


# ---------------------------------------------------------------------------
# assembly and reduction


def assemble(pool_paths, solar_paths, betas, beta_mean=None, beta_std=None) -> ScenarioSet:
    """Zip sampled paths and coefficients into a uniform-probability set."""
    pool = np.atleast_2d(np.asarray(pool_paths, dtype=np.float64))
    solar = np.atleast_2d(np.asarray(solar_paths, dtype=np.float64))
    betas = np.atleast_1d(np.asarray(betas, dtype=np.float64))
    n = betas.size
    if pool.shape[0] != n or solar.shape[0] != n:
        raise LengthMismatchError(
            f"got {pool.shape[0]} pool paths, {solar.shape[0]} solar paths, {n} betas"
        )
    return ScenarioSet(
        pool=pool,
        availability=solar,
        beta=betas,
        probabilities=np.full(n, 1.0 / n),
        provenance="raw",
        beta_mean=beta_mean,
        beta_std=beta_std,
    )


def silverman_bandwidth(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    if n < 2:
        return 0.0
    sd = float(np.std(values, ddof=1))
    iqr = float(np.subtract(*np.percentile(values, [75, 25])))
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * spread * n ** (-0.2)


def deterministic_objectives(sset: ScenarioSet, spec) -> np.ndarray:
    """Risk-neutral single-scenario optimum per raw scenario, in pounds."""
    from .optimizer import solve_deterministic

    spec0 = spec.with_chi(0.0)
    out = np.empty(sset.n_scenarios)
    for i, scen in enumerate(sset.scenarios):
        try:
            out[i] = solve_deterministic(spec0, scen).profits[0]
        except TariffOptError as exc:
            raise SolverFailureError(i, exc) from exc
    return out


def reduce_scenarios(sset: ScenarioSet, spec, bandwidth="auto") -> ScenarioSet:
    """Cluster scenarios by deterministic objective value and keep one
    representative per cluster, reweighted by cluster probability mass."""
    f = deterministic_objectives(sset, spec)
    n = f.size
    scale = max(1.0, float(np.max(np.abs(f))))

    if isinstance(bandwidth, str):
        if bandwidth != "auto":
            raise InvalidConfigError(f"unknown bandwidth mode {bandwidth!r}")
        h = silverman_bandwidth(f)
    else:
        h = float(bandwidth)
        if h <= 0.0:
            raise ZeroBandwidthError(f"bandwidth must be positive, got {h}")

    if np.ptp(f) <= 1e-12 * scale or (isinstance(bandwidth, str) and h <= 0.0):
        centers = np.array([float(np.mean(f))])
    else:
        order = np.argsort(f, kind="stable")
        modes = kernels.mean_shift_modes_1d(f[order], h, 1e-10 * scale, 500)
        centers = _merge_modes(modes, h)

    import math

    assign = np.argmin(np.abs(f[:, None] - centers[None, :]), axis=1)
    reps = []
    probs = []
    kept_f = []
    for kk in range(centers.size):
        members = np.flatnonzero(assign == kk)
        if members.size == 0:
            continue
        rep = members[int(np.argmin(np.abs(f[members] - centers[kk])))]
        reps.append(int(rep))
        # exactly-rounded sum: the partition of the raw probabilities does not
        # depend on member order
        probs.append(math.fsum(sset.probabilities[members]))
        kept_f.append(float(f[rep]))
    reps = np.asarray(reps)
    # compact cluster ids in representative order
    relabel = {kk: i for i, kk in enumerate(sorted(set(int(a) for a in assign)))}
    cluster_map = np.array([relabel[int(a)] for a in assign], dtype=np.int64)
    return ScenarioSet(
        pool=sset.pool[reps],
        availability=sset.availability[reps],
        beta=sset.beta[reps],
        probabilities=np.asarray(probs),
        provenance="reduced",
        cluster_map=cluster_map,
        objective_values=np.asarray(kept_f),
        raw_objectives=f,
        bandwidth=h,
        beta_mean=sset.beta_mean,
        beta_std=sset.beta_std,
    )


def _merge_modes(modes: np.ndarray, h: float) -> np.ndarray:
    """Collapse converged seeds into distinct centers.

    Seeds from one basin agree to the iteration tolerance; separate flat-
    kernel fixed points sit at least about one bandwidth apart, so grouping
    by gaps larger than ``h`` is unambiguous.  Centers are support-weighted
    means of their group.
    """
    vals = np.sort(modes)
    centers = []
    start = 0
    for i in range(1, vals.size + 1):
        if i == vals.size or vals[i] - vals[i - 1] > h:
            centers.append(float(np.mean(vals[start:i])))
            start = i
    return np.asarray(centers)


def _weighted_cdf(vals, probs, grid):
    order = np.argsort(vals, kind="stable")
    cum = np.cumsum(probs[order])
    pos = np.searchsorted(vals[order], grid, side="right")
    return np.where(pos > 0, cum[np.maximum(pos - 1, 0)], 0.0)


def wasserstein_1d(u_vals, u_probs, v_vals, v_probs) -> float:
    """Exact 1-Wasserstein distance between weighted discrete distributions."""
    u_vals = np.asarray(u_vals, dtype=np.float64)
    v_vals = np.asarray(v_vals, dtype=np.float64)
    u_probs = np.asarray(u_probs, dtype=np.float64)
    v_probs = np.asarray(v_probs, dtype=np.float64)
    grid = np.sort(np.concatenate([u_vals, v_vals]))
    deltas = np.diff(grid)
    u_cdf = _weighted_cdf(u_vals, u_probs, grid[:-1])
    v_cdf = _weighted_cdf(v_vals, v_probs, grid[:-1])
    return float(np.sum(np.abs(u_cdf - v_cdf) * deltas))


# ---------------------------------------------------------------------------
# synthetic path libraries


def make_seasonal_library(role: str, start_year: int, end_year: int, seed: int,
                          noise: float = 0.6) -> PathLibrary:
    """Sinusoid-plus-noise daily paths across calendar years, for tests and
    demos of the nearest-date sampler."""
    days = np.arange(
        np.datetime64(f"{start_year}-01-01", "D"),
        np.datetime64(f"{end_year + 1}-01-01", "D"),
    )
    rng = stream_rng(seed, STREAM_PATHS, 10_000)
    doy = _doy(days).astype(np.float64)
    slots = np.arange(48, dtype=np.float64)
    paths = np.empty((days.size, 48))
    season = -np.cos(2.0 * np.pi * doy / 365.25)
    if role == POOL:
        diurnal = 2.0 * np.sin(2.0 * np.pi * (slots - 14.0) / 48.0)
        hourly_mask = np.repeat(np.arange(24), 2)
        for i in range(days.size):
            hourly = (
                11.0
                + 3.0 * season[i]
                + diurnal[::2]
                + rng.normal(0.0, noise, 24)
            )
            paths[i] = np.maximum(hourly, 0.5)[hourly_mask]
    elif role == SOLAR:
        for i in range(days.size):
            half_len = 10.0 + 5.0 * season[i]
            up = np.sin(np.pi * (slots - (24.0 - half_len)) / (2.0 * half_len))
            shape = np.clip(up, 0.0, None) * (0.65 + 0.25 * season[i])
            paths[i] = np.clip(shape + rng.normal(0.0, noise * 0.05, 48), 0.0, 1.0)
    else:
        raise InvalidConfigError(f"unknown role {role!r}")
    return PathLibrary(role=role, dates=days, paths=paths)
