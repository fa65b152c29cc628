"""Price panels, filtered log returns, rolling windows, and synthetic data.

The ingestion path goes CSV -> PriceTable -> ReturnPanel -> WindowSlice list.
Every object is immutable after construction and safe to share across
workers; all randomness is derived from explicit integer seeds.
"""

from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DataError

DEFAULT_SCHEMA = {"date": "date", "ticker": "ticker", "close": "close"}

STABLE = "stable"
VOLATILE = "volatile"


@dataclass(frozen=True)
class TradingCalendar:
    """Rule deciding whether two trading dates are successive.

    rule "consecutive": dates are successive only when they differ by exactly
    one calendar day, so weekend and holiday gaps both break the sequence
    (a Friday -> Monday return is dropped).

    rule "business": dates are successive when the second is the next
    Monday-Friday day after the first, skipping any explicit ``holidays``.
    """

    rule: str = "consecutive"
    holidays: frozenset = frozenset()

    def __post_init__(self):
        if self.rule not in ("consecutive", "business"):
            raise ValueError(f"unknown calendar rule {self.rule!r}")

    def is_successive(self, d1: dt.date, d2: dt.date) -> bool:
        if d2 <= d1:
            return False
        if self.rule == "consecutive":
            return (d2 - d1).days == 1
        day = d1 + dt.timedelta(days=1)
        while day.weekday() >= 5 or day in self.holidays:
            day += dt.timedelta(days=1)
        return day == d2


@dataclass
class PriceTable:
    """Rectangular block of closing prices, stocks by trading days."""

    tickers: list
    dates: list
    close: np.ndarray
    dropped: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.close = np.asarray(self.close, dtype=float)
        if self.close.shape != (len(self.tickers), len(self.dates)):
            raise DataError("price matrix shape does not match tickers x dates")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise DataError("dates must be strictly increasing")
        if not np.all(np.isfinite(self.close)) or np.any(self.close <= 0):
            raise DataError("price table contains non-positive or non-finite entries")

    @property
    def n_stocks(self) -> int:
        return len(self.tickers)

    @property
    def n_days(self) -> int:
        return len(self.dates)


@dataclass
class ReturnPanel:
    """Log returns per stock after the successive-day filter."""

    tickers: list
    return_dates: list
    returns: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.returns = np.asarray(self.returns, dtype=float)
        if self.returns.shape != (len(self.tickers), len(self.return_dates)):
            raise DataError("return matrix shape does not match tickers x dates")
        if not np.all(np.isfinite(self.returns)):
            raise DataError("return panel contains non-finite entries")

    @property
    def n_stocks(self) -> int:
        return len(self.tickers)

    @property
    def n_returns(self) -> int:
        return len(self.return_dates)


@dataclass
class WindowSlice:
    """One rolling window of returns with its period label."""

    window_index: int
    returns: np.ndarray
    label: str = STABLE
    period: str = ""
    tickers: list = field(default_factory=list)

    @property
    def n_stocks(self) -> int:
        return self.returns.shape[0]

    @property
    def width(self) -> int:
        return self.returns.shape[1]


def _parse_date(value) -> dt.date:
    if isinstance(value, dt.date):
        return value
    return dt.date.fromisoformat(str(value)[:10])


def load_prices(path, schema=None, start=None, end=None) -> PriceTable:
    """Load a long-format price CSV into a rectangular PriceTable.

    The file must provide date, ticker and close columns (renameable through
    ``schema``). Tickers missing a price (or quoting a non-positive price) on
    any retained date are dropped and reported in ``PriceTable.dropped``.

    Raises DataError for unreadable files, duplicate (date, ticker) rows and
    panels where no ticker survives.
    """
    schema = dict(DEFAULT_SCHEMA, **(schema or {}))
    try:
        frame = pd.read_csv(path)
    except Exception as exc:
        raise DataError(f"could not read price file {path}: {exc}") from exc
    for logical, column in schema.items():
        if column not in frame.columns:
            raise DataError(f"price file {path} lacks required column {column!r} ({logical})")
    frame = frame.rename(columns={v: k for k, v in schema.items()})

    try:
        frame["date"] = frame["date"].map(_parse_date)
    except Exception as exc:
        raise DataError(f"unparseable date in {path}: {exc}") from exc
    if start is not None:
        frame = frame[frame["date"] >= _parse_date(start)]
    if end is not None:
        frame = frame[frame["date"] <= _parse_date(end)]
    if frame.empty:
        raise DataError(f"no rows left in {path} for the requested date range")

    dup = frame.duplicated(subset=["date", "ticker"])
    if dup.any():
        row = frame[dup].iloc[0]
        raise DataError(
            f"duplicate (date, ticker) row in {path}: ({row['date']}, {row['ticker']})"
        )

    wide = frame.pivot(index="ticker", columns="date", values="close")
    wide = wide[sorted(wide.columns)]
    dates = [_parse_date(d) for d in wide.columns]

    dropped = []
    keep = []
    for ticker, row in wide.iterrows():
        values = row.to_numpy(dtype=float)
        if np.any(~np.isfinite(values)):
            bad = dates[int(np.flatnonzero(~np.isfinite(values))[0])]
            dropped.append({"ticker": str(ticker), "reason": f"missing price on {bad}"})
        elif np.any(values <= 0):
            bad = dates[int(np.flatnonzero(values <= 0)[0])]
            dropped.append({"ticker": str(ticker), "reason": f"non-positive price on {bad}"})
        else:
            keep.append(str(ticker))
    if not keep:
        raise DataError(f"no ticker in {path} has a complete positive price series")
    keep = sorted(keep)
    close = wide.loc[keep].to_numpy(dtype=float)
    return PriceTable(
        tickers=keep,
        dates=dates,
        close=close,
        dropped=dropped,
        meta={"source": str(path), "n_input_tickers": int(wide.shape[0])},
    )


def compute_log_returns(prices: PriceTable, calendar: TradingCalendar | None = None) -> ReturnPanel:
    """Daily log returns, keeping only successive-day transitions.

    A return column from day t to day t+1 is kept only when the calendar
    says the two dates are successive; otherwise it is dropped for every
    stock at once, so the panel stays rectangular.
    """
    calendar = calendar or TradingCalendar()
    if prices.n_days < 2:
        raise DataError("need at least two dates to compute returns")
    if np.any(prices.close <= 0):
        raise DataError("non-positive price encountered")

    log_close = np.log(prices.close)
    all_returns = np.diff(log_close, axis=1)
    kept = [
        t
        for t in range(prices.n_days - 1)
        if calendar.is_successive(prices.dates[t], prices.dates[t + 1])
    ]
    gaps = [
        {"from": prices.dates[t].isoformat(), "to": prices.dates[t + 1].isoformat()}
        for t in range(prices.n_days - 1)
        if t not in set(kept)
    ]
    return ReturnPanel(
        tickers=list(prices.tickers),
        return_dates=[prices.dates[t + 1] for t in kept],
        returns=all_returns[:, kept],
        meta={
            "calendar_rule": calendar.rule,
            "n_gap_returns_dropped": len(gaps),
            "gaps": gaps,
            "dropped_tickers": list(prices.dropped),
        },
    )


def slice_windows(panel: ReturnPanel, window_length: int = 60, step: int = 1,
                  label: str = STABLE, period: str = "") -> list:
    """Cut the panel into overlapping rolling windows.

    With step 1 this yields ``n_returns - window_length + 1`` slices, each
    sharing ``window_length - 1`` columns with its neighbour.
    """
    if window_length < 2:
        raise ValueError("window_length must be at least 2")
    if step < 1:
        raise ValueError("step must be at least 1")
    if panel.n_returns < window_length:
        raise DataError(
            f"panel has {panel.n_returns} return columns, fewer than window_length={window_length}"
        )
    slices = []
    index = 0
    for start in range(0, panel.n_returns - window_length + 1, step):
        slices.append(
            WindowSlice(
                window_index=index,
                returns=panel.returns[:, start:start + window_length].copy(),
                label=label,
                period=period,
                tickers=list(panel.tickers),
            )
        )
        index += 1
    return slices


def surrogate_shuffle(window: WindowSlice, seed: int) -> WindowSlice:
    """Independently permute each stock's returns inside the window.

    Per-stock marginals (mean, variance, full multiset) are preserved
    exactly while cross-stock alignment is destroyed. Stock i uses the
    stream seeded by (seed, i), so the result is reproducible and rows are
    shuffled independently of one another.
    """
    shuffled = np.empty_like(window.returns)
    for i in range(window.returns.shape[0]):
        rng = np.random.default_rng([int(seed), i])
        shuffled[i] = window.returns[i, rng.permutation(window.returns.shape[1])]
    return WindowSlice(
        window_index=window.window_index,
        returns=shuffled,
        label=window.label,
        period=window.period,
        tickers=list(window.tickers),
    )


def generate_synthetic(n_stocks: int, n_days: int, regime: str = STABLE,
                       coupling: float = 0.3, seed: int = 0,
                       start: dt.date | None = None, base_price: float = 100.0,
                       return_scale: float = 0.02,
                       volatile_factor_std: float = 2.0) -> PriceTable:
    """One-factor synthetic price panel.

    Latent returns follow r_i(t) = coupling * m(t) + sqrt(1 - coupling^2) * e_i(t)
    with unit-variance Gaussian factor and noise, so the expected pairwise
    correlation is coupling^2. The volatile regime scales the factor's
    standard deviation by ``volatile_factor_std``. Returns are scaled by
    ``return_scale`` and exponentiated into prices on consecutive calendar
    days (no gaps, so the successive-day filter keeps every column).
    """
    if n_stocks < 3:
        raise ValueError("n_stocks must be at least 3")
    if n_days < 2:
        raise ValueError("n_days must be at least 2")
    if not (0.0 <= coupling < 1.0):
        raise ValueError(f"coupling must lie in [0, 1), got {coupling}")
    if regime not in (STABLE, VOLATILE):
        raise ValueError(f"regime must be 'stable' or 'volatile', got {regime!r}")

    factor_std = volatile_factor_std if regime == VOLATILE else 1.0
    rng = np.random.default_rng([int(seed)])
    factor = rng.standard_normal(n_days - 1) * factor_std
    noise = rng.standard_normal((n_stocks, n_days - 1))
    latent = coupling * factor + math.sqrt(1.0 - coupling ** 2) * noise

    log_prices = np.concatenate(
        [np.zeros((n_stocks, 1)), np.cumsum(return_scale * latent, axis=1)], axis=1
    )
    close = base_price * np.exp(log_prices)
    start = start or dt.date(2005, 1, 1)
    dates = [start + dt.timedelta(days=k) for k in range(n_days)]
    tickers = [f"S{i:03d}" for i in range(n_stocks)]
    return PriceTable(
        tickers=tickers,
        dates=dates,
        close=close,
        meta={
            "synthetic": True,
            "regime": regime,
            "coupling": coupling,
            "seed": int(seed),
            "factor_std": factor_std,
            "return_scale": return_scale,
        },
    )


def write_panel(panel: ReturnPanel, path, extra: dict | None = None) -> None:
    """Write a return panel as tickers x dates CSV plus a JSON sidecar."""
    path = str(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("ticker," + ",".join(d.isoformat() for d in panel.return_dates) + "\n")
        for ticker, row in zip(panel.tickers, panel.returns):
            fh.write(ticker + "," + ",".join(repr(float(v)) for v in row) + "\n")
    sidecar = {
        "n_stocks": panel.n_stocks,
        "n_returns": panel.n_returns,
        "meta": panel.meta,
    }
    if extra:
        sidecar.update(extra)
    with open(path + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_panel(path) -> ReturnPanel:
    """Read a panel written by :func:`write_panel`."""
    path = str(path)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        dates = [dt.date.fromisoformat(d) for d in header[1:]]
        tickers, rows = [], []
        for line in fh:
            cells = line.rstrip("\n").split(",")
            tickers.append(cells[0])
            rows.append([float(v) for v in cells[1:]])
    meta = {}
    try:
        with open(path + ".json", encoding="utf-8") as fh:
            meta = json.load(fh).get("meta", {})
    except FileNotFoundError:
        pass
    return ReturnPanel(tickers=tickers, return_dates=dates, returns=np.array(rows), meta=meta)
