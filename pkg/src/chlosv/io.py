"""CSV ingestion/writing and run configuration.

Bar files are ``date,open,high,low,close`` with prices in level space
(vendor convention); everything downstream models log prices, and the
conversion happens here.  Missing extremes are empty fields.  All float
output uses 17 significant digits so files round-trip bit-exactly.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError, DataError
from .filter import FilterSnapshot, ModelVariant
from .likelihood import ChloObservation, SeriesControl
from .simulate import RatioRow, SimDataset
from .volprocess import PriorHyper

BAR_HEADER = ["date", "open", "high", "low", "close"]
SNAPSHOT_HEADER = ["date",
                   "sigma_mean", "sigma_q05", "sigma_q95",
                   "mu_mean", "mu_q05", "mu_q95",
                   "alpha_mean", "alpha_q05", "alpha_q95",
                   "phi_mean", "phi_q05", "phi_q95",
                   "tau2_mean", "tau2_q05", "tau2_q95",
                   "ess", "n_loglik_neginf", "n_series_nonconverged"]
RATIO_HEADER = ["pair", "rmsd_median", "rmsd_q05", "rmsd_q95",
                "mad_median", "mad_q05", "mad_q95"]
DEFAULT_START_DATE = dt.date(2000, 1, 3)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


@dataclass(frozen=True)
class BarRecord:
    """One raw bar: calendar date and positive prices, extremes optional."""

    date: dt.date
    open: float
    close: float
    high: float | None = None
    low: float | None = None


def parse_bars(path: str | Path, strict: bool = False) -> list[BarRecord]:
    """Read and validate a bar CSV, returning date-sorted records.

    Strict mode rejects rows whose extremes violate the OHLC ordering;
    lenient mode (default) demotes the offending extremes to missing and
    warns.  Malformed cells always raise, with the 1-based file row.
    """
    path = Path(path)
    records = []
    demoted = 0
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty file")
        if [h.strip().lower() for h in header] != BAR_HEADER:
            raise DataError(f"expected header {','.join(BAR_HEADER)}, got {','.join(header)}", row=1)
        for rownum, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 5:
                raise DataError(f"expected 5 fields, got {len(row)}", row=rownum)
            try:
                date = dt.date.fromisoformat(row[0].strip())
            except ValueError as exc:
                raise DataError(f"bad date {row[0]!r}: {exc}", row=rownum)
            vals = {}
            for name, cell in zip(("open", "high", "low", "close"), row[1:]):
                cell = cell.strip()
                if cell == "":
                    if name in ("open", "close"):
                        raise DataError(f"{name} may not be empty", row=rownum)
                    vals[name] = None
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(f"bad {name} {cell!r}", row=rownum)
                if not math.isfinite(v) or v <= 0.0:
                    raise DataError(f"{name} must be a positive finite price, got {cell}", row=rownum)
                vals[name] = v
            high, low = vals["high"], vals["low"]
            top = max(vals["open"], vals["close"])
            bot = min(vals["open"], vals["close"])
            bad_high = high is not None and high < top
            bad_low = low is not None and low > bot
            bad_pair = high is not None and low is not None and low > high
            if bad_high or bad_low or bad_pair:
                if strict:
                    raise DataError("high/low violate OHLC ordering "
                                    f"(open={vals['open']}, high={high}, low={low}, close={vals['close']})",
                                    row=rownum)
                high = None
                low = None
                demoted += 1
            records.append(BarRecord(date=date, open=vals["open"], close=vals["close"],
                                     high=high, low=low))
    if demoted:
        warnings.warn(f"{demoted} bar(s) had extremes violating OHLC ordering; "
                      "extremes dropped to missing", stacklevel=2)
    records.sort(key=lambda r: r.date)
    return records


def bars_to_observations(records: list[BarRecord], weekend_effect: bool = True) -> list[ChloObservation]:
    """Convert price bars to log-space observations ready for the filter.

    ``open`` on each observation is the conditioning price: the bar's own
    open under the weekend effect, else the previous close.  Zero-range bars
    have their extremes demoted to missing (the continuous model assigns
    them zero density), as do extremes that fall strictly inside the
    open/close envelope under previous-close conditioning (possible across
    weekend gaps); extremes exactly tying open or close are kept, the filter
    treats them as unobserved per likelihood variant.
    """
    obs = []
    demoted = 0
    for i, rec in enumerate(records):
        if weekend_effect or i == 0:
            cond_open = math.log(rec.open)
        else:
            cond_open = math.log(records[i - 1].close)
        close = math.log(rec.close)
        high = None if rec.high is None else math.log(rec.high)
        low = None if rec.low is None else math.log(rec.low)
        if high is not None and low is not None and high == low:
            high = low = None
            demoted += 1
        if high is not None and high < max(cond_open, close):
            high = None
            demoted += 1
        if low is not None and low > min(cond_open, close):
            low = None
            demoted += 1
        obs.append(ChloObservation(open=cond_open, close=close, low=low, high=high))
    if demoted:
        warnings.warn(f"{demoted} extreme(s) carried no information usable under the "
                      "chosen conditioning (zero range or inside the open/close envelope) "
                      "and were treated as missing", stacklevel=2)
    return obs


def dataset_to_records(dataset: SimDataset, start_date: dt.date = DEFAULT_START_DATE) -> list[BarRecord]:
    """Export a simulated dataset to price-space records on a weekly grid."""
    records = []
    for i, bar in enumerate(dataset.bars):
        records.append(BarRecord(
            date=start_date + dt.timedelta(weeks=i),
            open=math.exp(bar.open),
            close=math.exp(bar.close),
            high=None if bar.high is None else math.exp(bar.high),
            low=None if bar.low is None else math.exp(bar.low),
        ))
    return records


def write_bars(path: str | Path, records: list[BarRecord]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BAR_HEADER)
        for r in records:
            writer.writerow([r.date.isoformat(), _fmt(r.open),
                             "" if r.high is None else _fmt(r.high),
                             "" if r.low is None else _fmt(r.low),
                             _fmt(r.close)])


def write_truth(path: str | Path, dates: list[dt.date], true_sigma) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "true_sigma"])
        for d, s in zip(dates, true_sigma):
            writer.writerow([d.isoformat(), _fmt(float(s))])


def write_snapshots(path: str | Path, dates: list[dt.date],
                    snapshots: list[FilterSnapshot]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SNAPSHOT_HEADER)
        for d, s in zip(dates, snapshots):
            writer.writerow([d.isoformat()]
                            + [_fmt(v) for v in (
                                s.sigma_mean, s.sigma_q05, s.sigma_q95,
                                s.mu_mean, s.mu_q05, s.mu_q95,
                                s.alpha_mean, s.alpha_q05, s.alpha_q95,
                                s.phi_mean, s.phi_q05, s.phi_q95,
                                s.tau2_mean, s.tau2_q05, s.tau2_q95,
                                s.ess)]
                            + [str(s.n_loglik_neginf), str(s.n_series_nonconverged)])


def write_ratio_table(path: str | Path, rows: list[RatioRow]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RATIO_HEADER)
        for r in rows:
            writer.writerow([r.pair] + [_fmt(v) for v in (
                r.rmsd_median, r.rmsd_q05, r.rmsd_q95,
                r.mad_median, r.mad_q05, r.mad_q95)])


@dataclass
class RunConfig:
    """CLI-level settings; file values are overridden by flags."""

    model: ModelVariant = ModelVariant.EXSV
    particles: int = 30_000
    discount: float = 0.95
    seed: int = 0
    input: str | None = None
    output: str | None = None
    weekend_effect: bool = True
    strict: bool = False
    figures: bool = True
    jobs: int = 1
    rel_tol: float = 1e-12
    max_terms: int = 100
    resample_threshold: float | None = None
    prior: PriorHyper = field(default_factory=PriorHyper)
    # simulation/study settings
    periods: int = 156
    grid_nodes: int = 1000
    datasets: int = 100
    s0: float = 100.0
    true_mu: float = 0.000961
    true_alpha: float = -3.75
    true_phi: float = 0.9
    true_tau: float = 0.11
    # oracle settings
    oracle_mu: float = 0.0
    oracle_sigma: float = 0.02
    oracle_paths: int = 1_000_000
    oracle_grid_nodes: int = 10_000

    def series(self) -> SeriesControl:
        return SeriesControl(rel_tol=self.rel_tol, max_terms=self.max_terms)


_BOOL_KEYS = {"weekend_effect", "strict", "figures"}
_INT_KEYS = {"particles", "seed", "jobs", "max_terms", "periods", "grid_nodes",
             "datasets", "oracle_paths", "oracle_grid_nodes"}
_FLOAT_KEYS = {"discount", "rel_tol", "s0", "true_mu", "true_alpha", "true_phi",
               "true_tau", "resample_threshold", "oracle_mu", "oracle_sigma"}
_STR_KEYS = {"input", "output"}
_PRIOR_KEYS = {f.name for f in fields(PriorHyper)}


def parse_config_file(path: str | Path) -> dict:
    """Flat ``key = value`` file with # comments; unknown keys are errors."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip().lower()
        value = value.strip()
        try:
            if key == "model":
                out[key] = ModelVariant(value.lower())
            elif key in _BOOL_KEYS:
                if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(f"bad boolean {value!r}")
                out[key] = value.lower() in ("true", "1", "yes")
            elif key in _INT_KEYS:
                out[key] = int(value)
            elif key in _FLOAT_KEYS or key in _PRIOR_KEYS:
                out[key] = float(value)
            elif key in _STR_KEYS:
                out[key] = value
            else:
                raise ValueError("unknown key")
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {key!r}: {exc}")
    return out


def build_run_config(file_values: dict, overrides: dict) -> RunConfig:
    """Merge config-file values and CLI overrides (flags win)."""
    merged = dict(file_values)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    prior_kwargs = {k: merged.pop(k) for k in list(merged) if k in _PRIOR_KEYS}
    cfg = RunConfig(**merged)
    if prior_kwargs:
        cfg.prior = PriorHyper(**{**{f.name: getattr(cfg.prior, f.name) for f in fields(PriorHyper)},
                                  **prior_kwargs})
    return cfg
