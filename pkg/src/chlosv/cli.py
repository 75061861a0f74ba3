"""Command-line entry points: fit, simulate, study, oracle.

Every run is deterministic given its config and seed; outputs are CSV files
plus (unless --no-figures) PNG figures alongside them.  Exit codes: 0 on
success, 2 for configuration problems, 3 for data problems, 4 for numerical
degeneracy.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io, report
from .errors import ConfigError, DataError, FilterDegeneracyError
from .filter import FilterConfig, ModelVariant, run_filter
from .likelihood import PeriodParams
from .simulate import Box, SimConfig, mc_density_oracle, run_study, simulate_dataset
from .volprocess import Theta


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file; flags override it")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", default=None, help="output CSV path")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=None,
                   help="render PNG figures next to the CSV output")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chlosv",
                                     description="Stochastic volatility from OHLC bars "
                                                 "via a Liu-West particle filter.")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="filter a bar CSV and write per-period posteriors")
    _add_common(fit)
    fit.add_argument("--input", default=None, help="bar CSV (date,open,high,low,close)")
    fit.add_argument("--model", choices=[m.value for m in ModelVariant], default=None)
    fit.add_argument("--particles", type=int, default=None)
    fit.add_argument("--discount", type=float, default=None)
    fit.add_argument("--weekend-effect", action=argparse.BooleanOptionalAction, default=None,
                     help="condition each bar on its own open (else previous close)")
    fit.add_argument("--strict", action="store_true", default=None,
                     help="reject rows violating OHLC ordering instead of demoting extremes")

    sim = sub.add_parser("simulate", help="generate a synthetic bar CSV plus its true volatility path")
    _add_common(sim)
    sim.add_argument("--periods", type=int, default=None)
    sim.add_argument("--grid-nodes", type=int, default=None)
    sim.add_argument("--s0", type=float, default=None)

    study = sub.add_parser("study", help="run the four-model comparison and write the ratio table")
    _add_common(study)
    study.add_argument("--datasets", type=int, default=None)
    study.add_argument("--periods", type=int, default=None)
    study.add_argument("--grid-nodes", type=int, default=None)
    study.add_argument("--particles", type=int, default=None)
    study.add_argument("--discount", type=float, default=None)
    study.add_argument("--jobs", type=int, default=None)

    oracle = sub.add_parser("oracle", help="Monte Carlo box probability in (low, high, close) space")
    _add_common(oracle)
    oracle.add_argument("--mu", type=float, default=None, dest="oracle_mu")
    oracle.add_argument("--sigma", type=float, default=None, dest="oracle_sigma")
    oracle.add_argument("--paths", type=int, default=None, dest="oracle_paths")
    oracle.add_argument("--grid-nodes", type=int, default=None, dest="oracle_grid_nodes")
    oracle.add_argument("--box", default=None,
                        help="low_lo:low_hi,high_lo:high_hi,close_lo:close_hi "
                             "relative to the open; inf/-inf allowed")
    return parser


def _config_from_args(args: argparse.Namespace) -> io.RunConfig:
    file_values = io.parse_config_file(args.config) if args.config else {}
    overrides = {}
    for key in ("model", "particles", "discount", "seed", "input", "output",
                "weekend_effect", "strict", "figures", "jobs", "periods",
                "grid_nodes", "datasets", "s0", "oracle_mu", "oracle_sigma",
                "oracle_paths", "oracle_grid_nodes"):
        if hasattr(args, key):
            overrides[key] = getattr(args, key)
    if overrides.get("model") is not None:
        overrides["model"] = ModelVariant(overrides["model"])
    try:
        return io.build_run_config(file_values, overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc))


def _filter_config(cfg: io.RunConfig) -> FilterConfig:
    return FilterConfig(variant=cfg.model, n_particles=cfg.particles,
                        discount=cfg.discount, prior=cfg.prior,
                        series=cfg.series(), seed=cfg.seed,
                        resample_threshold=cfg.resample_threshold)


def _sim_config(cfg: io.RunConfig) -> SimConfig:
    theta = Theta(mu=cfg.true_mu, alpha=cfg.true_alpha, phi=cfg.true_phi,
                  tau2=cfg.true_tau ** 2)
    return SimConfig(n_periods=cfg.periods, grid_nodes=cfg.grid_nodes,
                     theta_true=theta, s0=cfg.s0, n_datasets=cfg.datasets,
                     seed=cfg.seed)


def _require_output(cfg: io.RunConfig) -> Path:
    if not cfg.output:
        raise ConfigError("--output is required")
    out = Path(cfg.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    return out


def cmd_fit(cfg: io.RunConfig) -> None:
    if not cfg.input:
        raise ConfigError("--input is required for fit")
    out = _require_output(cfg)
    records = io.parse_bars(cfg.input, strict=cfg.strict)
    if not records:
        raise DataError("no bars in input")
    bars = io.bars_to_observations(records, weekend_effect=cfg.weekend_effect)
    snapshots = run_filter(bars, _filter_config(cfg))
    dates = [r.date for r in records]
    io.write_snapshots(out, dates, snapshots)
    print(f"wrote {out} ({len(snapshots)} periods, model={cfg.model.value}, "
          f"N={cfg.particles}, seed={cfg.seed})")
    if cfg.figures:
        for p in report.save_fit_figures(out.with_suffix(""), dates, snapshots):
            print(f"wrote {p}")


def cmd_simulate(cfg: io.RunConfig) -> None:
    out = _require_output(cfg)
    sim_cfg = replace(_sim_config(cfg), n_datasets=1)
    dataset = simulate_dataset(sim_cfg, np.random.default_rng(np.random.SeedSequence(cfg.seed)))
    records = io.dataset_to_records(dataset)
    io.write_bars(out, records)
    dates = [r.date for r in records]
    truth_path = out.with_name(out.stem + "_truth.csv")
    io.write_truth(truth_path, dates, dataset.true_sigma)
    print(f"wrote {out} and {truth_path} ({cfg.periods} periods, seed={cfg.seed})")
    if cfg.figures:
        for p in report.save_simulation_figure(out.with_suffix(""), dates, dataset):
            print(f"wrote {p}")


def cmd_study(cfg: io.RunConfig) -> None:
    out = _require_output(cfg)
    result = run_study(_sim_config(cfg), _filter_config(cfg), jobs=cfg.jobs)
    io.write_ratio_table(out, result.rows)
    print(f"wrote {out} ({cfg.datasets} datasets x 4 models, N={cfg.particles}, seed={cfg.seed})")
    for row in result.rows:
        print(f"  {row.pair}: RMSD {row.rmsd_median:.3f} ({row.rmsd_q05:.3f}, {row.rmsd_q95:.3f})  "
              f"MAD {row.mad_median:.3f} ({row.mad_q05:.3f}, {row.mad_q95:.3f})")
    if cfg.figures:
        for p in report.save_study_figure(out.with_suffix(""), result.rows):
            print(f"wrote {p}")


def _parse_box(spec: str | None) -> Box:
    if not spec:
        return Box()
    try:
        parts = spec.split(",")
        if len(parts) != 3:
            raise ValueError("expected three lo:hi pairs")
        pairs = []
        for part in parts:
            lo, _, hi = part.partition(":")
            pairs.append((float(lo), float(hi)))
        return Box(low=pairs[0], high=pairs[1], close=pairs[2])
    except ValueError as exc:
        raise ConfigError(f"bad --box {spec!r}: {exc}")


def cmd_oracle(cfg: io.RunConfig, box: Box) -> None:
    out = _require_output(cfg)
    params = PeriodParams(mu=cfg.oracle_mu, sigma=cfg.oracle_sigma)
    p, se = mc_density_oracle(params, box, cfg.oracle_paths, cfg.oracle_grid_nodes,
                              np.random.default_rng(np.random.SeedSequence(cfg.seed)))
    with out.open("w", newline="") as fh:
        fh.write("low_lo,low_hi,high_lo,high_hi,close_lo,close_hi,probability,std_error,n_paths\n")
        row = [*box.low, *box.high, *box.close, p, se]
        fh.write(",".join(f"{v:.17g}" for v in row) + f",{cfg.oracle_paths}\n")
    print(f"wrote {out}: P(box) = {p:.6g} +- {se:.2g} "
          f"({cfg.oracle_paths} paths x {cfg.oracle_grid_nodes} steps)")


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "fit":
            cmd_fit(cfg)
        elif args.command == "simulate":
            cmd_simulate(cfg)
        elif args.command == "study":
            cmd_study(cfg)
        elif args.command == "oracle":
            cmd_oracle(cfg, _parse_box(args.box))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except FilterDegeneracyError as exc:
        print(f"numerical degeneracy: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
