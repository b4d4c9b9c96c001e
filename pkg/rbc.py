"""
Command-line front end: rate-region datasets, containment reports, oracle
verification, discrete-channel bounds and figure bundles.

    python rbc.py compute --model dawgn-partial --P 10 --P1 5 --N1 1 --N2 4 --out slice.csv
    python rbc.py compare --model dawgn-partial --model gaussian-bc
    python rbc.py verify --out oracle.json
    python rbc.py dm --channel channel.json --variant thm1
    python rbc.py figure --figure fig4 --out figures/fig4
"""
import argparse
import logging
import os
import sys
from dataclasses import dataclass, field
from itertools import permutations
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import config
from dataset_io import load_dm_channel, open_output, slice_document, write_json, write_slices_csv
from dm_bounds import (
    VARIANTS,
    check_degraded,
    cutset_rates,
    cutset_suite,
    degraded_capacity_slice,
    degraded_suite,
    degradedness_residual,
    random_factorized_dist,
    random_input_dist,
    random_joint_dist,
    variant_rates,
)
from error_handling import ConfigError, OracleError, PreconditionError, handle_cli_errors
from gaussian_rates import ChannelParams, alpha0_and_case, p1_saturation_threshold
from logging_config import log_execution_time, setup_logging
from mc_oracle import ORACLE_CATALOGUE, degradedness_checks, oracle_sweep, plugin_spot_checks
from region_geometry import (
    MODELS,
    ParetoSlice,
    RegionHandle,
    contains,
    slice_distance,
    sum_power_slice,
    sweep_slices,
)

logger = logging.getLogger("rbc")
time_logger = logging.getLogger("time_analysis")

COMMANDS = ("compute", "compare", "verify", "dm", "figure")


@dataclass
class RunConfig:
    command: str
    models: Tuple[str, ...] = (config.DEFAULT_MODEL,)
    params: ChannelParams = field(default_factory=lambda: ChannelParams(**config.DEFAULT_CHANNEL))
    grid: int = config.DEFAULT_ALPHA_GRID
    knob_grid: Optional[int] = None
    r0: float = 0.0
    out: Optional[str] = None
    fmt: str = "csv"
    seed: int = config.DEFAULT_SEED
    eps: float = config.CONTAINMENT_EPS
    channel: Optional[str] = None
    figure: Optional[str] = None
    variants: Tuple[str, ...] = ()
    restarts: int = config.DM_RESTARTS
    samples: int = config.PLUGIN_SAMPLES
    sweep_points: int = config.ORACLE_SWEEP_POINTS
    distributions: int = config.DM_SUITE_DISTRIBUTIONS

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"Unknown command {self.command!r}; choose from {COMMANDS}")
        if self.fmt not in config.OUTPUT_FORMATS:
            raise ConfigError(f"Output format must be one of {config.OUTPUT_FORMATS}, got {self.fmt!r}")
        if self.grid < 2 or (self.knob_grid is not None and self.knob_grid < 2):
            raise ConfigError(f"Grid sizes must be >= 2, got --grid {self.grid} --knob-grid {self.knob_grid}")
        unknown = [model for model in self.models if model not in MODELS]
        if unknown:
            raise ConfigError(f"Unknown models {unknown}; choose from {sorted(MODELS)}")
        if self.r0 < 0.0:
            raise ConfigError(f"--r0 must be >= 0, got {self.r0}")
        if self.eps <= 0.0:
            raise ConfigError(f"--eps must be > 0, got {self.eps}")
        if self.command == "compare" and len(self.models) < 2:
            raise ConfigError("compare needs at least two --model flags")
        if self.command == "dm":
            if not self.channel:
                raise ConfigError("dm needs --channel")
            if not os.path.exists(self.channel):
                raise ConfigError(f"Channel file {self.channel} does not exist")
        unknown_variants = [v for v in self.variants if v not in VARIANTS]
        if unknown_variants:
            raise ConfigError(f"Unknown variants {unknown_variants}; choose from {sorted(VARIANTS)}")
        if self.command == "figure" and self.figure not in config.FIGURE_IDS:
            raise ConfigError(f"--figure must be one of {config.FIGURE_IDS}, got {self.figure!r}")
        if self.restarts < 1 or self.samples < 1 or self.sweep_points < 0 or self.distributions < 1:
            raise ConfigError("--restarts, --samples and --distributions must be positive")

    def resolutions(self, model: str) -> Dict[str, int]:
        resolutions = {"alpha": self.grid}
        if self.knob_grid is not None:
            resolutions.update({knob: self.knob_grid for knob in MODELS[model].knobs if knob != "alpha"})
        return resolutions

    def handle(self, model: str, params: Optional[ChannelParams] = None) -> RegionHandle:
        return RegionHandle.create(model, params or self.params, **self.resolutions(model))


def config_from_args(args: argparse.Namespace) -> RunConfig:
    params = ChannelParams(P=args.P, P1=args.P1, P2=args.P2, N1=args.N1, N2=args.N2)
    return RunConfig(
        command=args.command,
        models=tuple(args.model or (config.DEFAULT_MODEL,)),
        params=params,
        grid=args.grid,
        knob_grid=args.knob_grid,
        r0=args.r0,
        out=args.out,
        fmt=args.format,
        seed=args.seed,
        eps=args.eps,
        channel=args.channel,
        figure=args.figure,
        variants=tuple(args.variant or ()),
        restarts=args.restarts,
        samples=args.samples,
        sweep_points=args.sweep_points,
        distributions=args.distributions,
    )


def _write_slices(slices: Sequence[ParetoSlice], path: Optional[str], fmt: str) -> None:
    with open_output(path) as stream:
        if fmt == "csv":
            rows = write_slices_csv(slices, stream)
            logger.info(f"Wrote {rows} rows to {path or 'stdout'}")
        else:
            write_json([slice_document(s) for s in slices], stream)


def _write_report(report: Dict, path: Optional[str]) -> None:
    with open_output(path) as stream:
        write_json(report, stream)


@handle_cli_errors
@log_execution_time(time_logger)
def run_compute(cfg: RunConfig) -> int:
    handles = [cfg.handle(model) for model in cfg.models]
    slices = sweep_slices(handles, cfg.r0, cfg.grid)
    for pareto_slice in slices:
        if not len(pareto_slice):
            logger.warning(f"{pareto_slice.model}: no boundary points at r0={cfg.r0}")
    _write_slices(slices, cfg.out, cfg.fmt)
    return config.EXIT_OK


def compare_pair(inner: RegionHandle, inner_slice: ParetoSlice, outer: RegionHandle,
                 outer_slice: ParetoSlice, eps: float) -> Dict:
    verdict = contains(outer, inner_slice, eps)
    # Points of the outer frontier that the inner region misses: evidence of strictness
    gap = contains(inner, outer_slice, eps).max_violation
    return {
        "inner": inner.model,
        "outer": outer.model,
        "contained": verdict.contained,
        "max_violation": verdict.max_violation,
        "gap": gap,
        "r1_gap": float(outer_slice.r1[-1] - inner_slice.r1[-1]),
        "r2_gap": float(outer_slice.r2[0] - inner_slice.r2[0]),
        "frontier_distance": slice_distance(inner_slice, outer_slice),
    }


@handle_cli_errors
@log_execution_time(time_logger)
def run_compare(cfg: RunConfig) -> int:
    handles = [cfg.handle(model) for model in cfg.models]
    slices = sweep_slices(handles, cfg.r0, cfg.grid)
    empty = [s.model for s in slices if not len(s)]
    if empty:
        raise PreconditionError(f"No boundary points at r0={cfg.r0} for {empty}; slices are incomparable")

    comparisons = [
        compare_pair(handles[i], slices[i], handles[j], slices[j], cfg.eps)
        for i, j in permutations(range(len(handles)), 2)
    ]
    report = {
        "params": cfg.params.as_dict(),
        "r0": cfg.r0,
        "eps": cfg.eps,
        "grid": cfg.grid,
        "comparisons": comparisons,
    }
    _write_report(report, cfg.out)
    return config.EXIT_OK


def _oracle_params(cfg: RunConfig) -> ChannelParams:
    """Channel used for the degradedness checks; these need N1 < N2."""
    if cfg.params.N1 < cfg.params.N2:
        return cfg.params
    logger.info("Configured channel has N1 >= N2, degradedness checks use the figure channel")
    return ChannelParams(P=config.FIGURE_PARAMS["P"], P1=5.0, P2=config.FIGURE_PARAMS["P2"],
                         N1=config.FIGURE_PARAMS["N1"], N2=config.FIGURE_PARAMS["N2"])


@handle_cli_errors
@log_execution_time(time_logger)
def run_verify(cfg: RunConfig) -> int:
    sweep = oracle_sweep(cfg.sweep_points, cfg.seed)
    spot = plugin_spot_checks(config.PLUGIN_SPOT_CHECKS, max(cfg.samples, config.MIN_PLUGIN_SAMPLES), cfg.seed)
    degraded = degradedness_checks(
        _oracle_params(cfg), max(min(cfg.samples, config.DEGRADEDNESS_SAMPLES), config.MIN_PLUGIN_SAMPLES), cfg.seed
    )

    differences = [r.difference for r in sweep if r.difference is not None]
    sweep_failures = [r for r in sweep if not r.passed]
    failures = len(sweep_failures) + sum(not r.passed for r in spot) + sum(not r.passed for r in degraded)
    report = {
        "seed": cfg.seed,
        "formulas": sorted(ORACLE_CATALOGUE),
        "sweep": {
            "points": cfg.sweep_points,
            "comparisons": len(sweep),
            "max_difference": max(differences, default=0.0),
            "failures": sweep_failures,
        },
        "plugin": spot,
        "degradedness": degraded,
        "passed": failures == 0,
    }
    _write_report(report, cfg.out)
    if failures:
        raise OracleError(f"{failures} oracle comparisons exceeded tolerance")
    logger.info(f"Oracle verification passed: {len(sweep)} log-det and {len(spot)} plug-in comparisons")
    return config.EXIT_OK


@handle_cli_errors
@log_execution_time(time_logger)
def run_dm(cfg: RunConfig) -> int:
    channel = load_dm_channel(cfg.channel)
    degraded = check_degraded(channel)
    report: Dict = {
        "channel": cfg.channel,
        "alphabets": channel.sizes,
        "degraded": degraded,
        "degradedness_residual": degradedness_residual(channel),
        "seed": cfg.seed,
    }
    if not channel.is_full:
        report["cutset_suite"] = cutset_suite(channel, cfg.distributions, cfg.seed)
        report["cutset"] = cutset_rates(channel, random_input_dist(channel, cfg.seed)).bounds
    if degraded:
        report["degraded_suite"] = degraded_suite(channel, cfg.distributions, cfg.seed)
        capacity = degraded_capacity_slice(channel, cfg.restarts, cfg.seed)
        report["capacity"] = {"label": capacity.label, "points": capacity.points}

    variants = {}
    for i, name in enumerate(cfg.variants):
        sampler = random_factorized_dist if VARIANTS[name].markov else random_joint_dist
        dist = sampler(channel, cfg.seed, i)
        variants[name] = {"bounds": variant_rates(channel, dist, name).bounds, "stream": i}
    report["variants"] = variants

    _write_report(report, cfg.out)
    return config.EXIT_OK


def _figure_params(**overrides: float) -> ChannelParams:
    values = dict(config.FIGURE_PARAMS, P1=0.0)
    values.update(overrides)
    return ChannelParams(**values)


def _saturation_note(params: ChannelParams) -> str:
    threshold = p1_saturation_threshold(params.P, params.N1, params.N2)
    return (
        f"P1 saturation threshold at P={params.P:g}, N1={params.N1:g}, N2={params.N2:g}: "
        f"P1 = {threshold:.6g}. The reference value of 14.54 dB depends on P, N1, N2 "
        f"values that are not recorded, so it is not reproduced here."
    )


def _figure_fig4(cfg: RunConfig) -> Tuple[ChannelParams, Dict[str, ParetoSlice], List[str]]:
    base = _figure_params()
    names = ["gaussian-bc"]
    handles = [cfg.handle("gaussian-bc", base)]
    for p1 in config.FIGURE_RELAY_POWERS:
        names.append(f"dawgn-partial_P1-{p1:g}")
        handles.append(cfg.handle("dawgn-partial", base.with_powers(P1=p1)))
    notes = [_saturation_note(base)]
    for p1 in config.FIGURE_RELAY_POWERS:
        case, alpha0 = alpha0_and_case(base.P, p1, base.N1, base.N2)
        notes.append(f"P1={p1:g}: {case.value} boundary, alpha0={alpha0:.6g}")
    return base, dict(zip(names, sweep_slices(handles, cfg.r0, cfg.grid))), notes


def _figure_fig5(cfg: RunConfig) -> Tuple[ChannelParams, Dict[str, ParetoSlice], List[str]]:
    base = _figure_params()
    names, handles = ["gaussian-bc"], [cfg.handle("gaussian-bc", base)]
    for p1 in config.FIGURE_RELAY_POWERS:
        params = base.with_powers(P1=p1)
        for model in ("awgn-partial-inner", "awgn-partial-outer"):
            names.append(f"{model}_P1-{p1:g}")
            handles.append(cfg.handle(model, params))
    return base, dict(zip(names, sweep_slices(handles, cfg.r0, cfg.grid))), []


def _figure_fig8(cfg: RunConfig) -> Tuple[ChannelParams, Dict[str, ParetoSlice], List[str]]:
    params = _figure_params(P1=5.0)
    models = ("gaussian-bc", "awgn-partial-inner", "awgn-full-inner", "awgn-full-feedback", "awgn-full-outer")
    handles = [cfg.handle(model, params) for model in models]
    return params, dict(zip(models, sweep_slices(handles, cfg.r0, cfg.grid))), []


def _figure_sum_power(cfg: RunConfig, noise: Tuple[float, float],
                      models: Sequence[str]) -> Dict[str, ParetoSlice]:
    Ptot = config.FIGURE_PARAMS["P"]
    return {
        model: sum_power_slice(model, Ptot, noise, config.DEFAULT_SPLIT_GRID, cfg.r0, cfg.grid,
                               **{k: v for k, v in cfg.resolutions(model).items() if k != "alpha"})
        for model in models
    }


def _figure_fig10(cfg: RunConfig) -> Tuple[ChannelParams, Dict[str, ParetoSlice], List[str]]:
    params = _figure_params()
    noise = (params.N1, params.N2)
    curves = _figure_sum_power(cfg, noise, ("gaussian-bc", "dawgn-partial", "awgn-partial-feedback"))
    return params, curves, [f"Total power {params.P:g} shared between source and relay"]


def _figure_fig11(cfg: RunConfig) -> Tuple[ChannelParams, Dict[str, ParetoSlice], List[str]]:
    # Estimate-and-forward needs the relay (user 1) to be the weaker receiver
    params = _figure_params(N1=config.FIGURE_PARAMS["N2"], N2=config.FIGURE_PARAMS["N1"])
    noise = (params.N1, params.N2)
    curves = _figure_sum_power(cfg, noise, ("gaussian-bc", "ef-partial"))
    return params, curves, [f"Total power {params.P:g} shared between source and relay"]


FIGURES: Dict[str, Callable[[RunConfig], Tuple[ChannelParams, Dict[str, ParetoSlice], List[str]]]] = {
    "fig4": _figure_fig4,
    "fig5": _figure_fig5,
    "fig8": _figure_fig8,
    "fig10": _figure_fig10,
    "fig11": _figure_fig11,
}


@handle_cli_errors
@log_execution_time(time_logger)
def run_figure(cfg: RunConfig) -> int:
    directory = cfg.out or os.path.join(config.DEFAULT_FIGURE_DIR, cfg.figure)
    if directory == "-":
        raise ConfigError("figure writes a directory of files; --out cannot be stdout")
    params, curves, notes = FIGURES[cfg.figure](cfg)

    files = {}
    for name, curve in curves.items():
        filename = f"{name}.csv"
        with open_output(os.path.join(directory, filename)) as stream:
            write_slices_csv([curve], stream)
        files[name] = filename

    metadata = {
        "figure": cfg.figure,
        "parameters": "implementer parameters",
        "params": params.as_dict(),
        "relay_powers": config.FIGURE_RELAY_POWERS,
        "r0": cfg.r0,
        "grid": cfg.grid,
        "curves": files,
        "notes": notes,
    }
    with open_output(os.path.join(directory, "metadata.json")) as stream:
        write_json(metadata, stream)
    logger.info(f"{cfg.figure}: wrote {len(files)} curves to {directory}")
    return config.EXIT_OK


COMMAND_RUNNERS: Dict[str, Callable[[RunConfig], int]] = {
    "compute": run_compute,
    "compare": run_compare,
    "verify": run_verify,
    "dm": run_dm,
    "figure": run_figure,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Relay Broadcast Channel Rate Region Analyzer")
    parser.add_argument("command", choices=COMMANDS,
                        help="Action to run")
    parser.add_argument("--model", action="append",
                        help=f"Region model tag, repeatable (default {config.DEFAULT_MODEL})")
    parser.add_argument("--P", type=float, default=config.DEFAULT_CHANNEL["P"],
                        help="Source power")
    parser.add_argument("--P1", type=float, default=config.DEFAULT_CHANNEL["P1"],
                        help="Power of the relay at user 1")
    parser.add_argument("--P2", type=float, default=config.DEFAULT_CHANNEL["P2"],
                        help="Power of the relay at user 2 (fully cooperative models)")
    parser.add_argument("--N1", type=float, default=config.DEFAULT_CHANNEL["N1"],
                        help="Noise variance at user 1")
    parser.add_argument("--N2", type=float, default=config.DEFAULT_CHANNEL["N2"],
                        help="Noise variance at user 2")
    parser.add_argument("--r0", type=float, default=0.0,
                        help="Common rate at which the boundary is sliced")
    parser.add_argument("--grid", type=int, default=config.DEFAULT_ALPHA_GRID,
                        help="Number of alpha grid points")
    parser.add_argument("--knob-grid", type=int, default=None,
                        help="Grid points for beta, gamma and eta (model defaults when omitted)")
    parser.add_argument("--seed", type=int, default=config.DEFAULT_SEED,
                        help="Seed for every random draw")
    parser.add_argument("--out", type=str, default=None,
                        help="Output path ('-' or omitted for stdout; a directory for figure)")
    parser.add_argument("--format", type=str, default="csv", choices=config.OUTPUT_FORMATS,
                        help="Dataset format for compute")
    parser.add_argument("--eps", type=float, default=config.CONTAINMENT_EPS,
                        help="Membership tolerance in bits")
    parser.add_argument("--channel", type=str, default=None,
                        help="Discrete channel JSON file for dm")
    parser.add_argument("--figure", type=str, default=None, choices=config.FIGURE_IDS,
                        help="Figure to regenerate")
    parser.add_argument("--variant", action="append", choices=sorted(VARIANTS),
                        help="Discrete region to evaluate, repeatable")
    parser.add_argument("--restarts", type=int, default=config.DM_RESTARTS,
                        help="Random restarts of the degraded capacity search")
    parser.add_argument("--samples", type=int, default=config.PLUGIN_SAMPLES,
                        help="Monte-Carlo sample count for plug-in estimates")
    parser.add_argument("--sweep-points", type=int, default=config.ORACLE_SWEEP_POINTS,
                        help="Random parameter draws in the log-det oracle sweep")
    parser.add_argument("--distributions", type=int, default=config.DM_SUITE_DISTRIBUTIONS,
                        help="Random distributions per discrete identity suite")
    parser.add_argument("--log-level", type=str, default=config.LOG_LEVEL,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
                        help="Logging level")
    parser.add_argument("--log-file", type=str, default=config.LOG_FILE,
                        help="Log file path (empty to disable)")
    return parser


@handle_cli_errors
def _configure_and_run(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    logger.info(f"Running {cfg.command} for {', '.join(cfg.models)} at {cfg.params.as_dict()}")
    return COMMAND_RUNNERS[cfg.command](cfg)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level, args.log_file or None)
    return _configure_and_run(args)


if __name__ == "__main__":
    sys.exit(main())
