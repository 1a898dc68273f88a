"""Command-line front end: single runs, parameter sweeps, plot-ready CSV."""

from __future__ import annotations

import argparse
import copy
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from .core import BatchConfig
from .sim import (
    MetricsReport,
    Scenario,
    load_requests_csv,
    run,
    standard_scenario,
    write_report_csv,
)

EXIT_OK = 0
EXIT_USAGE = 2  # bad flags, missing files, empty sweep values
EXIT_CONFIG = 3  # unreadable or malformed configuration
EXIT_INVARIANT = 4  # internal invariant violated during the run

SWEEP_AXES = {
    "fleet_size": int,
    "fleet": int,
    "candidates_per_request": int,
    "candidates": int,
    "lambda": float,
    "batch_period": int,
    "batch": int,
}

_CANONICAL_AXIS = {
    "fleet": "fleet_size",
    "candidates": "candidates_per_request",
    "batch": "batch_period",
}

_SWEEP_COLUMNS = [
    "axis", "value", "strategy", "served_pct", "travel_per_request",
    "journey_time", "wait_time", "cpu_per_batch", "vht",
    "requests_total", "requests_served",
]


@dataclass
class SweepSpec:
    base: Scenario
    axis: str
    values: list


class ConfigError(ValueError):
    pass


_CONFIG_KEYS = {
    "fleet_size": int,
    "horizon": int,
    "seed": int,
    "strategy": str,
    "vehicle_capacity": int,
    "time_step": int,
    "batch_period": int,
    "candidates": int,
    "lambda": float,
    "max_pickup_delay": int,
    "min_delay_floor": int,
    "delay_percent": float,
    "metric": str,
    "speed": float,
    "angle_threshold": float,
    "big_m_epsilon": float,
    "greedy_delay_ratio": float,
    "area": str,
    "hourly_rates": str,
    "party_weights": str,
}


def parse_config_file(path: str) -> dict:
    """key = value lines; '#' starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, raw = line.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _CONFIG_KEYS[key](raw)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return values


def _parse_float_list(raw: str, key: str) -> list[float]:
    try:
        return [float(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad {key}: {exc}") from exc


def scenario_from_config(values: dict) -> Scenario:
    scenario = standard_scenario()
    cfg_over = {}
    for key, target in [
        ("batch_period", "batch_period"), ("candidates", "candidates_per_request"),
        ("lambda", "lam"), ("max_pickup_delay", "max_pickup_delay"),
        ("min_delay_floor", "min_delay_floor"), ("delay_percent", "delay_percent"),
        ("metric", "metric"), ("speed", "speed"),
        ("angle_threshold", "angle_threshold"), ("big_m_epsilon", "big_m_epsilon"),
        ("greedy_delay_ratio", "greedy_delay_ratio"),
    ]:
        if key in values:
            cfg_over[target] = values[key]
    scn_over = {}
    for key, target in [
        ("fleet_size", "fleet_size"), ("horizon", "horizon"), ("seed", "rng_seed"),
        ("strategy", "strategy"), ("vehicle_capacity", "vehicle_capacity"),
        ("time_step", "time_step"),
    ]:
        if key in values:
            scn_over[target] = values[key]
    if "area" in values:
        box = _parse_float_list(values["area"], "area")
        if len(box) != 4:
            raise ConfigError("area needs 4 comma-separated numbers")
        scn_over["area"] = tuple(box)
    if "hourly_rates" in values:
        scn_over["demand_profile"] = _parse_float_list(values["hourly_rates"], "hourly_rates")
    if "party_weights" in values:
        scn_over["party_weights"] = tuple(_parse_float_list(values["party_weights"],
                                                            "party_weights"))
    if cfg_over:
        scn_over["batch_config"] = replace(scenario.batch_config, **cfg_over)
    return replace(scenario, **scn_over)


def _apply_flag_overrides(scenario: Scenario, args) -> Scenario:
    scn_over = {}
    cfg_over = {}
    if args.fleet is not None:
        scn_over["fleet_size"] = args.fleet
    if args.seed is not None:
        scn_over["rng_seed"] = args.seed
    if args.lam is not None:
        cfg_over["lam"] = args.lam
    if args.batch is not None:
        cfg_over["batch_period"] = args.batch
    if args.candidates is not None:
        cfg_over["candidates_per_request"] = args.candidates
    if cfg_over:
        scn_over["batch_config"] = replace(scenario.batch_config, **cfg_over)
    return replace(scenario, **scn_over) if scn_over else scenario


def _sweep_value(scenario: Scenario, axis: str, value) -> Scenario:
    if axis == "fleet_size":
        return replace(scenario, fleet_size=value)
    if axis == "candidates_per_request":
        return replace(scenario, batch_config=replace(scenario.batch_config,
                                                      candidates_per_request=value))
    if axis == "lambda":
        return replace(scenario, batch_config=replace(scenario.batch_config, lam=value))
    if axis == "batch_period":
        return replace(scenario, batch_config=replace(scenario.batch_config,
                                                      batch_period=value))
    raise ConfigError(f"unknown sweep axis {axis!r}")


def _run_one(scenario: Scenario, requests, measure_cpu: bool) -> MetricsReport:
    reqs = copy.deepcopy(requests) if requests is not None else None
    return run(scenario, requests=reqs, measure_cpu=measure_cpu)


def _row_from_report(axis: str, value, strategy: str, report: MetricsReport) -> list:
    return [
        axis, value, strategy,
        repr(report.served_pct), repr(report.travel_per_request),
        repr(report.journey_time), repr(report.wait_time),
        repr(report.cpu_per_batch), repr(report.vht),
        report.requests_total, report.requests_served,
    ]


def _delta_row(axis: str, value, a: MetricsReport, b: MetricsReport) -> list:
    def pct(x, y):
        return repr(100.0 * (y - x) / x) if x else ""
    return [
        axis, value, "delta_pct",
        pct(a.served_pct, b.served_pct),
        pct(a.travel_per_request, b.travel_per_request),
        pct(a.journey_time, b.journey_time),
        pct(a.wait_time, b.wait_time),
        "", "", "", "",
    ]


def cmd_run(scenario: Scenario, requests, out_path, series_path, measure_cpu) -> int:
    report = _run_one(scenario, requests, measure_cpu)
    if out_path:
        write_report_csv(report, out_path, series_path)
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(["strategy"] + _SWEEP_COLUMNS[3:])
        writer.writerow([scenario.strategy,
                         repr(report.served_pct), repr(report.travel_per_request),
                         repr(report.journey_time), repr(report.wait_time),
                         repr(report.cpu_per_batch), repr(report.vht),
                         report.requests_total, report.requests_served])
    return EXIT_OK


def cmd_sweep(spec: SweepSpec, strategies: list[str], requests, out_path,
              measure_cpu) -> int:
    jobs = []
    for value in sorted(spec.values):
        for strategy in strategies:
            jobs.append((value, strategy,
                         replace(_sweep_value(spec.base, spec.axis, value),
                                 strategy=strategy)))
    workers = int(os.environ.get("POOLCORE_THREADS", "1") or "1")
    results: dict[tuple, MetricsReport] = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                (value, strategy): pool.submit(_run_one, scenario, requests, measure_cpu)
                for value, strategy, scenario in jobs
            }
            for key, future in futures.items():
                results[key] = future.result()
    else:
        for value, strategy, scenario in jobs:
            results[(value, strategy)] = _run_one(scenario, requests, measure_cpu)

    rows = [_SWEEP_COLUMNS]
    for value in sorted(spec.values):
        for strategy in strategies:
            rows.append(_row_from_report(spec.axis, value, strategy,
                                         results[(value, strategy)]))
        if len(strategies) == 2:
            rows.append(_delta_row(spec.axis, value,
                                   results[(value, strategies[0])],
                                   results[(value, strategies[1])]))
    if out_path:
        with open(out_path, "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
    else:
        csv.writer(sys.stdout).writerows(rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poolcore",
        description="Shared-fleet dispatch simulator: batched LP assignment vs greedy.",
    )
    parser.add_argument("--config", help="key = value scenario file")
    parser.add_argument("--strategy", action="append", choices=["ia", "greedy"],
                        help="dispatch strategy; repeat for side-by-side runs")
    parser.add_argument("--fleet", type=int, help="fleet size")
    parser.add_argument("--lambda", dest="lam", type=float,
                        help="objective weight in [0,1]; 1 favors the operator")
    parser.add_argument("--batch", type=int, help="batching period, seconds")
    parser.add_argument("--candidates", type=int, help="candidate vehicles per request")
    parser.add_argument("--seed", type=int, help="RNG seed")
    parser.add_argument("--requests", help="replay CSV (id,submit_time_s,ox_m,oy_m,dx_m,dy_m,party)")
    parser.add_argument("--out", help="metrics CSV path (default: stdout)")
    parser.add_argument("--series-out", help="per-hour time series CSV path")
    parser.add_argument("--sweep", help="AXIS=v1,v2,... over fleet_size, "
                                        "candidates_per_request, lambda or batch_period")
    parser.add_argument("--no-cpu", action="store_true",
                        help="skip wall-clock batch timing for bit-reproducible output")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    try:
        if args.config:
            if not os.path.exists(args.config):
                print(f"poolcore: config not found: {args.config}", file=sys.stderr)
                return EXIT_USAGE
            scenario = scenario_from_config(parse_config_file(args.config))
        else:
            scenario = standard_scenario()
        scenario = _apply_flag_overrides(scenario, args)
    except ConfigError as exc:
        print(f"poolcore: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    requests = None
    if args.requests:
        if not os.path.exists(args.requests):
            print(f"poolcore: requests file not found: {args.requests}", file=sys.stderr)
            return EXIT_USAGE
        try:
            requests = load_requests_csv(args.requests, scenario.batch_config)
        except (KeyError, ValueError) as exc:
            print(f"poolcore: malformed requests file: {exc}", file=sys.stderr)
            return EXIT_CONFIG

    strategies = args.strategy or [scenario.strategy]
    measure_cpu = not args.no_cpu

    try:
        if args.sweep:
            axis_raw, _, raw_values = args.sweep.partition("=")
            axis_raw = axis_raw.strip()
            if axis_raw not in SWEEP_AXES:
                print(f"poolcore: unknown sweep axis {axis_raw!r}", file=sys.stderr)
                return EXIT_USAGE
            cast = SWEEP_AXES[axis_raw]
            values = [cast(tok) for tok in raw_values.split(",") if tok.strip()]
            if not values:
                print("poolcore: sweep needs at least one value", file=sys.stderr)
                return EXIT_USAGE
            axis = _CANONICAL_AXIS.get(axis_raw, axis_raw)
            spec = SweepSpec(base=scenario, axis=axis, values=values)
            return cmd_sweep(spec, strategies, requests, args.out, measure_cpu)
        if len(strategies) > 1:
            spec = SweepSpec(base=scenario, axis="fleet_size",
                             values=[scenario.fleet_size])
            return cmd_sweep(spec, strategies, requests, args.out, measure_cpu)
        scenario = replace(scenario, strategy=strategies[0])
        return cmd_run(scenario, requests, args.out, args.series_out, measure_cpu)
    except ValueError as exc:
        print(f"poolcore: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as exc:
        print(f"poolcore: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
