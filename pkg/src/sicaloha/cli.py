"""Command-line pipeline: estimate loss curves, trace contours, classify
channels, evaluate delay, and run closed-loop simulations.

Commands communicate through files - the loss curve is expensive to build,
so it is written once (``estimate-plr``) and reused by ``contour``,
``classify`` and ``delay``. Exit codes: 0 success, 2 validation failure,
3 I/O failure, 4 domain error (e.g. asking for the operating-point delay
of an overloaded channel).
"""
from __future__ import annotations

import argparse
import json
import secrets
import sys

import numpy as np

from .config import (DegreeDistribution, FinitePopulation, InfinitePopulation,
                     RetransmitPolicy, SystemConfig)
from .delay import DEFAULT_PMF_TERMS, delay_pmf, mean_delay, operating_point_delay, pmf_to_csv
from .equilibrium import (LoadLine, analysis_to_json_obj, compute_contour, contour_to_csv,
                          find_equilibria)
from .errors import NoOperatingPointError, ValidationError
from .plr import (DEFAULT_FRAMES_PER_POINT, DEFAULT_GRID_MAX, DEFAULT_GRID_STEP,
                  build_curve, curve_to_csv, default_grid, load_curve, save_curve)
from .simulation import SimScenario, run_simulation, save_summary, trace_to_csv

EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_DOMAIN = 4

_SCENARIO_KEYS = {"n_f", "i_max", "degrees", "population", "p_r", "seed",
                  "grid", "frames_per_point", "num_frames"}


class Scenario:
    """Validated scenario file contents. Every key is optional at parse
    time; commands demand the pieces they need."""

    def __init__(self, raw: dict, origin: str = "scenario"):
        if not isinstance(raw, dict):
            raise ValidationError(f"{origin} must be a JSON object")
        unknown = set(raw) - _SCENARIO_KEYS
        if unknown:
            raise ValidationError(f"{origin} has unknown keys: {sorted(unknown)}")
        self.n_f = raw.get("n_f")
        self.i_max = raw.get("i_max")
        self.degree_dist = None
        if "degrees" in raw:
            self.degree_dist = DegreeDistribution.from_json_obj({"degrees": raw["degrees"]})
        self.population = None
        if "population" in raw:
            self.population = _parse_population(raw["population"])
        self.p_r = raw.get("p_r")
        if self.p_r is not None and not 0.0 < self.p_r <= 1.0:
            raise ValidationError(f"p_r {self.p_r} outside (0, 1]")
        self.seed = raw.get("seed")
        if self.seed is not None and not isinstance(self.seed, int):
            raise ValidationError(f"seed must be an integer, got {self.seed!r}")
        self.grid_max, self.grid_step = DEFAULT_GRID_MAX, DEFAULT_GRID_STEP
        if "grid" in raw:
            grid = raw["grid"]
            if not isinstance(grid, dict) or set(grid) - {"max", "step"}:
                raise ValidationError("grid must be an object with keys 'max' and/or 'step'")
            self.grid_max = grid.get("max", self.grid_max)
            self.grid_step = grid.get("step", self.grid_step)
        self.frames_per_point = raw.get("frames_per_point", DEFAULT_FRAMES_PER_POINT)
        self.num_frames = raw.get("num_frames")

    def system_config(self) -> SystemConfig:
        for name, value in [("n_f", self.n_f), ("i_max", self.i_max),
                            ("degrees", self.degree_dist)]:
            if value is None:
                raise ValidationError(f"scenario is missing '{name}'")
        return SystemConfig(self.n_f, self.i_max, self.degree_dist)

    def require(self, name: str):
        value = getattr(self, name)
        if value is None:
            raise ValidationError(f"scenario is missing '{name}'")
        return value


def _parse_population(obj) -> FinitePopulation | InfinitePopulation:
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ValidationError("population must be {'finite': {...}} or {'infinite': {...}}")
    (variant, params), = obj.items()
    if variant == "finite":
        if not isinstance(params, dict) or set(params) != {"m", "p0"}:
            raise ValidationError("finite population needs exactly the keys 'm' and 'p0'")
        return FinitePopulation(params["m"], params["p0"])
    if variant == "infinite":
        if not isinstance(params, dict) or set(params) != {"lambda"}:
            raise ValidationError("infinite population needs exactly the key 'lambda'")
        return InfinitePopulation(params["lambda"])
    raise ValidationError(f"unknown population variant {variant!r}")


def _load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as e:
            raise ValidationError(f"scenario file is not valid JSON: {e}") from None
    return Scenario(raw, origin=str(path))


def _resolve_seed(args, scenario: Scenario | None) -> int:
    """CLI flag wins, then the scenario file; otherwise draw from entropy
    and print it so the run can be reproduced."""
    if args.seed is not None:
        return args.seed
    if scenario is not None and scenario.seed is not None:
        return scenario.seed
    seed = secrets.randbits(63)
    print(f"seed: {seed}")
    return seed


def _cmd_estimate_plr(args) -> int:
    scenario = _load_scenario(args.config)
    config = scenario.system_config()
    grid_max = args.grid_max if args.grid_max is not None else scenario.grid_max
    grid_step = args.grid_step if args.grid_step is not None else scenario.grid_step
    frames = (args.frames_per_point if args.frames_per_point is not None
              else scenario.frames_per_point)
    seed = _resolve_seed(args, scenario)
    curve = build_curve(config, default_grid(grid_max, grid_step), frames, seed)
    save_curve(curve, args.out)
    if args.csv:
        curve_to_csv(curve, args.csv)
    g_peak, t_peak = curve.peak_throughput()
    print(f"peak throughput {t_peak:.9g} pkt/slot at load {g_peak:.9g}")
    return 0


def _cmd_contour(args) -> int:
    curve = load_curve(args.curve)
    contour = compute_contour(curve, args.p_r)
    contour_to_csv(contour, args.out)
    peak = contour.peak()
    print(f"contour peak g_t {peak.g_t:.9g} at n_b {peak.n_b:.9g}")
    return 0


def _analysis_for(scenario: Scenario, curve):
    line = LoadLine(scenario.require("population"), curve.n_f)
    return find_equilibria(line, scenario.require("p_r"), curve)


def _cmd_classify(args) -> int:
    curve = load_curve(args.curve)
    scenario = _load_scenario(args.config)
    analysis = _analysis_for(scenario, curve)
    print(f"{analysis.channel_class.value} channel")
    for p in analysis.equilibria:
        n_b = "inf" if p.is_unbounded else f"{p.n_b:.9g}"
        print(f"  {p.kind.value}: g_t={p.g_t:.9g} n_b={n_b}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(analysis_to_json_obj(analysis), fh, indent=1)
            fh.write("\n")
    return 0


def _cmd_delay(args) -> int:
    curve = load_curve(args.curve)
    scenario = _load_scenario(args.config)
    if args.plr is not None:
        dist = delay_pmf(args.plr, scenario.require("p_r"), args.n_max)
        mean = mean_delay(args.plr, scenario.require("p_r"))
    else:
        analysis = _analysis_for(scenario, curve)
        dist, mean = operating_point_delay(analysis, curve, scenario.require("p_r"),
                                           args.n_max)
    pmf_to_csv(dist, args.out)
    print(f"mean delay {mean:.9g} frames (plr {dist.plr:.9g}, tail mass {dist.tail_mass:.3g})")
    return 0


def _cmd_simulate(args) -> int:
    scenario = _load_scenario(args.config)
    num_frames = args.num_frames if args.num_frames is not None else scenario.num_frames
    if num_frames is None:
        raise ValidationError("number of frames missing (flag --num-frames or scenario key)")
    seed = _resolve_seed(args, scenario)
    sim = SimScenario(
        config=scenario.system_config(),
        population=scenario.require("population"),
        policy=RetransmitPolicy(scenario.require("p_r")),
        num_frames=num_frames,
        seed=seed,
    )
    trace = run_simulation(sim)
    trace_to_csv(trace, args.out)
    summary = trace.summary
    summary_path = args.summary if args.summary else str(args.out) + ".summary.json"
    save_summary(summary, summary_path)
    print(f"avg throughput {summary.avg_throughput:.9g} pkt/slot, "
          f"avg backlog {summary.avg_backlog:.9g}, "
          f"completed {summary.completed_packets}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sicaloha",
        description="Stability and delay analysis for slotted random access with "
                    "successive interference cancellation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate-plr", help="build a Monte Carlo loss curve")
    p.add_argument("--config", required=True, help="scenario JSON file")
    p.add_argument("--out", required=True, help="curve JSON output path")
    p.add_argument("--csv", help="optional curve CSV output path")
    p.add_argument("--grid-max", type=float, default=None)
    p.add_argument("--grid-step", type=float, default=None)
    p.add_argument("--frames-per-point", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_estimate_plr)

    p = sub.add_parser("contour", help="trace the equilibrium contour of a curve")
    p.add_argument("--curve", required=True, help="curve JSON file")
    p.add_argument("--p-r", dest="p_r", type=float, required=True,
                   help="retransmission probability")
    p.add_argument("--out", required=True, help="contour CSV output path")
    p.set_defaults(func=_cmd_contour)

    p = sub.add_parser("classify", help="find equilibria and classify the channel")
    p.add_argument("--curve", required=True, help="curve JSON file")
    p.add_argument("--config", required=True, help="scenario JSON file")
    p.add_argument("--out", help="optional analysis JSON output path")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("delay", help="delay pmf and mean at the operating point")
    p.add_argument("--curve", required=True, help="curve JSON file")
    p.add_argument("--config", required=True, help="scenario JSON file")
    p.add_argument("--n-max", dest="n_max", type=int, default=DEFAULT_PMF_TERMS)
    p.add_argument("--plr", type=float, default=None,
                   help="override the loss ratio instead of using the operating point")
    p.add_argument("--out", required=True, help="pmf CSV output path")
    p.set_defaults(func=_cmd_delay)

    p = sub.add_parser("simulate", help="run the closed-loop simulator")
    p.add_argument("--config", required=True, help="scenario JSON file")
    p.add_argument("--num-frames", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="trace CSV output path")
    p.add_argument("--summary", help="summary JSON path (default: <out>.summary.json)")
    p.set_defaults(func=_cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except NoOperatingPointError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
