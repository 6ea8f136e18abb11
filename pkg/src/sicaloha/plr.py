"""Monte Carlo packet loss ratio curves.

The loss ratio of the cancellation receiver has no tractable closed form,
so it is tabulated by simulation: for each expected load value, many
independent frames are generated (packet count Poisson with mean
``load * frame_size``) and the fraction of packets left undecoded is
recorded. The resulting table is consumed through a linear interpolant by
the equilibrium and delay analyses.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .config import DegreeDistribution, SystemConfig, sample_degrees
from .errors import ValidationError
from .frame import peel_flat, sample_slot_sets

DEFAULT_GRID_MAX = 2.0
DEFAULT_GRID_STEP = 0.02
DEFAULT_FRAMES_PER_POINT = 2000

# cap on copies held in memory at once when batching frames
_BATCH_COPY_LIMIT = 400_000


@dataclass(frozen=True)
class PlrSample:
    """One tabulated point: loss ratio at a given expected load."""

    g_in: float
    plr: float
    frames: int
    se: float

    def __post_init__(self):
        if self.g_in < 0:
            raise ValidationError(f"g_in must be >= 0, got {self.g_in}")
        if not 0.0 <= self.plr <= 1.0:
            raise ValidationError(f"plr {self.plr} outside [0, 1]")
        if self.frames < 1:
            raise ValidationError(f"frames must be >= 1, got {self.frames}")
        if self.se < 0:
            raise ValidationError(f"se must be >= 0, got {self.se}")
        if self.g_in == 0 and self.plr != 0.0:
            raise ValidationError("loss at zero load must be exactly 0")


@dataclass(frozen=True)
class PlrCurve:
    """Tabulated loss ratio versus expected load for one receiver setup.

    The configuration fingerprint (frame size, degree distribution,
    iteration cap, master seed) travels with the samples so downstream
    results can be traced back to the simulation that produced them.
    """

    n_f: int
    i_max: int
    degree_dist: DegreeDistribution
    seed: int
    samples: tuple[PlrSample, ...]

    def __post_init__(self):
        if len(self.samples) < 2:
            raise ValidationError("a loss curve needs at least 2 samples")
        g = [s.g_in for s in self.samples]
        if any(b <= a for a, b in zip(g, g[1:])):
            raise ValidationError("curve samples must be strictly increasing in g_in")

    def fingerprint(self) -> tuple:
        return (self.n_f, self.degree_dist.entries, self.i_max)

    @property
    def g_values(self) -> np.ndarray:
        return np.array([s.g_in for s in self.samples])

    @property
    def plr_values(self) -> np.ndarray:
        return np.array([s.plr for s in self.samples])

    def peak_throughput(self) -> tuple[float, float]:
        """(load, throughput) of the best sample by ``g * (1 - plr(g))``."""
        g = self.g_values
        t = g * (1.0 - self.plr_values)
        i = int(np.argmax(t))
        return float(g[i]), float(t[i])


def default_grid(g_max: float = DEFAULT_GRID_MAX, step: float = DEFAULT_GRID_STEP) -> np.ndarray:
    """Evenly spaced load grid from 0 to ``g_max`` inclusive."""
    if g_max <= 0 or step <= 0:
        raise ValidationError("grid max and step must be positive")
    n = int(round(g_max / step))
    return np.round(np.linspace(0.0, n * step, n + 1), 12)


def estimate_plr(g_in: float, config: SystemConfig, num_frames: int,
                 rng: np.random.Generator, fixed_count: bool = False) -> tuple[float, float]:
    """Estimate the loss ratio at one expected load value.

    Simulates ``num_frames`` independent frames, each with a Poisson packet
    count of mean ``g_in * frame_size`` (or exactly ``round(g_in *
    frame_size)`` packets when ``fixed_count``), and returns the pooled loss
    fraction together with its binomial standard error. Zero traffic returns
    ``(0.0, 0.0)``.
    """
    if g_in < 0:
        raise ValidationError(f"g_in must be >= 0, got {g_in}")
    if num_frames < 1:
        raise ValidationError(f"num_frames must be >= 1, got {num_frames}")
    n_f = config.frame_size
    if fixed_count:
        counts = np.full(num_frames, int(round(g_in * n_f)), dtype=np.int64)
    else:
        counts = rng.poisson(g_in * n_f, size=num_frames).astype(np.int64)
    total = int(counts.sum())
    if total == 0:
        return 0.0, 0.0

    mean_copies = max(config.degree_dist.mean_degree() * g_in * n_f, 1.0)
    frames_per_batch = max(1, int(_BATCH_COPY_LIMIT / mean_copies))
    undecoded = 0
    for start in range(0, num_frames, frames_per_batch):
        batch = counts[start:start + frames_per_batch]
        k = int(batch.sum())
        if k == 0:
            continue
        degrees = sample_degrees(config.degree_dist, k, rng)
        copy_packet, copy_slot = sample_slot_sets(degrees, n_f, rng)
        # pack the batch into disjoint slot ranges: frames peel independently
        packet_frame = np.repeat(np.arange(batch.size), batch)
        copy_slot = copy_slot + packet_frame[copy_packet] * n_f
        decoded, _ = peel_flat(copy_packet, copy_slot, k, batch.size * n_f,
                               config.max_sic_iterations)
        undecoded += k - int(decoded.sum())

    plr = undecoded / total
    se = math.sqrt(plr * (1.0 - plr) / total)
    return plr, se


def build_curve(config: SystemConfig, grid, frames_per_point: int, seed: int,
                fixed_count: bool = False) -> PlrCurve:
    """Tabulate the loss ratio over a load grid.

    Each grid point runs on its own random stream derived from
    ``(seed, grid index)``, so results do not depend on evaluation order.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValidationError("load grid is empty")
    if grid[0] < 0:
        raise ValidationError("load grid must be nonnegative")
    if grid.size > 1 and (np.diff(grid) <= 0).any():
        raise ValidationError("load grid must be strictly increasing")
    if frames_per_point < 1:
        raise ValidationError(f"frames_per_point must be >= 1, got {frames_per_point}")

    streams = np.random.SeedSequence(seed).spawn(grid.size)
    samples = []
    for i, g in enumerate(grid):
        if g == 0.0:
            samples.append(PlrSample(0.0, 0.0, frames_per_point, 0.0))
            continue
        point_rng = np.random.default_rng(streams[i])
        plr, se = estimate_plr(float(g), config, frames_per_point, point_rng,
                               fixed_count=fixed_count)
        samples.append(PlrSample(float(g), plr, frames_per_point, se))
    return PlrCurve(config.frame_size, config.max_sic_iterations,
                    config.degree_dist, int(seed), tuple(samples))


def interpolate(curve: PlrCurve, g_in: float) -> float:
    """Loss ratio at an arbitrary load: linear between samples, exact at
    sample points, clamped to the end values outside the tabulated range."""
    if g_in < 0:
        raise ValidationError(f"g_in must be >= 0, got {g_in}")
    return float(np.interp(g_in, curve.g_values, curve.plr_values))


def smoothed(curve: PlrCurve, window: int = 3) -> PlrCurve:
    """Moving-average post-process for noisy curves (opt-in; the analyses
    consume raw curves by default). Endpoints use the shrunken window; a
    zero-load sample stays exactly 0."""
    if window < 1 or window % 2 == 0:
        raise ValidationError("window must be a positive odd integer")
    half = window // 2
    vals = curve.plr_values
    out = []
    for i, s in enumerate(curve.samples):
        lo, hi = max(0, i - half), min(len(vals), i + half + 1)
        plr = float(np.mean(vals[lo:hi])) if s.g_in > 0 else 0.0
        out.append(PlrSample(s.g_in, min(1.0, plr), s.frames, s.se))
    return PlrCurve(curve.n_f, curve.i_max, curve.degree_dist, curve.seed, tuple(out))


def curve_to_json_obj(curve: PlrCurve) -> dict:
    return {
        "n_f": curve.n_f,
        "i_max": curve.i_max,
        "degrees": curve.degree_dist.to_json_obj()["degrees"],
        "seed": curve.seed,
        "samples": [{"g_in": s.g_in, "plr": s.plr, "frames": s.frames, "se": s.se}
                    for s in curve.samples],
    }


def curve_from_json_obj(obj: dict) -> PlrCurve:
    if not isinstance(obj, dict):
        raise ValidationError("curve file must hold a JSON object")
    expected = {"n_f", "i_max", "degrees", "seed", "samples"}
    if set(obj) != expected:
        missing = expected - set(obj)
        extra = set(obj) - expected
        detail = []
        if missing:
            detail.append(f"missing {sorted(missing)}")
        if extra:
            detail.append(f"unknown {sorted(extra)}")
        raise ValidationError(f"curve object keys invalid: {', '.join(detail)}")
    dist = DegreeDistribution.from_json_obj({"degrees": obj["degrees"]})
    samples = []
    for i, s in enumerate(obj["samples"]):
        if not isinstance(s, dict) or set(s) != {"g_in", "plr", "frames", "se"}:
            raise ValidationError(f"sample {i} must have exactly the keys g_in, plr, frames, se")
        try:
            samples.append(PlrSample(float(s["g_in"]), float(s["plr"]),
                                     int(s["frames"]), float(s["se"])))
        except ValidationError as e:
            raise ValidationError(f"sample {i}: {e}") from None
    try:
        return PlrCurve(int(obj["n_f"]), int(obj["i_max"]), dist, int(obj["seed"]),
                        tuple(samples))
    except (TypeError, ValueError) as e:
        raise ValidationError(f"curve fields invalid: {e}") from None


def save_curve(curve: PlrCurve, destination) -> None:
    """Write a curve as JSON. ``load_curve(save_curve(c)) == c`` bit-exactly."""
    with open(destination, "w", encoding="utf-8") as fh:
        json.dump(curve_to_json_obj(curve), fh, indent=1)
        fh.write("\n")


def load_curve(source) -> PlrCurve:
    """Read a curve written by :func:`save_curve`, validating structure and
    value ranges."""
    with open(source, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as e:
            raise ValidationError(f"curve file is not valid JSON: {e}") from None
    return curve_from_json_obj(obj)


def curve_to_csv(curve: PlrCurve, destination) -> None:
    """CSV export with header ``g_in,plr,frames,se`` (9 significant digits)."""
    with open(destination, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["g_in", "plr", "frames", "se"])
        for s in curve.samples:
            writer.writerow([f"{s.g_in:.9g}", f"{s.plr:.9g}", s.frames, f"{s.se:.9g}"])
