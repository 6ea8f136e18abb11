"""Equilibrium contours, load lines, backlog drift and channel classification.

The channel is in equilibrium when the fresh load equals the throughput and
the expected backlog is constant. For a loss curve ``plr(g)`` and
retransmission probability ``p_r`` the equilibrium contour is traced
parametrically in the total load ``g``:

    g_t(g) = g * (1 - plr(g))            fresh load = throughput
    n_b(g) = g * plr(g) * n_f / p_r      backlog balancing the losses

The population model pins the fresh load to the backlog through the load
line (affine for a finite user pool, constant for Poisson arrivals), and
the one-frame expected backlog change

    drift(n_b) = g_in * n_f * plr(g_in) - n_b * p_r,
    g_in = load_line(n_b) + n_b * p_r / n_f

is positive where the backlog grows. Equilibria are the roots of the drift;
the sign pattern around each root classifies it (down-crossing = stable
sink, up-crossing = unstable). Working on the drift rather than intersecting
the contour polyline keeps the problem single-valued in the backlog.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .config import FinitePopulation, InfinitePopulation, PopulationModel, check_retransmit_prob
from .errors import ValidationError
from .plr import PlrCurve, interpolate

# a stable equilibrium counts as channel saturation when its throughput
# falls below this fraction of the contour peak
SATURATION_FRACTION = 0.05

# scan horizon for unbounded populations, in units of n_f / p_r; the
# contour backlog is bounded by (max tabulated load) * n_f / p_r, so this
# comfortably covers every finite root
INFINITE_HORIZON_FACTOR = 20.0

DEFAULT_SCAN_POINTS = 400
DEFAULT_REFINE_TOL = 1e-7


@dataclass(frozen=True)
class ContourPoint:
    """One equilibrium-contour point, parametrized by total load ``g_in``."""

    g_in: float
    g_t: float
    n_b: float

    def __post_init__(self):
        if self.g_in < 0 or self.g_t < -1e-15 or self.n_b < -1e-15:
            raise ValidationError("contour point components must be nonnegative")


@dataclass(frozen=True)
class EquilibriumContour:
    """Contour points in load order, plus the retransmission probability and
    the fingerprint of the loss curve they came from."""

    points: tuple[ContourPoint, ...]
    p_r: float
    curve_fingerprint: tuple

    def __post_init__(self):
        if not self.points:
            raise ValidationError("contour must be nonempty")
        first = self.points[0]
        if (first.g_in, first.g_t, first.n_b) != (0.0, 0.0, 0.0):
            raise ValidationError("contour must start at the origin")

    def peak(self) -> ContourPoint:
        """The point with maximum throughput (ties: smallest load)."""
        return max(self.points, key=lambda p: (p.g_t, -p.g_in))


@dataclass(frozen=True)
class LoadLine:
    """Fresh load as a function of backlog, fixed by the population model."""

    population: PopulationModel
    frame_size: int

    def __post_init__(self):
        if self.frame_size < 1:
            raise ValidationError(f"frame_size must be >= 1, got {self.frame_size}")

    @property
    def slope(self) -> float:
        """Backlog sensitivity of the fresh load (negative for a finite
        pool with nonzero activation, zero for Poisson arrivals)."""
        if isinstance(self.population, FinitePopulation):
            return -self.population.activation_prob / self.frame_size
        return 0.0


class EquilibriumKind(Enum):
    GLOBALLY_STABLE = "GloballyStable"
    LOCALLY_STABLE = "LocallyStable"
    UNSTABLE = "Unstable"
    SATURATION = "Saturation"


_STABLE_KINDS = {EquilibriumKind.GLOBALLY_STABLE, EquilibriumKind.LOCALLY_STABLE,
                 EquilibriumKind.SATURATION}


@dataclass(frozen=True)
class EquilibriumPoint:
    """A drift root: backlog level, throughput there, and its stability."""

    n_b: float
    g_t: float
    kind: EquilibriumKind

    @property
    def is_stable(self) -> bool:
        return self.kind in _STABLE_KINDS

    @property
    def is_unbounded(self) -> bool:
        return math.isinf(self.n_b)


class ChannelClass(Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    OVERLOADED = "Overloaded"


@dataclass(frozen=True)
class ChannelAnalysis:
    """Equilibrium structure of one scenario: the roots in backlog order,
    the channel classification, and the operating point (the lowest-backlog
    stable equilibrium) when one exists."""

    equilibria: tuple[EquilibriumPoint, ...]
    channel_class: ChannelClass
    operating_point: EquilibriumPoint | None


def compute_contour(curve: PlrCurve, p_r: float, g_in_grid=None) -> EquilibriumContour:
    """Trace the equilibrium contour over a load grid (default: the curve's
    own sample grid). The grid must start at 0, where the contour passes
    through the origin."""
    check_retransmit_prob(p_r)
    grid = curve.g_values if g_in_grid is None else np.asarray(g_in_grid, dtype=float)
    if grid.size == 0:
        raise ValidationError("contour grid is empty")
    if grid[0] != 0.0:
        raise ValidationError("contour grid must start at 0")
    if grid.size > 1 and (np.diff(grid) <= 0).any():
        raise ValidationError("contour grid must be strictly increasing")
    # multiplying by the reciprocal keeps the backlog column exactly linear
    # in 1/p_r across p_r values whose reciprocals are representable
    inv_p_r = 1.0 / p_r
    points = []
    for g in grid:
        loss = interpolate(curve, float(g))
        points.append(ContourPoint(float(g), float(g * (1.0 - loss)),
                                   float(g * loss * curve.n_f * inv_p_r)))
    return EquilibriumContour(tuple(points), float(p_r), curve.fingerprint())


def load_line_g_t(line: LoadLine, n_b: float) -> float:
    """Fresh (new-packet) load when ``n_b`` users are backlogged."""
    if n_b < 0:
        raise ValidationError(f"n_b must be >= 0, got {n_b}")
    pop = line.population
    if isinstance(pop, InfinitePopulation):
        return pop.arrival_rate
    if n_b > pop.total_users:
        raise ValidationError(f"backlog {n_b} exceeds population size {pop.total_users}")
    return max(0.0, (pop.total_users - n_b) * pop.activation_prob / line.frame_size)


def total_load(line: LoadLine, p_r: float, n_b: float) -> float:
    """Expected total load: fresh arrivals plus retransmissions."""
    return load_line_g_t(line, n_b) + n_b * p_r / line.frame_size


def drift(n_b: float, line: LoadLine, p_r: float, curve: PlrCurve) -> float:
    """Expected one-frame backlog change at backlog ``n_b``.

    Failed packets join the backlog at rate ``g_in * n_f * plr(g_in)`` while
    retransmitting users leave it at rate ``n_b * p_r``; positive drift
    means the backlog is expected to grow.
    """
    check_retransmit_prob(p_r)
    g_in = total_load(line, p_r, n_b)
    return g_in * curve.n_f * interpolate(curve, g_in) - n_b * p_r


def _bisect_root(f, lo: float, hi: float, f_lo: float, f_hi: float, tol: float) -> float:
    # f_lo and f_hi straddle zero; narrow to width tol
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if (f_lo > 0) == (f_mid > 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return 0.5 * (lo + hi)


def find_equilibria(line: LoadLine, p_r: float, curve: PlrCurve,
                    scan_points: int = DEFAULT_SCAN_POINTS,
                    refine_tol: float = DEFAULT_REFINE_TOL) -> ChannelAnalysis:
    """Locate and classify all drift roots for one scenario.

    The drift is scanned on an even backlog grid (up to the population size,
    or up to a fixed horizon for unbounded populations); each sign change is
    refined by bisection. A root where the drift turns positive-to-negative
    is stable, the reverse is unstable. The largest-backlog stable root is
    labelled saturation when its throughput is below
    ``SATURATION_FRACTION`` of the contour peak; for unbounded populations
    with positive drift persisting through the horizon, a synthetic
    saturation point at infinite backlog is recorded.
    """
    check_retransmit_prob(p_r)
    pop = line.population
    if isinstance(pop, FinitePopulation):
        n_max = float(pop.total_users)
        bounded = True
    else:
        n_max = INFINITE_HORIZON_FACTOR * line.frame_size / p_r
        bounded = False

    f = lambda n: drift(n, line, p_r, curve)
    grid = np.linspace(0.0, n_max, scan_points + 1)
    values = np.array([f(n) for n in grid])
    cell = grid[1] - grid[0]

    # interior roots from sign changes, refined by bisection
    roots: list[float] = []
    for i in range(len(grid) - 1):
        a, b = values[i], values[i + 1]
        if a == 0.0:
            if i == 0 or values[i - 1] != 0.0:
                roots.append(float(grid[i]))
            continue
        if b == 0.0:
            continue  # recorded when the next cell starts on it
        if (a > 0) != (b > 0):
            roots.append(_bisect_root(f, float(grid[i]), float(grid[i + 1]),
                                      float(a), float(b), refine_tol))
    if values[-1] == 0.0 and (len(values) < 2 or values[-2] != 0.0):
        roots.append(float(grid[-1]))

    # classify by the drift sign on each side of the root
    def classify(root: float) -> EquilibriumKind:
        eps = max(cell * 1e-3, refine_tol * 10)
        left = f(max(root - eps, 0.0))
        right = f(min(root + eps, n_max)) if root + eps <= n_max else f(n_max)
        if root - eps < 0.0:
            left = 0.0  # backlog cannot go below zero; stability set by the right side
        if left >= 0.0 and right <= 0.0:
            return EquilibriumKind.LOCALLY_STABLE
        if left <= 0.0 and right >= 0.0:
            return EquilibriumKind.UNSTABLE
        return EquilibriumKind.LOCALLY_STABLE if right <= 0 else EquilibriumKind.UNSTABLE

    kinds = [classify(r) for r in roots]

    # Monte Carlo jitter in the loss curve can carve a tiny spurious
    # root pair; drop such pairs rather than report phantom equilibria
    i = 0
    while i + 1 < len(roots):
        if roots[i + 1] - roots[i] < 2 * cell and kinds[i] != kinds[i + 1]:
            warnings.warn(
                f"discarding near-coincident equilibria at backlog {roots[i]:.3f} "
                f"and {roots[i + 1]:.3f} (likely loss-curve noise)")
            del roots[i:i + 2]
            del kinds[i:i + 2]
        else:
            i += 1

    points = [EquilibriumPoint(r, load_line_g_t(line, r), k)
              for r, k in zip(roots, kinds)]

    # unbounded population with growth persisting past the last root:
    # the backlog diverges, i.e. saturation at infinite backlog
    if not bounded and values[-1] > 0.0:
        points.append(EquilibriumPoint(math.inf, load_line_g_t(line, n_max),
                                       EquilibriumKind.SATURATION))

    # saturation label for the deepest stable root
    contour_peak = max(g * (1.0 - p) for g, p in
                       zip(curve.g_values, curve.plr_values))
    threshold = SATURATION_FRACTION * contour_peak
    for i in range(len(points) - 1, -1, -1):
        p = points[i]
        if p.is_stable and not p.is_unbounded:
            if p.g_t < threshold and p.n_b > 0:
                points[i] = EquilibriumPoint(p.n_b, p.g_t, EquilibriumKind.SATURATION)
            break

    stable = [p for p in points if p.is_stable]
    if len(points) == 1 and points[0].kind == EquilibriumKind.SATURATION:
        channel_class = ChannelClass.OVERLOADED
        operating = None
    elif len(stable) <= 1 and all(p.is_stable for p in points):
        if points and points[0].kind == EquilibriumKind.LOCALLY_STABLE:
            points[0] = EquilibriumPoint(points[0].n_b, points[0].g_t,
                                         EquilibriumKind.GLOBALLY_STABLE)
        channel_class = ChannelClass.STABLE
        operating = points[0] if points else None
    else:
        channel_class = ChannelClass.UNSTABLE
        operating = stable[0] if stable else None
        if operating is not None and operating.kind == EquilibriumKind.SATURATION:
            operating = None

    return ChannelAnalysis(tuple(points), channel_class, operating)


def design_population(target: ContourPoint, p_0: float, frame_size: int) -> int:
    """Size a finite user pool so its load line passes through the contour's
    maximum-throughput point: ``m = round(g_t * n_f / p_0 + n_b)``.

    The returned size keeps the zero-backlog fresh load at or above the
    target throughput; a warning is emitted in the marginal case where
    rounding down breaks that by a fraction of a user.
    """
    if p_0 <= 0:
        raise ValidationError(f"activation probability must be > 0, got {p_0}")
    m = round(target.g_t * frame_size / p_0 + target.n_b)
    if (m / frame_size) * p_0 < target.g_t:
        warnings.warn(
            f"designed population {m} leaves peak fresh load "
            f"{(m / frame_size) * p_0:.6g} below the target throughput {target.g_t:.6g}")
    return int(m)


def contour_to_csv(contour: EquilibriumContour, destination) -> None:
    """CSV export with header ``g_in,g_t,n_b`` (9 significant digits)."""
    with open(destination, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["g_in", "g_t", "n_b"])
        for p in contour.points:
            writer.writerow([f"{p.g_in:.9g}", f"{p.g_t:.9g}", f"{p.n_b:.9g}"])


def read_contour_csv(source) -> np.ndarray:
    """Read a contour CSV back as an ``(n, 3)`` float array."""
    with open(source, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["g_in", "g_t", "n_b"]:
            raise ValidationError(f"unexpected contour CSV header: {header}")
        rows = [[float(x) for x in row] for row in reader]
    return np.array(rows, dtype=float).reshape(-1, 3)


def contour_to_json_obj(contour: EquilibriumContour) -> dict:
    n_f, degree_entries, i_max = contour.curve_fingerprint
    return {
        "p_r": contour.p_r,
        "n_f": n_f,
        "i_max": i_max,
        "degrees": [{"l": d, "p": p} for d, p in degree_entries],
        "points": [{"g_in": p.g_in, "g_t": p.g_t, "n_b": p.n_b} for p in contour.points],
    }


def _point_to_json_obj(p: EquilibriumPoint) -> dict:
    return {
        "n_b": None if p.is_unbounded else p.n_b,
        "g_t": p.g_t,
        "kind": p.kind.value,
    }


def analysis_to_json_obj(analysis: ChannelAnalysis) -> dict:
    """JSON form of a channel analysis; an unbounded saturation backlog is
    encoded as ``null``."""
    return {
        "channel_class": analysis.channel_class.value,
        "equilibria": [_point_to_json_obj(p) for p in analysis.equilibria],
        "operating_point": (None if analysis.operating_point is None
                            else _point_to_json_obj(analysis.operating_point)),
    }


def save_analysis(analysis: ChannelAnalysis, destination) -> None:
    with open(destination, "w", encoding="utf-8") as fh:
        json.dump(analysis_to_json_obj(analysis), fh, indent=1)
        fh.write("\n")
