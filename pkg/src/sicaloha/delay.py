"""Packet delay at the channel operating point.

A freshly transmitted packet succeeds within its first frame with
probability ``1 - plr``; otherwise its user turns backlogged and every
following frame retransmits with probability ``p_r``, succeeding with
probability ``1 - plr`` per attempt. Counting delay in whole frames from
the first transmission to the success frame gives

    P(D = 1) = 1 - plr
    P(D = n) = plr * p_r * (1 - plr) * s**(n - 2)   for n >= 2,

with per-frame survival ``s = 1 - p_r * (1 - plr)``, and the mean

    E[D] = 1 + plr / (p_r * (1 - plr)).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

from .config import check_retransmit_prob
from .errors import NoOperatingPointError, ValidationError
from .plr import PlrCurve, interpolate

DEFAULT_PMF_TERMS = 200
_NORMALIZATION_TOL = 1e-9


def _check_plr(plr: float) -> float:
    if not 0.0 <= plr < 1.0:
        raise ValidationError(
            f"plr must be in [0, 1), got {plr!r} (a packet that never succeeds has no delay)")
    return float(plr)


@dataclass(frozen=True)
class DelayDistribution:
    """Truncated delay pmf in frames, with the analytic mass of the
    truncated geometric tail."""

    plr: float
    p_r: float
    pmf: tuple[tuple[int, float], ...]
    tail_mass: float

    def __post_init__(self):
        if not self.pmf or self.pmf[0][0] != 1:
            raise ValidationError("pmf must start at delay 1")
        if any(p < 0 for _, p in self.pmf):
            raise ValidationError("pmf probabilities must be nonnegative")
        if self.pmf[0][1] != 1.0 - self.plr:
            raise ValidationError("P(D=1) must equal 1 - plr exactly")
        total = sum(p for _, p in self.pmf) + self.tail_mass
        if abs(total - 1.0) > _NORMALIZATION_TOL:
            raise ValidationError(f"pmf plus tail sums to {total}, expected 1")

    def probability(self, n: int) -> float:
        """P(D = n) for any n >= 1 (computed analytically past the
        truncation)."""
        if n < 1:
            raise ValidationError(f"delay must be >= 1 frame, got {n}")
        if n == 1:
            return 1.0 - self.plr
        s = 1.0 - self.p_r * (1.0 - self.plr)
        return self.plr * self.p_r * (1.0 - self.plr) * s ** (n - 2)


def delay_pmf(plr: float, p_r: float, n_max: int = DEFAULT_PMF_TERMS) -> DelayDistribution:
    """Delay distribution truncated at ``n_max`` frames.

    The geometric tail mass beyond the truncation, ``plr * s**(n_max - 1)``,
    is reported on the result so the distribution stays normalized.
    """
    _check_plr(plr)
    check_retransmit_prob(p_r)
    if n_max < 1:
        raise ValidationError(f"n_max must be >= 1, got {n_max}")
    s = 1.0 - p_r * (1.0 - plr)
    entries = [(1, 1.0 - plr)]
    base = plr * p_r * (1.0 - plr)
    for n in range(2, n_max + 1):
        entries.append((n, base * s ** (n - 2)))
    tail = plr * s ** (n_max - 1)
    return DelayDistribution(float(plr), float(p_r), tuple(entries), tail)


def mean_delay(plr: float, p_r: float) -> float:
    """Expected delay in frames: ``1 + plr / (p_r * (1 - plr))``."""
    _check_plr(plr)
    check_retransmit_prob(p_r)
    return 1.0 + plr / (p_r * (1.0 - plr))


def operating_point_delay(analysis, curve: PlrCurve, p_r: float,
                          n_max: int = DEFAULT_PMF_TERMS) -> tuple[DelayDistribution, float]:
    """Delay distribution and mean for a channel at its operating point.

    The loss ratio is evaluated at the operating point's total load (fresh
    load plus retransmissions). Overloaded channels have no operating point
    and raise :class:`NoOperatingPointError`.
    """
    check_retransmit_prob(p_r)
    op = analysis.operating_point
    if op is None:
        raise NoOperatingPointError(
            f"channel is {analysis.channel_class.value}: no operating point to evaluate delay at")
    g_in = op.g_t + op.n_b * p_r / curve.n_f
    plr_at = interpolate(curve, g_in)
    return delay_pmf(plr_at, p_r, n_max), mean_delay(plr_at, p_r)


def pmf_to_csv(dist: DelayDistribution, destination) -> None:
    """CSV export with header ``n,probability``."""
    with open(destination, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n", "probability"])
        for n, p in dist.pmf:
            writer.writerow([n, f"{p:.9g}"])
