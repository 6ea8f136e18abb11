"""Core configuration types: burst degree distributions, system parameters,
population models and the retransmission policy.

All types are immutable after construction; random sampling always takes an
explicit numpy Generator so there is no hidden global state.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

# Tolerance on the probability sum for user-supplied distributions (loose,
# to absorb decimal-literal rounding) and for internally built ones (strict).
USER_PROB_TOL = 1e-6
INTERNAL_PROB_TOL = 1e-9


@dataclass(frozen=True)
class DegreeDistribution:
    """Probability mass over the number of per-frame copies of a packet.

    ``entries`` is a sorted tuple of ``(degree, probability)`` pairs with
    distinct degrees >= 1 and probabilities summing to 1.
    """

    entries: tuple[tuple[int, float], ...]

    def __post_init__(self):
        if not self.entries:
            raise ValidationError("degree distribution needs at least one entry")
        degrees = [d for d, _ in self.entries]
        probs = [p for _, p in self.entries]
        for d in degrees:
            if not isinstance(d, (int, np.integer)) or d < 1:
                raise ValidationError(f"burst degree must be a positive integer, got {d!r}")
        if len(set(degrees)) != len(degrees):
            raise ValidationError(f"duplicate burst degrees in {degrees}")
        for p in probs:
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"degree probability {p} outside [0, 1]")
        total = sum(probs)
        if abs(total - 1.0) > INTERNAL_PROB_TOL:
            raise ValidationError(f"degree probabilities sum to {total}, expected 1")
        ordered = tuple(sorted((int(d), float(p)) for d, p in self.entries))
        object.__setattr__(self, "entries", ordered)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(d for d, _ in self.entries)

    @property
    def probabilities(self) -> tuple[float, ...]:
        return tuple(p for _, p in self.entries)

    @property
    def max_degree(self) -> int:
        return self.entries[-1][0]

    @property
    def is_regular(self) -> bool:
        return len(self.entries) == 1

    def mean_degree(self) -> float:
        return sum(d * p for d, p in self.entries)

    def to_json_obj(self) -> dict:
        return {"degrees": [{"l": d, "p": p} for d, p in self.entries]}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "DegreeDistribution":
        if not isinstance(obj, dict) or set(obj) != {"degrees"}:
            raise ValidationError("degree distribution object must have exactly the key 'degrees'")
        items = obj["degrees"]
        if not isinstance(items, list):
            raise ValidationError("'degrees' must be a list")
        entries = []
        for item in items:
            if not isinstance(item, dict) or set(item) != {"l", "p"}:
                raise ValidationError(f"degree entry {item!r} must have exactly the keys 'l' and 'p'")
            entries.append((item["l"], item["p"]))
        return make_irregular(entries)


def make_regular(degree: int) -> DegreeDistribution:
    """Distribution that puts all mass on a single copy count.

    ``make_regular(2)`` is the classic two-copies-per-packet scheme;
    ``make_regular(1)`` degenerates to plain slotted ALOHA.
    """
    if not isinstance(degree, (int, np.integer)) or degree < 1:
        raise ValidationError(f"burst degree must be a positive integer, got {degree!r}")
    return DegreeDistribution(((int(degree), 1.0),))


def make_irregular(entries) -> DegreeDistribution:
    """Validate and normalize a user-supplied degree distribution.

    Probabilities must already sum to 1 within ``USER_PROB_TOL``; they are
    then renormalized exactly. Zero-probability entries are dropped.
    """
    entries = list(entries)
    if not entries:
        raise ValidationError("degree distribution needs at least one entry")
    for d, p in entries:
        if p < 0:
            raise ValidationError(f"degree probability {p} is negative")
    total = sum(p for _, p in entries)
    if abs(total - 1.0) > USER_PROB_TOL:
        raise ValidationError(f"degree probabilities sum to {total}, expected 1 within {USER_PROB_TOL}")
    kept = [(d, p / total) for d, p in entries if p > 0]
    return DegreeDistribution(tuple(kept))


def sample_degree(dist: DegreeDistribution, rng: np.random.Generator) -> int:
    """Draw one burst degree from the distribution."""
    return int(sample_degrees(dist, 1, rng)[0])


def sample_degrees(dist: DegreeDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` burst degrees as an int array (vectorized form of
    :func:`sample_degree`)."""
    if dist.is_regular:
        return np.full(n, dist.entries[0][0], dtype=np.int64)
    degrees = np.array(dist.degrees, dtype=np.int64)
    probs = np.array(dist.probabilities, dtype=float)
    return rng.choice(degrees, size=n, p=probs)


@dataclass(frozen=True)
class SystemConfig:
    """Physical-layer frame parameters: slots per frame, cancellation
    iteration budget, and the burst degree distribution."""

    frame_size: int
    max_sic_iterations: int
    degree_dist: DegreeDistribution

    def __post_init__(self):
        if not isinstance(self.frame_size, (int, np.integer)) or self.frame_size < 1:
            raise ValidationError(f"frame_size must be a positive integer, got {self.frame_size!r}")
        if not isinstance(self.max_sic_iterations, (int, np.integer)) or self.max_sic_iterations < 1:
            raise ValidationError(
                f"max_sic_iterations must be a positive integer, got {self.max_sic_iterations!r}")
        # every copy of a packet occupies a distinct slot, so the degree
        # can never exceed the frame size
        if self.degree_dist.max_degree > self.frame_size:
            raise ValidationError(
                f"max burst degree {self.degree_dist.max_degree} exceeds frame size {self.frame_size}")
        object.__setattr__(self, "frame_size", int(self.frame_size))
        object.__setattr__(self, "max_sic_iterations", int(self.max_sic_iterations))


@dataclass(frozen=True)
class FinitePopulation:
    """Fixed pool of users; each idle user starts a new packet per frame
    with probability ``activation_prob``."""

    total_users: int
    activation_prob: float

    def __post_init__(self):
        if not isinstance(self.total_users, (int, np.integer)) or self.total_users < 1:
            raise ValidationError(f"total_users must be a positive integer, got {self.total_users!r}")
        if not 0.0 <= self.activation_prob <= 1.0:
            raise ValidationError(f"activation_prob {self.activation_prob} outside [0, 1]")
        object.__setattr__(self, "total_users", int(self.total_users))
        object.__setattr__(self, "activation_prob", float(self.activation_prob))


@dataclass(frozen=True)
class InfinitePopulation:
    """Unbounded user pool with Poisson packet arrivals at ``arrival_rate``
    packets per slot."""

    arrival_rate: float

    def __post_init__(self):
        if not self.arrival_rate >= 0.0:
            raise ValidationError(f"arrival_rate must be >= 0, got {self.arrival_rate!r}")
        object.__setattr__(self, "arrival_rate", float(self.arrival_rate))


PopulationModel = FinitePopulation | InfinitePopulation


@dataclass(frozen=True)
class RetransmitPolicy:
    """Geometric retransmission: a backlogged user retries each frame with
    probability ``retransmit_prob``. Zero is rejected because it would
    strand backlogged users forever."""

    retransmit_prob: float

    def __post_init__(self):
        check_retransmit_prob(self.retransmit_prob)
        object.__setattr__(self, "retransmit_prob", float(self.retransmit_prob))


def check_retransmit_prob(p_r: float) -> float:
    if not 0.0 < p_r <= 1.0:
        raise ValidationError(f"retransmit probability {p_r!r} outside (0, 1]")
    return float(p_r)
