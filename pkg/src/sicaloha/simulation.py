"""Closed-loop simulation of the retransmission feedback system.

Every frame: idle users generate fresh packets (finite pool: each thinking
user activates with probability ``p_0``; unbounded pool: a Poisson number
of single-packet users arrives), backlogged users retransmit with
probability ``p_r``, all transmissions are placed in one frame and peeled,
and acknowledgements arrive at frame end - successes leave, failures are
backlogged and eligible to retransmit from the very next frame.

Packet identity is tracked so the empirical delay distribution is measured
per packet, not just on average. Delay is counted in whole frames from the
first transmission to the success frame inclusive.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .config import (FinitePopulation, InfinitePopulation, PopulationModel,
                     RetransmitPolicy, SystemConfig, sample_degrees)
from .equilibrium import ChannelAnalysis
from .errors import ValidationError
from .frame import peel_flat, sample_slot_sets


@dataclass(frozen=True)
class SimScenario:
    """Everything a run needs: frame parameters, population, retransmission
    policy, length and seed."""

    config: SystemConfig
    population: PopulationModel
    policy: RetransmitPolicy
    num_frames: int
    seed: int

    def __post_init__(self):
        if self.num_frames < 1:
            raise ValidationError(f"num_frames must be >= 1, got {self.num_frames}")


@dataclass(frozen=True)
class WindowSummary:
    avg_throughput: float
    avg_backlog: float
    avg_packet_delay_frames: float
    completed_packets: int


@dataclass(frozen=True)
class SimTrace:
    """Per-frame time series of one run plus per-packet completion records.

    ``offered_new``/``decoded_new`` split the per-frame totals into fresh
    vs retransmitted traffic so backlog bookkeeping can be audited:
    ``n_backlogged[j] - n_backlogged[j-1] ==
    (offered_new - decoded_new) - (decoded - decoded_new)`` at every frame.
    """

    frame_size: int
    n_backlogged: np.ndarray     # backlog at each frame end
    offered: np.ndarray          # packets transmitted in the frame
    decoded: np.ndarray          # packets decoded in the frame
    offered_new: np.ndarray      # first-attempt packets among offered
    decoded_new: np.ndarray      # first-attempt packets among decoded
    completion_frame: np.ndarray  # per completed packet: frame of success
    completion_delay: np.ndarray  # per completed packet: delay in frames

    @property
    def num_frames(self) -> int:
        return len(self.n_backlogged)

    @property
    def throughput(self) -> np.ndarray:
        return self.decoded / self.frame_size

    @property
    def summary(self) -> WindowSummary:
        return summarize_window(self, 0, self.num_frames)


def run_simulation(scenario: SimScenario) -> SimTrace:
    """Run the feedback loop for ``num_frames`` frames, starting with an
    empty backlog. Bit-identical output for identical scenarios."""
    rng = np.random.default_rng(scenario.seed)
    cfg = scenario.config
    n_f = cfg.frame_size
    p_r = scenario.policy.retransmit_prob
    pop = scenario.population
    finite = isinstance(pop, FinitePopulation)
    num_frames = scenario.num_frames

    n_backlogged = np.zeros(num_frames, dtype=np.int64)
    offered = np.zeros(num_frames, dtype=np.int64)
    decoded = np.zeros(num_frames, dtype=np.int64)
    offered_new = np.zeros(num_frames, dtype=np.int64)
    decoded_new = np.zeros(num_frames, dtype=np.int64)
    completion_frame: list[int] = []
    completion_delay: list[int] = []

    if finite:
        m = pop.total_users
        backlogged = np.zeros(m, dtype=bool)
        first_tx = np.full(m, -1, dtype=np.int64)
    else:
        # one entry per backlogged packet: the frame of its first attempt
        backlog_first_tx = np.empty(0, dtype=np.int64)

    for j in range(num_frames):
        if finite:
            new_users = np.flatnonzero(~backlogged &
                                       (rng.random(m) < pop.activation_prob))
            retx_users = np.flatnonzero(backlogged & (rng.random(m) < p_r))
            n_new, n_retx = new_users.size, retx_users.size
        else:
            n_new = int(rng.poisson(pop.arrival_rate * n_f))
            retx_mask = rng.random(backlog_first_tx.size) < p_r
            n_retx = int(retx_mask.sum())

        k = n_new + n_retx
        if k:
            degrees = sample_degrees(cfg.degree_dist, k, rng)
            copy_packet, copy_slot = sample_slot_sets(degrees, n_f, rng)
            ok, _ = peel_flat(copy_packet, copy_slot, k, n_f, cfg.max_sic_iterations)
        else:
            ok = np.empty(0, dtype=bool)
        new_ok, retx_ok = ok[:n_new], ok[n_new:]

        if finite:
            failed_new = new_users[~new_ok]
            backlogged[failed_new] = True
            first_tx[failed_new] = j
            done = retx_users[retx_ok]
            backlogged[done] = False
            completion_frame.extend([j] * int(new_ok.sum()))
            completion_delay.extend([1] * int(new_ok.sum()))
            for d in (j - first_tx[done] + 1):
                completion_frame.append(j)
                completion_delay.append(int(d))
            first_tx[done] = -1
            backlog_size = int(backlogged.sum())
        else:
            retx_first = backlog_first_tx[retx_mask]
            done_delays = j - retx_first[retx_ok] + 1
            completion_frame.extend([j] * int(new_ok.sum()))
            completion_delay.extend([1] * int(new_ok.sum()))
            for d in done_delays:
                completion_frame.append(j)
                completion_delay.append(int(d))
            backlog_first_tx = np.concatenate([
                backlog_first_tx[~retx_mask],       # chose not to retransmit
                retx_first[~retx_ok],               # retransmitted and failed
                np.full(int(n_new - new_ok.sum()), j, dtype=np.int64),
            ])
            backlog_size = backlog_first_tx.size

        n_backlogged[j] = backlog_size
        offered[j] = k
        decoded[j] = int(ok.sum())
        offered_new[j] = n_new
        decoded_new[j] = int(new_ok.sum())

    return SimTrace(n_f, n_backlogged, offered, decoded, offered_new, decoded_new,
                    np.array(completion_frame, dtype=np.int64),
                    np.array(completion_delay, dtype=np.int64))


def summarize_window(trace: SimTrace, from_frame: int, to_frame: int) -> WindowSummary:
    """Averages over frames ``[from_frame, to_frame)``; packet delay is
    averaged over packets completed inside the window."""
    if not 0 <= from_frame < to_frame <= trace.num_frames:
        raise ValidationError(
            f"window [{from_frame}, {to_frame}) invalid for a {trace.num_frames}-frame trace")
    sl = slice(from_frame, to_frame)
    in_window = ((trace.completion_frame >= from_frame) &
                 (trace.completion_frame < to_frame))
    n_done = int(in_window.sum())
    avg_delay = float(trace.completion_delay[in_window].mean()) if n_done else float("nan")
    return WindowSummary(
        avg_throughput=float(trace.throughput[sl].mean()),
        avg_backlog=float(trace.n_backlogged[sl].mean()),
        avg_packet_delay_frames=avg_delay,
        completed_packets=n_done,
    )


def detect_divergence(trace: SimTrace, analysis: ChannelAnalysis) -> int | None:
    """First frame whose end-of-frame backlog exceeds the lowest unstable
    equilibrium and never drops below it again; ``None`` when the analysis
    has no unstable equilibrium or the trace never escapes for good."""
    unstable = [p for p in analysis.equilibria if not p.is_stable]
    if not unstable:
        return None
    threshold = unstable[0].n_b
    backlog = trace.n_backlogged
    below = np.flatnonzero(backlog < threshold)
    start = int(below[-1]) + 1 if below.size else 0
    above = np.flatnonzero(backlog[start:] > threshold)
    if above.size == 0:
        return None
    return start + int(above[0])


def trace_to_csv(trace: SimTrace, destination) -> None:
    """CSV export with header ``frame,n_backlogged,offered,decoded,throughput``."""
    with open(destination, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame", "n_backlogged", "offered", "decoded", "throughput"])
        for j in range(trace.num_frames):
            writer.writerow([j, trace.n_backlogged[j], trace.offered[j],
                             trace.decoded[j], f"{trace.throughput[j]:.9g}"])


def read_trace_csv(source) -> np.ndarray:
    """Read a trace CSV back as an ``(n, 5)`` float array."""
    with open(source, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["frame", "n_backlogged", "offered", "decoded", "throughput"]:
            raise ValidationError(f"unexpected trace CSV header: {header}")
        rows = [[float(x) for x in row] for row in reader]
    return np.array(rows, dtype=float).reshape(-1, 5)


def summary_to_json_obj(summary: WindowSummary) -> dict:
    delay = summary.avg_packet_delay_frames
    return {
        "avg_throughput": summary.avg_throughput,
        "avg_backlog": summary.avg_backlog,
        "avg_packet_delay_frames": None if delay != delay else delay,
        "completed_packets": summary.completed_packets,
    }


def save_summary(summary: WindowSummary, destination) -> None:
    with open(destination, "w", encoding="utf-8") as fh:
        json.dump(summary_to_json_obj(summary), fh, indent=1)
        fh.write("\n")
