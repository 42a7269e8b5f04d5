"""Slotted Monte-Carlo simulation of SU pairs hopping over PU-occupied channels.

Every node hops on the shared grid: at cycle position ``k`` an active node
is tuned to ``slot_to_channel[k]``. A pair meets when both ends are active
in the same slot; the meeting succeeds if the channel is idle and is a
forced block otherwise.

Demand model
------------
Each pair starts wanting to rendezvous at slot 0. The first success after
``waiting_since`` closes the demand and records its TTR (inclusive slot
count). The next demand opens at the following cycle boundary, where the
pair's schedule may change. Later meetings in the same cycle still count as
successes/blocks; they just do not produce TTR samples.

Random streams
--------------
The seed is split into three independent streams: selection keys, PU
occupancy and contention tie-breaks. Each cycle draws a fixed number of
values from each stream whatever the scheme is, so runs that differ only in
scheme see the same PU trajectory and nested row/column picks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .adaptive_policy import AdaptivePolicy, LoadThresholds
from .pu_activity import DEFAULT_MEAN_IDLE, PuField, PuMode
from .quorum_core import (
    GridQuorum,
    QuorumSelection,
    Scheme,
    build_grid,
    quorum_mask,
    quorum_slots,
    scheme_shape,
    selection_from_keys,
)

SLOT_DURATION_MS = 0.384
DEFAULT_SLOTS = 800_000

# control-exchange sizes that fit one 0.384 ms slot at 1 Mbps
RTS_BITS = 160
CTS_BITS = 112
DTS_BITS = 112
CONTROL_RATE_BPS = 1_000_000


class ReselectPolicy(str, Enum):
    PER_CYCLE = "cycle"
    ON_SUCCESS = "success"


@dataclass(frozen=True)
class ExperimentConfig:
    num_channels: int
    num_pairs: int = 1
    scheme: Scheme = Scheme.ONE_BY_ONE
    p_idle: Union[float, Tuple[float, ...]] = 1.0
    pu_mode: PuMode = PuMode.IID
    mean_idle: float = DEFAULT_MEAN_IDLE
    total_slots: int = DEFAULT_SLOTS
    seed: int = 0
    slot_duration_ms: float = SLOT_DURATION_MS
    contention_enabled: bool = False
    reselect_policy: ReselectPolicy = ReselectPolicy.PER_CYCLE
    thresholds: LoadThresholds = LoadThresholds()
    two_cols: bool = False
    # (tx, rx) selections held for the whole run instead of random draws
    fixed_selections: Optional[Tuple[Tuple[QuorumSelection, QuorumSelection], ...]] = None
    record_histogram: bool = False

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "pu_mode", PuMode(self.pu_mode))
        object.__setattr__(self, "reselect_policy", ReselectPolicy(self.reselect_policy))
        if not isinstance(self.p_idle, (int, float)):
            object.__setattr__(self, "p_idle", tuple(float(p) for p in self.p_idle))
        if self.fixed_selections is not None:
            object.__setattr__(self, "fixed_selections",
                               tuple((tx, rx) for tx, rx in self.fixed_selections))

    @property
    def grid(self) -> GridQuorum:
        return build_grid(self.num_channels)

    @property
    def mean_p_idle(self) -> float:
        if isinstance(self.p_idle, tuple):
            return float(np.mean(self.p_idle))
        return float(self.p_idle)

    def channel_idle_probs(self) -> np.ndarray:
        if isinstance(self.p_idle, tuple):
            return np.asarray(self.p_idle, dtype=float)
        return np.full(self.num_channels, float(self.p_idle))

    def validate(self) -> None:
        if self.num_channels < 1:
            raise ValueError(f"num_channels must be >= 1, got {self.num_channels}")
        n = self.grid.grid_side
        if self.num_pairs < 1:
            raise ValueError(f"num_pairs must be >= 1, got {self.num_pairs}")
        if self.total_slots < n * n:
            raise ValueError(f"total_slots ({self.total_slots}) must cover one cycle of {n * n} slots")
        probs = self.channel_idle_probs()
        if probs.shape != (self.num_channels,):
            raise ValueError(f"expected {self.num_channels} per-channel idle probabilities, "
                             f"got {probs.size}")
        if np.any((probs < 0) | (probs > 1)):
            raise ValueError(f"p_idle values must lie in [0, 1], got {self.p_idle}")
        if self.pu_mode is PuMode.MARKOV and self.mean_idle < 1:
            raise ValueError("mean_idle must be >= 1 slot for the markov PU model")
        if self.slot_duration_ms <= 0:
            raise ValueError("slot_duration_ms must be positive")
        if self.scheme is Scheme.CUSTOM and self.fixed_selections is None:
            raise ValueError("CUSTOM scheme requires fixed_selections")
        if self.fixed_selections is not None:
            if len(self.fixed_selections) != self.num_pairs:
                raise ValueError(f"got {len(self.fixed_selections)} fixed selection pairs "
                                 f"for {self.num_pairs} pairs")
            for tx, rx in self.fixed_selections:
                tx.check_side(n)
                rx.check_side(n)
        else:
            for scheme in self._schemes_used():
                rows, cols = scheme_shape(scheme, self.two_cols)
                if max(rows, cols) > n:
                    raise ValueError(f"scheme {scheme.value} does not fit a grid of side {n}")

    def _schemes_used(self) -> List[Scheme]:
        if self.scheme is Scheme.ADAPTIVE:
            return [Scheme.ONE_BY_ONE, Scheme.TWO_BY_ONE, Scheme.TWO_BY_TWO]
        return [self.scheme]


@dataclass
class PairState:
    pair_id: int
    selection_tx: Optional[QuorumSelection] = None
    selection_rx: Optional[QuorumSelection] = None
    quorum_tx: frozenset = frozenset()
    quorum_rx: frozenset = frozenset()
    # None while the current demand is satisfied and the next one has not opened
    waiting_since: Optional[int] = 0
    completed_ttrs: List[int] = field(default_factory=list)
    succeeded_this_cycle: bool = False

    def assign(self, tx: QuorumSelection, rx: QuorumSelection, n: int) -> None:
        self.selection_tx, self.selection_rx = tx, rx
        self.quorum_tx = quorum_slots(tx, n)
        self.quorum_rx = quorum_slots(rx, n)


@dataclass
class RunStats:
    slots_run: int = 0
    successes: int = 0
    forced_blocks: int = 0
    contention_losses: int = 0
    meetings: int = 0
    active_slot_count: int = 0
    ttr_samples: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    per_slot_success_histogram: Optional[np.ndarray] = None
    cycles_by_scheme: Dict[str, int] = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, RunStats):
            return NotImplemented
        hist_a, hist_b = self.per_slot_success_histogram, other.per_slot_success_histogram
        if (hist_a is None) != (hist_b is None):
            return False
        if hist_a is not None and not np.array_equal(_trim(hist_a), _trim(hist_b)):
            return False
        return (
            self.counters() == other.counters()
            and np.array_equal(self.ttr_samples, other.ttr_samples)
            and self.cycles_by_scheme == other.cycles_by_scheme
        )

    def counters(self) -> Tuple[int, ...]:
        return (self.slots_run, self.successes, self.forced_blocks,
                self.contention_losses, self.meetings, self.active_slot_count)


def _trim(hist: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(hist)
    return hist[: nz[-1] + 1] if nz.size else hist[:0]


@dataclass
class SlotEvent:
    slot: int
    cycle_pos: int
    channel: int
    channel_idle: bool
    active_nodes: int
    meetings: List[int]
    successes: List[int]
    forced_blocks: List[int]
    contention_losses: List[int]
    ttrs: List[Tuple[int, int]]


class World:
    """Mutable simulation state shared by the reference and the fast paths."""

    def __init__(self, config: ExperimentConfig):
        config.validate()
        self.config = config
        self.grid = config.grid
        self.n = self.grid.grid_side
        self.cycle_len = self.n * self.n
        self.channel_index = np.asarray(self.grid.slot_to_channel, dtype=np.int64) - 1

        sel_seq, pu_seq, cont_seq = np.random.SeedSequence(config.seed).spawn(3)
        self.sel_rng = np.random.default_rng(sel_seq)
        self.cont_rng = np.random.default_rng(cont_seq)
        self.pu = PuField(config.channel_idle_probs(), np.random.default_rng(pu_seq),
                          mode=config.pu_mode, mean_idle=config.mean_idle)

        self.policy = AdaptivePolicy(config.thresholds) if config.scheme is Scheme.ADAPTIVE else None
        self.pairs = [PairState(pair_id=i) for i in range(config.num_pairs)]
        self.cycles_by_scheme: Dict[str, int] = {}
        self.cycle = -1
        self.pu_block: Optional[np.ndarray] = None
        self.cont_keys: Optional[np.ndarray] = None
        if config.fixed_selections is not None:
            for pair, (tx, rx) in zip(self.pairs, config.fixed_selections):
                pair.assign(tx, rx, self.n)

    # -- cycle-boundary decisions, shared by both paths ---------------------

    def cycle_scheme(self, contending: int) -> Scheme:
        if self.policy is not None:
            scheme = self.policy.choose(contending)
        else:
            scheme = self.config.scheme
        self.cycles_by_scheme[scheme.value] = self.cycles_by_scheme.get(scheme.value, 0) + 1
        return scheme

    def draws_selections(self) -> bool:
        return self.config.fixed_selections is None

    def redraw_mask(self, cycle: int, succeeded_last: np.ndarray) -> np.ndarray:
        if not self.draws_selections():
            return np.zeros(self.config.num_pairs, dtype=bool)
        if cycle == 0 or self.config.reselect_policy is ReselectPolicy.PER_CYCLE:
            return np.ones(self.config.num_pairs, dtype=bool)
        return succeeded_last.copy()

    def draw_keys(self, cycles: int = 1) -> np.ndarray:
        """Ordering keys of shape (cycles, pairs, 2 nodes, 2 axes, n)."""
        return self.sel_rng.random((cycles, self.config.num_pairs, 2, 2, self.n))

    def draw_contention(self, cycles: int = 1) -> Optional[np.ndarray]:
        if not self.config.contention_enabled:
            return None
        return self.cont_rng.random((cycles, self.cycle_len, self.config.num_pairs))

    # -- reference path: one slot at a time ----------------------------------

    def begin_cycle(self, cycle: int) -> None:
        succeeded_last = np.array([p.succeeded_this_cycle for p in self.pairs])
        contending = self.config.num_pairs if cycle == 0 else int((~succeeded_last).sum())
        scheme = self.cycle_scheme(contending)
        redraw = self.redraw_mask(cycle, succeeded_last)
        if self.draws_selections():
            keys = self.draw_keys()[0]
            for pair, again in zip(self.pairs, redraw):
                if again:
                    tx = selection_from_keys(keys[pair.pair_id, 0], scheme, self.config.two_cols)
                    rx = selection_from_keys(keys[pair.pair_id, 1], scheme, self.config.two_cols)
                    pair.assign(tx, rx, self.n)
        contention = self.draw_contention()
        self.cont_keys = None if contention is None else contention[0]
        self.pu_block = self.pu.take(self.cycle_len)
        start = cycle * self.cycle_len
        for pair in self.pairs:
            if pair.waiting_since is None:
                pair.waiting_since = start
            pair.succeeded_this_cycle = False
        self.cycle = cycle

    def step_slot(self, slot: int) -> SlotEvent:
        """Advance the world by one slot and report what happened in it."""
        cycle, k = divmod(slot, self.cycle_len)
        if cycle != self.cycle:
            if k != 0 or cycle != self.cycle + 1:
                raise ValueError(f"slots must be stepped in order; got {slot} in cycle {self.cycle}")
            self.begin_cycle(cycle)
        idle_by_channel = self.pu_block[k]
        channel = self.grid.slot_to_channel[k]

        active = 0
        meeting: List[PairState] = []
        for pair in self.pairs:
            tx_on = k in pair.quorum_tx
            rx_on = k in pair.quorum_rx
            active += tx_on + rx_on
            if tx_on and rx_on:
                meeting.append(pair)

        # all meeting pairs hop to the same channel in a given slot, but group
        # anyway so that the rule does not depend on that property
        by_channel: Dict[int, List[PairState]] = {}
        for pair in meeting:
            by_channel.setdefault(channel, []).append(pair)

        successes, blocks, losses, ttrs = [], [], [], []
        for ch, group in by_channel.items():
            if not idle_by_channel[ch - 1]:
                blocks.extend(p.pair_id for p in group)
                continue
            winners = group
            if self.cont_keys is not None and len(group) > 1:
                best = max(group, key=lambda p: self.cont_keys[k, p.pair_id])
                winners = [best]
                losses.extend(p.pair_id for p in group if p is not best)
            for pair in winners:
                successes.append(pair.pair_id)
                pair.succeeded_this_cycle = True
                if pair.waiting_since is not None:
                    ttr = slot - pair.waiting_since + 1
                    pair.completed_ttrs.append(ttr)
                    ttrs.append((pair.pair_id, ttr))
                    pair.waiting_since = None
        successes.sort()
        ttrs.sort()
        return SlotEvent(
            slot=slot, cycle_pos=k, channel=channel,
            channel_idle=bool(idle_by_channel[channel - 1]), active_nodes=active,
            meetings=sorted(p.pair_id for p in meeting), successes=successes,
            forced_blocks=sorted(blocks), contention_losses=sorted(losses), ttrs=ttrs,
        )


def run_reference(config: ExperimentConfig) -> RunStats:
    """Slot-by-slot simulation. Slow; meant for checking :func:`run`."""
    world = World(config)
    stats = RunStats()
    hist: Dict[int, int] = {}
    ttrs: List[int] = []
    for slot in range(config.total_slots):
        ev = world.step_slot(slot)
        stats.successes += len(ev.successes)
        stats.forced_blocks += len(ev.forced_blocks)
        stats.contention_losses += len(ev.contention_losses)
        stats.meetings += len(ev.meetings)
        stats.active_slot_count += ev.active_nodes
        ttrs.extend(t for _, t in ev.ttrs)
        hist[len(ev.successes)] = hist.get(len(ev.successes), 0) + 1
    stats.slots_run = config.total_slots
    stats.ttr_samples = np.asarray(ttrs, dtype=np.int64)
    stats.cycles_by_scheme = dict(world.cycles_by_scheme)
    if config.record_histogram:
        out = np.zeros(config.num_pairs + 1, dtype=np.int64)
        for count, slots in hist.items():
            out[count] = slots
        stats.per_slot_success_histogram = out
    return stats


# -- fast path: whole cycles at a time ---------------------------------------

def _masks_from_keys(keys: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Quorum masks (..., n*n) from ordering keys (..., 2 axes, n)."""
    n = keys.shape[-1]
    rank = np.argsort(np.argsort(keys, axis=-1, kind="stable"), axis=-1, kind="stable")
    row_on = rank[..., 0, :] < rows
    col_on = rank[..., 1, :] < cols
    grid = row_on[..., :, None] | col_on[..., None, :]
    return grid.reshape(*grid.shape[:-2], n * n)


def _batch_cycles(config: ExperimentConfig, n_sq: int) -> int:
    sequential = (
        config.scheme is Scheme.ADAPTIVE
        or (config.reselect_policy is ReselectPolicy.ON_SUCCESS and config.fixed_selections is None)
    )
    if sequential:
        return 1
    budget = 2_000_000 // max(1, config.num_pairs * n_sq)
    return max(1, min(budget, 4096))


def run(config: ExperimentConfig) -> RunStats:
    """Simulate ``config.total_slots`` slots and return raw counters.

    Produces exactly the same :class:`RunStats` as :func:`run_reference`
    for the same config.
    """
    world = World(config)
    n = world.n
    n_sq = world.cycle_len
    P = config.num_pairs
    total_cycles = math.ceil(config.total_slots / n_sq)
    batch = _batch_cycles(config, n_sq)

    stats = RunStats(slots_run=config.total_slots)
    hist = np.zeros(P + 1, dtype=np.int64)
    ttr_chunks: List[np.ndarray] = []
    ttr_slots: List[np.ndarray] = []

    # current quorum masks per pair, (P, 2, n*n)
    masks = np.zeros((P, 2, n_sq), dtype=bool)
    if config.fixed_selections is not None:
        for i, (tx, rx) in enumerate(config.fixed_selections):
            masks[i, 0] = quorum_mask(tx, n)
            masks[i, 1] = quorum_mask(rx, n)
    succeeded_last = np.zeros(P, dtype=bool)
    last_success_cycle = np.full(P, -1, dtype=np.int64)
    pair_ids = np.arange(P)

    cycle = 0
    while cycle < total_cycles:
        b = min(batch, total_cycles - cycle)
        if batch == 1:
            contending = P if cycle == 0 else int((~succeeded_last).sum())
            schemes = [world.cycle_scheme(contending)]
        else:
            schemes = [world.cycle_scheme(P) for _ in range(b)]

        if world.draws_selections():
            keys = world.draw_keys(b)
            if batch == 1:
                redraw = world.redraw_mask(cycle, succeeded_last)
                rows, cols = scheme_shape(schemes[0], config.two_cols)
                fresh = _masks_from_keys(keys[0], rows, cols)
                masks[redraw] = fresh[redraw]
                cyc_masks = masks[None]
            else:
                # every cycle redraws every pair (PER_CYCLE, fixed scheme)
                rows, cols = scheme_shape(schemes[0], config.two_cols)
                cyc_masks = _masks_from_keys(keys, rows, cols)
        else:
            cyc_masks = np.broadcast_to(masks, (b,) + masks.shape)

        contention = world.draw_contention(b)
        pu = world.pu.take(b * n_sq).reshape(b, n_sq, -1)
        idle = np.take_along_axis(
            pu, np.broadcast_to(world.channel_index[None, :, None], (b, n_sq, 1)), axis=2
        )[..., 0]

        first_slot = cycle * n_sq
        valid = (first_slot + np.arange(b * n_sq).reshape(b, n_sq)) < config.total_slots

        tx_on = cyc_masks[:, :, 0, :] & valid[:, None, :]
        rx_on = cyc_masks[:, :, 1, :] & valid[:, None, :]
        meet = tx_on & rx_on
        cand = meet & idle[:, None, :]
        if contention is not None:
            keyed = np.where(cand, contention.transpose(0, 2, 1), -1.0)
            winner = np.argmax(keyed, axis=1)
            won = cand & (pair_ids[None, :, None] == winner[:, None, :])
            stats.contention_losses += int((cand & ~won).sum())
            cand = won
        success = cand

        stats.active_slot_count += int(tx_on.sum()) + int(rx_on.sum())
        stats.meetings += int(meet.sum())
        stats.forced_blocks += int((meet & ~idle[:, None, :]).sum())
        stats.successes += int(success.sum())
        if config.record_histogram:
            per_slot = success.sum(axis=1)[valid]
            hist += np.bincount(per_slot, minlength=P + 1)

        has = success.any(axis=2)                     # (b, P)
        first = np.argmax(success, axis=2)            # (b, P)
        cyc_idx = cycle + np.arange(b)[:, None]
        marked = np.where(has, cyc_idx, -1)
        running = np.maximum.accumulate(np.vstack([last_success_cycle[None], marked]), axis=0)
        prev = running[:-1]                           # last success cycle before each cycle
        bi, pi = np.nonzero(has)
        if bi.size:
            c = cyc_idx[bi, 0]
            ttr = (c - prev[bi, pi] - 1) * n_sq + first[bi, pi] + 1
            ttr_chunks.append(ttr)
            ttr_slots.append(c * n_sq + first[bi, pi])
        last_success_cycle = running[-1]
        succeeded_last = has[-1]
        cycle += b

    if ttr_chunks:
        ttr = np.concatenate(ttr_chunks)
        order = np.argsort(np.concatenate(ttr_slots), kind="stable")
        stats.ttr_samples = ttr[order].astype(np.int64)
    stats.cycles_by_scheme = dict(world.cycles_by_scheme)
    if config.record_histogram:
        stats.per_slot_success_histogram = hist
    return stats


def step_slot(world: World, slot: int) -> SlotEvent:
    return world.step_slot(slot)


def control_exchange_ms(rate_bps: int = CONTROL_RATE_BPS) -> float:
    """Airtime of one RTS/CTS/DTS exchange in milliseconds."""
    return (RTS_BITS + CTS_BITS + DTS_BITS) / rate_bps * 1e3
