"""Primary-user ON/OFF occupancy per channel."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

IDLE = True
BUSY = False

DEFAULT_MEAN_IDLE = 10.0


class PuMode(str, Enum):
    IID = "iid"
    MARKOV = "markov"


@dataclass
class PuChannelProcess:
    """Two-state occupancy process of a single channel.

    ``alpha`` and ``beta`` are the mean idle and busy periods in slots.
    In MARKOV mode the chain leaves IDLE with probability ``1/alpha`` and
    BUSY with probability ``1/beta`` each slot. An infinite ``beta`` (or a
    zero ``beta``) makes the chain absorbing in IDLE (or BUSY).
    In IID mode every slot is an independent draw.
    """

    alpha: float
    beta: float
    mode: PuMode = PuMode.IID
    current_state: bool = IDLE

    def __post_init__(self):
        self.mode = PuMode(self.mode)
        if not self.alpha > 0:
            raise ValueError(f"mean idle period must be positive, got {self.alpha}")
        if self.beta < 0:
            raise ValueError(f"mean busy period must be non-negative, got {self.beta}")
        if self.mode is PuMode.MARKOV:
            if self.alpha < 1:
                raise ValueError("MARKOV mode needs a mean idle period of at least 1 slot")
            if 0 < self.beta < 1 - 1e-9:
                raise ValueError("MARKOV mode needs a mean busy period of at least 1 slot")

    @property
    def p_idle(self) -> float:
        if math.isinf(self.beta):
            return 0.0
        return self.alpha / (self.alpha + self.beta)

    def stationary_idle_prob(self) -> float:
        return self.p_idle

    @property
    def leave_idle(self) -> float:
        if self.beta == 0:
            return 0.0
        if math.isinf(self.beta):
            return 1.0
        return 1.0 / self.alpha

    @property
    def leave_busy(self) -> float:
        if self.beta == 0:
            return 1.0
        if math.isinf(self.beta):
            return 0.0
        return min(1.0, 1.0 / self.beta)

    def reset(self, rng: np.random.Generator) -> bool:
        """Draw the current state from the stationary distribution."""
        self.current_state = bool(rng.random() < self.p_idle)
        return self.current_state

    def step(self, rng: np.random.Generator) -> bool:
        """Advance one slot; returns True when the channel is idle."""
        u = rng.random()
        if self.mode is PuMode.IID:
            self.current_state = bool(u < self.p_idle)
        elif self.current_state == IDLE:
            if u < self.leave_idle:
                self.current_state = BUSY
        elif u < self.leave_busy:
            self.current_state = IDLE
        return self.current_state

    def trajectory(self, length: int, rng: np.random.Generator) -> np.ndarray:
        """States for the next ``length`` slots, continuing from ``current_state``.

        MARKOV trajectories are assembled from geometric sojourns, which
        matches slot-by-slot stepping in distribution (the sojourn already in
        progress is memoryless).
        """
        if self.mode is PuMode.IID:
            out = rng.random(length) < self.p_idle
            if length:
                self.current_state = bool(out[-1])
            return out

        out = np.empty(length, dtype=bool)
        state = bool(self.current_state)
        pos = 0
        first = True
        while pos < length:
            leave = self.leave_idle if state == IDLE else self.leave_busy
            if leave == 0.0:
                run = length - pos
            elif first:
                # slots still to spend in the state already occupied
                run = int(rng.geometric(leave)) - 1
            else:
                run = int(rng.geometric(leave))
            run = min(run, length - pos)
            out[pos:pos + run] = state
            pos += run
            if pos < length:
                state = not state
            first = False
        if length:
            self.current_state = bool(out[-1])
        return out


def from_idle_probability(p_idle: float, mean_idle: float = DEFAULT_MEAN_IDLE,
                          mode: PuMode = PuMode.IID) -> PuChannelProcess:
    """Build a process whose stationary idle probability is ``p_idle``."""
    if not 0.0 <= p_idle <= 1.0:
        raise ValueError(f"p_idle must lie in [0, 1], got {p_idle}")
    mode = PuMode(mode)
    if mode is PuMode.MARKOV and mean_idle < 1:
        raise ValueError(f"mean_idle must be at least 1 slot in MARKOV mode, got {mean_idle}")
    alpha = float(mean_idle)
    beta = math.inf if p_idle == 0.0 else alpha * (1.0 - p_idle) / p_idle
    return PuChannelProcess(alpha=alpha, beta=beta, mode=mode,
                            current_state=IDLE if p_idle > 0.0 else BUSY)


class PuField:
    """Occupancy of all ``N`` channels, produced in fixed-size blocks.

    Blocks are generated ``block`` slots at a time regardless of how many
    slots callers ask for, so the random stream consumed depends only on
    the seed and the total number of slots read.
    """

    def __init__(self, p_idle: Sequence[float], rng: np.random.Generator,
                 mode: PuMode = PuMode.IID, mean_idle: float = DEFAULT_MEAN_IDLE,
                 block: int = 4096):
        self.mode = PuMode(mode)
        self.rng = rng
        self.p_idle = np.asarray(p_idle, dtype=float)
        self.block = int(block)
        self.procs = [from_idle_probability(float(p), mean_idle, self.mode) for p in self.p_idle]
        if self.mode is PuMode.MARKOV:
            for proc in self.procs:
                proc.reset(rng)
        self._buf = np.empty((0, len(self.procs)), dtype=bool)
        self._pos = 0

    @property
    def num_channels(self) -> int:
        return len(self.procs)

    def _refill(self) -> None:
        if self.mode is PuMode.IID:
            fresh = self.rng.random((self.block, self.num_channels)) < self.p_idle
        else:
            fresh = np.stack([p.trajectory(self.block, self.rng) for p in self.procs], axis=1)
        self._buf = np.concatenate([self._buf[self._pos:], fresh])
        self._pos = 0

    def take(self, count: int) -> np.ndarray:
        """Idle flags of shape ``(count, N)`` for the next ``count`` slots."""
        while self._buf.shape[0] - self._pos < count:
            self._refill()
        out = self._buf[self._pos:self._pos + count]
        self._pos += count
        return out
