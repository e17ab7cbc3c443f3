"""Bounded-memory state storage for reverse sweeps.

Placement follows the dynamic checkpointing scheme of Wang, Moin & Iaccarino
(SIAM J. Sci. Comput. 2009), which needs no advance knowledge of the number of
steps.  Each checkpoint carries a level.  A checkpoint is *dispensable* when a
checkpoint with a larger step index has a strictly higher level.  When the
store is full, a new state evicts the dispensable checkpoint with the largest
index and enters at level 0; if none is dispensable the most recent checkpoint
is replaced and the newcomer is promoted one level above it.

During the reverse sweep a missing state is recomputed from the nearest
retained checkpoint at or before it, and the intermediate states are placed
with the same rule into the slots freed by the sweep.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import NoCheckpointAtOrBefore, OutOfOrderOffer

_STEP0_LEVEL = math.inf


class CheckpointStore:
    """Holds at most ``capacity`` snapshots, step 0 always among them.

    Parameters
    ----------
    capacity : int
        Maximum number of stored states, step 0 included.
    stepper : callable
        ``stepper(k, y_k) -> y_{k+1}``; must reproduce the forward step
        bit-for-bit (same step size schedule).
    """

    def __init__(self, capacity: int, stepper: Callable[[int, np.ndarray], np.ndarray]):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.capacity = int(capacity)
        self.stepper = stepper
        self.slots: dict[int, np.ndarray] = {}
        self.levels: dict[int, float] = {}
        self.forward_steps = 0
        self.recompute_steps = 0
        self.last_offered = -1
        self.peak_slots = 0

    def __len__(self):
        return len(self.slots)

    # -- placement -----------------------------------------------------------

    def _store(self, k, y, level):
        self.slots[k] = np.array(y, copy=True)
        self.levels[k] = level
        self.peak_slots = max(self.peak_slots, len(self.slots))

    def _evict(self, k):
        del self.slots[k]
        del self.levels[k]

    def _place(self, k, y, floor):
        """Place state ``k``; only checkpoints with index > ``floor`` may be evicted."""
        if len(self.slots) < self.capacity:
            self._store(k, y, 0)
            return True
        movable = sorted(i for i in self.slots if i > floor)
        if not movable:
            return False
        # scan from the latest: track the highest level seen at larger indices
        highest_later = -1.0
        victim = None
        for i in reversed(movable):
            if self.levels[i] < highest_later:
                victim = i
                break
            highest_later = max(highest_later, self.levels[i])
        if victim is not None:
            self._evict(victim)
            self._store(k, y, 0)
        else:
            latest = movable[-1]
            level = self.levels[latest]
            self._evict(latest)
            self._store(k, y, level + 1)
        return True

    def offer(self, k: int, y) -> bool:
        """Offer forward state ``k``; returns whether it was retained."""
        if k != self.last_offered + 1:
            raise OutOfOrderOffer(f"offered step {k} after step {self.last_offered}")
        self.last_offered = k
        if k == 0:
            self.slots.clear()
            self.levels.clear()
            self._store(0, y, _STEP0_LEVEL)
            return True
        self.forward_steps += 1
        return self._place(k, y, floor=0)

    # -- retrieval -----------------------------------------------------------

    def fetch(self, k: int) -> np.ndarray:
        """State at step ``k``, recomputed from the nearest checkpoint if needed.

        Checkpoints after ``k`` are released: a reverse sweep never asks for
        them again.
        """
        if k < 0 or k > self.last_offered:
            raise IndexError(f"step {k} outside offered range [0, {self.last_offered}]")
        for i in [i for i in self.slots if i > k]:
            self._evict(i)
        if k in self.slots:
            return self.slots[k].copy()
        before = [i for i in self.slots if i <= k]
        if not before:
            raise NoCheckpointAtOrBefore(k)
        j = max(before)
        y = self.slots[j].copy()
        for i in range(j, k):
            y = self.stepper(i, y)
            self.recompute_steps += 1
            if i + 1 < k:
                self._place(i + 1, y, floor=j)
        return y

    def overhead_report(self) -> dict:
        ratio = self.recompute_steps / self.forward_steps if self.forward_steps else 0.0
        frac = self.capacity / (self.forward_steps + 1) if self.forward_steps else 1.0
        return {
            "capacity": self.capacity,
            "capacity_fraction": min(frac, 1.0),
            "forward_steps": self.forward_steps,
            "recompute_steps": self.recompute_steps,
            "recompute_ratio": ratio,
        }


def reverse_sweep(store: CheckpointStore, n_states: int, visit=None):
    """Fetch states ``n_states-1 .. 0`` in order; ``visit(k, y_k)`` sees each."""
    for k in range(n_states - 1, -1, -1):
        y = store.fetch(k)
        if visit is not None:
            visit(k, y)


def offline_min_recompute(n_steps: int, capacity: int) -> int:
    """Fewest recomputed steps any schedule needs to reverse ``n_steps`` steps.

    Exact dynamic program for the offline problem in which the number of
    steps is known in advance (the setting of binomial checkpointing):
    the forward run may place checkpoints for free, and reversing a segment
    of ``m`` steps with ``s`` free slots costs
    ``F(m, s) = min_j [j + F(m - j, s - 1) + F(j, s)]``.  ``capacity`` counts
    the slot holding step 0, and the final state is treated as free, so the
    result is a lower bound for :class:`CheckpointStore` at the same
    capacity.  Cost is O(n^2 capacity); intended for n up to a few thousand.
    """
    n = int(n_steps)
    s_free = int(capacity) - 1
    if n <= 1:
        return 0
    m = np.arange(n + 1)
    F = m * (m - 1) // 2              # no free slot: recompute from step 0 each time
    G = F.copy()
    for _ in range(s_free):
        F_prev, G_prev = F, G
        F = np.zeros(n + 1, dtype=np.int64)
        G = np.zeros(n + 1, dtype=np.int64)
        for mm in range(2, n + 1):
            j = m[1:mm]
            F[mm] = np.min(j + F_prev[mm - j] + F[j])
            G[mm] = np.min(G_prev[mm - j] + F[j])
        if G[n] == 0:
            break
    return int(G[n])
