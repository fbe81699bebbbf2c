"""
Client-side table of values a read may legitimately return.

Writes to one cell are linearized by the proxy, so a written value can only
be stale for a read if a later write both started after it completed and
completed before the read began. Everything else (including writes still in
flight) is acceptable.

Log entries are numbered per cell and never renumbered. An entry is dropped
once it is dominated and no open read snapshot can still accept it, so the
log of a cell stays as small as the number of overlapping operations on it.
"""

import threading
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Hashable, Optional, Set


@dataclass
class _Entry:
    value: Optional[str]
    begin_tick: int
    end_tick: Optional[int] = None


@dataclass
class _Cell:
    entries: Dict[int, _Entry] = field(default_factory=dict)
    next_index: int = 0
    live: Set[int] = field(default_factory=set)
    # open snapshots: how many include each entry, and how many share each log length
    pinned: Counter = field(default_factory=Counter)
    open_lengths: Counter = field(default_factory=Counter)
    lock: threading.Lock = field(default_factory=threading.Lock)
    tick: int = 0


@dataclass(frozen=True)
class ReadSnapshot:
    live: FrozenSet[int]
    log_length: int


class ExpectedValues:
    """Thread-safe per-cell write log with domination pruning and compaction."""

    def __init__(self):
        self._cells: Dict[Hashable, _Cell] = {}
        self._lock = threading.Lock()

    def _cell(self, cell_id: Hashable) -> _Cell:
        cell = self._cells.get(cell_id)
        if cell is None:
            with self._lock:
                cell = self._cells.setdefault(cell_id, _Cell())
        return cell

    # ========== writes ==========

    def begin_write(self, cell_id: Hashable, value: str) -> int:
        """Log a write about to be sent; returns the token for end_write."""
        cell = self._cell(cell_id)
        with cell.lock:
            cell.tick += 1
            index = cell.next_index
            cell.next_index += 1
            cell.entries[index] = _Entry(value, cell.tick)
            cell.live.add(index)
            return index

    def end_write(self, cell_id: Hashable, index: int) -> None:
        """Mark a write acknowledged and retire the writes it dominates."""
        cell = self._cell(cell_id)
        with cell.lock:
            cell.tick += 1
            entry = cell.entries[index]
            entry.end_tick = cell.tick
            dominated = [
                i for i in cell.live
                if i != index and cell.entries[i].end_tick is not None and cell.entries[i].end_tick < entry.begin_tick
            ]
            cell.live.difference_update(dominated)
            self._compact(cell)

    def record(self, cell_id: Hashable, value: str) -> None:
        """A write that is already complete (load phase)."""
        self.end_write(cell_id, self.begin_write(cell_id, value))

    # ========== reads ==========

    def begin_read(self, cell_id: Hashable) -> ReadSnapshot:
        """Snapshot taken before a read is sent; hand it back through end_read."""
        cell = self._cell(cell_id)
        with cell.lock:
            snapshot = ReadSnapshot(frozenset(cell.live), cell.next_index)
            cell.pinned.update(snapshot.live)
            cell.open_lengths[snapshot.log_length] += 1
            return snapshot

    def end_read(self, cell_id: Hashable, snapshot: ReadSnapshot) -> None:
        """Release a snapshot; entries only it could accept become collectable."""
        cell = self._cell(cell_id)
        with cell.lock:
            cell.pinned.subtract(snapshot.live)
            cell.open_lengths[snapshot.log_length] -= 1
            cell.pinned += Counter()  # drops zero counts
            cell.open_lengths += Counter()
            self._compact(cell)

    def acceptable(self, cell_id: Hashable, snapshot: ReadSnapshot) -> Set[str]:
        cell = self._cell(cell_id)
        with cell.lock:
            indices = set(snapshot.live) | {i for i in cell.entries if i >= snapshot.log_length}
            return {cell.entries[i].value for i in indices if i in cell.entries and cell.entries[i].value is not None}

    def check(self, cell_id: Hashable, snapshot: ReadSnapshot, value: Optional[str]) -> bool:
        """True when `value` could be the result of a read that began at `snapshot`."""
        if value is None:
            return snapshot.log_length == 0
        return value in self.acceptable(cell_id, snapshot)

    # ========== housekeeping ==========

    @staticmethod
    def _compact(cell: _Cell) -> None:
        oldest_open = min(cell.open_lengths) if cell.open_lengths else cell.next_index
        stale = [
            i for i in cell.entries
            if i not in cell.live and i not in cell.pinned and i < oldest_open
        ]
        for i in stale:
            del cell.entries[i]

    def log_size(self, cell_id: Hashable) -> int:
        """Entries still retained for a cell."""
        cell = self._cell(cell_id)
        with cell.lock:
            return len(cell.entries)

    def __len__(self) -> int:
        return len(self._cells)
