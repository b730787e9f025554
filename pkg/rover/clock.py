"""Virtual mission clock. It never sleeps; it only records simulated time."""
from __future__ import annotations


class VirtualClock:
    def __init__(self, start_ms: int = 0) -> None:
        if start_ms < 0:
            raise ValueError("start_ms must be non-negative")
        self._now_ms = int(start_ms)

    @property
    def now_ms(self) -> int:
        return self._now_ms

    def advance(self, delta_ms: int) -> int:
        if delta_ms < 0:
            raise ValueError("delta_ms must be non-negative")
        self._now_ms += int(delta_ms)
        return self._now_ms

    def advance_to(self, target_ms: int) -> int:
        target = int(target_ms)
        if target < self._now_ms:
            raise ValueError(f"cannot move clock backwards from {self._now_ms} to {target}")
        self._now_ms = target
        return self._now_ms
