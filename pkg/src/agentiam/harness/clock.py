"""Simulated time: a bare monotone tick counter."""

from __future__ import annotations

from ..errors import InvalidInputError

__all__ = ["SimClock"]


class SimClock:
    """The only time source inside a simulation.

    Ticks are integers and only move forward, so every timestamped
    artifact produced under the clock is reproducible.
    """

    def __init__(self, start: int = 0) -> None:
        if start < 0:
            raise InvalidInputError("clock cannot start before tick 0")
        self._now = start

    @property
    def now(self) -> int:
        return self._now

    def advance(self, ticks: int = 1) -> int:
        if ticks < 1:
            raise InvalidInputError("clock only advances by whole positive ticks")
        self._now += ticks
        return self._now

    def __repr__(self) -> str:
        return f"SimClock(now={self._now})"
