"""Event loop with interchangeable virtual and real clocks.

Everything timing-sensitive in the engine (mock token pacing, scheduler
transitions) runs through one totally ordered callback queue. Under the
virtual clock the loop jumps straight to the next deadline, so simulations
are deterministic and instant; under the real clock the same loop sleeps
until deadlines and accepts callbacks posted from other threads.
"""

from __future__ import annotations

import heapq
import itertools
import threading
import time
from typing import Callable, Optional


class VirtualClock:
    def __init__(self, start: float = 0.0):
        self._now = start

    def now(self) -> float:
        return self._now

    def advance_to(self, t: float) -> None:
        if t > self._now:
            self._now = t


class RealClock:
    def __init__(self):
        self._t0 = time.monotonic()

    def now(self) -> float:
        return time.monotonic() - self._t0


class EventLoop:
    """Single-consumer deadline queue; callbacks run strictly in (time, order
    of scheduling) order."""

    def __init__(self, virtual: bool = True):
        self.virtual = virtual
        self.clock = VirtualClock() if virtual else RealClock()
        self._heap = []
        self._seq = itertools.count()
        self._cond = threading.Condition()
        self._stopped = False

    def now(self) -> float:
        return self.clock.now()

    def schedule(self, delay: float, fn: Callable[[], None]) -> None:
        """Run fn at now()+delay. Thread-safe."""
        deadline = self.now() + max(0.0, delay)
        with self._cond:
            heapq.heappush(self._heap, (deadline, next(self._seq), fn))
            self._cond.notify()

    def post(self, fn: Callable[[], None]) -> None:
        self.schedule(0.0, fn)

    def run_until_idle(self) -> None:
        """Drain the queue. Virtual mode: the clock jumps between deadlines."""
        while True:
            with self._cond:
                if not self._heap:
                    return
                deadline, _, fn = heapq.heappop(self._heap)
            if self.virtual:
                self.clock.advance_to(deadline)
            else:
                delay = deadline - self.now()
                if delay > 0:
                    time.sleep(delay)
            fn()

    def run_forever(self) -> None:
        """Real-time service loop; returns after stop()."""
        while True:
            with self._cond:
                if self._stopped and not self._heap:
                    return
                if not self._heap:
                    self._cond.wait(timeout=0.1)
                    continue
                deadline, seq, fn = self._heap[0]
                delay = deadline - self.now()
                if delay > 0 and not self.virtual:
                    self._cond.wait(timeout=min(delay, 0.1))
                    continue
                heapq.heappop(self._heap)
            if self.virtual:
                self.clock.advance_to(deadline)
            fn()

    def stop(self) -> None:
        with self._cond:
            self._stopped = True
            self._cond.notify()
