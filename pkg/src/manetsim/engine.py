"""Deterministic discrete-event core: virtual clock, ordered queue, seeded RNG streams.

Time is integer nanoseconds so event ordering never depends on float rounding.
Ties are broken by insertion sequence number.  Randomness comes from named
streams (mobility / traffic / mac-jitter / protocol), each an independently
seeded Mersenne Twister; the per-stream seed is derived from the run seed and
the label via SHA-256, which is stable across platforms.  The generator choice
is pinned: changing it silently would invalidate golden traces.
"""

import hashlib
import heapq
import math
import random

# SimTime is an int count of nanoseconds since simulation start.
NS_PER_US = 1_000
NS_PER_MS = 1_000_000
NS_PER_S = 1_000_000_000


def seconds(t: float) -> int:
    """Convert float seconds to integer-nanosecond SimTime."""
    return round(t * NS_PER_S)


def fmt_time(t_ns: int) -> str:
    """Render SimTime as seconds with exactly 9 decimals (trace format)."""
    return f"{t_ns // NS_PER_S}.{t_ns % NS_PER_S:09d}"


class SchedulingError(Exception):
    """Raised when an event is scheduled in the past (a programming fault)."""


class Event:
    """A timestamped unit of work, dispatched in strict (at, seq) order."""

    __slots__ = ("at", "seq", "target", "kind", "fn", "args")

    def __init__(self, at, target, kind, fn, args=()):
        self.at = at
        self.seq = -1  # assigned by the engine on schedule()
        self.target = target
        self.kind = kind
        self.fn = fn
        self.args = args

    def __lt__(self, other):
        return (self.at, self.seq) < (other.at, other.seq)

    def __repr__(self):
        return f"Event(at={self.at}, seq={self.seq}, target={self.target!r}, kind={self.kind!r})"


class Engine:
    """Single-threaded event loop.  One instance per run, never shared."""

    def __init__(self):
        self.now = 0
        self._queue = []
        self._seq = 0
        self.dispatched = 0

    def schedule(self, event: Event) -> Event:
        if event.at < self.now:
            raise SchedulingError(
                f"event {event.kind!r} scheduled at {event.at} ns, clock is {self.now} ns"
            )
        event.seq = self._seq
        self._seq += 1
        # heap entries are (at, seq, event) so ordering compares plain ints
        heapq.heappush(self._queue, (event.at, event.seq, event))
        return event

    def schedule_at(self, at: int, fn, args=(), target=None, kind=None) -> Event:
        return self.schedule(Event(at, target, kind, fn, args))

    def schedule_in(self, delay_ns: int, fn, args=(), target=None, kind=None) -> Event:
        return self.schedule(Event(self.now + delay_ns, target, kind, fn, args))

    def run_until(self, end: int):
        """Dispatch every event with at <= end, then set the clock to end.

        Events beyond `end` stay queued but are never reached.  Returns
        (events dispatched, final clock).
        """
        queue = self._queue
        pop = heapq.heappop
        n = 0
        while queue and queue[0][0] <= end:
            at, _seq, ev = pop(queue)
            self.now = at
            ev.fn(*ev.args)
            n += 1
        self.now = end
        self.dispatched += n
        return n, self.now

    def pending(self) -> int:
        return len(self._queue)


def _derive_seed(seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{seed}/{label}".encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big")


class RandomStream:
    """A named, independently seeded pseudo-random stream.

    Same (seed, label) gives the identical draw sequence on any platform.
    """

    def __init__(self, seed: int, label: str):
        self.seed = seed
        self.label = label
        self._rng = random.Random(_derive_seed(seed, label))

    def uniform(self, lo: float, hi: float) -> float:
        """Draw uniformly from [lo, hi).  lo >= hi is a hard error."""
        if lo >= hi:
            raise ValueError(f"uniform bounds invalid: lo={lo} hi={hi}")
        v = lo + (hi - lo) * self._rng.random()
        if v >= hi:  # guard against float rounding at the top end
            v = math.nextafter(hi, lo)
        return v

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        return self._rng.randint(lo, hi)

    def random(self) -> float:
        return self._rng.random()

    def shuffle(self, seq) -> None:
        self._rng.shuffle(seq)
