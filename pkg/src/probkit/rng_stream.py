from dataclasses import dataclass

import numpy as np


class RngStream:
    """A seeded random stream. Streams with the same seed and different ids never share state."""

    def __init__(self, seed: int, stream_id: int = 0):
        if seed < 0 or stream_id < 0:
            raise ValueError("seed and stream id must be unsigned")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.gen = np.random.Generator(np.random.PCG64(sequence))

    def spawn(self, stream_id: int):
        """Returns a fresh stream with the same seed and another id."""
        return RngStream(self.seed, stream_id)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"interval lower end {self.lo} exceeds upper end {self.hi}")

    @property
    def width(self):
        return self.hi - self.lo

    def contains(self, x, tol: float = 0.0) -> bool:
        return self.lo - tol <= x <= self.hi + tol

    def is_point(self) -> bool:
        return self.lo == self.hi

    def to_list(self):
        return [self.lo, self.hi]
