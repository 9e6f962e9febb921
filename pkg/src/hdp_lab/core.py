"""Uniform time grids, discrete paths, seeded RNG streams, Brownian sampling.

Every stochastic routine in the package draws from a counter-based Philox
generator addressed by ``(master_seed, stream_index)``.  Stream k is the
master generator jumped ahead k times, so ensemble members are independent
and bit-for-bit reproducible regardless of the order in which they are
simulated (or of how work is split across processes).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TimeGrid",
    "Path",
    "SeedSpec",
    "make_grid",
    "sample_brownian",
    "refine",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition 0 = t_0 < t_1 < ... < t_n = t_end with step h.

    Parameters
    ----------
    t_end : positive horizon.
    n_steps : number of steps n >= 1; the grid has n + 1 nodes.
    """

    t_end: float
    n_steps: int

    def __post_init__(self) -> None:
        if not (np.isfinite(self.t_end) and self.t_end > 0.0):
            raise ValueError(f"t_end must be finite and positive, got {self.t_end}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be an integer >= 1, got {self.n_steps}")
        object.__setattr__(self, "t_end", float(self.t_end))
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def h(self) -> float:
        """Mesh width t_end / n_steps."""
        return self.t_end / self.n_steps

    def times(self) -> np.ndarray:
        """All n_steps + 1 node times, including both endpoints."""
        return np.linspace(0.0, self.t_end, self.n_steps + 1)

    def same_as(self, other: "TimeGrid") -> bool:
        return self.t_end == other.t_end and self.n_steps == other.n_steps


@dataclass(frozen=True)
class Path:
    """A real-valued path sampled on a :class:`TimeGrid` (one value per node)."""

    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.grid.n_steps + 1,):
            raise ValueError(
                f"values must have shape ({self.grid.n_steps + 1},), got {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("path values must all be finite")
        object.__setattr__(self, "values", vals)

    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    @property
    def terminal(self) -> float:
        return float(self.values[-1])


def _require_same_grid(a: Path, b: Path) -> None:
    if not a.grid.same_as(b.grid):
        raise ValueError(
            f"paths live on different grids: ({a.grid.t_end}, {a.grid.n_steps}) "
            f"vs ({b.grid.t_end}, {b.grid.n_steps})"
        )


@dataclass(frozen=True)
class SeedSpec:
    """Address of one reproducible random stream.

    ``master_seed`` keys a Philox counter generator; ``stream_index`` jumps
    it ahead, yielding independent streams for ensemble members.  Merging
    results from streams is deterministic and order-independent.
    """

    master_seed: int
    stream_index: int = 0

    def __post_init__(self) -> None:
        if not (0 <= int(self.master_seed) < 2**64):
            raise ValueError("master_seed must fit in 64 bits")
        if int(self.stream_index) < 0:
            raise ValueError("stream_index must be >= 0")

    def generator(self) -> np.random.Generator:
        bitgen = np.random.Philox(key=self.master_seed)
        if self.stream_index:
            bitgen = bitgen.jumped(self.stream_index)
        return np.random.Generator(bitgen)

    def stream(self, offset: int) -> "SeedSpec":
        """A SeedSpec addressing stream ``stream_index + offset`` of the same master."""
        return SeedSpec(self.master_seed, self.stream_index + offset)


def make_grid(t_end: float, n_steps: int) -> TimeGrid:
    """Validated constructor for a uniform grid on [0, t_end]."""
    return TimeGrid(t_end, n_steps)


def sample_brownian(grid: TimeGrid, seed: SeedSpec) -> Path:
    """One standard Brownian path on ``grid``, started at 0.

    Increments are i.i.d. N(0, h); the value at node k is their running sum.
    """
    rng = seed.generator()
    steps = rng.normal(0.0, np.sqrt(grid.h), grid.n_steps)
    values = np.empty(grid.n_steps + 1)
    values[0] = 0.0
    np.cumsum(steps, out=values[1:])
    return Path(grid, values)


def refine(path: Path, factor: int, seed: SeedSpec) -> Path:
    """Refine a Brownian path by Brownian-bridge interpolation.

    Each coarse interval is subdivided into ``factor`` sub-steps; interior
    values are drawn sequentially from the bridge conditional on the two
    coarse endpoints, so the restriction of the output to the coarse nodes
    reproduces the input exactly.  With one coarse step of length t the
    inserted midpoint (factor = 2) has conditional variance t / 4.
    """
    if int(factor) != factor or factor < 2:
        raise ValueError(f"factor must be an integer >= 2, got {factor}")
    factor = int(factor)
    rng = seed.generator()
    n = path.grid.n_steps
    sub_h = path.grid.h / factor

    # block[i, j] = value at sub-node j of coarse interval i
    block = np.empty((n, factor + 1))
    block[:, 0] = path.values[:-1]
    block[:, factor] = path.values[1:]
    current = block[:, 0].copy()
    for j in range(1, factor):
        remaining = factor - (j - 1)  # sub-steps from current position to the right end
        mean = current + (block[:, factor] - current) / remaining
        var = sub_h * (remaining - 1) / remaining
        current = mean + np.sqrt(var) * rng.standard_normal(n)
        block[:, j] = current

    values = np.empty(n * factor + 1)
    values[0] = path.values[0]
    values[1:] = block[:, 1:].ravel()
    return Path(TimeGrid(path.grid.t_end, n * factor), values)
