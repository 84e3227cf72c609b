"""Tabular pegs-on-disks: ground MDP and the focus-augmented (extended) ground MDP.

Cells are 1-indexed ``(x, y, z)`` triples in ``{1, ..., m}``.  A held peg sits
at the reserved location :data:`HAND`, which sorts before every grid cell.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from typing import NamedTuple


class ConfigError(ValueError):
    """Invalid domain or experiment configuration."""


class Loc(NamedTuple):
    x: int
    y: int
    z: int


HAND = Loc(0, 0, 0)


def is_power_of_two(k: int) -> bool:
    return k >= 1 and (k & (k - 1)) == 0


def num_levels(m: int) -> int:
    """Attention levels needed to reach single cells: log2(m)."""
    if not is_power_of_two(m) or m < 2:
        raise ConfigError(f"m must be a power of 2 and >= 2, got {m}")
    return m.bit_length() - 1


@dataclass(frozen=True)
class GridConfig:
    m: int
    n: int
    t_max: int | None = None

    def __post_init__(self):
        if not isinstance(self.m, int) or not is_power_of_two(self.m) or self.m < 2:
            raise ConfigError(f"m must be a power of 2 and >= 2, got {self.m!r}")
        if not isinstance(self.n, int) or self.n < 0:
            raise ConfigError(f"n must be a non-negative integer, got {self.n!r}")
        if 2 * self.n > self.m ** 3:
            raise ConfigError(f"cannot place {self.n} pegs and {self.n} disks on {self.m}^3 cells")
        if self.t_max is None:
            object.__setattr__(self, "t_max", max(1, 2 * self.n))
        if self.t_max < 1:
            raise ConfigError(f"t_max must be >= 1, got {self.t_max}")

    @property
    def levels(self) -> int:
        return num_levels(self.m)

    @property
    def cells(self) -> int:
        return self.m ** 3


@dataclass(frozen=True)
class GroundState:
    pegs: tuple[Loc, ...]
    disks: tuple[Loc, ...]
    t: int = 1
    terminal: bool = False

    def __post_init__(self):
        # canonical form: sets are stored sorted
        object.__setattr__(self, "pegs", tuple(sorted(self.pegs)))
        object.__setattr__(self, "disks", tuple(sorted(self.disks)))

    @property
    def holding(self) -> bool:
        return bool(self.pegs) and self.pegs[0] == HAND

    def placed(self) -> int:
        disks = set(self.disks)
        return sum(1 for p in self.pegs if p in disks)

    def validate(self, cfg: GridConfig) -> None:
        if len(self.pegs) != cfg.n or len(self.disks) != cfg.n:
            raise ValueError("peg/disk counts do not match the configuration")
        if len(set(self.pegs)) != len(self.pegs) or len(set(self.disks)) != len(self.disks):
            raise ValueError("two pegs or two disks share a location")
        for loc in self.pegs:
            if loc != HAND and not in_grid(loc, cfg.m):
                raise ValueError(f"peg outside grid: {loc}")
        for loc in self.disks:
            if not in_grid(loc, cfg.m):
                raise ValueError(f"disk outside grid: {loc}")


def in_grid(loc: Loc, m: int) -> bool:
    return 1 <= loc[0] <= m and 1 <= loc[1] <= m and 1 <= loc[2] <= m


def cell_from_index(i: int, m: int) -> Loc:
    return Loc(i % m + 1, (i // m) % m + 1, i // (m * m) + 1)


def index_from_cell(loc: Loc, m: int) -> int:
    return (loc[0] - 1) + m * (loc[1] - 1) + m * m * (loc[2] - 1)


def _as_rng(seed) -> random.Random:
    if isinstance(seed, random.Random):
        return seed
    return random.Random(seed)


def init_episode(cfg: GridConfig, seed=None) -> GroundState:
    """Sample 2n distinct cells; the first n hold pegs, the rest disks."""
    rng = _as_rng(seed)
    picks = rng.sample(range(cfg.cells), 2 * cfg.n)
    locs = [cell_from_index(i, cfg.m) for i in picks]
    return GroundState(pegs=tuple(locs[: cfg.n]), disks=tuple(locs[cfg.n:]), t=1)


def transition(cfg: GridConfig, s: GroundState, a: Loc) -> tuple[GroundState, float]:
    """Apply ``move-effect`` at cell ``a``; returns the next state and the reward."""
    if s.terminal:
        raise RuntimeError("transition called on a terminal state")
    if not in_grid(a, cfg.m):
        raise ValueError(f"action outside grid: {a}")
    a = Loc(*a)
    pegs = list(s.pegs)
    reward = 0.0
    if s.holding:
        if a not in pegs:
            pegs[0] = a
            if a in s.disks:
                reward = 1.0
    elif a in pegs:
        pegs[pegs.index(a)] = HAND
        if a in s.disks:
            reward = -1.0
    t = s.t + 1
    return GroundState(tuple(pegs), s.disks, t, t > cfg.t_max), reward


def count_ground_states(cfg: GridConfig) -> int:
    """|S| = C(m^3 + 1, n) C(m^3, n) t_max, exactly."""
    c = cfg.cells
    return math.comb(c + 1, cfg.n) * math.comb(c, cfg.n) * cfg.t_max


def optimal_return(cfg: GridConfig) -> int:
    # every placement costs one grasp stage and one place stage
    return min(cfg.n, cfg.t_max // 2)


@dataclass(frozen=True)
class ExtendedGroundState:
    """Ground state plus the attended cube: level and focus origin/side."""

    base: GroundState
    level: int
    origin: Loc
    side: int

    def key(self):
        return (self.base.pegs, self.base.disks, self.base.t, self.level, self.origin)


def extend(cfg: GridConfig, s: GroundState) -> ExtendedGroundState:
    return ExtendedGroundState(s, 1, Loc(1, 1, 1), cfg.m)


def with_base(es: ExtendedGroundState, base: GroundState) -> ExtendedGroundState:
    return replace(es, base=base)
