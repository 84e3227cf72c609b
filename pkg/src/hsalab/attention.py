"""Sense-move-effect abstraction over the pegs-on-disks grid.

The attended cube is split into 8 octants.  Octant ``k`` (1..8) has
``k - 1 = bx + 2 by + 4 bz`` where ``b`` is 1 for the high half of an axis.
Grid bit ``k - 1`` of each occupancy vector refers to octant ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .grid_world import (
    HAND,
    ConfigError,
    ExtendedGroundState,
    GroundState,
    Loc,
    num_levels,
)

GRID_NAMES = ("p", "d", "pd", "e")
DEFAULT_GRIDS = ("p", "d")
ALL_GRIDS = GRID_NAMES
SENSOR_MODES = ("normal", "faulty")
VARIANTS = ("standard", "lookahead", "deictic")

# deictic cell-summary bits
CELL_PEG, CELL_DISK, CELL_PLACED, CELL_EMPTY = 1, 2, 4, 8


@dataclass(frozen=True)
class ObsConfig:
    grids: tuple[str, ...] = DEFAULT_GRIDS
    mode: str = "normal"
    history: int = 0  # lookahead only: how many of this stage's descriptors join the state

    def __post_init__(self):
        grids = tuple(self.grids)
        bad = [g for g in grids if g not in GRID_NAMES]
        if bad or not grids or len(set(grids)) != len(grids):
            raise ConfigError(f"grids must be a non-empty subset of {GRID_NAMES}, got {grids}")
        if self.mode not in SENSOR_MODES:
            raise ConfigError(f"sensor mode must be one of {SENSOR_MODES}, got {self.mode!r}")
        if self.history not in (0, 1):
            raise ConfigError(f"history must be 0 or 1, got {self.history!r}")
        # keep canonical order so keys are stable
        object.__setattr__(self, "grids", tuple(g for g in GRID_NAMES if g in grids))

    @property
    def mask(self) -> tuple[bool, bool, bool, bool]:
        return tuple(g in self.grids for g in GRID_NAMES)


@dataclass(frozen=True)
class AbstractObs:
    level: int
    t: int
    hand: int
    gp: int | None
    gd: int | None
    gpd: int | None
    ge: int | None

    @property
    def grids(self) -> tuple[int | None, ...]:
        return (self.gp, self.gd, self.gpd, self.ge)

    def key(self) -> tuple:
        """Hashable key; inactive grids are absent."""
        return (self.level, self.t, self.hand) + tuple(g for g in self.grids if g is not None)


def octant_of(loc, origin, half: int) -> int:
    """0-based octant index of ``loc`` inside the cube at ``origin``; -1 if outside."""
    dx = loc[0] - origin[0]
    dy = loc[1] - origin[1]
    dz = loc[2] - origin[2]
    side = 2 * half
    if not (0 <= dx < side and 0 <= dy < side and 0 <= dz < side):
        return -1
    return (dx >= half) + 2 * (dy >= half) + 4 * (dz >= half)


def octant_grids(pegs, disks, origin, side: int, faulty: bool = False) -> tuple[int, int, int, int]:
    """Occupancy bits (G_p, G_d, G_pd, G_e) for the 8 octants of a cube.

    ``side`` must be even.  G_e is set when an octant has at least one cell
    containing neither a peg nor a disk.
    """
    half = side // 2
    octant_cells = half * half * half
    disk_set = set(disks)
    peg_set = set(pegs)
    gp = gd = gpd = 0
    occupied = [0] * 8
    for p in pegs:
        if p == HAND:
            continue
        k = octant_of(p, origin, half)
        if k < 0:
            continue
        occupied[k] += 1
        if p in disk_set:
            gpd |= 1 << k
            if faulty:
                gp |= 1 << k
        else:
            gp |= 1 << k
    for d in disks:
        k = octant_of(d, origin, half)
        if k < 0:
            continue
        if d in peg_set:
            if faulty:
                gd |= 1 << k
        else:
            gd |= 1 << k
            occupied[k] += 1
    ge = 0
    for k in range(8):
        if occupied[k] < octant_cells:
            ge |= 1 << k
    return gp, gd, gpd, ge


def observe(s: ExtendedGroundState, obs: ObsConfig = ObsConfig()) -> AbstractObs:
    base = s.base
    if s.side < 2:
        raise ValueError("focus cube must have side >= 2 to be observed")
    grids = octant_grids(base.pegs, base.disks, s.origin, s.side, obs.mode == "faulty")
    masked = [g if on else None for g, on in zip(grids, obs.mask)]
    return AbstractObs(s.level, base.t, int(base.holding), *masked)


def _check_octant(a: int) -> int:
    if not isinstance(a, int) or not 1 <= a <= 8:
        raise ValueError(f"octant must be in 1..8, got {a!r}")
    return a - 1


def child_origin(origin, side: int, a: int) -> Loc:
    k = _check_octant(a)
    half = side // 2
    return Loc(origin[0] + half * (k & 1), origin[1] + half * ((k >> 1) & 1), origin[2] + half * ((k >> 2) & 1))


def descend(s: ExtendedGroundState, a: int, m: int | None = None) -> ExtendedGroundState:
    """Attend to octant ``a``: halve the focus cube and go one level deeper."""
    if s.side <= 2:
        raise ValueError("cannot descend from the last level; resolve the octant path instead")
    return ExtendedGroundState(s.base, s.level + 1, child_origin(s.origin, s.side, a), s.side // 2)


def target_cell(s: ExtendedGroundState, a: int) -> Loc:
    """Cell selected by octant ``a`` at the last level (focus side 2)."""
    if s.side != 2:
        raise ValueError("target_cell needs a focus of side 2")
    return child_origin(s.origin, 2, a)


def resolve(path, m: int) -> Loc:
    """Cell selected by a full octant path of length log2(m)."""
    path = list(path)
    levels = num_levels(m)
    if len(path) != levels:
        raise ValueError(f"octant path must have length {levels} for m={m}, got {len(path)}")
    x = y = z = 0
    for a in path:
        k = _check_octant(a)
        x = 2 * x + (k & 1)
        y = 2 * y + ((k >> 1) & 1)
        z = 2 * z + ((k >> 2) & 1)
    return Loc(x + 1, y + 1, z + 1)


def octant_path(loc, m: int) -> list[int]:
    """Greedy containment path to ``loc``; inverse of :func:`resolve`."""
    levels = num_levels(m)
    x, y, z = loc[0] - 1, loc[1] - 1, loc[2] - 1
    path = []
    for bit in range(levels - 1, -1, -1):
        path.append(1 + ((x >> bit) & 1) + 2 * ((y >> bit) & 1) + 4 * ((z >> bit) & 1))
    return path


def cell_summary(base: GroundState, loc, faulty: bool = False) -> int:
    """4-bit contents code of one cell: peg / disk / placed peg / empty."""
    peg = loc in base.pegs
    disk = loc in base.disks
    if not peg and not disk:
        return CELL_EMPTY
    if faulty:
        return (CELL_PEG if peg else 0) | (CELL_DISK if disk else 0)
    if peg and disk:
        return CELL_PLACED
    return CELL_PEG if peg else CELL_DISK


@dataclass(frozen=True)
class ActionDescriptor:
    variant: str
    payload: object

    def key(self):
        return self.payload


def encode_action(variant: str, s: ExtendedGroundState, a, obs: ObsConfig = ObsConfig()) -> ActionDescriptor:
    """Encode action ``a`` for the given representation variant.

    standard passes the octant through; lookahead returns the grids seen after
    attending to octant ``a`` (or the cell code at the last level); deictic
    takes a cell ``Loc`` and returns its contents code.
    """
    faulty = obs.mode == "faulty"
    if variant == "standard":
        _check_octant(a)
        return ActionDescriptor(variant, a)
    if variant == "lookahead":
        if s.side == 2:
            return ActionDescriptor(variant, ("cell", cell_summary(s.base, target_cell(s, a), faulty)))
        child = descend(s, a)
        grids = octant_grids(s.base.pegs, s.base.disks, child.origin, child.side, faulty)
        return ActionDescriptor(variant, ("grids",) + tuple(g for g, on in zip(grids, obs.mask) if on))
    if variant == "deictic":
        return ActionDescriptor(variant, cell_summary(s.base, Loc(*a), faulty))
    raise ValueError(f"unknown variant {variant!r}")


def count_abstract_state_bound(m: int, t_max: int) -> int:
    """Upper bound 2^33 log2(m) t_max on abstract observations."""
    return 2 ** 33 * num_levels(m) * t_max
