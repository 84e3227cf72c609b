"""Schedules for hierarchical pose selection, sample-count arithmetic and top-n scoring."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sensor_geometry import Pose

_EPS = 1e-9


def _ceil(x: float) -> int:
    # ratios like 0.36 / 0.005625 can land a hair off an integer; snap those
    r = round(x)
    if abs(x - r) <= _EPS * max(1.0, abs(x)):
        return int(r)
    return math.ceil(x)


def _ceil_log(ratio: float, base: float) -> int:
    if ratio <= 1.0:
        return 0
    return _ceil(math.log(ratio) / math.log(base))


@dataclass
class Level:
    z: np.ndarray  # observation volume (m)
    d: np.ndarray  # offset extents: x, y, z (m), then three angles (rad)
    samples: tuple[int, ...]  # samples per free dimension

    @property
    def kind(self) -> str:
        return "position" if np.any(self.d[:3] > 0) else "orientation"


@dataclass
class HsaSchedule:
    initial_pose: Pose
    levels: list[Level] = field(default_factory=list)

    def __post_init__(self):
        if not self.levels:
            raise ValueError("a schedule needs at least one level")
        for lv in self.levels:
            if np.any(lv.z <= 0):
                raise ValueError("observation volumes must be positive")
            if np.any(lv.d < 0) or not np.any(lv.d > 0):
                raise ValueError("offset extents must be non-negative with at least one free dimension")

    @property
    def L(self) -> int:
        return len(self.levels)

    def to_config(self) -> str:
        """Serialize as ``key = value`` lines."""
        t = self.initial_pose.translation
        lines = [f"schedule.levels = {self.L}", "schedule.t1 = " + " ".join(repr(float(v)) for v in t)]
        R = self.initial_pose.rotation
        lines.append("schedule.r1 = " + " ".join(repr(float(v)) for v in R.ravel()))
        for i, lv in enumerate(self.levels, 1):
            lines.append(f"schedule.{i}.z = " + " ".join(repr(float(v)) for v in lv.z))
            lines.append(f"schedule.{i}.d = " + " ".join(repr(float(v)) for v in lv.d))
            lines.append(f"schedule.{i}.samples = " + " ".join(str(s) for s in lv.samples))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_config(cls, values: dict) -> "HsaSchedule":
        floats = lambda key: np.array([float(x) for x in values[key].split()])
        L = int(values["schedule.levels"])
        pose = Pose(floats("schedule.r1").reshape(3, 3), floats("schedule.t1"))
        levels = [
            Level(floats(f"schedule.{i}.z"), floats(f"schedule.{i}.d"),
                  tuple(int(s) for s in values[f"schedule.{i}.samples"].split()))
            for i in range(1, L + 1)
        ]
        return cls(pose, levels)


def position_levels(w, p, n: int) -> int:
    """max_i ceil(log_n(w_i / p_i)), clamped to at least 1."""
    w = np.asarray(w, dtype=float).reshape(3)
    p = np.asarray(p, dtype=float).reshape(3)
    if np.any(w <= 0) or np.any(p <= 0):
        raise ValueError("workspace and precision must be positive")
    if np.any(p > w):
        raise ValueError("precision exceeds the workspace size on some axis")
    if n < 2:
        raise ValueError("need at least 2 samples per axis")
    return max(1, max(_ceil_log(wi / pi, n) for wi, pi in zip(w, p)))


def build_schedule(w, p, n: int, object_size=0.0, center=None, angular_precision=None,
                   angular_ranges=None) -> HsaSchedule:
    """Position levels first, then one level per Euler angle if requested.

    ``angular_precision`` and ``angular_ranges`` are in radians; ranges default
    to a full turn for each angle.
    """
    w = np.asarray(w, dtype=float).reshape(3)
    L = position_levels(w, p, n)
    obj = np.broadcast_to(np.asarray(object_size, dtype=float), (3,))
    center = w / 2.0 if center is None else np.asarray(center, dtype=float).reshape(3)
    levels = []
    for i in range(1, L + 1):
        d = w / n ** (i - 1)
        levels.append(Level(np.maximum(d, obj), np.concatenate([d, np.zeros(3)]), (n, n, n)))
    if angular_precision is not None:
        ranges = np.full(3, 2 * math.pi) if angular_ranges is None else np.asarray(angular_ranges, float)
        z_last = levels[-1].z
        for k in range(3):
            if ranges[k] <= 0:
                continue
            d = np.zeros(6)
            d[3 + k] = ranges[k]
            levels.append(Level(z_last.copy(), d, (max(1, _ceil(ranges[k] / angular_precision)),)))
    return HsaSchedule(Pose(np.eye(3), center), levels)


def candidate_offsets(level: Level) -> np.ndarray:
    """Cell-centred offsets within +-d/2, one 6-vector per row."""
    free = [k for k in range(6) if level.d[k] > 0]
    if len(free) != len(level.samples):
        raise ValueError("sample counts do not match the free dimensions")
    axes = []
    for k, count in zip(free, level.samples):
        ext = level.d[k]
        axes.append(-ext / 2 + ext / count * (np.arange(count) + 0.5))
    grids = np.meshgrid(*axes, indexing="ij")
    out = np.zeros((grids[0].size, 6))
    for k, g in zip(free, grids):
        out[:, k] = g.ravel()
    return out


def hierarchical_sample_count(v0: float, alpha: float) -> tuple[int, int]:
    """(L, 8 L) for octant-halving position selection down to volume ``alpha``."""
    if not alpha > 0 or v0 < alpha:
        raise ValueError("need v0 >= alpha > 0")
    L = max(1, _ceil_log(v0 / alpha, 8))
    return L, 8 * L


def naive_sample_count(v0: float, alpha: float) -> int:
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return max(1, _ceil(v0 / alpha))


def flat_action_count(workspace, position_precision: float, angular_precision: float,
                      angular_ranges=(360.0, 360.0, 360.0)) -> int:
    """Single-level action count: position grid times Euler-angle grid.

    ``workspace`` is a side length or three side lengths; angles share units
    with ``angular_ranges`` (degrees by default).
    """
    w = np.broadcast_to(np.asarray(workspace, dtype=float), (3,))
    if np.any(w <= 0) or position_precision <= 0 or angular_precision <= 0:
        raise ValueError("inputs must be positive")
    count = 1
    for wi in w:
        count *= max(1, _ceil(wi / position_precision))
    for r in angular_ranges:
        count *= max(1, _ceil(r / angular_precision))
    return count


@dataclass
class ScoredChain:
    index: int
    p: float
    probs: list[float]


def top_n_scores(chains, q_min: float, q_max: float, n: int) -> list[ScoredChain]:
    """Rank candidate chains by the product of normalized per-level values.

    ``p_0 = 1`` and ``p_l = p_{l-1} (Q_l - q_min) / (q_max - q_min)``; ties keep
    input order.
    """
    if not q_max > q_min:
        raise ValueError("q_max must exceed q_min")
    span = q_max - q_min
    scored = []
    for idx, chain in enumerate(chains):
        p = 1.0
        probs = []
        for q in chain:
            if not q_min <= q <= q_max:
                raise ValueError(f"value {q} outside [{q_min}, {q_max}]")
            p *= (q - q_min) / span
            probs.append(p)
        scored.append(ScoredChain(idx, p, probs))
    scored.sort(key=lambda s: -s.p)
    return scored[:n]


def top_n_by_last(chains, n: int) -> list[int]:
    """Baseline ranking by final-level value only."""
    order = sorted(range(len(chains)), key=lambda i: -chains[i][-1])
    return order[:n]
