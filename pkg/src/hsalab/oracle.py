"""Exact finite-horizon Q* on the extended ground MDP and the Q*-irrelevance check.

The extended ground MDP takes the same octant actions as the abstract one, but
its state also carries the attention level and the focus origin, so it is
Markov.  Rewards are integers and there is no discounting, so every value is a
Python int and the irrelevance check compares with ``==``.
"""

from __future__ import annotations

import csv
import itertools
from collections import deque
from dataclasses import dataclass, field

from .attention import ALL_GRIDS, ObsConfig, child_origin, octant_grids
from .grid_world import (
    HAND,
    ConfigError,
    GridConfig,
    GroundState,
    Loc,
    cell_from_index,
    count_ground_states,
    init_episode,
    transition,
)

# enumeration guard: extended states (each with 8 actions)
MAX_STATES = 3_000_000

OCTANTS = range(1, 9)

# extended state key: (pegs, disks, t, level, focus origin)
Key = tuple


def focus_origins(m: int, level: int) -> list[Loc]:
    side = m >> (level - 1)
    steps = range(1, m + 1, side)
    return [Loc(x, y, z) for z in steps for y in steps for x in steps]


def count_extended_states(cfg: GridConfig) -> int:
    per_stage = sum(8 ** (level - 1) for level in range(1, cfg.levels + 1))
    return count_ground_states(cfg) * per_stage


def _guard(cfg: GridConfig, limit: int) -> None:
    total = count_extended_states(cfg)
    if total > limit:
        raise ConfigError(
            f"exact solve needs {total:,} extended states for m={cfg.m}, n={cfg.n}, "
            f"t_max={cfg.t_max} (limit {limit:,}); use m <= 4 and n <= 1, or raise max_states"
        )


def _step(cfg: GridConfig, key: Key, a: int) -> tuple[int, Key | None]:
    """Successor of an extended state under octant ``a``; None once terminal."""
    pegs, disks, t, level, origin = key
    side = cfg.m >> (level - 1)
    nxt = child_origin(origin, side, a)
    if side > 2:
        return 0, (pegs, disks, t, level + 1, nxt)
    s, r = transition(cfg, GroundState(pegs, disks, t), nxt)
    if s.terminal:
        return int(r), None
    return int(r), (s.pegs, s.disks, s.t, 1, Loc(1, 1, 1))


def ground_configurations(cfg: GridConfig):
    """Every (pegs, disks) pair: peg sets may use the hand, disks may not."""
    cells = [cell_from_index(i, cfg.m) for i in range(cfg.cells)]
    for pegs in itertools.combinations([HAND] + cells, cfg.n):
        for disks in itertools.combinations(cells, cfg.n):
            yield tuple(sorted(pegs)), tuple(sorted(disks))


def initial_states(cfg: GridConfig):
    """All start states: pegs and disks on pairwise-distinct cells, hand empty."""
    cells = [cell_from_index(i, cfg.m) for i in range(cfg.cells)]
    for pegs in itertools.combinations(cells, cfg.n):
        rest = [c for c in cells if c not in pegs]
        for disks in itertools.combinations(rest, cfg.n):
            yield (tuple(pegs), tuple(disks), 1, 1, Loc(1, 1, 1))


@dataclass
class ExactQ:
    """Q*(s, .) as an 8-tuple of ints per extended state key."""

    cfg: GridConfig
    q: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.q)

    def __getitem__(self, key) -> tuple[int, ...]:
        return self.q[key]

    def value(self, key) -> int:
        return max(self.q[key])

    def greedy(self, key) -> int:
        vals = self.q[key]
        return vals.index(max(vals)) + 1

    def rollout(self, state: GroundState) -> int:
        """Return of the greedy Q* policy from a ground state at level 1."""
        key = (state.pegs, state.disks, state.t, 1, Loc(1, 1, 1))
        total = 0
        while key is not None:
            r, key = _step(self.cfg, key, self.greedy(key))
            total += r
        return total


def solve_exact(cfg: GridConfig, max_states: int = MAX_STATES) -> ExactQ:
    """Backward induction over every extended state (t_max stages x L levels)."""
    _guard(cfg, max_states)
    L = cfg.levels
    configs = list(ground_configurations(cfg))
    value: dict = {}
    result = ExactQ(cfg)
    for t in range(cfg.t_max, 0, -1):
        for level in range(L, 0, -1):
            origins = focus_origins(cfg.m, level)
            for pegs, disks in configs:
                for origin in origins:
                    key = (pegs, disks, t, level, origin)
                    qs = []
                    for a in OCTANTS:
                        r, nxt = _step(cfg, key, a)
                        qs.append(r if nxt is None else r + value[nxt])
                    qs = tuple(qs)
                    result.q[key] = qs
                    value[key] = max(qs)
    return result


def observation_key(cfg: GridConfig, key: Key, obs: ObsConfig) -> tuple:
    pegs, disks, t, level, origin = key
    side = cfg.m >> (level - 1)
    grids = octant_grids(pegs, disks, origin, side, obs.mode == "faulty")
    holding = int(bool(pegs) and pegs[0] == HAND)
    return (level, t, holding) + tuple(g for g, on in zip(grids, obs.mask) if on)


def reachable_keys(cfg: GridConfig, max_states: int = MAX_STATES) -> set:
    """Breadth-first closure of the initial states under all 8 octant actions."""
    seen = set()
    frontier = deque(initial_states(cfg))
    seen.update(frontier)
    while frontier:
        key = frontier.popleft()
        for a in OCTANTS:
            _, nxt = _step(cfg, key, a)
            if nxt is not None and nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
                if len(seen) > max_states:
                    raise ConfigError(f"reachable set exceeds {max_states:,} states")
    return seen


@dataclass
class Witness:
    state_a: Key
    state_b: Key
    action: int
    q_a: int
    q_b: int

    @property
    def gap(self) -> int:
        return abs(self.q_a - self.q_b)


@dataclass
class IrrelevanceReport:
    cfg: GridConfig
    obs: ObsConfig
    domain: str
    states: int
    groups: int
    max_discrepancy: int
    witnesses: list[Witness]
    violating_groups: int = 0

    @property
    def passed(self) -> bool:
        return self.max_discrepancy == 0

    def summary(self) -> str:
        c = self.cfg
        lines = [
            f"Q*-irrelevance check m={c.m} n={c.n} t_max={c.t_max} "
            f"grids={','.join(self.obs.grids)} sensor={self.obs.mode} domain={self.domain}",
            f"  extended states: {self.states}",
            f"  observation groups: {self.groups}",
            f"  groups with disagreement: {self.violating_groups}",
            f"  max discrepancy: {self.max_discrepancy}",
            f"  result: {'PASS' if self.passed else 'FAIL'}",
        ]
        return "\n".join(lines)

    def write_witnesses(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["action", "q_a", "q_b", "state_a", "state_b"])
            for wit in self.witnesses:
                w.writerow([wit.action, wit.q_a, wit.q_b, _fmt_key(wit.state_a), _fmt_key(wit.state_b)])


def _fmt_key(key: Key) -> str:
    pegs, disks, t, level, origin = key
    fmt = lambda locs: "[" + " ".join("h" if p == HAND else f"{p.x}.{p.y}.{p.z}" for p in locs) + "]"
    return f"pegs={fmt(pegs)} disks={fmt(disks)} t={t} level={level} focus={origin.x}.{origin.y}.{origin.z}"


def check_q_star_irrelevance(cfg: GridConfig, obs: ObsConfig = ObsConfig(grids=ALL_GRIDS),
                             domain: str = "all", exact: ExactQ | None = None,
                             max_witnesses: int = 20) -> IrrelevanceReport:
    """Group extended states by abstract observation and compare Q* within groups.

    ``domain="all"`` covers every extended state (the full product space);
    ``domain="reachable"`` only those reachable from an initial state.
    """
    if domain not in ("all", "reachable"):
        raise ValueError("domain must be 'all' or 'reachable'")
    exact = solve_exact(cfg) if exact is None else exact
    keys = exact.q.keys() if domain == "all" else reachable_keys(cfg)
    first: dict = {}
    bad_groups = set()
    witnesses: list[Witness] = []
    worst = 0
    n = 0
    for key in keys:
        n += 1
        okey = observation_key(cfg, key, obs)
        ref = first.setdefault(okey, key)
        if ref is key:
            continue
        qa, qb = exact.q[ref], exact.q[key]
        if qa == qb:
            continue
        bad_groups.add(okey)
        for a in OCTANTS:
            gap = abs(qa[a - 1] - qb[a - 1])
            if gap:
                worst = max(worst, gap)
                if len(witnesses) < max_witnesses:
                    witnesses.append(Witness(ref, key, a, qa[a - 1], qb[a - 1]))
    return IrrelevanceReport(cfg, obs, domain, n, len(first), worst, witnesses, len(bad_groups))


@dataclass
class ReachableCounts:
    ground: int
    abstract: int


def count_reachable(cfg: GridConfig, obs: ObsConfig = ObsConfig(grids=ALL_GRIDS),
                    max_states: int = MAX_STATES) -> ReachableCounts:
    keys = reachable_keys(cfg, max_states)
    abstract = {observation_key(cfg, k, obs) for k in keys}
    return ReachableCounts(len(keys), len(abstract))


def check_bellman(exact: ExactQ, keys) -> int:
    """Number of audited states whose Q* violates the optimality recursion."""
    bad = 0
    for key in keys:
        for a in OCTANTS:
            r, nxt = _step(exact.cfg, key, a)
            if exact.q[key][a - 1] != (r if nxt is None else r + exact.value(nxt)):
                bad += 1
                break
    return bad


def sample_initial(cfg: GridConfig, seed) -> GroundState:
    return init_episode(cfg, seed)
