"""Tabular action values, exploration, TD/MC updates and the HSA training loop."""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .attention import (
    CELL_EMPTY,
    VARIANTS,
    ObsConfig,
    cell_summary,
    child_origin,
    octant_grids,
)
from .grid_world import (
    HAND,
    ConfigError,
    GridConfig,
    GroundState,
    Loc,
    cell_from_index,
    init_episode,
    transition,
)

RULES = ("sarsa", "q-learning", "mc-stage")
EPSILON_MODES = ("inverse", "constant")


@dataclass
class LearnerConfig:
    rule: str = "mc-stage"
    alpha: float | str = 0.1  # constant step size, or "visit" for 1/N(o, a)
    epsilon_mode: str = "inverse"
    epsilon: float = 1.0  # value used in constant mode
    epsilon_c: float = 1000.0  # inverse mode: min(1, c / |D|)
    q0: float = 1.0
    gamma: float = 1.0
    replay: bool = False
    train_every: int = 1
    max_experiences: int = 50_000
    replay_order: str = "fifo"  # "fifo" or "reverse" (newest first)

    def __post_init__(self):
        if self.rule not in RULES:
            raise ConfigError(f"rule must be one of {RULES}, got {self.rule!r}")
        if self.alpha != "visit":
            if not isinstance(self.alpha, (int, float)) or not 0 < self.alpha <= 1:
                raise ConfigError(f"alpha must be in (0, 1] or 'visit', got {self.alpha!r}")
        if self.epsilon_mode not in EPSILON_MODES:
            raise ConfigError(f"epsilon_mode must be one of {EPSILON_MODES}, got {self.epsilon_mode!r}")
        if not 0 <= self.epsilon <= 1:
            raise ConfigError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.epsilon_c <= 0:
            raise ConfigError(f"epsilon_c must be positive, got {self.epsilon_c}")
        if self.gamma != 1.0:
            raise ConfigError("gamma is fixed at 1 for the finite-horizon task")
        if self.replay_order not in ("fifo", "reverse"):
            raise ConfigError(f"replay_order must be 'fifo' or 'reverse', got {self.replay_order!r}")
        if self.train_every < 1 or self.max_experiences < 1:
            raise ConfigError("train_every and max_experiences must be >= 1")


class ValueTable:
    """Q(o, a) lookup with an optimistic default for unseen pairs."""

    def __init__(self, q0: float = 1.0):
        self.q0 = q0
        self.q: dict = {}
        self.visits: dict = {}

    def get(self, obs, action) -> float:
        return self.q.get((obs, action), self.q0)

    def values(self, obs, actions) -> list[float]:
        get = self.q.get
        q0 = self.q0
        return [get((obs, a), q0) for a in actions]

    def __len__(self):
        return len(self.q)

    def __contains__(self, pair):
        return pair in self.q

    def items(self):
        return self.q.items()


@dataclass(slots=True)
class Experience:
    obs: object
    action: object
    next_obs: object  # None marks the end of the episode
    reward: float
    next_action: object = None
    next_actions: tuple = ()
    stage_reward: float | None = None


def epsilon_schedule(count: int, cfg: LearnerConfig) -> float:
    if count < 0:
        raise ValueError("experience count must be >= 0")
    if cfg.epsilon_mode == "constant":
        return cfg.epsilon
    return min(1.0, cfg.epsilon_c / max(1, count))


def _step_size(table: ValueTable, pair, cfg: LearnerConfig) -> float:
    if cfg.alpha == "visit":
        n = table.visits.get(pair, 0) + 1
        table.visits[pair] = n
        return 1.0 / n
    return cfg.alpha


def update_toward(table: ValueTable, obs, action, target: float, cfg: LearnerConfig) -> None:
    pair = (obs, action)
    q = table.q.get(pair, table.q0)
    table.q[pair] = q + _step_size(table, pair, cfg) * (target - q)


def td_target(table: ValueTable, exp: Experience, cfg: LearnerConfig, next_action=None) -> float:
    if cfg.rule == "mc-stage":
        return exp.reward if exp.stage_reward is None else exp.stage_reward
    if exp.next_obs is None:
        return exp.reward
    if cfg.rule == "sarsa":
        a = exp.next_action if next_action is None else next_action
        return exp.reward + cfg.gamma * table.get(exp.next_obs, a)
    return exp.reward + cfg.gamma * max(table.values(exp.next_obs, exp.next_actions))


def td_update(table: ValueTable, exp: Experience, cfg: LearnerConfig, next_action=None) -> ValueTable:
    """One update of Q(o, a) under the configured rule; returns ``table``.

    ``next_action`` overrides the stored Sarsa successor action.
    """
    update_toward(table, exp.obs, exp.action, td_target(table, exp, cfg, next_action), cfg)
    return table


def argmax_random(values, rng: random.Random) -> int:
    best = max(values)
    ties = [i for i, v in enumerate(values) if v == best]
    return ties[0] if len(ties) == 1 else ties[rng.randrange(len(ties))]


def select_action(table: ValueTable, obs, candidates, epsilon: float, rng: random.Random):
    """Epsilon-greedy with uniform tie-breaking among maximal values."""
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidate actions")
    if epsilon > 0 and rng.random() < epsilon:
        return candidates[rng.randrange(len(candidates))]
    return candidates[argmax_random(table.values(obs, candidates), rng)]


@dataclass
class EpisodeLog:
    ret: float
    placed: int
    stage_rewards: list[float]
    experiences: list[Experience]
    epsilon: float
    evaluations: int = 0


@dataclass
class Learner:
    """One table, one config, plus the bookkeeping Algorithm 1 keeps across episodes."""

    config: LearnerConfig = field(default_factory=LearnerConfig)
    table: ValueTable = None
    experience_count: int = 0
    episodes: int = 0
    evaluations: int = 0
    replay: deque = None

    def __post_init__(self):
        if self.table is None:
            self.table = ValueTable(self.config.q0)
        if self.replay is None:
            self.replay = deque()

    @property
    def epsilon(self) -> float:
        return epsilon_schedule(self.experience_count, self.config)


# --- per-variant views: (state key, candidate action keys, actions) -----------------------

_OCTANTS = (1, 2, 3, 4, 5, 6, 7, 8)


def _standard_view(base, level, t, origin, side, obs_cfg, mask, faulty):
    grids = octant_grids(base.pegs, base.disks, origin, side, faulty)
    key = (level, t, int(base.holding)) + tuple(g for g, on in zip(grids, mask) if on)
    return key, _OCTANTS


def _lookahead_view(base, t, origin, side, mask, faulty, last=None):
    """State is (hand, t), plus the last descriptor chosen this stage when given; actions are descriptors."""
    keys = []
    if side == 2:
        for a in _OCTANTS:
            keys.append(("cell", cell_summary(base, child_origin(origin, 2, a), faulty)))
    else:
        half = side // 2
        for a in _OCTANTS:
            g = octant_grids(base.pegs, base.disks, child_origin(origin, side, a), half, faulty)
            keys.append(("grids",) + tuple(x for x, on in zip(g, mask) if on))
    state = (int(base.holding), t) if last is None else (int(base.holding), t, last)
    return state, tuple(keys)


def deictic_codes(base: GroundState, m: int, faulty: bool = False) -> np.ndarray:
    """Contents code for every cell, indexed like :func:`cell_from_index`."""
    codes = np.full(m ** 3, CELL_EMPTY, dtype=np.int64)
    for loc in set(base.pegs) | set(base.disks):
        if loc == HAND:
            continue
        codes[(loc[0] - 1) + m * (loc[1] - 1) + m * m * (loc[2] - 1)] = cell_summary(base, loc, faulty)
    return codes


def run_episode(cfg: GridConfig, learner: Learner, rng: random.Random, variant: str = "standard",
                obs_cfg: ObsConfig = ObsConfig(), state: GroundState | None = None,
                learn: bool = True, epsilon: float | None = None) -> EpisodeLog:
    """Run one episode: per overt stage, L attention decisions then one move-effect.

    Deictic runs a single decision per stage over all m^3 cells.  Experiences
    follow Algorithm 1: the stage reward is attached to the last decision of
    the stage, all other decisions carry reward 0.
    """
    if variant not in VARIANTS:
        raise ConfigError(f"variant must be one of {VARIANTS}, got {variant!r}")
    lc = learner.config
    table = learner.table
    m = cfg.m
    levels = 1 if variant == "deictic" else cfg.levels
    if variant != "deictic" and 2 ** levels != m:
        raise ConfigError("schedule depth does not match log2(m)")
    faulty = obs_cfg.mode == "faulty"
    mask = obs_cfg.mask
    eps = learner.epsilon if epsilon is None else epsilon
    online = learn and not lc.replay
    td_online = online and lc.rule != "mc-stage"

    s = init_episode(cfg, rng) if state is None else state
    experiences: list[Experience] = []
    stage_rewards: list[float] = []
    evaluations = 0
    prev = None  # (obs key, action key, reward, stage index) awaiting its successor
    pending: list[Experience] = []  # this stage's experiences still missing the stage reward
    mc = lc.rule == "mc-stage"
    get = table.q.get
    q0 = table.q0

    for stage in range(cfg.t_max):
        t = s.t
        stage_pairs = []
        origin, side = Loc(1, 1, 1), m
        cell = None
        last = None
        for level in range(1, levels + 1):
            if variant == "deictic":
                key = (int(s.holding), t)
                codes = deictic_codes(s, m, faulty)
                present = tuple(int(c) for c in np.unique(codes))
                lut = np.zeros(16)
                for c in present:
                    lut[c] = get((key, c), q0)
                vals = lut[codes]
                evaluations += vals.size
                if eps > 0 and rng.random() < eps:
                    idx = rng.randrange(m ** 3)
                else:
                    ties = np.flatnonzero(vals == vals.max())
                    idx = int(ties[0] if ties.size == 1 else ties[rng.randrange(ties.size)])
                a_key = int(codes[idx])
                next_actions = present
                cell = cell_from_index(idx, m)
            else:
                if variant == "standard":
                    key, cands = _standard_view(s, level, t, origin, side, obs_cfg, mask, faulty)
                else:
                    key, cands = _lookahead_view(s, t, origin, side, mask, faulty, last)
                vals = [get((key, c), q0) for c in cands]
                evaluations += len(vals)
                if eps > 0 and rng.random() < eps:
                    i = rng.randrange(8)
                else:
                    i = argmax_random(vals, rng)
                a_key = cands[i]
                if obs_cfg.history:
                    last = a_key
                next_actions = tuple(dict.fromkeys(cands))
                octant = i + 1
                if side == 2:
                    cell = child_origin(origin, 2, octant)
                else:
                    origin, side = child_origin(origin, side, octant), side // 2
            if prev is not None:
                exp = Experience(prev[0], prev[1], key, prev[2], a_key, next_actions)
                if prev[3] < stage:
                    exp.stage_reward = stage_rewards[prev[3]]
                else:
                    pending.append(exp)
                experiences.append(exp)
                if td_online:
                    update_toward(table, exp.obs, exp.action, td_target(table, exp, lc), lc)
            prev = (key, a_key, 0.0, stage)
            stage_pairs.append((key, a_key))
        s, r = transition(cfg, s, cell)
        stage_rewards.append(r)
        prev = (prev[0], prev[1], r, stage)
        for exp in pending:
            exp.stage_reward = r
        pending = []
        if mc and online:
            for o, a in stage_pairs:
                update_toward(table, o, a, r, lc)
    final = Experience(prev[0], prev[1], None, prev[2], stage_reward=prev[2])
    experiences.append(final)
    if td_online:
        update_toward(table, final.obs, final.action, td_target(table, final, lc), lc)

    learner.evaluations += evaluations
    if learn:
        learner.episodes += 1
        learner.experience_count += len(experiences)
        if lc.replay:
            learner.replay.extend(experiences)
            if learner.episodes % lc.train_every == 0:
                prune_experiences(learner.replay, lc.max_experiences)
                sweep = reversed(learner.replay) if lc.replay_order == "reverse" else learner.replay
                for exp in sweep:
                    td_update(table, exp, lc)
    return EpisodeLog(
        ret=sum(stage_rewards),
        placed=s.placed(),
        stage_rewards=stage_rewards,
        experiences=experiences,
        epsilon=learner.epsilon,
        evaluations=evaluations,
    )


def prune_experiences(buffer: deque, max_experiences: int) -> deque:
    """Drop the oldest items so at most ``max_experiences`` remain."""
    while len(buffer) > max_experiences:
        buffer.popleft()
    return buffer
