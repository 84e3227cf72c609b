import functools
import random

import pytest

from hsalab.attention import ALL_GRIDS, ObsConfig
from hsalab.grid_world import HAND, ConfigError, GridConfig, GroundState, Loc, cell_from_index, transition
from hsalab.oracle import (
    check_bellman, check_q_star_irrelevance, count_reachable, initial_states, solve_exact,
)


@pytest.fixture(scope="module")
def exact_m2():
    return solve_exact(GridConfig(2, 1, 2))


def ground_value(cfg, state):
    """Independent optimum over raw cell actions (no attention hierarchy)."""
    cells = [cell_from_index(i, cfg.m) for i in range(cfg.cells)]

    @functools.lru_cache(maxsize=None)
    def v(pegs, disks, t):
        if t > cfg.t_max:
            return 0
        best = None
        for c in cells:
            s, r = transition(cfg, GroundState(pegs, disks, t), c)
            val = r + v(s.pegs, s.disks, s.t)
            best = val if best is None else max(best, val)
        return best

    return v(state.pegs, state.disks, state.t)


def test_state_count_m2(exact_m2):
    assert len(exact_m2) == 144


def test_values_are_ints(exact_m2):
    assert all(isinstance(x, int) for qs in exact_m2.q.values() for x in qs)


def test_initial_value_matches_ground_optimum(exact_m2):
    cfg = GridConfig(2, 1, 2)
    for key in initial_states(cfg):
        gv = ground_value(cfg, GroundState(key[0], key[1], 1))
        assert exact_m2.value(key) == gv == 1
        assert exact_m2.rollout(GroundState(key[0], key[1], 1)) == 1


def test_initial_value_matches_ground_optimum_m4_sample():
    cfg = GridConfig(4, 1, 2)
    exact = solve_exact(cfg)
    keys = list(initial_states(cfg))
    for key in random.Random(0).sample(keys, 25):
        assert exact.value(key) == ground_value(cfg, GroundState(key[0], key[1], 1))
    # Bellman audit on random extended states
    all_keys = list(exact.q)
    assert check_bellman(exact, random.Random(1).sample(all_keys, 1000)) == 0


def test_last_stage_empty_hand_is_zero(exact_m2):
    for key, qs in exact_m2.q.items():
        pegs, disks, t, level, origin = key
        if t == 2 and pegs[0] != HAND:
            assert max(qs) <= 0


def test_value_bound(exact_m2):
    cfg = GridConfig(2, 1, 2)
    for (pegs, disks, t, level, origin), qs in exact_m2.q.items():
        holding = pegs[0] == HAND
        assert max(qs) <= -(-(cfg.t_max - t + 1) // 2) + holding


def test_bellman_full_m2(exact_m2):
    assert check_bellman(exact_m2, exact_m2.q) == 0


def test_theorem_m2(exact_m2):
    cfg = GridConfig(2, 1, 2)
    for domain in ("all", "reachable"):
        rep = check_q_star_irrelevance(cfg, ObsConfig(ALL_GRIDS), domain, exact_m2)
        assert rep.passed and rep.max_discrepancy == 0


def test_guard_rejects_large_instances():
    with pytest.raises(ConfigError, match="m <= 4"):
        solve_exact(GridConfig(16, 3))


def test_reachable_counts_m2():
    c = count_reachable(GridConfig(2, 1, 2))
    assert c.abstract <= c.ground


def test_witness_csv(tmp_path):
    # the empty-space grid alone is too coarse, so witnesses must appear
    cfg = GridConfig(2, 1, 2)
    rep = check_q_star_irrelevance(cfg, ObsConfig(("e",)), "all")
    assert not rep.passed and rep.witnesses
    path = tmp_path / "w.csv"
    rep.write_witnesses(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "action,q_a,q_b,state_a,state_b" and len(lines) == len(rep.witnesses) + 1
    assert "FAIL" in rep.summary()
