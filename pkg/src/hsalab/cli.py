"""Command line entry point: ``hsalab run|verify|count-evals|counts|complexity|sense-selftest``.

Exit status: 0 when every check passes, 1 on a failed check, 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import math
import sys
import time

import numpy as np

from . import hsa_schedule as hs
from . import sensor_geometry as sg
from .attention import ALL_GRIDS, VARIANTS, ObsConfig, count_abstract_state_bound
from .experiments import count_evaluations, load_config, measure_evaluations, run_experiment
from .grid_world import ConfigError, GridConfig, count_ground_states
from .oracle import check_q_star_irrelevance, count_reachable, solve_exact


class Checks:
    def __init__(self, out=sys.stdout):
        self.out = out
        self.failed = 0

    def __call__(self, name: str, ok: bool, detail: str = "") -> bool:
        self.failed += not ok
        print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else ""), file=self.out)
        return ok


def exponent(x: int) -> int:
    return len(str(x)) - 1


def verify_theorem(checks: Checks, witnesses_csv: str | None = None) -> None:
    for m in (2, 4):
        cfg = GridConfig(m, 1, 2)
        t0 = time.perf_counter()
        exact = solve_exact(cfg)
        for domain in ("all", "reachable"):
            rep = check_q_star_irrelevance(cfg, ObsConfig(grids=ALL_GRIDS), domain, exact)
            checks(f"theorem m={m} n=1 t_max=2 four grids ({domain} states)", rep.passed,
                   f"{rep.states} states, {rep.groups} groups, max discrepancy {rep.max_discrepancy}")
        two = check_q_star_irrelevance(cfg, ObsConfig(), "reachable", exact)
        print(f"  info: two-grid observation (reachable states) max discrepancy {two.max_discrepancy}")
        if m == 4:
            faulty = check_q_star_irrelevance(cfg, ObsConfig(mode="faulty"), "all", exact)
            checks("faulty sensor yields a discrepancy witness (m=4)", len(faulty.witnesses) > 0,
                   f"{faulty.violating_groups} conflicting groups, max discrepancy {faulty.max_discrepancy}")
            if witnesses_csv:
                faulty.write_witnesses(witnesses_csv)
        checks(f"theorem m={m} runtime <= 60 s", time.perf_counter() - t0 <= 60,
               f"{time.perf_counter() - t0:.1f} s")


def verify_counts(checks: Checks, reachable: bool = True) -> None:
    ground = count_ground_states(GridConfig(16, 3, 6))
    expected = math.comb(4097, 3) * math.comb(4096, 3) * 6
    checks("ground states m=16 n=3 t_max=6 exact", ground == expected, str(ground))
    sa = ground * 16 ** 3
    checks("state-action table order 10^24", exponent(sa) == 24, f"{sa:.3e}")
    bound = count_abstract_state_bound(16, 6)
    checks("abstract bound 2^33 * 4 * 6", bound == 2 ** 33 * 24, f"{bound} ({bound:.3e})")
    checks("abstract bound order 10^11", exponent(bound) == 11)
    if reachable:
        for m in (2, 4):
            cfg = GridConfig(m, 1, 2)
            counts = count_reachable(cfg)
            print(f"  info: reachable m={m} n=1 t_max=2: {counts.ground} extended ground states, "
                  f"{counts.abstract} abstract keys")
            checks(f"reachable abstract keys within bound (m={m})",
                   counts.abstract <= count_abstract_state_bound(m, cfg.t_max))
            if m == 4:
                checks("abstraction compresses reachable states (m=4)", counts.abstract < counts.ground)


def verify_complexity(checks: Checks) -> None:
    for k in (3, 6, 9):
        L, total = hs.hierarchical_sample_count(10.0 ** k, 1.0)
        naive = hs.naive_sample_count(10.0 ** k, 1.0)
        expect = 8 * math.ceil(k * math.log(10) / math.log(8))
        checks(f"hierarchical samples ratio 1e{k}", total == expect and naive == 10 ** k,
               f"L={L} total={total} naive={naive}")
    flat = hs.flat_action_count(1.0, 0.001, 1.0)
    checks("flat action count 1 m^3, 1 mm, 1 deg: order 10^16..10^17", exponent(flat) in (16, 17), f"{flat:.3e}")
    for variant in VARIANTS:
        want = count_evaluations(variant, 16)
        got = measure_evaluations(variant, 16)
        checks(f"evaluations per stage ({variant}, m=16)", got == want, f"counted {got:g}, expected {want}")


def verify_geometry(checks: Checks, trials: int = 1000, seed: int = 0) -> None:
    rng = np.random.default_rng(seed)
    eq_ok = oracle_ok = crop_ok = 0
    worst = 0.0
    t0 = time.perf_counter()
    for _ in range(trials):
        n = int(rng.integers(1, 60))
        z = rng.uniform(0.2, 1.0, size=3)
        res = tuple(int(r) for r in rng.integers(2, 9, size=2))
        C = rng.uniform(-0.8, 0.8, size=(n, 3))
        T = sg.random_pose(rng, 0.3)
        G = sg.random_pose(rng, 1.0)
        a = sg.sense(C, T, z, res).data
        b = sg.sense(G.apply(C), G.compose(T), z, res).data
        diff = float(np.max(np.abs(a - b)))
        worst = max(worst, diff)
        eq_ok += diff <= 1e-9
        local = sg.crop(sg.trans(T, C), z)
        oracle_ok += np.array_equal(sg.proj(local, z, res).data, sg.proj_reference(local, z, res))
        P = sg.trans(T, C)
        mask = [all(abs(p[i]) <= z[i] / 2 for i in range(3)) for p in P]
        crop_ok += np.array_equal(local, P[np.array(mask, dtype=bool)])
    checks(f"rigid equivariance ({trials} trials, 1e-9)", eq_ok == trials, f"worst pixel diff {worst:.2e}")
    checks(f"projection matches brute force ({trials} trials)", oracle_ok == trials)
    checks(f"crop matches predicate filter ({trials} trials)", crop_ok == trials)
    checks("geometry runtime <= 60 s", time.perf_counter() - t0 <= 60, f"{time.perf_counter() - t0:.1f} s")


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.output:
        cfg.output = args.output
    result = run_experiment(cfg, workers=args.workers)
    if not cfg.output:
        sys.stdout.write(result.csv())
    sys.stderr.write(result.summary_text())
    return 0


def cmd_verify(args) -> int:
    checks = Checks()
    which = [args.check] if args.check != "all" else ["theorem", "counts", "complexity", "geometry"]
    for name in which:
        print(f"== verify {name}")
        if name == "theorem":
            verify_theorem(checks, args.witnesses)
        elif name == "counts":
            verify_counts(checks)
        elif name == "complexity":
            verify_complexity(checks)
        else:
            verify_geometry(checks, args.trials)
    return 1 if checks.failed else 0


def cmd_count_evals(args) -> int:
    variants = VARIANTS if args.variant == "all" else [args.variant]
    for v in variants:
        line = f"{v} m={args.m}: {count_evaluations(v, args.m)} evaluations per overt stage"
        if args.measure:
            line += f" (instrumented: {measure_evaluations(v, args.m):g})"
        print(line)
    return 0


def cmd_counts(args) -> int:
    cfg = GridConfig(args.m, args.n, args.t_max)
    ground = count_ground_states(cfg)
    bound = count_abstract_state_bound(cfg.m, cfg.t_max)
    print(f"m={cfg.m} n={cfg.n} t_max={cfg.t_max}")
    print(f"ground states: {ground} ({ground:.3e})")
    print(f"ground state-action pairs: {ground * cfg.cells} ({ground * cfg.cells:.3e})")
    print(f"abstract state bound: {bound} ({bound:.3e})")
    print(f"abstract state-action bound: {bound * 8} ({bound * 8:.3e})")
    return 0


def cmd_complexity(args) -> int:
    L, total = hs.hierarchical_sample_count(args.v0, args.alpha)
    print(f"v0={args.v0:g} alpha={args.alpha:g}: hierarchical L={L} samples={total}, "
          f"naive samples={hs.naive_sample_count(args.v0, args.alpha)}")
    flat = hs.flat_action_count(args.workspace, args.position_precision, args.angular_precision)
    print(f"flat action count (workspace {args.workspace:g} m, {args.position_precision:g} m, "
          f"{args.angular_precision:g} deg): {flat} ({flat:.3e})")
    return 0


def cmd_sense_selftest(args) -> int:
    checks = Checks()
    verify_geometry(checks, args.trials, args.seed)
    return 1 if checks.failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hsalab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a learning-curve experiment from a key = value config")
    r.add_argument("config")
    r.add_argument("-o", "--output", help="CSV path (overrides the config's output key)")
    r.add_argument("-j", "--workers", type=int, default=None,
                   help="parallel realizations (default: $HSALAB_WORKERS or 1)")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run a pinned verification suite")
    v.add_argument("check", choices=["theorem", "counts", "complexity", "geometry", "all"])
    v.add_argument("--trials", type=int, default=1000)
    v.add_argument("--witnesses", help="write faulty-sensor witnesses to this CSV")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("count-evals", help="action evaluations per overt stage")
    c.add_argument("--variant", choices=list(VARIANTS) + ["all"], default="all")
    c.add_argument("--m", type=int, default=16)
    c.add_argument("--measure", action="store_true", help="also count with an instrumented episode")
    c.set_defaults(func=cmd_count_evals)

    k = sub.add_parser("counts", help="ground and abstract state counts")
    k.add_argument("--m", type=int, default=16)
    k.add_argument("--n", type=int, default=3)
    k.add_argument("--t-max", type=int, default=None)
    k.set_defaults(func=cmd_counts)

    x = sub.add_parser("complexity", help="sample-complexity calculators")
    x.add_argument("--v0", type=float, default=1.0, help="workspace volume (m^3)")
    x.add_argument("--alpha", type=float, default=1e-9, help="volume per sample (m^3)")
    x.add_argument("--workspace", type=float, default=1.0, help="workspace side (m)")
    x.add_argument("--position-precision", type=float, default=0.001)
    x.add_argument("--angular-precision", type=float, default=1.0, help="degrees")
    x.set_defaults(func=cmd_complexity)

    s = sub.add_parser("sense-selftest", help="randomized virtual-sensor checks")
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_sense_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
