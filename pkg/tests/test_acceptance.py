"""
Acceptance suite: one PASS/FAIL line per criterion.

Run as ``python3 tests/test_acceptance.py`` to print the report, or through
pytest (``pytest tests/test_acceptance.py -s``) where each criterion is a test.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import golden_section_max, rate_curve, set_partitions  # noqa: E402
from uplinksched.asymptotic import (ProductDistribution, asymptotic_params, asymptotic_policy,  # noqa: E402
                                    chi_star, h_limits_check, h_value, lambert_w0)
from uplinksched.baselines import random_equal, random_optimal  # noqa: E402
from uplinksched.config import ExperimentConfig, build_population  # noqa: E402
from uplinksched.energy import coefficients, group_rate, optimal_training_energy, price_groups  # noqa: E402
from uplinksched.errors import NoFeasiblePartitionError  # noqa: E402
from uplinksched.model import FrameConfig, UserSet  # noqa: E402
from uplinksched.montecarlo import accuracy_report  # noqa: E402
from uplinksched.scheduler import (CandidateGroup, assemble_policy, count_reduced_search_space,  # noqa: E402
                                   enumerate_candidates, optimize_policy, partition_objective,
                                   policy_for_length, solve_partition_dp, solve_partition_lp)

SEED = 20240601
TOY_COSTS = (1 / 11, 1 / 10, 1 / 5, 1 / 3, 1 / 9, 1 / 4, 1 / 2)
TOY_INTERVALS = ((0, 0), (1, 1), (2, 2), (3, 3), (0, 1), (1, 2), (2, 3))
TABLE_FRAME = ExperimentConfig().frame


def _toy():
    cands = [CandidateGroup(a, b, 1.0 / c) for (a, b), c in zip(TOY_INTERVALS, TOY_COSTS)]
    frame = FrameConfig(8, 16, 1000.0, 1.0, 1e4, 1.0)
    return cands, frame


def c1():
    cands, frame = _toy()
    ok, notes = True, []
    for name, solve in (("lp", solve_partition_lp), ("dp", solve_partition_dp)):
        sel = solve(cands, 4)
        groups = sorted(cands[i].interval for i in sel)
        obj = partition_objective(cands, sel)
        p = assemble_policy(None, "zf", frame, 2, 4, [cands[i] for i in sel])
        ok &= groups == [(0, 1), (2, 3)]
        ok &= abs(obj - 0.6111) <= 1e-4 and abs(obj - 11 / 18) <= 1e-9
        ok &= np.allclose(p.portions, (0.1818, 0.8182), atol=1e-4)
        ok &= abs(p.spectral_efficiency - 9 / 11) <= 1e-9 and p.latency_frames == 13
        notes.append(f"{name}: obj={obj:.6f} D=({p.portions[0]:.4f},{p.portions[1]:.4f}) S={p.latency_frames}")
    return ok, "; ".join(notes)


def c2():
    rng = np.random.default_rng(SEED)
    worst, infeasible = 0.0, True
    for _ in range(100):
        U, M = int(rng.integers(1, 41)), int(rng.integers(1, 9))
        users = UserSet.from_products(10 ** rng.uniform(-1, 4, U))
        L = int(rng.integers(1, 30))
        cands = enumerate_candidates(users, "mrc", M, 30, L)
        if M == 1:
            # a single antenna gives MRC no array gain: nothing is servable
            infeasible &= _raises(solve_partition_lp, cands, U) and _raises(solve_partition_dp, cands, U)
            continue
        # the LP solver raises if its vertex deviates from binary by more than 1e-6
        lp = partition_objective(cands, solve_partition_lp(cands, U))
        dp = partition_objective(cands, solve_partition_dp(cands, U))
        worst = max(worst, abs(lp - dp) / dp)
    ok = worst <= 1e-9 and infeasible
    return ok, f"100 instances, max |LP-DP|/DP = {worst:.2e}, M=1 infeasible in both: {infeasible}"


def _raises(fn, *args):
    try:
        fn(*args)
    except NoFeasiblePartitionError:
        return True
    return False


def c3():
    rng = np.random.default_rng(SEED + 3)
    N = 20
    checked, worst = 0, 0.0
    partitions = {}
    for _ in range(50):
        products_all = 10 ** rng.uniform(-1, 3, 9)
        L = int(rng.integers(1, N))
        for U in range(1, 10):
            users = UserSet.from_products(products_all[:U])
            prod = users.products
            for M in range(1, 4):
                try:
                    dp = policy_for_length(users, "mrc", _frame(N), M, L, solver="dp")
                    dp_obj = math.fsum(1.0 / g.rate for g in dp.groups)
                except NoFeasiblePartitionError:
                    dp_obj = math.inf
                key = (U, M)
                if key not in partitions:
                    partitions[key] = list(set_partitions(range(U), M))
                cache = {}
                best = math.inf
                for part in partitions[key]:
                    total = 0.0
                    for block in part:
                        if block not in cache:
                            _, r = price_groups("mrc", M, N, L, [len(block)], [prod[list(block)].min()])
                            cache[block] = 1.0 / r[0] if r[0] > 0 else math.inf
                        total += cache[block]
                    best = min(best, total)
                if math.isinf(best) or math.isinf(dp_obj):
                    agree = math.isinf(best) and math.isinf(dp_obj)
                    worst = max(worst, 0.0 if agree else math.inf)
                else:
                    worst = max(worst, abs(dp_obj - best) / best)
                checked += 1
    return worst <= 1e-9, f"{checked} instances, max relative gap to set-partition optimum = {worst:.2e}"


def _frame(N):
    return FrameConfig(N, 4, 1e6, 1e-3, 1e5, 1.0)


def c4():
    rng = np.random.default_rng(SEED + 4)
    n = 10_000
    rows, us = [], []
    for _ in range(n):
        receiver = "zf" if rng.random() < 0.5 else "mrc"
        M = int(rng.integers(2, 512))
        N = int(rng.integers(2, 200))
        L = int(rng.integers(1, N))
        K = int(rng.integers(1, M)) if receiver == "zf" else int(rng.integers(1, 200))
        x = float(10 ** rng.uniform(-3, 7))
        c = coefficients(receiver, M, N, K, L, x)
        rows.append((c.a, c.b, c.c, c.d, c.e))
        us.append(optimal_training_energy(c))
    a, b, cc, d, e = np.array(rows).T
    us = np.array(us)
    in_range = bool(np.all((us >= 0) & (us <= a / b * (1 + 1e-12))))
    f = lambda x: rate_curve(x, a, b, cc, d, e)  # noqa: E731
    _, best = golden_section_max(f, np.zeros(n), a / b)
    got = f(us)
    rel = np.abs(got - best) / np.maximum(best, 1e-300)
    worst = float(rel.max())
    # u* must never be beaten by the numerical search beyond rounding
    return in_range and worst <= 1e-6, f"max relative rate gap = {worst:.2e}, 0 <= u* <= a/b: {in_range}"


def c5():
    users = build_population(ExperimentConfig())
    p = optimize_policy(users, "zf", TABLE_FRAME, 64, solver="lp")
    q = optimize_policy(users, "zf", TABLE_FRAME, 2048, solver="lp")
    se_ok = abs(p.spectral_efficiency / 5.740e-2 - 1) <= 0.3
    lat_ok = abs(p.approx_latency_seconds / 1.742e-2 - 1) <= 0.3
    ok = p.training_length == 20 and p.group_sizes == [20] * 5 and se_ok and lat_ok
    ok &= max(q.group_sizes) > q.training_length
    return ok, (f"M=64: L*={p.training_length} sizes={p.group_sizes} SE={p.spectral_efficiency:.4g} "
                f"approx latency={p.approx_latency_seconds:.4g}s; M=2048: L*={q.training_length} "
                f"sizes={q.group_sizes}")


def c6():
    rows = accuracy_report([16, 32, 64, 128, 256], [0.0, 10.0, 20.0], ("zf", "mrc"), 10_000, seed=0)
    bad = [(r.receiver, r.M, r.E_dB) for r in rows if r.M >= 32 and not r.stats.abs_gap < r.stats.empirical_std]
    n = sum(r.M >= 32 for r in rows)
    worst = max(r.stats.abs_gap / r.stats.empirical_std for r in rows if r.M >= 32)
    return not bad, f"{n - len(bad)}/{n} points within one std (worst gap/std = {worst:.3f})"


def c7():
    chi = chi_star()
    xs = np.concatenate([-math.exp(-1) + np.logspace(-12, math.log10(math.exp(-1)), 500),
                         np.logspace(-12, 3, 500)])
    resid = max(abs(lambert_w0(x) * math.exp(lambert_w0(x)) - x) for x in xs)
    return abs(chi - 0.2915) <= 1e-3 and resid < 1e-12, f"chi*={chi:.6f}, max residual={resid:.2e}"


def c8():
    from oracles import contiguous_partitions

    ok = count_reduced_search_space(4, 2) == 5
    for U in range(1, 16):
        for M in range(1, U + 1):
            ok &= count_reduced_search_space(U, M) == sum(1 for _ in contiguous_partitions(U, M))
    return ok, "all U <= 15, M <= U match enumeration; (4, 2) -> 5"


def c9():
    rng = np.random.default_rng(SEED + 9)
    worst_h = 0.0
    for _ in range(1000):
        M = int(rng.integers(2, 300))
        N = int(rng.integers(2, 200))
        L = int(rng.integers(1, N))
        K = int(rng.integers(1, M))
        x = float(10 ** rng.uniform(-2, 6))
        r = group_rate("zf", M, N, L, UserSet.from_products([x] * K)).common_rate
        g = math.expm1(r * math.log(2.0))
        worst_h = max(worst_h, abs(h_value(x, L, K, M, N) / g - 1))
    worst_lim = 0.0
    for _ in range(100):
        N = int(rng.integers(3, 200))
        L = int(rng.integers(1, N))
        M = int(rng.integers(2, 400))
        K = int(rng.integers(1, M))
        large, small = h_limits_check(L, K, M, N)
        big = h_value(1e6, L, K, M, N)
        worst_lim = max(worst_lim, abs((big if K > L else big / 1e6) / large - 1),
                        abs(h_value(1e-6, L, K, M, N) / 1e-12 / small - 1))
    frame = TABLE_FRAME
    dominated = True
    for _ in range(50):
        users = UserSet.from_products(10 ** rng.uniform(0, 4, int(rng.integers(2, 60))))
        L, K = asymptotic_params(ProductDistribution.empirical(users.products), 16, 100)
        a = asymptotic_policy(users, "zf", frame, 16, L, K)
        b = optimize_policy(users, "zf", frame, 16, solver="dp")
        dominated &= a.spectral_efficiency <= b.spectral_efficiency * (1 + 1e-12)
    dist = ProductDistribution.lognormal(math.log(100.0), 0.5)
    params = asymptotic_params(dist, 64, 100)
    gaps = []
    for U in (100, 1000):
        users = UserSet.from_products(dist.sample(U, np.random.default_rng(SEED)))
        a = asymptotic_policy(users, "zf", frame, 64, *params)
        b = optimize_policy(users, "zf", frame, 64, solver="dp")
        gaps.append(1 - a.spectral_efficiency / b.spectral_efficiency)
    ok = worst_h <= 1e-9 and worst_lim <= 1e-3 and dominated and gaps[1] < gaps[0]
    return ok, (f"h vs priced SINR {worst_h:.1e}, limits {worst_lim:.1e}, dominance {dominated}, "
                f"relative SE gap U=100 {gaps[0]:.4f} -> U=1000 {gaps[1]:.4f}")


def c10():
    cfg = ExperimentConfig()
    notes, ok = [], True
    for E_dB in cfg.energy_dB_sweep:
        users = build_population(cfg.replace(energy_dB=E_dB))
        p = optimize_policy(users, "zf", TABLE_FRAME, 64, solver="dp")
        ro = random_optimal(users, "zf", TABLE_FRAME, 64, seed=0, num_draws=20)
        re = random_equal(users, "zf", TABLE_FRAME, 64, seed=0, num_draws=20)
        chain = p.latency_seconds <= ro.mean_latency_seconds <= re.mean_latency_seconds
        ok &= chain
        if not chain:
            notes.append(f"E={E_dB:g}dB: {p.latency_seconds:.4g} / {ro.mean_latency_seconds:.4g} / "
                         f"{re.mean_latency_seconds:.4g}")
    return ok, f"{len(cfg.energy_dB_sweep)} energy points" + (": " + "; ".join(notes) if notes else " ordered")


CRITERIA = {
    1: ("toy example replay", c1, 1.0),
    2: ("LP vertex integrality", c2, 30.0),
    3: ("contiguous partitions are optimal", c3, 120.0),
    4: ("closed-form training energy", c4, 30.0),
    5: ("table structure at E=70dB", c5, 300.0),
    6: ("rate approximation accuracy", c6, 600.0),
    7: ("chi* and Lambert W", c7, 1.0),
    8: ("search-space count", c8, 5.0),
    9: ("asymptotic consistency", c9, 300.0),
    10: ("dominance chain", c10, 300.0),
}


def run_criterion(n: int) -> bool:
    title, fn, budget = CRITERIA[n]
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # report, never hide
        ok, detail = False, f"raised {type(exc).__name__}: {exc}"
    elapsed = time.perf_counter() - t0
    in_time = elapsed < budget
    passed = bool(ok) and in_time
    print(f"{'PASS' if passed else 'FAIL'} criterion {n}: {title} - {detail} "
          f"[{elapsed:.1f}s, budget {budget:g}s]", flush=True)
    return passed


@pytest.mark.slow
@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n):
    assert run_criterion(n)


if __name__ == "__main__":
    chosen = [int(a) for a in sys.argv[1:]] or sorted(CRITERIA)
    results = [run_criterion(n) for n in chosen]
    sys.exit(0 if all(results) else 1)
