"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line (run pytest with -s to see them all;
failures also carry the detail in the assertion message).
"""

import time

import numpy as np
import pytest

from dlsched.cli import bundled_config, emit_csv, load_config, parse_config, run_sweep
from dlsched.net_model import network_to_dict
from dlsched.oracle import enumerate_best_value, monte_carlo_packet_reward
from dlsched.packet_dp import (
    PriceVector,
    delivery_probability,
    policy_from_table,
    solve_value_table,
)
from dlsched.policies import PolicyBundle
from dlsched.price_learner import (
    dual_value,
    recover_primal,
    run_offline_iteration,
    solve_tables,
)
from dlsched.sim_engine import HAVE_COMPILED_KERNEL, run

from conftest import combined_se, random_instance


def report(name: str, ok: bool, detail: str) -> None:
    print(f"{name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


def test_a1_dp_exactness():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        route, alpha, prices, D = random_instance(rng)
        vt = solve_value_table(route, alpha, prices, D)
        best, _ = enumerate_best_value(route, alpha, prices, D)
        worst = max(worst, abs(vt.source_value(D) - best))
    dt = time.perf_counter() - t0
    report(
        "A1 value-table vs exhaustive enumeration",
        worst <= 1e-12 and dt < 10.0,
        f"max discrepancy {worst:.2e} over 200 instances, {dt:.2f}s",
    )


def test_a2_zero_price_identity():
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(100):
        route, alpha, _, D = random_instance(rng)
        vt = solve_value_table(route, alpha, PriceVector.zeros(len(route)), D)
        for s in range(D + 1):
            worst = max(
                worst,
                abs(vt.source_value(s) - alpha * delivery_probability(route, s)),
            )
    report(
        "A2 zero-price value equals delivery probability",
        worst <= 1e-12,
        f"max discrepancy {worst:.2e} over 100 instances",
    )


def test_a3_policy_value_realized():
    rng = np.random.default_rng(103)
    t0 = time.perf_counter()
    worst_z = 0.0
    for _ in range(20):
        route, alpha, prices, D = random_instance(rng)
        vt = solve_value_table(route, alpha, prices, D)
        pt = policy_from_table(vt)
        mean, se = monte_carlo_packet_reward(
            pt, route, alpha, prices, 100000, seed=int(rng.integers(1 << 30))
        )
        err = abs(mean - vt.source_value(D))
        assert err <= max(3 * se, 1e-12), f"{err} vs se {se}"
        if se > 0:
            worst_z = max(worst_z, err / se)
    dt = time.perf_counter() - t0
    report(
        "A3 Monte Carlo reward matches table value",
        dt < 30.0,
        f"worst z-score {worst_z:.2f} over 20 instances at n=1e5, {dt:.2f}s",
    )


def test_a4_dual_structure(relay3):
    rng = np.random.default_rng(104)
    # convexity along random segments of the price space
    worst_gap = -np.inf
    for _ in range(50):
        la = PriceVector(rng.uniform(0.0, 1.5, size=8))
        lb = PriceVector(rng.uniform(0.0, 1.5, size=8))
        t = float(rng.uniform())
        mid = PriceVector(t * la.lam + (1 - t) * lb.lam)
        gap = dual_value(relay3, mid) - (
            t * dual_value(relay3, la) + (1 - t) * dual_value(relay3, lb)
        )
        worst_gap = max(worst_gap, gap)
    assert worst_gap <= 1e-9

    # weak duality: no policy's simulated throughput beats any dual value
    weights = [f.weight for f in relay3.flows]
    sampled = [PriceVector.zeros(8)] + [
        PriceVector(rng.uniform(0.0, 1.0, size=8)) for _ in range(3)
    ]
    _, _, state = run_offline_iteration(relay3, iters=200)
    lam, tables, _ = recover_primal(relay3, state.prices)
    sampled.append(lam)
    bundles = {
        "dual": PolicyBundle("dual", {f: pt for f, (_, pt) in tables.items()}, lam),
        "edf": PolicyBundle("edf"),
        "greedy": PolicyBundle("greedy"),
    }
    worst_excess = -np.inf
    for name, bundle in bundles.items():
        m, _ = run(relay3, bundle, 20000, seed=13)
        thr = m.weighted_throughput(weights)
        for lv in sampled:
            excess = thr / dual_value(relay3, lv) - 1.0
            worst_excess = max(worst_excess, excess)
    report(
        "A4 dual convexity and weak duality",
        worst_gap <= 1e-9 and worst_excess <= 0.02,
        f"max convexity gap {worst_gap:.1e}, max throughput/dual - 1 = "
        f"{worst_excess:+.4f}",
    )


def test_a5_constraint_satisfaction(relay3):
    spec = relay3.with_budget(0, 50.0)
    _, _, state = run_offline_iteration(spec, iters=300)
    lam, tables, _ = recover_primal(spec, state.prices)
    bundle = PolicyBundle("dual", {f: pt for f, (_, pt) in tables.items()}, lam)
    m, _ = run(spec, bundle, 100000, seed=21)
    budgets = np.asarray(spec.budgets())
    usage_ok = np.all(m.usage <= budgets * 1.01)
    slackness = lam.lam * (budgets - m.usage) / budgets
    slack_ok = np.all(slackness <= 0.02)
    report(
        "A5 trained prices satisfy budgets and complementary slackness",
        bool(usage_ok and slack_ok),
        f"max usage/budget {np.max(m.usage / budgets):.4f}, "
        f"max slackness {np.max(slackness):.4f}",
    )


def test_a6_capacity_sweep_dominance(relay3):
    t0 = time.perf_counter()
    cfg = load_config(bundled_config("relay3_experiment.json"))
    if not HAVE_COMPILED_KERNEL:
        # pure-Python kernel: shrink the runs to stay inside the time budget
        doc = {
            "network": network_to_dict(cfg.network),
            "sweep": {"node": 0, "budgets": list(cfg.sweep_budgets)},
            "policies": list(cfg.policies),
            "slots": 8000,
            "seeds": 2,
        }
        cfg = parse_config(doc)
    rows = run_sweep(cfg)

    stats = {}  # (budget, policy) -> (mean, se)
    for budget in cfg.sweep_budgets:
        for policy in cfg.policies:
            vals = [
                r.weighted_throughput
                for r in rows
                if r.sweep_value == budget and r.policy == policy
            ]
            se = float(np.std(vals, ddof=1) / np.sqrt(len(vals)))
            stats[(budget, policy)] = (float(np.mean(vals)), se)

    dominance_ok = True
    worst_margin = np.inf
    for budget in cfg.sweep_budgets:
        dual_m, dual_se = stats[(budget, "dual")]
        edf_m, edf_se = stats[(budget, "edf")]
        margin = dual_m - edf_m + combined_se(dual_se, edf_se)
        worst_margin = min(worst_margin, margin)
        if margin < 0:
            dominance_ok = False

    monotone_ok = True
    worst_step = np.inf
    for b0, b1 in zip(cfg.sweep_budgets, cfg.sweep_budgets[1:]):
        m0, se0 = stats[(b0, "dual")]
        m1, se1 = stats[(b1, "dual")]
        step = m1 - m0 + combined_se(se0, se1)
        worst_step = min(worst_step, step)
        if step < 0:
            monotone_ok = False
    dt = time.perf_counter() - t0
    report(
        "A6 capacity sweep: priced policy dominates EDF and is monotone",
        dominance_ok and monotone_ok and dt < 600.0,
        f"min dominance margin {worst_margin:+.3f}, min monotone step "
        f"{worst_step:+.3f}, {dt:.1f}s",
    )


def test_a7_sweep_determinism(relay3):
    doc = {
        "network": network_to_dict(relay3),
        "sweep": {"node": 0, "budgets": [50.0, 100.0]},
        "policies": ["dual", "edf"],
        "slots": 2000,
        "seeds": [0, 1],
    }
    a = emit_csv(run_sweep(parse_config(doc)))
    b = emit_csv(run_sweep(parse_config(doc)))
    report(
        "A7 repeated sweep is byte-identical",
        a == b,
        f"{len(a)} bytes compared",
    )


def test_a8_baseline_equivalences(relay3):
    # greedy is the zero-price policy with ties resolved to attempt
    prices = PriceVector.zeros(8)
    tables = {
        f: policy_from_table(vt, "attempt")
        for f, (vt, _) in solve_tables(relay3, prices).items()
    }
    dual = PolicyBundle("dual", tables, prices)
    md, td = run(relay3, dual, 3000, seed=31, collect_trace=True)
    mg, tg = run(relay3, PolicyBundle("greedy"), 3000, seed=31, collect_trace=True)
    greedy_ok = all(np.array_equal(td[k], tg[k]) for k in td)

    # EDF's token bucket keeps every window within budget
    spec = relay3.with_budget(0, 30.0)
    _, trace = run(spec, PolicyBundle("edf"), 100000, seed=32, collect_trace=True)
    attempts = trace["attempts"]
    cum = np.cumsum(attempts, axis=0)
    cum = np.vstack([np.zeros((1, attempts.shape[1]), dtype=np.int64), cum])
    budgets = np.asarray(spec.budgets())
    window_ok = True
    worst = -np.inf
    for W in (1, 7, 50, 1000):
        sums = cum[W:] - cum[:-W]
        excess = np.max(sums - (budgets * W + 1.0))
        worst = max(worst, excess)
        if excess > 0:
            window_ok = False
    report(
        "A8 greedy equals zero-price policy; EDF windows within budget",
        greedy_ok and window_ok,
        f"trace identical: {greedy_ok}, max window excess {worst:+.1f} attempts",
    )
