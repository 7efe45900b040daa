"""Command-line entry points and experiment orchestration.

Subcommands: solve-dp, train-prices, simulate, sweep, oracle-check, bench.
Configs are JSON; results are CSV (17 significant digits, fixed column order,
rows sorted) so repeated runs with the same seeds are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .net_model import (
    SpecError,
    ValidatedSpec,
    network_from_dict,
    validate_spec,
)
from .oracle import enumerate_best_value
from .packet_dp import (
    PriceVector,
    policy_from_table,
    solve_value_table,
)
from .policies import PolicyBundle
from .price_learner import (
    recover_primal,
    run_offline_iteration,
    run_online_iteration,
    solve_tables,
)
from .sim_engine import HAVE_COMPILED_KERNEL, Simulation, metrics_summary, run


def bundled_config(name: str) -> str:
    """Path of a config shipped with the package (e.g. 'relay3.json')."""
    return str(resources.files("dlsched") / "configs" / name)


def _load_network_doc(doc, base_dir: str) -> ValidatedSpec:
    if isinstance(doc, str):
        path = doc if os.path.isabs(doc) else os.path.join(base_dir, doc)
        with open(path) as fh:
            doc = json.load(fh)
    return validate_spec(network_from_dict(doc))


@dataclass(frozen=True)
class ExperimentConfig:
    network: ValidatedSpec
    sweep_node: int
    sweep_budgets: tuple[float, ...]
    policies: tuple[str, ...]
    slots: int
    seeds: tuple[int, ...]
    train_iters: int
    train_a0: float | None
    train_exponent: float


def parse_config(doc: dict, base_dir: str = ".") -> ExperimentConfig:
    """Validated experiment config; unknown keys are rejected with their path."""
    allowed = {"network", "sweep", "policies", "slots", "seeds", "training"}
    extra = set(doc) - allowed
    if extra:
        raise SpecError([f"config: unknown keys {sorted(extra)}"])
    spec = _load_network_doc(doc["network"], base_dir)

    sweep = doc.get("sweep", {})
    extra = set(sweep) - {"node", "budgets"}
    if extra:
        raise SpecError([f"config.sweep: unknown keys {sorted(extra)}"])
    node = int(sweep.get("node", 0))
    if not 0 <= node < spec.num_nodes:
        raise SpecError([f"config.sweep.node: node {node} does not exist"])
    budgets = tuple(float(b) for b in sweep.get("budgets",
                                                [spec.nodes[node].budget]))
    if any(b <= 0 for b in budgets):
        raise SpecError(["config.sweep.budgets: budgets must be positive"])

    policies = tuple(doc.get("policies", ["dual", "edf"]))
    for p in policies:
        if p not in PolicyBundle.MODES:
            raise SpecError([f"config.policies: unknown policy {p!r}"])

    slots = int(doc.get("slots", 100000))
    if slots < 1:
        raise SpecError(["config.slots: must be >= 1"])
    seeds_doc = doc.get("seeds", 5)
    seeds = (
        tuple(int(s) for s in seeds_doc)
        if isinstance(seeds_doc, list)
        else tuple(range(int(seeds_doc)))
    )
    if len(seeds) < 1:
        raise SpecError(["config.seeds: need at least one seed"])

    training = doc.get("training", {})
    extra = set(training) - {"iters", "a0", "exponent"}
    if extra:
        raise SpecError([f"config.training: unknown keys {sorted(extra)}"])
    return ExperimentConfig(
        network=spec,
        sweep_node=node,
        sweep_budgets=budgets,
        policies=policies,
        slots=slots,
        seeds=seeds,
        train_iters=int(training.get("iters", 300)),
        train_a0=training.get("a0"),
        train_exponent=float(training.get("exponent", 0.5)),
    )


def load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(json.load(fh), os.path.dirname(os.path.abspath(path)))


@dataclass(frozen=True)
class ResultRow:
    sweep_value: float
    policy: str
    seed: int
    weighted_throughput: float
    throughput: tuple[float, ...]  # per flow
    usage: tuple[float, ...]  # per node
    prices: tuple[float, ...]  # per node, as trained for this sweep point


def run_sweep(cfg: ExperimentConfig, backend: str = "auto",
              threads: int = 1) -> list[ResultRow]:
    """Train prices and run every (sweep value, policy, seed) combination.

    Prices are retrained at each sweep point, warm-started from the previous
    point.  Individual runs are independent and reproducible per seed; they
    may execute concurrently.
    """
    spec0 = cfg.network
    weights = [f.weight for f in spec0.flows]
    jobs = []
    prices = PriceVector.zeros(spec0.num_nodes)
    for budget in cfg.sweep_budgets:
        spec = spec0.with_budget(cfg.sweep_node, budget)
        need_dual = "dual" in cfg.policies
        if need_dual:
            _, _, state = run_offline_iteration(
                spec, prices, cfg.train_a0, cfg.train_exponent, cfg.train_iters
            )
            prices, tables, _ = recover_primal(spec, state.prices)
            dual_tables = {f: pt for f, (_, pt) in tables.items()}
        row_prices = tuple(float(x) for x in prices.lam)
        for policy in cfg.policies:
            if policy == "dual":
                bundle = PolicyBundle("dual", dual_tables, prices)
            else:
                bundle = PolicyBundle(policy)
            for seed in cfg.seeds:
                jobs.append((budget, policy, seed, spec, bundle, row_prices))

    def one(job) -> ResultRow:
        budget, policy, seed, spec, bundle, row_prices = job
        metrics, _ = run(spec, bundle, cfg.slots, seed, backend)
        return ResultRow(
            budget,
            policy,
            seed,
            metrics.weighted_throughput(weights),
            tuple(float(x) for x in metrics.throughput),
            tuple(float(x) for x in metrics.usage),
            row_prices,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, jobs))
    else:
        rows = [one(j) for j in jobs]
    rows.sort(key=lambda r: (r.sweep_value, r.policy, r.seed))
    return rows


def _fmt(x: float) -> str:
    return format(x, ".17g")


def emit_csv(rows: list[ResultRow]) -> str:
    """Stable columns, 17 significant digits; round-trips losslessly."""
    if not rows:
        raise ValueError("no rows to emit")
    nf = len(rows[0].throughput)
    nv = len(rows[0].usage)
    header = (
        ["sweep_value", "policy", "seed", "weighted_throughput"]
        + [f"thr_f{i}" for i in range(nf)]
        + [f"usage_n{v}" for v in range(nv)]
        + [f"price_n{v}" for v in range(nv)]
    )
    lines = [",".join(header)]
    for r in rows:
        fields = (
            [_fmt(r.sweep_value), r.policy, str(r.seed), _fmt(r.weighted_throughput)]
            + [_fmt(x) for x in r.throughput]
            + [_fmt(x) for x in r.usage]
            + [_fmt(x) for x in r.prices]
        )
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def parse_result_csv(text: str) -> list[ResultRow]:
    lines = [ln for ln in text.strip().split("\n") if ln]
    header = lines[0].split(",")
    nf = sum(1 for h in header if h.startswith("thr_f"))
    nv = sum(1 for h in header if h.startswith("usage_n"))
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        base = 4
        rows.append(
            ResultRow(
                float(parts[0]),
                parts[1],
                int(parts[2]),
                float(parts[3]),
                tuple(float(x) for x in parts[base : base + nf]),
                tuple(float(x) for x in parts[base + nf : base + nf + nv]),
                tuple(float(x) for x in parts[base + nf + nv : base + nf + 2 * nv]),
            )
        )
    return rows


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _load_spec_arg(path: str) -> ValidatedSpec:
    with open(path) as fh:
        doc = json.load(fh)
    if "network" in doc:  # experiment config; use its network
        return parse_config(doc, os.path.dirname(os.path.abspath(path))).network
    return validate_spec(network_from_dict(doc))


def _load_prices(path: str | None, num_nodes: int) -> PriceVector:
    if path is None:
        return PriceVector.zeros(num_nodes)
    with open(path) as fh:
        doc = json.load(fh)
    return PriceVector(np.asarray(doc["lambda"], dtype=float))


def _parse_tie(s: str):
    if s in ("idle", "attempt"):
        return s
    return float(s)


def cmd_solve_dp(args) -> int:
    spec = _load_spec_arg(args.config)
    prices = _load_prices(args.prices, spec.num_nodes)
    tables = solve_tables(spec, prices, _parse_tie(args.tie))
    out = sys.stdout if args.out is None else open(args.out, "w")
    print("flow,hop,time_to_go,value,phi", file=out)
    flows = [args.flow] if args.flow is not None else [f.id for f in spec.flows]
    for fid in flows:
        vt, pt = tables[fid]
        for hop in range(1, vt.num_hops + 1):
            for s in range(vt.max_deadline + 1):
                print(
                    f"{fid},{hop},{s},{_fmt(vt.values[hop, s])},{_fmt(pt.phi[hop, s])}",
                    file=out,
                )
    if out is not sys.stdout:
        out.close()
    return 0


def cmd_train_prices(args) -> int:
    spec = _load_spec_arg(args.config)
    if args.mode == "offline":
        trace, _, state = run_offline_iteration(
            spec, None, args.a0, args.exp, args.iters
        )
    else:
        prices = PriceVector.zeros(spec.num_nodes)
        tables = {f: pt for f, (_, pt) in solve_tables(spec, prices).items()}
        sim = Simulation(spec, PolicyBundle("dual", tables, prices), args.seed)
        trace, state = run_online_iteration(
            spec, sim, args.window, args.a0, args.exp, args.iters
        )
    out = sys.stdout if args.out is None else open(args.out, "w")
    V = spec.num_nodes
    header = (
        ["k"] + [f"lambda_n{v}" for v in range(V)] + [f"g_n{v}" for v in range(V)]
        + ["dual_value"]
    )
    print(",".join(header), file=out)
    for rec in trace:
        fields = (
            [str(rec["k"])]
            + [_fmt(x) for x in rec["prices"]]
            + [_fmt(x) for x in rec["gradient"]]
            + [_fmt(rec["dual"])]
        )
        print(",".join(fields), file=out)
    if out is not sys.stdout:
        out.close()
    if args.save_prices:
        final = state.prices
        if args.recover:
            final, _, _ = recover_primal(spec, final)
        with open(args.save_prices, "w") as fh:
            json.dump({"lambda": [float(x) for x in final.lam]}, fh)
            fh.write("\n")
    return 0


def cmd_simulate(args) -> int:
    spec = _load_spec_arg(args.config)
    if args.policy == "dual":
        prices = _load_prices(args.prices, spec.num_nodes)
        tables = {
            f: policy_from_table(vt, _parse_tie(args.tie))
            for f, (vt, _) in solve_tables(spec, prices).items()
        }
        bundle = PolicyBundle("dual", tables, prices, hard_cap=args.hard_cap)
    else:
        bundle = PolicyBundle(args.policy, hard_cap=args.hard_cap)
    metrics, trace = run(
        spec, bundle, args.slots, args.seed, args.backend, args.trace is not None
    )
    weights = [f.weight for f in spec.flows]
    report = {"metrics": metrics.to_dict(), "summary": metrics_summary(metrics, weights)}
    print(json.dumps(report, indent=2, sort_keys=True))
    if args.trace is not None:
        with open(args.trace, "w") as fh:
            F, V = spec.num_flows, spec.num_nodes
            header = (
                ["slot"]
                + [f"arrivals_f{i}" for i in range(F)]
                + [f"delivered_f{i}" for i in range(F)]
                + [f"dropped_f{i}" for i in range(F)]
                + [f"attempts_n{v}" for v in range(V)]
            )
            fh.write(",".join(header) + "\n")
            for t in range(args.slots):
                row = (
                    [str(t)]
                    + [str(x) for x in trace["arrivals"][t]]
                    + [str(x) for x in trace["delivered"][t]]
                    + [str(x) for x in trace["dropped"][t]]
                    + [str(x) for x in trace["attempts"][t]]
                )
                fh.write(",".join(row) + "\n")
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    rows = run_sweep(cfg, args.backend, args.threads)
    csv = emit_csv(rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(csv)
    else:
        sys.stdout.write(csv)
    return 0


def cmd_oracle_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.instances):
        L = int(rng.integers(1, args.max_hops + 1))
        D = int(rng.integers(L, args.max_deadline + 1))
        route = [(i, i, float(rng.uniform(0.05, 1.0))) for i in range(L)]
        prices = PriceVector(rng.uniform(0.0, 1.0, size=L))
        alpha = float(rng.uniform(0.1, 2.0))
        vt = solve_value_table(route, alpha, prices, D)
        best, _ = enumerate_best_value(route, alpha, prices, D)
        worst = max(worst, abs(vt.source_value(D) - best))
    print(f"instances={args.instances} max_discrepancy={worst:.3e}")
    return 0 if worst <= 1e-9 else 1


def cmd_bench(args) -> int:
    spec = _load_spec_arg(args.config)
    bundle = PolicyBundle("greedy")
    results = {}
    backends = ["python"] + (["compiled"] if HAVE_COMPILED_KERNEL else [])
    for backend in backends:
        t0 = time.perf_counter()
        metrics, _ = run(spec, bundle, args.slots, args.seed, backend)
        dt = time.perf_counter() - t0
        results[backend] = (dt, metrics)
        print(f"{backend:>9}: {args.slots / dt:>12.0f} slots/s  ({dt:.3f} s)")
    if len(results) == 2:
        same = np.array_equal(
            results["python"][1].delivered, results["compiled"][1].delivered
        ) and np.array_equal(
            results["python"][1].attempts, results["compiled"][1].attempts
        )
        speedup = results["python"][0] / results["compiled"][0]
        print(f"speedup: {speedup:.1f}x  identical trajectories: {same}")
        return 0 if same else 1
    print("compiled kernel not available; benchmarked the Python kernel only")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="dlsched",
        description="Deadline-constrained multi-hop scheduling: simulator, "
        "dual-price policies, and baselines",
    )
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("solve-dp", help="dump value/policy tables as CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--flow", type=int, default=None)
    p.add_argument("--prices", default=None)
    p.add_argument("--tie", default="idle")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_solve_dp)

    p = sub.add_parser("train-prices", help="run the subgradient price iteration")
    p.add_argument("--config", required=True)
    p.add_argument("--mode", choices=["offline", "online"], default="offline")
    p.add_argument("--iters", type=int, default=300)
    p.add_argument("--a0", type=float, default=None)
    p.add_argument("--exp", type=float, default=0.5)
    p.add_argument("--window", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--save-prices", default=None)
    p.add_argument("--recover", action="store_true",
                   help="polish prices and calibrate ties before saving")
    p.set_defaults(fn=cmd_train_prices)

    p = sub.add_parser("simulate", help="run the simulator once")
    p.add_argument("--config", required=True)
    p.add_argument("--policy", choices=PolicyBundle.MODES, default="dual")
    p.add_argument("--prices", default=None)
    p.add_argument("--tie", default="idle")
    p.add_argument("--slots", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hard-cap", action="store_true")
    p.add_argument("--backend", choices=["auto", "compiled", "python"],
                   default="auto")
    p.add_argument("--trace", default=None, help="write per-slot CSV trace here")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("sweep", help="run a capacity-sweep experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--backend", choices=["auto", "compiled", "python"],
                   default="auto")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("oracle-check",
                       help="cross-validate the DP against brute force")
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--max-hops", type=int, default=3)
    p.add_argument("--max-deadline", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_oracle_check)

    p = sub.add_parser("bench", help="compare the Python and compiled kernels")
    p.add_argument("--config", default=bundled_config("relay3.json"))
    p.add_argument("--slots", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
