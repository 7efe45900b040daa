"""Compare the pure-Python and compiled slot-loop kernels.

Runs each policy mode on the bundled relay network with both backends,
reports slots/second and the speedup, and verifies that the two backends
produce bit-identical trajectories (they share the same RNG substreams).

Usage: python benchmarks/bench_backends.py [--slots N] [--seed S]
"""

import argparse
import time

import numpy as np

from dlsched.cli import bundled_config
from dlsched.net_model import load_network
from dlsched.packet_dp import PriceVector
from dlsched.policies import PolicyBundle
from dlsched.price_learner import solve_tables
from dlsched.sim_engine import HAVE_COMPILED_KERNEL, run


def make_bundle(spec, mode):
    if mode != "dual":
        return PolicyBundle(mode)
    # half-price node 0 with randomized ties: exercises the policy stream
    prices = PriceVector.zeros(spec.num_nodes).replace(0, 0.5)
    tables = {f: pt for f, (_, pt) in solve_tables(spec, prices, 0.5).items()}
    return PolicyBundle("dual", tables, prices)


def bench(spec, bundle, backend, slots, seed):
    t0 = time.perf_counter()
    metrics, _ = run(spec, bundle, slots, seed, backend)
    return time.perf_counter() - t0, metrics


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--slots", type=int, default=20000)
    ap.add_argument("--py-slots", type=int, default=4000,
                    help="slots for the (much slower) Python kernel")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    spec = load_network(bundled_config("relay3.json"))
    print(f"compiled kernel available: {HAVE_COMPILED_KERNEL}")
    print(f"{'mode':>8} {'python slots/s':>15} {'compiled slots/s':>17} "
          f"{'speedup':>8}  identical")
    for mode in ("idle", "greedy", "edf", "dual"):
        bundle = make_bundle(spec, mode)
        dt_py, m_py = bench(spec, bundle, "python", args.py_slots, args.seed)
        row = f"{mode:>8} {args.py_slots / dt_py:>15.0f}"
        if HAVE_COMPILED_KERNEL:
            dt_cy, m_cy = bench(spec, bundle, "compiled", args.slots, args.seed)
            # identical-trajectory check needs equal run lengths
            _, m_cy_short = bench(spec, bundle, "compiled", args.py_slots,
                                  args.seed)
            same = np.array_equal(m_py.delivered, m_cy_short.delivered) and \
                np.array_equal(m_py.attempts, m_cy_short.attempts)
            speedup = (args.slots / dt_cy) / (args.py_slots / dt_py)
            row += f" {args.slots / dt_cy:>17.0f} {speedup:>7.1f}x  {same}"
        print(row)


if __name__ == "__main__":
    main()
