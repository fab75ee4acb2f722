#!/usr/bin/env python3
"""Benchmark of the two simulation backends on a calibration-size
workload (28 agents, 48 iterations/day). The compiled kernel and the
pure-Python engine produce byte-identical logs; this script measures the
gap and verifies the outputs match while it is at it.

Usage: python benchmarks/bench_abm.py [--days 30] [--repeats 3]
"""

import argparse
import time

import numpy as np

from moodnet.abm import (AgentModel, AgentProfile, GlobalParams, HAVE_KERNEL,
                         simulate)
from moodnet.core import SCALES, WeightedInteractionGraph


def build_model(n=28, seed=17):
    rng = np.random.default_rng(seed)
    users = [f"u{i:02d}" for i in range(n)]
    edges = {}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.25:
                edges[(users[i], users[j])] = int(rng.integers(1, 30))
    for i in range(n - 1):
        edges.setdefault((users[i], users[i + 1]), 1)
    profiles = {u: AgentProfile(
        p_init=float(rng.uniform(0.003, 0.02)),
        p_reply=float(rng.uniform(0.2, 0.5)),
        p_prop=float(rng.uniform(0.003, 0.03)),
        baseline_sentiment=float(rng.uniform(-2.0, 3.0)),
        neutral_sentiment=0.5) for u in users}
    params = GlobalParams(iterations_per_day=48, mean_burst_size=1.5,
                          contagion_factor=0.2, reset_probability=0.1,
                          sentiment_noise=1.0, neighbour_threshold=1)
    return AgentModel(WeightedInteractionGraph(users, edges), profiles,
                      params, SCALES["mc"])


def bench(model, days, backend, repeats):
    times = []
    log = None
    for r in range(repeats):
        t0 = time.perf_counter()
        log = simulate(model, days, seed=42, backend=backend)
        times.append(time.perf_counter() - t0)
    return min(times), log


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--days", type=int, default=30)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    model = build_model()
    steps = args.days * model.global_params.iterations_per_day
    print(f"model: {model.n_agents} agents, {model.graph.n_edges} edges, "
          f"{steps} steps")

    t_py, log_py = bench(model, args.days, "python", args.repeats)
    rate_py = steps * model.n_agents / t_py
    print(f"python:   {t_py * 1e3:9.1f} ms  "
          f"({rate_py / 1e6:6.2f} M agent-steps/s, {len(log_py)} bursts)")

    if not HAVE_KERNEL:
        print("compiled: kernel not built (pip install -e . with a C "
              "toolchain to compare)")
        return

    t_c, log_c = bench(model, args.days, "compiled", args.repeats)
    rate_c = steps * model.n_agents / t_c
    print(f"compiled: {t_c * 1e3:9.1f} ms  "
          f"({rate_c / 1e6:6.2f} M agent-steps/s, {len(log_c)} bursts)")
    print(f"speedup:  {t_py / t_c:.1f}x")

    identical = all(
        np.array_equal(getattr(log_c, name), getattr(log_py, name))
        for name in ("steps", "senders", "recipients", "bursts", "sentiments"))
    print(f"logs byte-identical across backends: {identical}")
    if not identical:
        raise SystemExit("backend mismatch")


if __name__ == "__main__":
    main()
