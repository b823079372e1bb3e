"""Numba vs numpy timing for the two float kernels.

Each backend runs in its own process, since OCTERM_DISABLE_NUMBA is read at
import.  The simulator counts must agree exactly; value iteration only
warm-starts the exact solver, so its results are compared loosely.

    python3 benchmarks/bench_kernels.py [--runs 100000] [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
from fractions import Fraction
import numpy as np
from octerm import kernels
from octerm.approx import analyze, build_segment_game
from octerm.finite_solver import ssg_reach_values
from octerm.model import Config, builtin_example
from octerm.oracle import simulate

runs, repeat = int(sys.argv[1]), int(sys.argv[2])
m = builtin_example("fig2")
a = analyze(m, Fraction(1, 100))
start = Config(m.index["s"], 1)

simulate(m, a.sigma_bar, None, start, 100, 10, 0)  # compile
sim = []
for k in range(repeat):
    t = time.perf_counter()
    rep = simulate(m, a.sigma_bar, None, start, 10**4, runs, 7 + k)
    sim.append((time.perf_counter() - t, rep.terminated))

seg = build_segment_game(m, a.liminf.nu, 400)
ssg_reach_values(seg.game)
vi = []
for _ in range(repeat):
    t = time.perf_counter()
    vals, _, _ = ssg_reach_values(seg.game)
    vi.append(time.perf_counter() - t)
print(json.dumps({"backend": kernels.backend(), "sim": sim, "solve": vi, "v": str(vals[seg.state(0, 1)])}))
"""


def run(disable, runs, repeat):
    env = dict(os.environ)
    env.pop("OCTERM_DISABLE_NUMBA", None)
    if disable:
        env["OCTERM_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", CHILD, str(runs), str(repeat)], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    res = {name: run(name == "numpy", args.runs, args.repeat) for name in ("numba", "numpy")}
    for name, r in res.items():
        best_sim = min(t for t, _ in r["sim"])
        print(f"{r['backend']:>6}  simulate {args.runs} runs: {best_sim:8.3f} s   segment solve (N=400): {min(r['solve']):7.3f} s")
    counts = [[c for _, c in r["sim"]] for r in res.values()]
    same = counts[0] == counts[1] and res["numba"]["v"] == res["numpy"]["v"]
    speed = min(t for t, _ in res["numpy"]["sim"]) / min(t for t, _ in res["numba"]["sim"])
    print(f"simulate speedup {speed:.1f}x, identical counts and exact values: {same}")
    if not same:
        sys.exit(1)


if __name__ == "__main__":
    main()
