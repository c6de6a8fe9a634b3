"""Compare the compiled and pure-Python sampling kernels.

Both backends run the same seeded workload; the script checks that their
outputs are bit-identical and reports wall-clock time per backend.

    python benchmarks/bench_kernels.py --episodes 200
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from lazymdp._kernels import available_backends
from lazymdp.gridworld import compile_grid, default_uniform, load_map
from lazymdp.lazy import LazyMDPSpec
from lazymdp.learning import QLearningConfig, learn_z, occupancy, q_learning_lazy


def _timed(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def workloads(episodes: int):
    grid = compile_grid(load_map("kdt_apple"))
    uniform = default_uniform(grid)
    spec = LazyMDPSpec(grid.mdp, uniform, 0.03)
    cfg = QLearningConfig(episodes_per_phase=max(1, episodes // 10), n_phases=10, eval_episodes=10, seed=7)
    rb = compile_grid(load_map("rivers_bridges"))
    rb_pi = default_uniform(rb)
    return {
        "q_learning_lazy": lambda b: q_learning_lazy(spec, cfg, backend=b).q,
        "learn_z": lambda b: learn_z(rb.mdp, rb_pi, cfg, n_episodes=episodes, backend=b),
        "occupancy": lambda b: occupancy(grid.mdp, uniform, episodes, 1000, seed=3, backend=b),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--episodes", type=int, default=200)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    backends = available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; only the Python backend is available")
    print(f"{'workload':<18}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}  identical")
    for name, fn in workloads(args.episodes).items():
        times, outs = {}, {}
        for b in backends:
            times[b], outs[b] = _timed(lambda: fn(b), args.repeat)
        same = all(np.array_equal(outs[backends[0]], outs[b]) for b in backends)
        speed = times["python"] / times["cython"] if len(backends) > 1 else float("nan")
        cols = "".join(f"{times[b]:>11.3f}s" for b in backends)
        print(f"{name:<18}{cols}{speed:>9.1f}x  {same}")


if __name__ == "__main__":
    main()
