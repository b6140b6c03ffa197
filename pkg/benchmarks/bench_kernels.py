"""Compiled vs numpy kernels.

Times each hot loop on inputs shaped like a full-size simulation day, then a
complete epidemic run under each backend (the backend is fixed at import, so
the end-to-end run uses a subprocess per backend).

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from epiframes import _pykernels

try:
    from epiframes import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def kernel_inputs(seed=0):
    rng = np.random.default_rng(seed)
    # meetings: ~25 cells x 20 meetings x ~6 attendees on a 22k population
    n_people, n_meet = 22_000, 500
    sizes = rng.poisson(5, n_meet) + 1
    ptr = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    participants = rng.integers(0, n_people, ptr[-1]).astype(np.int64)
    is_source = rng.random(n_people) < 0.05
    state = np.zeros(n_people, dtype=np.int8)
    keys = rng.random(ptr[-1])
    # contact sets: 2,000 anchors with ~10 contacts
    M = rng.poisson(10, 2000) + 1
    cptr = np.concatenate([[0], np.cumsum(M)]).astype(np.int64)
    ckeys = rng.random(cptr[-1])
    take = np.minimum(M, 12)
    values = rng.random(cptr[-1])
    pools = rng.integers(50, 1000, 25)
    picks = np.minimum(pools, rng.integers(1, 40, 25))
    unif = rng.random(int(picks.sum()))
    return {
        "contagion": lambda mod: mod.contagion(ptr, participants, is_source, state.copy(), keys, 3, 0, 1),
        "select_by_keys": lambda mod: mod.select_by_keys(cptr, ckeys, take),
        "segment_sums": lambda mod: mod.segment_sums(cptr, values),
        "floyd_sample": lambda mod: mod.floyd_sample(pools, picks, unif),
    }


def time_call(fn, repeat):
    n, _ = timeit.Timer(fn).autorange()
    return min(timeit.repeat(fn, number=n, repeat=repeat)) / n


def epidemic_seconds(pure: bool, repeat: int) -> float:
    code = (
        "import timeit; from epiframes.synthpop import SimConfig, run_epidemic;"
        f"print(min(timeit.repeat(lambda: run_epidemic(SimConfig(seed=1)), number=1, repeat={repeat})))"
    )
    env = dict(os.environ, EPIFRAMES_PURE="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    if _ckernels is None:
        print("compiled kernels not built; only the numpy timings are shown")
    print(f"{'kernel':<16}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}")
    for name, call in kernel_inputs().items():
        tp = time_call(lambda: call(_pykernels), args.repeat) * 1e3
        if _ckernels is None:
            print(f"{name:<16}{tp:>14.3f}{'-':>14}{'-':>10}")
            continue
        tc = time_call(lambda: call(_ckernels), args.repeat) * 1e3
        print(f"{name:<16}{tp:>14.3f}{tc:>14.3f}{tp / tc:>9.1f}x")

    tp = epidemic_seconds(True, args.repeat)
    line = f"{'run_epidemic':<16}{tp * 1e3:>14.1f}"
    if _ckernels is not None:
        tc = epidemic_seconds(False, args.repeat)
        line += f"{tc * 1e3:>14.1f}{tp / tc:>9.1f}x"
    print(line)


if __name__ == "__main__":
    main()
