"""Compare the numba and pure-numpy kernel backends.

    python benchmarks/bench_kernels.py [--trials 2000] [--repeat 5]

Each backend runs in its own interpreter because the choice is fixed at
import time by ALPHADUPLEX_NUMBA.
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from alphaduplex import kernels
from alphaduplex.config import RunConfig
from alphaduplex.engine import simulate

trials, repeat = int(sys.argv[1]), int(sys.argv[2])
rng = np.random.default_rng(0)
pts = rng.uniform(0, 1000, (4000, 2))
sites = rng.uniform(0, 1000, (33, 2))
w = rng.uniform(0, 5, 33)
g = rng.standard_exponential((4000, 33))
skip = rng.integers(-1, 33, 4000)
pix = rng.uniform(0, 1000, (10000, 2))

def best(fn):
    fn()  # warm-up (JIT compile)
    times = []
    for _ in range(repeat):
        t = time.perf_counter(); fn(); times.append(time.perf_counter() - t)
    return min(times)

rc = RunConfig(trials=str(trials))
topo, cfg = rc.topology(), rc.duplex_config()
out = {
    "backend": kernels.BACKEND,
    "nearest_site_4000x33": best(lambda: kernels.nearest_site(pts, sites)),
    "faded_power_sum_4000x33": best(lambda: kernels.faded_power_sum(pts, sites, w, g, skip, 2.0, 1.0)),
    "power_sum_10000x33": best(lambda: kernels.power_sum(pix, sites, w, 2.0, 1.0)),
    f"simulate_{trials}_trials": best(lambda: simulate(topo, cfg)),
}
print(json.dumps(out))
"""


def run(flag, trials, repeat):
    env = dict(os.environ, ALPHADUPLEX_NUMBA=flag)
    res = subprocess.run([sys.executable, "-c", WORKER, str(trials), str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    fast, slow = run("1", args.trials, args.repeat), run("0", args.trials, args.repeat)
    print(f"{'kernel':<28}{'numpy [s]':>12}{fast['backend'] + ' [s]':>12}{'speedup':>10}")
    for key in fast:
        if key == "backend":
            continue
        print(f"{key:<28}{slow[key]:>12.5f}{fast[key]:>12.5f}{slow[key] / fast[key]:>9.1f}x")


if __name__ == "__main__":
    main()
