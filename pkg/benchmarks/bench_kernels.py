"""Time the hot kernels with numba and with the pure-Python fallback.

Each mode runs in a child process so that SELFSIM_NO_NUMBA takes effect at
import time.  Usage: python3 benchmarks/bench_kernels.py [--size N]
"""
import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from selfsim_khintchine import _accel
from selfsim_khintchine.experiments import _flow_bases
from selfsim_khintchine.ifs import missing_digit_ifs, sample_points
from selfsim_khintchine.lattice import an_star_batch, shortest_lengths
from selfsim_khintchine.transform import ApproxFunction

size = int(sys.argv[1])
rng = np.random.default_rng(0)
ifs = missing_digit_ifs(5, [0, 1, 2, 3])
bases = _flow_bases(rng.random((size, 1)), 6.0, np.eye(2))
xs = rng.random(max(size // 10, 1))
psi = ApproxFunction.recip()

def timed(fn):
    fn()  # warm-up (includes compilation when numba is on)
    t = time.perf_counter()
    fn()
    return time.perf_counter() - t

out = {
    "numba": _accel.USE_NUMBA,
    "sample_points": timed(lambda: sample_points(ifs, size, depth=30, seed=1)),
    "shortest_lengths": timed(lambda: shortest_lengths(bases)),
    "an_star_batch": timed(lambda: an_star_batch(xs, psi, range(10, 21))),
}
print(json.dumps(out))
"""


def run(size: int, disable: bool) -> dict:
    env = dict(os.environ)
    env.pop("SELFSIM_NO_NUMBA", None)
    if disable:
        env["SELFSIM_NO_NUMBA"] = "1"
    res = subprocess.run([sys.executable, "-c", CHILD, str(size)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=20000, help="number of points / lattices")
    args = ap.parse_args()
    fast = run(args.size, disable=False)
    slow = run(args.size, disable=True)
    if not fast["numba"]:
        print("numba unavailable: both columns use the pure-Python path")
    print(f"{'kernel':<18}{'numba [s]':>12}{'python [s]':>12}{'speedup':>10}")
    for key in ("sample_points", "shortest_lengths", "an_star_batch"):
        a, b = fast[key], slow[key]
        print(f"{key:<18}{a:>12.4f}{b:>12.4f}{b / a:>10.1f}")


if __name__ == "__main__":
    main()
