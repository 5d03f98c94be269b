"""Time the compiled and numpy model kernels on the ten-link, three-tendon robot.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.
"""

import argparse
import timeit

import numpy as np

from tendonkin import RobotGeometry, helical_routing
from tendonkin import _kernels_py

try:
    from tendonkin import _kernels_c
except ImportError:
    _kernels_c = None


def robot(n=10):
    ell = np.full(n, 0.017)
    tendons = tuple(helical_routing(ell, 0.005, 2 * np.pi * i / 3, 0.5, inset=0.002) for i in range(3))
    return RobotGeometry(n, ell, np.pi / 6, tendons)


def bench(module, geom, q, repeat):
    args = (q, geom.link_lengths, geom.waypoint_array, geom.anchored_array,
            np.array([1.0, 0.6, 0.0]), np.array([-0.15, -0.15, 0.0]), True)
    number = max(1, repeat)
    best = min(timeit.repeat(lambda: module.evaluate_model(*args), number=number, repeat=5))
    return best / number


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--repeat", type=int, default=2000)
    args = p.parse_args()
    rng = np.random.default_rng(0)
    for n in (2, 10, 40):
        geom = robot(n)
        q = rng.uniform(-0.4, 0.4, geom.dof)
        t_py = bench(_kernels_py, geom, q, args.repeat // 10)
        line = f"n={n:3d}  python {t_py * 1e6:9.1f} us"
        if _kernels_c is not None:
            t_c = bench(_kernels_c, geom, q, args.repeat)
            line += f"  cython {t_c * 1e6:8.1f} us  speedup {t_py / t_c:6.1f}x"
        else:
            line += "  cython (not built)"
        print(line)


if __name__ == "__main__":
    main()
