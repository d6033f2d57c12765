"""Compiled kernels versus the numpy fallback.

Times velocity jets of a polynomial General system and Moser row transport
with ``CTRLCURV_NUMBA`` on and off, checks that both paths agree, and prints
one line per workload.  The first compiled call is excluded (JIT warm-up).

    python3 benchmarks/bench_kernels.py [--points N] [--repeat R]
"""

import argparse
import os
import time

import numpy as np

from ctrlcurv import systems as S
from ctrlcurv.flows import MoserFamily, generate_commuting_system
from ctrlcurv.invariants.lattice import lattice_points


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def with_numba(flag, fn, repeat):
    old = os.environ.get("CTRLCURV_NUMBA")
    os.environ["CTRLCURV_NUMBA"] = "1" if flag else "0"
    try:
        if flag:
            fn()  # compile
        return best_of(fn, repeat)
    finally:
        if old is None:
            del os.environ["CTRLCURV_NUMBA"]
        else:
            os.environ["CTRLCURV_NUMBA"] = old


def jets_workload(n):
    sys = S.general("(1 + 0.2*q1 + 0.1*q2^2)*cos(u) + 0.1*q1*q2", "(1.3 - 0.1*q1*q2)*sin(u) + 0.05*cos(2*u)")
    rng = np.random.default_rng(0)
    q1, q2, u = rng.uniform(-0.5, 0.5, n), rng.uniform(-0.5, 0.5, n), rng.uniform(0, 2 * np.pi, n)
    return lambda: np.concatenate([sys.jets(q1, q2, u).f, sys.jets(q1, q2, u).fuq1])


def transport_workload(n):
    sys = generate_commuting_system(MoserFamily("0.2*u", "0.3*q2 + 0.1*u*q2^2", 1, 0.0), closed_form=False)
    m = max(1, n // 81)
    q1, q2, u = np.linspace(-0.3, 0.3, m), np.linspace(-0.3, 0.3, m), np.linspace(-1, 1, m)
    Q1, Q2, U = lattice_points(q1, q2, u, 1e-3, 4, 4)
    return lambda: sys.jets(Q1, Q2, U).f


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    print(f"{'workload':<12}{'numba s':>10}{'numpy s':>10}{'speedup':>9}{'max diff':>11}")
    for name, make in (("jets", jets_workload), ("transport", transport_workload)):
        fn = make(args.points if name == "jets" else args.points // 20)
        tn, a = with_numba(True, fn, args.repeat)
        tp, b = with_numba(False, fn, args.repeat)
        diff = float(np.nanmax(np.abs(a - b)))
        print(f"{name:<12}{tn:>10.3f}{tp:>10.3f}{tp / tn:>9.1f}{diff:>11.1e}")


if __name__ == "__main__":
    main()
