"""Time the numba and numpy backends of the two hot kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--sde-steps 2000000]

Prints best-of-N wall time per backend and checks that both agree.
"""

import argparse
import time

import numpy as np

from qosc import _kernels
from qosc.oracle import quadrature_model
from qosc.superradiant import SuperradiantParams


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_pv(n):
    w = np.linspace(-100, 100, n)
    v = -0.5 * np.log1p(w**2)
    d = -w / (1 + w**2)
    return lambda: _kernels.pv_hilbert(w, v, d)


def bench_sde(nsteps):
    p = SuperradiantParams.from_cooperativity(2.5, 1e6, 1.0, 1.0)
    m = quadrature_model(p)
    dt = 0.045
    A = np.eye(4) + m.M * dt
    rng = np.random.default_rng(0)
    noise = rng.standard_normal((nsteps, 4)) * np.sqrt(m.levels / dt)
    return lambda: _kernels.linear_sde(A, m.B * dt, m.C, m.D, np.zeros(4), noise)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--pv-points", type=int, default=4001)
    ap.add_argument("--sde-steps", type=int, default=2_000_000)
    args = ap.parse_args(argv)

    if not _kernels.HAVE_NUMBA:
        print("numba unavailable; only the numpy backend can run")
    cases = {
        f"pv_hilbert n={args.pv_points}": bench_pv(args.pv_points),
        f"linear_sde steps={args.sde_steps}": bench_sde(args.sde_steps),
    }
    backends = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])
    prev = _kernels.get_backend()
    try:
        for name, fn in cases.items():
            results = {}
            for b in backends:
                _kernels.set_backend(b)
                fn()  # warm-up (JIT compile / cache load)
                t, out = best_of(fn, args.repeat)
                results[b] = (t, out[0] if isinstance(out, tuple) else out)
                print(f"{name:32s} {b:6s} {t * 1e3:10.2f} ms")
            if len(results) == 2:
                a, c = results["numpy"][1], results["numba"][1]
                err = np.max(np.abs(a - c)) / max(np.max(np.abs(a)), 1e-300)
                speed = results["numpy"][0] / results["numba"][0]
                print(f"{'':32s} speed-up {speed:6.1f}x   max rel diff {err:.2e}")
    finally:
        _kernels.set_backend(prev)


if __name__ == "__main__":
    main()
