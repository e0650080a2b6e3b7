"""Time the batch gain kernels under the numba and numpy backends.

    python3 benchmarks/bench_kernels.py --size 1000000 --repeat 5

Also times the batch optimal-decay filter on the double-integrator probe
grid, where Lie-derivative evaluation rather than the kernel dominates.
"""

import argparse
import json
import timeit

import numpy as np

from odcbf import kernels
from odcbf._jit import USE_NUMBA
from odcbf.barriers import ClassKe, HocbfSpec, hocbf_build
from odcbf.filters import FilterConfig, od_cbf_filter_batch
from odcbf.scenarios import double_integrator_scenario


def best_of(fn, repeat):
    fn()  # warm-up, includes numba compilation on a cold cache
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=1_000_000)
    ap.add_argument("--grid", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true", help="print results as JSON")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    a = rng.normal(size=args.size)
    b = np.abs(rng.normal(size=args.size))
    b[::50] = 0.0  # exercise the degenerate branch
    c = rng.normal(size=args.size)

    sc = double_integrator_scenario()
    a1 = ClassKe.linear(2.0)
    h = hocbf_build(sc.system, HocbfSpec(sc.psi, a1, sc.lf_psi_gradient))
    cfg = FilterConfig.default(1, ClassKe.linear(2.0))
    X = np.column_stack([np.linspace(-0.9, 0.9, args.grid), np.full(args.grid, 1.5)])

    backends = ["numpy"] + (["numba"] if USE_NUMBA else [])
    results = {}
    for backend in backends:
        results[backend] = {
            "od_gains_batch": best_of(lambda: kernels.od_gains_batch(a, b, c, 1.0, backend=backend), args.repeat),
            "cbf_gain_batch": best_of(lambda: kernels.cbf_gain_batch(a, b, backend=backend), args.repeat),
            "od_cbf_filter_batch": best_of(lambda: od_cbf_filter_batch(sc.system, h, cfg, X, backend=backend),
                                           args.repeat),
        }

    # both backends must agree before their timings mean anything
    if USE_NUMBA:
        ref = kernels.od_gains_batch(a, b, c, 1.0, backend="numpy")
        got = kernels.od_gains_batch(a, b, c, 1.0, backend="numba")
        assert np.array_equal(ref[2], got[2])
        np.testing.assert_allclose(got[0], ref[0], rtol=1e-15, atol=0)
        np.testing.assert_allclose(got[1], ref[1], rtol=1e-15, atol=0)

    if args.json:
        print(json.dumps({"size": args.size, "grid": args.grid, "seconds": results}, indent=2))
        return 0
    print(f"size {args.size}, grid {args.grid}, best of {args.repeat}")
    print(f"{'kernel':<22}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if USE_NUMBA else ""))
    for name in results["numpy"]:
        row = f"{name:<22}" + "".join(f"{results[b][name]:>11.4f}s" for b in backends)
        if USE_NUMBA:
            row += f"{results['numpy'][name] / results['numba'][name]:>11.1f}x"
        print(row)
    if not USE_NUMBA:
        print("numba disabled (ODCBF_BACKEND=numpy or not installed); numpy timings only")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
