"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--sizes 8 32 128] [--repeat 5]

Prints the best-of-``repeat`` time per call for every kernel, backend and
size, the speed-up, and the largest relative disagreement between backends.
"""
import argparse
import timeit

import numpy as np

from ocdma_pc.kernels import available_backends
from ocdma_pc.netmodel import SystemParams, generate_feasible_instance
from ocdma_pc.problem import oracle


def cases(inst, p):
    K = inst.K
    h = 1e-7 * np.maximum(p, 1e-5)
    mu = np.linspace(0.01, 0.2, K)
    G, n, t = inst.G, inst.noise, inst.cir_target
    return {
        "cir": (G, n, p),
        "cir_jacobian": (G, n, p),
        "fd_cir_jacobian": (G, n, p, h),
        "fd_penalty_gradient": (G, n, p, h, t, mu, 10.0, False),
        "fd_weighted_hessian": (G, n, p, mu, h, 1e3 * h),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[8, 32, 128])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; only the numpy fallback is available")
    print(f"{'kernel':<22}{'K':>5}" + "".join(f"{b + ' [ms]':>15}" for b in backends)
          + f"{'speed-up':>10}{'max rel diff':>14}")
    for K in args.sizes:
        inst = generate_feasible_instance(SystemParams(), "II", 0, K)
        p, _ = oracle(inst)
        for name, a in cases(inst, p).items():
            times, outs = {}, {}
            for b, mod in backends.items():
                fn = getattr(mod, name)
                number = max(1, int(2000 / K ** 2)) if name != "fd_weighted_hessian" else 1
                t = min(timeit.repeat(lambda: fn(*a), number=number, repeat=args.repeat))
                times[b] = 1e3 * t / number
                outs[b] = np.asarray(fn(*a))
            row = f"{name:<22}{K:>5}" + "".join(f"{times[b]:>15.4f}" for b in backends)
            if len(backends) > 1:
                ref = outs["python"]
                diff = np.max(np.abs(outs["cython"] - ref)) / max(np.max(np.abs(ref)), 1e-300)
                row += f"{times['python'] / times['cython']:>10.1f}{diff:>14.2e}"
            print(row)


if __name__ == "__main__":
    main()
