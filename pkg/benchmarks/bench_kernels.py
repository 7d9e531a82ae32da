"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--size 65536] [--repeat 5]

Each kernel runs on identical inputs under both backends; the script
prints the best-of-``repeat`` wall time, the speedup and the largest
output difference.
"""
import argparse
import timeit

import numpy as np

from beamgevrey.kernels import available_backends, get_backend


def _inputs(size, rng):
    xi = rng.standard_normal((size // 4, 4, 3)) * 5.0
    n = size
    w = rng.uniform(1.0, 100.0, n)
    return {
        "cosh_difference_rel": (rng.uniform(-50, 50, size), rng.uniform(-50, 50, size)),
        "product_identity_residual": (rng.uniform(0, 10, (size // 8, 6)),),
        "product_sech_margins": (np.ascontiguousarray(xi),),
        "rotate_modes": (rng.standard_normal(n) + 0j, rng.standard_normal(n) + 0j,
                         np.cos(w), np.sin(w) / w, w * np.sin(w)),
        "log_sum_sq": (rng.uniform(0, 300, size), rng.uniform(0, 1, size)),
    }


def _call(mod, name, args):
    if name == "rotate_modes":
        u, v = args[0].copy(), args[1].copy()
        mod.rotate_modes(u, v, *args[2:])
        return (u, v)
    return getattr(mod, name)(*args)


def _diff(a, b):
    if isinstance(a, tuple):
        return max(_diff(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    return float(np.abs(a - b).max()) if a.size else 0.0


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=1 << 16)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = available_backends()
    if "c" not in backends:
        print("compiled backend unavailable; timing the numpy path only")
    inputs = _inputs(args.size, np.random.default_rng(0))
    print(f"{'kernel':28s}" + "".join(f"{b:>12s}" for b in backends) + f"{'speedup':>10s}{'max diff':>12s}")
    for name, data in inputs.items():
        times, outs = [], []
        for b in backends:
            mod = get_backend(b)
            outs.append(_call(mod, name, data))
            t = timeit.repeat(lambda: _call(mod, name, data), number=1, repeat=args.repeat)
            times.append(min(t))
        row = f"{name:28s}" + "".join(f"{t * 1e3:10.3f}ms" for t in times)
        if len(times) == 2:
            row += f"{times[1] / times[0]:9.1f}x{_diff(*outs):12.2e}"
        print(row)


if __name__ == "__main__":
    main()
