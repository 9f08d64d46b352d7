"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--T 500 1000 2000] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from xqgram._backend import compiled_kernels, python_kernels
from xqgram.quantile import prefix_quantiles
from xqgram.selfnorm import stream_order


def recursive_case(T, seed=0):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal((2, T))
    quants = np.stack([prefix_quantiles(vals[0], 0.1), prefix_quantiles(vals[1], 0.1)])
    order, srt = stream_order(vals)
    return vals, quants, np.array([0, 1]), T // 10, order, srt


def fill_case(T, seed=0):
    rng = np.random.default_rng(seed)
    lengths = rng.geometric(0.1, size=T)
    return rng.integers(0, T, size=T), lengths, T


def best_of(fn, repeat):
    number = 1
    while timeit.timeit(fn, number=number) < 0.05:
        number *= 2
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=int, nargs="+", default=[500, 1000, 2000, 4000])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if compiled_kernels is None:
        print("compiled kernels not built; only the fallback is available")
    backends = {"python": python_kernels}
    if compiled_kernels is not None:
        backends["cython"] = compiled_kernels
    print(f"{'kernel':<18}{'T':>7}" + "".join(f"{b + ' (ms)':>15}" for b in backends) + f"{'speedup':>10}")
    for T in args.T:
        for name, make in (("recursive_counts", recursive_case), ("sb_fill_indices", fill_case)):
            case = make(T)
            times = {}
            for b, mod in backends.items():
                fn = getattr(mod, name)
                times[b] = best_of(lambda: fn(*case), args.repeat) * 1e3
            speed = times["python"] / times["cython"] if "cython" in times else float("nan")
            print(f"{name:<18}{T:>7}" + "".join(f"{t:>15.3f}" for t in times.values()) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
