"""Time the compiled kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--samples 4096] [--repeat 5]

Prints the best-of-``repeat`` time per call for each kernel and backend,
and the speed-up of the compiled version. The two backends are also
checked for equal results on the benchmark inputs.
"""

import argparse
import timeit

import numpy as np

from noisyfb.kernels import compiled_backend, python_backend


def _cases(S, M, rng):
    dist = rng.standard_normal((S, M)) * 3.0
    slot = rng.standard_normal((5, 4))
    rest = rng.standard_normal(M)
    xs = np.linspace(-10, 10, 401)
    gap2, gap3 = 0.6, 0.2
    return {
        "select_groups": lambda b: b.select_groups(dist, gap2, gap3),
        "category_counts": lambda b: b.category_counts(dist, gap2, gap3),
        "mixture_loglik": lambda b: b.mixture_loglik(dist, gap2, gap3, slot, rest),
        "parabolic_cut_grid_min": lambda b: b.parabolic_cut_grid_min(
            1.9, 1.0, 7.1, 0.1, 1.5, xs, xs),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-12, atol=1e-12)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=4096)
    ap.add_argument("--messages", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    if compiled_backend is None:
        print("compiled extension not available (pure-Python mode or not built)")
    backends = [("python", python_backend)]
    if compiled_backend is not None:
        backends.append(("cython", compiled_backend))

    cases = _cases(args.samples, args.messages, np.random.default_rng(0))
    print(f"S={args.samples} M={args.messages}")
    print(f"{'kernel':<24}" + "".join(f"{name:>12}" for name, _ in backends) + f"{'speed-up':>10}")
    for kname, call in cases.items():
        times = []
        for _, b in backends:
            number = max(1, int(0.2 / max(timeit.timeit(lambda: call(b), number=1), 1e-6)))
            best = min(timeit.repeat(lambda: call(b), number=number, repeat=args.repeat))
            times.append(best / number)
        if len(backends) == 2 and not _same(call(python_backend), call(compiled_backend)):
            raise SystemExit(f"{kname}: backends disagree")
        speed = f"{times[0] / times[1]:>9.1f}x" if len(times) == 2 else ""
        print(f"{kname:<24}" + "".join(f"{t * 1e6:>10.1f}us" for t in times) + speed)


if __name__ == "__main__":
    main()
