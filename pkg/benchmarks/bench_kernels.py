#!/usr/bin/env python3
"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py --repeat 3
"""
from __future__ import annotations

import argparse
import random
import time

from erpamark import _pykernels, kernels
from erpamark.codec import PaintingScheme


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--observations", type=int, default=200, help="oracle decodes per timing")
    ap.add_argument("--k", type=int, default=2, help="oracle error bound")
    args = ap.parse_args()

    compiled = kernels.compiled()
    if compiled is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")

    scheme = PaintingScheme.dcss(7)
    rng = random.Random(0)
    observations = [rng.getrandbits(64) & rng.getrandbits(64) & rng.getrandbits(64) for _ in range(args.observations)]

    cases = [
        ("dcss n=64 size=7 (all)", lambda m: m.dcss_enumerate(64, 7, None, None)),
        ("dcss n=64 size=8 (all)", lambda m: m.dcss_enumerate(64, 8, None, None)),
        ("dcss n=80 size=9 (all)", lambda m: m.dcss_enumerate(80, 9, None, None)),
        (f"oracle k={args.k} x{args.observations}", lambda m: [m.oracle_search(o, scheme.masks, args.k) for o in observations]),
    ]
    print(f"{'kernel':28s} {'cython s':>10s} {'python s':>10s} {'speedup':>8s}")
    for name, fn in cases:
        tc, out_c = best_of(lambda: fn(compiled), args.repeat)
        tp, out_p = best_of(lambda: fn(_pykernels), args.repeat)
        if out_c != out_p:
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:28s} {tc:10.4f} {tp:10.4f} {tp / tc:8.1f}")


if __name__ == "__main__":
    main()
