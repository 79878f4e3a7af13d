"""Compare the compiled and numpy jet-product kernels.

Two measurements:

* kernel: ``jet_bmm`` from both modules on jet-valued matrices of the shapes
  that dominate a verify run (order 3, 11 variables);
* end to end: a verify run in a fresh interpreter, once with the compiled
  kernel and once with ``JETOPTICS_PURE_PYTHON=1``.

Usage: python benchmarks/bench_kernels.py [--points N] [--repeat R]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from jetoptics import _kernels_py
from jetoptics.jets import jet_space

try:
    from jetoptics import _kernels_c
except ImportError:
    _kernels_c = None

SHAPES = [(64, 3, 3, 3), (64, 6, 6, 6), (64, 1, 3, 1), (16, 9, 9, 9)]


def bench_kernel(nvars: int, order: int, repeat: int) -> list[dict]:
    space = jet_space(nvars, order)
    m = space.size(order)
    pa, pb, pc, starts = space.pairs(order)
    rng = np.random.default_rng(0)
    rows = []
    for B, I, J, K in SHAPES:
        x = rng.normal(size=(B, I, J, m))
        y = rng.normal(size=(B, J, K, m))
        row = {"shape": f"B={B} {I}x{J} @ {J}x{K}", "monomials": m}
        ref = _kernels_py.jet_bmm(x, y, pa, pb, pc, starts, m)
        backends = [("python", _kernels_py)] + ([("cython", _kernels_c)] if _kernels_c else [])
        for name, mod in backends:
            out = mod.jet_bmm(x, y, pa, pb, pc, starts, m)
            assert np.allclose(out, ref, rtol=1e-12, atol=1e-12), name
            t = min(timeit.repeat(lambda: mod.jet_bmm(x, y, pa, pb, pc, starts, m), number=5, repeat=repeat)) / 5
            row[f"{name}_ms"] = 1e3 * t
        rows.append(row)
    return rows


def bench_verify(points: int, pure: bool) -> float:
    code = ("import time; from jetoptics import report, kernels; from jetoptics.scenario import load_catalog;"
            "cfg = load_catalog('anisotropic-synge'); report.run_verify(cfg, 8, workers=1);"
            f"t = time.perf_counter(); report.run_verify(cfg, {points}, workers=1);"
            "print(kernels.BACKEND, time.perf_counter() - t)")
    env = dict(os.environ)
    env.pop("JETOPTICS_PURE_PYTHON", None)
    if pure:
        env["JETOPTICS_PURE_PYTHON"] = "1"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    backend, seconds = out.stdout.split()
    assert (backend == "python") == pure or _kernels_c is None
    return float(seconds)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true", help="print machine-readable results")
    args = ap.parse_args()

    kernel = bench_kernel(11, 3, args.repeat)
    verify = {"python_s": bench_verify(args.points, True)}
    if _kernels_c is not None:
        verify["cython_s"] = bench_verify(args.points, False)
    if args.json:
        print(json.dumps({"kernel": kernel, "verify": verify, "points": args.points}, indent=2))
        return
    print(f"{'kernel shape':28s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for r in kernel:
        c = r.get("cython_ms")
        sp = f"{r['python_ms'] / c:8.2f}" if c else "     n/a"
        print(f"{r['shape']:28s} {r['python_ms']:10.3f} {c if c else float('nan'):10.3f} {sp}")
    print(f"\nverify, anisotropic-synge, {args.points} points, 1 worker:")
    for k, v in verify.items():
        print(f"  {k[:-2]:7s} {v:7.2f} s")
    if "cython_s" in verify:
        print(f"  speedup {verify['python_s'] / verify['cython_s']:.2f}x")


if __name__ == "__main__":
    main()
