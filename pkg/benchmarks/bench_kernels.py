"""Compare the compiled evaluation kernel with the numpy fallback.

    python3 benchmarks/bench_kernels.py            # full grid
    python3 benchmarks/bench_kernels.py --quick    # a few seconds

Reports the best of several repeats as microseconds per evaluated point and
checks that both backends return identical bytes.
"""
import argparse
import json
import math
import timeit

import numpy as np

from kleeminty_bench import _pykernels

try:
    from kleeminty_bench import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _case(n, k, seed=0):
    rng = np.random.default_rng(seed)
    Y = rng.uniform(0, 5 * n**3, size=(k, n))
    t = np.full(n, float(n**3))
    angle = 350 / 180 * math.pi
    coeffs = (math.cos(angle) - 1.0, math.sin(angle), 1.0 / math.sqrt(n - 1))
    return Y, t, coeffs


def bench(dims, batches, repeat):
    backends = {"numpy": _pykernels}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    rows = []
    for n in dims:
        for k in batches:
            Y, t, (a, b, q) = _case(n, k)
            outputs = {}
            row = {"N": n, "batch": k}
            for name, mod in backends.items():
                fn = lambda mod=mod: mod.evaluate_batch(Y, t, 0.1, a, b, q)
                outputs[name] = [np.asarray(v).tobytes() for v in fn()]
                number = max(1, 20_000 // (k * n))
                best = min(timeit.repeat(fn, number=number, repeat=repeat)) / number
                row[f"{name}_us_per_point"] = 1e6 * best / k
            if "cython" in outputs:
                row["identical"] = outputs["cython"] == outputs["numpy"]
                row["speedup"] = row["numpy_us_per_point"] / row["cython_us_per_point"]
            rows.append(row)
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--json", action="store_true", help="print rows as JSON")
    a = ap.parse_args(argv)
    if a.quick:
        rows = bench([2, 40], [1, 100], repeat=3)
    else:
        rows = bench([2, 5, 10, 20, 40], [1, 8, 160, 1000], repeat=7)
    if a.json:
        print(json.dumps(rows, indent=1))
        return rows
    head = f"{'N':>3} {'batch':>6} {'numpy us/pt':>12} {'cython us/pt':>13} {'speedup':>8} identical"
    print(head)
    for r in rows:
        c = r.get("cython_us_per_point", float("nan"))
        s = r.get("speedup", float("nan"))
        print(f"{r['N']:>3} {r['batch']:>6} {r['numpy_us_per_point']:>12.3f} {c:>13.3f} {s:>8.1f} "
              f"{r.get('identical', 'n/a')}")
    return rows


if __name__ == "__main__":
    main()
