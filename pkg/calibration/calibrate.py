"""Calibration run for the stand-in solvers.

Runs every solver on every benchmark dimension with 15 seeds and writes
``calibration/results.json``. The stand-in acceptance thresholds were fixed
from this output before the acceptance tests were written.

    python3 calibration/calibrate.py [--dims 2 3 5] [--algos rs de es]
"""
import argparse
import json
import platform
import time
from collections import Counter
from pathlib import Path

import numpy as np

from kleeminty_bench import __version__, kernels
from kleeminty_bench.metrics import compute_indicators
from kleeminty_bench.problem import make_instance
from kleeminty_bench.protocol import TerminationRule, run_experiment
from kleeminty_bench.solvers import make_solver


def calibrate(dims, algos, runs, seed):
    rows = []
    for n in dims:
        inst = make_instance(n)
        rule = TerminationRule.for_dimension(n)
        for algo in algos:
            t0 = time.perf_counter()
            recs = [run_experiment(make_solver(algo), inst, rule, seed + i) for i in range(runs)]
            rep = compute_indicators(recs, inst)
            rows.append({
                "algorithm": algo, "N": n, "runs": runs, "base_seed": seed,
                "FR": rep.FR, "f_med": rep.f_med, "nu_med": rep.nu_med,
                "abs_err": rep.abs_err, "meanFevals": rep.meanFevals,
                "reasons": dict(sorted(Counter(r.termination_reason for r in recs).items())),
                "seconds": round(time.perf_counter() - t0, 2),
            })
            print(json.dumps(rows[-1]), flush=True)
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dims", type=int, nargs="+", default=[2, 3, 5, 10, 20, 40])
    ap.add_argument("--algos", nargs="+", default=["rs", "de", "es"])
    ap.add_argument("--runs", type=int, default=15)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path(__file__).with_name("results.json"))
    a = ap.parse_args()
    rows = calibrate(a.dims, a.algos, a.runs, a.seed)
    meta = {"version": __version__, "backend": kernels.BACKEND,
            "numpy": np.__version__, "python": platform.python_version()}
    a.out.write_text(json.dumps({"meta": meta, "results": rows}, indent=2) + "\n")


if __name__ == "__main__":
    main()
