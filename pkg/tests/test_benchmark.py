import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "benchmarks"))
import bench_kernels  # noqa: E402


def test_quick_benchmark_runs_and_backends_agree(capsys):
    rows = bench_kernels.main(["--quick"])
    assert rows and all(r["numpy_us_per_point"] > 0 for r in rows)
    if bench_kernels._ckernels is None:
        pytest.skip("compiled kernel not built")
    assert all(r["identical"] for r in rows)
