import subprocess
import sys
from pathlib import Path

BENCH = Path(__file__).parents[1] / "benchmarks" / "bench_kernels.py"


def test_benchmark_quick_run():
    proc = subprocess.run([sys.executable, str(BENCH), "--quick", "--repeat", "1"],
                          capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    lines = proc.stdout.splitlines()
    assert lines[0].startswith("kernel") and len(lines) == 6
