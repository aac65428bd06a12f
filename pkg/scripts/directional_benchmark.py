"""Run a benchmark grid and print mean F1 per mechanism and algorithm.

    python scripts/directional_benchmark.py [config.ini] [--workers N] [--out-dir DIR]
"""

import argparse
import logging
from pathlib import Path

from hcmiss.cli import BenchmarkConfig, run_benchmark

HERE = Path(__file__).parent

ap = argparse.ArgumentParser()
ap.add_argument("config", nargs="?", default=HERE / "configs" / "directional.ini")
ap.add_argument("--workers", type=int, default=1)
ap.add_argument("--out-dir", default="results/directional")
args = ap.parse_args()
logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

bc = BenchmarkConfig.from_file(args.config)
out = Path(args.out_dir)
out.mkdir(parents=True, exist_ok=True)
_, summary = run_benchmark(bc, out, args.workers)

algs = list(dict.fromkeys(s[2] for s in summary))
print(f"{'N':>6} {'mechanism':<9}" + "".join(f"{a:>13}" for a in algs))
rows = {}
for n_rows, mech, alg, *_rest in summary:
    rows.setdefault((n_rows, mech), {})[alg] = _rest[2]
for (n_rows, mech), f in rows.items():
    print(f"{n_rows:>6} {mech:<9}" + "".join(f"{f.get(a, float('nan')):>13.3f}" for a in algs))
