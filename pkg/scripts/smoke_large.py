"""Smoke test of the ingestion path at the real-data shape (n=945, d=172).

Writes a synthetic file with the same layout, loads it, estimates at a few
grid points and runs the ``max-degree>15`` test.  Expect minutes, not hours.
"""

import argparse
import tempfile
import time
from pathlib import Path

from isggm.cli import main as cli_main
from isggm.data_model import generate_nuisance, generate_precision_path, sample_dataset, write_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=3)
    ap.add_argument("--bootstrap", type=int, default=100)
    args = ap.parse_args()

    d, n = 172, 945
    path = generate_precision_path(d, 10, True, seed=1)
    ds = sample_dataset(path, generate_nuisance(d, 2), generate_nuisance(d, 3), n, 1.0, seed=4)
    with tempfile.TemporaryDirectory() as tmp:
        f = Path(tmp) / "sherlock_shape.csv"
        write_dataset(ds, f)
        t0 = time.perf_counter()
        code = cli_main(["test", "--data", str(f), "--property", "max-degree>15", "--grid", str(args.grid),
                         "--bootstrap", str(args.bootstrap), "--standardize", "--out", str(Path(tmp) / "out")])
        print(f"exit {code} in {time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()
