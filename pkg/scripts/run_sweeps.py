"""Drive the three experiment harnesses at desk scale and drop their CSVs.

    python scripts/run_sweeps.py --out results/ [--seeds 5] [--quick]

--quick trims the grids for a fast smoke pass (a few minutes); the full
grids take roughly half an hour.
"""

import argparse
import sys
from pathlib import Path

from tkgdistill.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="results")
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--quick", action="store_true")
    args = parser.parse_args()
    out = Path(args.out)

    ratios = "0,0.2" if args.quick else "0,0.05,0.1,0.15,0.2"
    fractions = "0,0.4,0.5" if args.quick else "0,0.1,0.2,0.3,0.4,0.5"
    seeds = str(min(args.seeds, 2) if args.quick else args.seeds)

    jobs = [
        ["experiment", "noise", "--ratios", ratios, "--seeds", seeds,
         "--out", str(out / "noise")],
        ["experiment", "pseudo-ratio", "--fractions", fractions, "--seeds",
         seeds, "--out", str(out / "pseudo_ratio")],
        ["experiment", "nce-decay", "--N", "8,32,128,512",
         "--out", str(out / "nce_decay")],
    ]
    for job in jobs:
        print("::", " ".join(job))
        rc = cli_main(job)
        if rc != 0:
            return rc
    print(f"CSV outputs under {out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
