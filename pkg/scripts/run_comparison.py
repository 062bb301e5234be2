"""Run the four-model comparison (P, P_UP, S, S_UP) on the long-tail preset.

Generates the corpus under OUT/data, trains all four models under OUT/runs,
and writes comparison.{txt,csv,json} plus a timing file to OUT.
"""

import argparse
import json
import sys
import time
from pathlib import Path

from sliceroute.harness import run_four_model_comparison
from sliceroute.harness.presets import flagship_experiment, flagship_traffic


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="comparison_run", help="output directory")
    parser.add_argument("--seed", type=int, default=0, help="corpus and training seed")
    args = parser.parse_args(argv)

    started = time.time()
    run = run_four_model_comparison(args.out, flagship_traffic(), flagship_experiment(), seed=args.seed)
    wall = time.time() - started
    (Path(args.out) / "timing.json").write_text(
        json.dumps({"four_model_wall_seconds": wall, "seed": args.seed}) + "\n", encoding="utf-8"
    )
    sys.stdout.write(run.table.render_text())
    print(f"wall time: {wall:.0f}s")
    print(f"artifacts: {run.workdir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
