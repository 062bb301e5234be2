"""Run the attention method x temperature sweep on the long-tail preset.

Needs a corpus and a trained backbone; both are built under OUT unless the
directory already holds them (OUT/data from a previous run, OUT/runs/P), so
pointing --out at a finished comparison run reuses its backbone.
"""

import argparse
import dataclasses
import sys
from pathlib import Path

from sliceroute.harness import run_attention_sweep
from sliceroute.harness.comparison import prepare_corpus
from sliceroute.harness.presets import flagship_experiment, flagship_traffic
from sliceroute.harness.training import train


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="sweep_run", help="output directory")
    parser.add_argument("--seed", type=int, default=0, help="corpus and training seed")
    args = parser.parse_args(argv)

    out = Path(args.out)
    traffic = flagship_traffic(seed=args.seed)
    data_dir = out / "data"
    if (data_dir / "train.jsonl").exists():
        corpus = {
            "train": data_dir / "train.jsonl",
            "test": data_dir / "test.jsonl",
            "slices": data_dir / "slices.txt",
            "manifest": data_dir / f"{traffic.name}.manifest.json",
        }
    else:
        corpus = prepare_corpus(traffic, out)

    common = dataclasses.replace(
        flagship_experiment(),
        train_data=str(corpus["train"]),
        test_data=str(corpus["test"]),
        slices=str(corpus["slices"]),
        manifest=str(corpus["manifest"]),
        seed=args.seed,
    )
    backbone_dir = out / "runs" / "P"
    checkpoint = backbone_dir / "checkpoint.npz"
    if not checkpoint.exists():
        report = train(dataclasses.replace(common, model_kind="P"), backbone_dir, seed=args.seed)
        checkpoint = backbone_dir / report["checkpoint"]

    sweep_exp = dataclasses.replace(common, model_kind="S", backbone_checkpoint=str(checkpoint))
    result = run_attention_sweep(out / "sweep", sweep_exp, seed=args.seed)
    sys.stdout.write(result.render_text())
    print(f"artifacts: {result.workdir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
