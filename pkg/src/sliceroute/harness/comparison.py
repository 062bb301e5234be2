"""Cross-run comparison tables and the four-model experiment driver.

Deltas are absolute percentage points versus a named baseline run, overall
and per slice; tail slices are also bucketed by training-sample volume.
Accuracy cells render with two decimals, matching how routing accuracy
differences are normally quoted.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from ..datagen import TrafficConfig, generate, split
from ..errors import ConfigError
from ..samples import read_dataset, write_dataset
from ..slicing import SliceConfig
from .config import ExperimentConfig
from .evaluation import EvalReport, replication_accuracy
from .training import train

DEGRADATION_THRESHOLD_PP = -0.05

BAND_OVER_10K = "over_10k"
BAND_1K_TO_10K = "1k_to_10k"
BAND_BELOW_1K = "below_1k"
BAND_UNKNOWN = "unknown"


def volume_band(train_count: int | None) -> str:
    if train_count is None:
        return BAND_UNKNOWN
    if train_count > 10_000:
        return BAND_OVER_10K
    if train_count >= 1_000:
        return BAND_1K_TO_10K
    return BAND_BELOW_1K


def _pp(value: float | None) -> str:
    return "--" if value is None else f"{value:+.2f}"


def _pct(value: float | None) -> str:
    return "--" if value is None else f"{100 * value:.2f}"


@dataclass
class ComparisonTable:
    baseline_run_id: str
    slice_names: list[str]
    bands: dict[str, str]
    supports: dict[str, int]
    rows: list[dict]

    def row_for(self, run_id: str) -> dict:
        for row in self.rows:
            if row["run_id"] == run_id:
                return row
        raise KeyError(run_id)

    def tail_degradation_count(self, run_id: str, threshold_pp: float = DEGRADATION_THRESHOLD_PP) -> int:
        row = self.row_for(run_id)
        return sum(
            1
            for name in self.slice_names[1:]
            if row["per_slice"][name]["delta_pp"] is not None
            and row["per_slice"][name]["delta_pp"] < threshold_pp
        )

    def to_dict(self) -> dict:
        return {
            "kind": "comparison_table",
            "baseline_run_id": self.baseline_run_id,
            "slice_names": self.slice_names,
            "bands": self.bands,
            "supports": self.supports,
            "rows": self.rows,
        }

    def render_text(self) -> str:
        lines = []
        header = f"{'model':8} {'run':18} {'overall':>8} {'Δoverall':>9} {'macro tail':>11} {'Δtail':>8}"
        lines.append(header)
        lines.append("-" * len(header))
        for row in self.rows:
            lines.append(
                f"{row['model_kind']:8} {row['run_id']:18} {_pct(row['overall_ra']):>8} "
                f"{_pp(row['overall_delta_pp']):>9} {_pct(row['macro_tail_ra']):>11} "
                f"{_pp(row['macro_tail_delta_pp']):>8}"
            )
        lines.append("")
        tail_header = f"{'slice':12} {'band':10} {'support':>7} {'base RA':>8} " + " ".join(
            f"{'Δ ' + row['model_kind']:>9}" for row in self.rows if row["run_id"] != self.baseline_run_id
        )
        lines.append(tail_header)
        lines.append("-" * len(tail_header))
        base_row = self.row_for(self.baseline_run_id)
        for name in self.slice_names[1:]:
            cells = " ".join(
                f"{_pp(row['per_slice'][name]['delta_pp']):>9}"
                for row in self.rows
                if row["run_id"] != self.baseline_run_id
            )
            lines.append(
                f"{name:12} {self.bands[name]:10} {self.supports[name]:>7} "
                f"{_pct(base_row['per_slice'][name]['ra']):>8} {cells}"
            )
        return "\n".join(lines) + "\n"

    def render_csv(self) -> str:
        lines = ["run_id,model_kind,slice,band,support,ra,delta_pp"]
        for row in self.rows:
            lines.append(
                f"{row['run_id']},{row['model_kind']},overall,,{row['total']},"
                f"{'' if row['overall_ra'] is None else repr(row['overall_ra'])},"
                f"{'' if row['overall_delta_pp'] is None else repr(row['overall_delta_pp'])}"
            )
            for name in self.slice_names:
                cell = row["per_slice"][name]
                band = self.bands.get(name, BAND_UNKNOWN) if name != self.slice_names[0] else ""
                lines.append(
                    f"{row['run_id']},{row['model_kind']},{name},{band},{cell['support']},"
                    f"{'' if cell['ra'] is None else repr(cell['ra'])},"
                    f"{'' if cell['delta_pp'] is None else repr(cell['delta_pp'])}"
                )
        return "\n".join(lines) + "\n"


def compare(reports: list[EvalReport], baseline_run_id: str) -> ComparisonTable:
    """Delta table of every report against the named baseline.

    All reports must have been produced from the byte-identical test file;
    anything else makes deltas meaningless, so the comparison is refused.
    """
    if not reports:
        raise ConfigError("compare needs at least one report")
    hashes = {r.dataset_sha256 for r in reports}
    if len(hashes) != 1:
        raise ConfigError(f"comparison refused: reports evaluated on different test files ({sorted(hashes)})")
    baseline = None
    for r in reports:
        if r.run_id == baseline_run_id:
            baseline = r
            break
    if baseline is None:
        raise ConfigError(f"baseline run {baseline_run_id!r} is not among the reports")
    names = baseline.slice_names
    for r in reports:
        if r.slice_names != names:
            raise ConfigError("comparison refused: reports use different slice configurations")

    counts = baseline.train_slice_counts
    bands = {
        name: volume_band(counts[i] if counts is not None else None)
        for i, name in enumerate(names)
        if i > 0
    }
    supports = {name: baseline.per_slice[i].support for i, name in enumerate(names) if i > 0}

    rows = []
    for r in reports:
        per_slice = {}
        for i, name in enumerate(names):
            ra = r.per_slice[i].ra
            base_ra = baseline.per_slice[i].ra
            delta = None if (ra is None or base_ra is None) else (ra - base_ra) * 100.0
            per_slice[name] = {"ra": ra, "support": r.per_slice[i].support, "delta_pp": delta}
        macro = r.macro_tail_ra()
        base_macro = baseline.macro_tail_ra()
        rows.append(
            {
                "run_id": r.run_id,
                "model_kind": r.model_kind,
                "total": r.total,
                "overall_ra": r.overall_ra,
                "overall_delta_pp": (r.overall_ra - baseline.overall_ra) * 100.0,
                "macro_tail_ra": macro,
                "macro_tail_delta_pp": None if (macro is None or base_macro is None) else (macro - base_macro) * 100.0,
                "per_slice": per_slice,
            }
        )
    return ComparisonTable(
        baseline_run_id=baseline_run_id,
        slice_names=list(names),
        bands=bands,
        supports=supports,
        rows=rows,
    )


def write_comparison(table: ComparisonTable, out_dir) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out_dir / "comparison.json",
        "txt": out_dir / "comparison.txt",
        "csv": out_dir / "comparison.csv",
    }
    paths["json"].write_text(json.dumps(table.to_dict(), sort_keys=True, indent=1) + "\n", encoding="utf-8")
    paths["txt"].write_text(table.render_text(), encoding="utf-8")
    paths["csv"].write_text(table.render_csv(), encoding="utf-8")
    return paths


# ---------------------------------------------------------------------------
# four-model experiment driver
# ---------------------------------------------------------------------------


@dataclass
class ComparisonRun:
    table: ComparisonTable
    reports: dict[str, EvalReport]
    run_ids: dict[str, str]
    workdir: Path


def prepare_corpus(traffic: TrafficConfig, workdir, test_fraction: float = 1.0 / 11.0) -> dict:
    """Generate a corpus and split it into train/test files plus slice list."""
    workdir = Path(workdir)
    data_dir = workdir / "data"
    dataset_path, manifest = generate(traffic, data_dir)
    samples = read_dataset(dataset_path)
    train_part, test_part = split(samples, 1.0 - test_fraction, traffic.seed)
    train_path = data_dir / "train.jsonl"
    test_path = data_dir / "test.jsonl"
    write_dataset(train_path, train_part)
    write_dataset(test_path, test_part)
    slice_path = data_dir / "slices.txt"
    SliceConfig(traffic.tail_intents).write(slice_path)
    return {
        "train": train_path,
        "test": test_path,
        "slices": slice_path,
        "manifest": data_dir / f"{traffic.name}.manifest.json",
        "manifest_data": manifest,
    }


def run_four_model_comparison(
    workdir,
    traffic: TrafficConfig,
    base_exp: ExperimentConfig,
    seed: int,
    corpus: dict | None = None,
) -> ComparisonRun:
    """Train and evaluate P, P_UP, S, S_UP on one corpus and compare to P."""
    workdir = Path(workdir)
    if corpus is None:
        corpus = prepare_corpus(dataclasses.replace(traffic, seed=seed), workdir)
    common = dataclasses.replace(
        base_exp,
        train_data=str(corpus["train"]),
        test_data=str(corpus["test"]),
        slices=str(corpus["slices"]),
        manifest=str(corpus["manifest"]),
        seed=seed,
    )
    reports: dict[str, EvalReport] = {}
    run_ids: dict[str, str] = {}
    checkpoints: dict[str, Path] = {}
    for kind in ("P", "P_UP", "S", "S_UP"):
        run_dir = workdir / "runs" / kind
        backbone = ""
        if kind == "S":
            backbone = str(checkpoints["P"])
        elif kind == "S_UP":
            backbone = str(checkpoints["P_UP"])
        exp = dataclasses.replace(common, model_kind=kind, backbone_checkpoint=backbone)
        train_report = train(exp, run_dir, seed=seed)
        checkpoints[kind] = run_dir / train_report["checkpoint"]
        report = replication_accuracy(checkpoints[kind], common.test_data, common.slices)
        report.write(run_dir / "eval_report.json")
        reports[kind] = report
        run_ids[kind] = report.run_id
    table = compare(list(reports.values()), baseline_run_id=run_ids["P"])
    write_comparison(table, workdir)
    return ComparisonRun(table=table, reports=reports, run_ids=run_ids, workdir=workdir)
