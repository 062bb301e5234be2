"""Attention-variant sweep: both attention methods crossed with a
temperature grid, each trained as a slice-aware model on the same backbone
and compared against the backbone baseline in one table."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from ..errors import ConfigError
from .comparison import _pct, _pp
from .config import ExperimentConfig
from .evaluation import EvalReport, replication_accuracy
from .training import train

DEFAULT_METHODS = ("indicator_only", "indicator_plus_expert")
DEFAULT_TAUS = (1.0, 0.1)


@dataclass
class SweepCell:
    method: str
    tau: float
    run_id: str
    report: EvalReport

    @property
    def label(self) -> str:
        return f"{self.method},tau={self.tau:g}"


@dataclass
class SweepResult:
    baseline: EvalReport
    cells: list[SweepCell]
    workdir: Path

    def macro_tail(self, method: str, tau: float) -> float | None:
        for cell in self.cells:
            if cell.method == method and cell.tau == tau:
                return cell.report.macro_tail_ra()
        raise KeyError((method, tau))

    def table_rows(self) -> list[dict]:
        base_overall = self.baseline.overall_ra
        base_macro = self.baseline.macro_tail_ra()
        rows = [
            {
                "label": "baseline",
                "method": None,
                "tau": None,
                "overall_ra": base_overall,
                "overall_delta_pp": 0.0,
                "macro_tail_ra": base_macro,
                "macro_tail_delta_pp": 0.0 if base_macro is not None else None,
            }
        ]
        for cell in self.cells:
            macro = cell.report.macro_tail_ra()
            rows.append(
                {
                    "label": cell.label,
                    "method": cell.method,
                    "tau": cell.tau,
                    "overall_ra": cell.report.overall_ra,
                    "overall_delta_pp": (cell.report.overall_ra - base_overall) * 100.0,
                    "macro_tail_ra": macro,
                    "macro_tail_delta_pp": None
                    if (macro is None or base_macro is None)
                    else (macro - base_macro) * 100.0,
                }
            )
        return rows

    def render_text(self) -> str:
        rows = self.table_rows()
        header = f"{'model':34} {'overall':>8} {'Δoverall':>9} {'macro tail':>11} {'Δtail':>8}"
        lines = [header, "-" * len(header)]
        for row in rows:
            lines.append(
                f"{row['label']:34} {_pct(row['overall_ra']):>8} {_pp(row['overall_delta_pp']):>9} "
                f"{_pct(row['macro_tail_ra']):>11} {_pp(row['macro_tail_delta_pp']):>8}"
            )
        return "\n".join(lines) + "\n"

    def render_csv(self) -> str:
        lines = ["label,method,tau,overall_ra,overall_delta_pp,macro_tail_ra,macro_tail_delta_pp"]
        for row in self.table_rows():

            def cell(v):
                return "" if v is None else repr(v) if isinstance(v, float) else str(v)

            lines.append(
                ",".join(
                    [
                        row["label"],
                        row["method"] or "",
                        cell(row["tau"]),
                        cell(row["overall_ra"]),
                        cell(row["overall_delta_pp"]),
                        cell(row["macro_tail_ra"]),
                        cell(row["macro_tail_delta_pp"]),
                    ]
                )
            )
        return "\n".join(lines) + "\n"


def run_attention_sweep(
    workdir,
    base_exp: ExperimentConfig,
    seed: int,
    methods: tuple[str, ...] = DEFAULT_METHODS,
    taus: tuple[float, ...] = DEFAULT_TAUS,
) -> SweepResult:
    """Train one slice-aware model per (method, tau) cell on a fixed backbone
    and emit a grid table against the backbone's own accuracy."""
    if base_exp.model_kind not in ("S", "S_UP"):
        raise ConfigError("the sweep varies slice-aware attention; model_kind must be S or S_UP")
    if not base_exp.backbone_checkpoint:
        raise ConfigError("the sweep requires a pre-trained backbone checkpoint")
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    baseline = replication_accuracy(base_exp.backbone_checkpoint, base_exp.test_data, base_exp.slices)
    baseline.write(workdir / "baseline_eval.json")
    cells: list[SweepCell] = []
    for method in methods:
        for tau in taus:
            cell_dir = workdir / "cells" / f"{method}_tau{tau:g}"
            exp = dataclasses.replace(base_exp, attention_method=method, tau=tau, seed=seed)
            train_report = train(exp, cell_dir, seed=seed)
            report = replication_accuracy(cell_dir / train_report["checkpoint"], exp.test_data, exp.slices)
            report.write(cell_dir / "eval_report.json")
            cells.append(SweepCell(method=method, tau=tau, run_id=report.run_id, report=report))
    result = SweepResult(baseline=baseline, cells=cells, workdir=workdir)
    (workdir / "sweep_table.txt").write_text(result.render_text(), encoding="utf-8")
    (workdir / "sweep_table.csv").write_text(result.render_csv(), encoding="utf-8")
    (workdir / "sweep.json").write_text(
        json.dumps({"kind": "sweep_table", "rows": result.table_rows()}, sort_keys=True, indent=1) + "\n",
        encoding="utf-8",
    )
    return result
