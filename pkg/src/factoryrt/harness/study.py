"""The four-model comparison study end to end."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..scenario import FactoryConfig, TerminalLayout, paper_layout
from .analysis import (COARSE_GRID, METRICS, ComparisonReport, DistributionSummary, TuningGrid,
                       TuningResult, compare_rmse, summarize_distribution, tune_material_full)
from .io import write_json, write_results_csv
from .models import PRESET_NAMES, paper_models
from .runner import RunResult, run_p2mp

log = logging.getLogger(__name__)

HIGH_BAND = 28e9


@dataclass
class StudyResult:
    frequency: float
    runs: dict[str, RunResult]
    reports: dict[str, ComparisonReport]
    summaries: dict[str, DistributionSummary]
    tuning: TuningResult | None = None
    tuned_report: ComparisonReport | None = None
    extra: dict = field(default_factory=dict)

    def power_rmse_reduction(self) -> float:
        """Power RMSE of the default envelope minus that of the tuned one (dB)."""
        if self.tuning is None:
            return math.nan
        return self.reports["model4"].rmse["power_db"] - self.tuning.report.rmse["power_db"]


def link_mask(frequency: float) -> str:
    """All links at 2 GHz; base station 4 and its nearest terminals at 28 GHz."""
    return "subset" if frequency >= HIGH_BAND else "all"


def run_study(frequency: float = 2e9, config: FactoryConfig | None = None,
              layout: TerminalLayout | None = None, workers: int = 1, tune: bool | None = None,
              grid: TuningGrid = COARSE_GRID, links=None) -> StudyResult:
    """Run the four presets, compare them with the reference and optionally tune."""
    if config is None or layout is None:
        cfg, lay = paper_layout()
        config = config or cfg
        layout = layout or lay
    links = link_mask(frequency) if links is None else links
    tune = (frequency < HIGH_BAND) if tune is None else tune
    models = paper_models(frequency)
    runs: dict[str, RunResult] = {}
    traces = None
    for name in PRESET_NAMES:
        if name == "model4" and tune:
            runs[name], traces = run_p2mp(models[name], layout, config, links=links, workers=workers,
                                          keep_traces=True)
        else:
            runs[name] = run_p2mp(models[name], layout, config, links=links, workers=workers)
        log.info("%s done in %.1f s", name, runs[name].ct)
    ref = runs["reference"]
    reports = {n: compare_rmse(ref, runs[n]) for n in PRESET_NAMES}
    summaries = {n: summarize_distribution(runs[n]) for n in PRESET_NAMES}
    res = StudyResult(frequency, runs, reports, summaries)
    if tune:
        res.tuning = tune_material_full(ref, layout, config, grid, model=models["model4"], links=links,
                                        traces=traces)
    return res


def write_study(res: StudyResult, out_dir: str | Path) -> None:
    """Per-model CSVs, distribution and RMSE tables, and a JSON report."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, run in res.runs.items():
        write_results_csv(run, out / f"results_{name}.csv")
    with (out / "distribution.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "metric", "median", "q05", "q95", "link_count"])
        for name, s in res.summaries.items():
            for m in METRICS:
                st = s.stats[m]
                w.writerow([name, m, st["median"], st["q05"], st["q95"], s.link_count])
    with (out / "rmse.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", *METRICS, "ct_seconds", "ct_ratio", "link_count", "excluded"])
        for name, r in res.reports.items():
            w.writerow([name, *(r.rmse[m] for m in METRICS), res.runs[name].ct, r.ct_ratio,
                        r.link_count, r.excluded])
    report = {
        "frequency": res.frequency,
        "ct_seconds": {n: r.ct for n, r in res.runs.items()},
        "comparison": {n: r.to_json() for n, r in res.reports.items()},
        "distribution": {n: s.to_json() for n, s in res.summaries.items()},
    }
    if res.tuning is not None:
        t = res.tuning
        report["tuning"] = {
            "loss_db_per_m": t.point[0], "eps_re": t.point[1], "eps_im": t.point[2],
            "objective": t.objective,
            "report": t.report.to_json(),
            "default_envelope_report": res.reports["model4"].to_json(),
            "power_rmse_reduction_db": res.power_rmse_reduction(),
        }
    write_json(report, out / "report.json")
