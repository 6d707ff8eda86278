"""Model comparison, distribution summaries and envelope-material tuning."""

from __future__ import annotations

import itertools
import logging
import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..materials import Material, MaterialKind
from ..scenario import FactoryConfig, SceneVariant, TerminalLayout
from .models import HarnessError, ModelSpec
from .runner import LinkTrace, RunResult, evaluate_traces, factory_scene, run_p2mp

log = logging.getLogger(__name__)

METRICS = ("power_db", "ds_ns", "hads_deg", "haas_deg")
_FIELDS = {"power_db": "received_power_dbm", "ds_ns": "delay_spread_ns",
           "hads_deg": "hads_deg", "haas_deg": "haas_deg"}
DEFAULT_WEIGHTS = {"power_db": 1.0, "ds_ns": 0.1, "hads_deg": 0.1, "haas_deg": 0.1}


@dataclass
class ComparisonReport:
    """RMSE of a candidate run against a reference run, per metric."""

    candidate: str
    reference: str
    rmse: dict[str, float]
    ct_ratio: float
    link_count: int
    excluded: int = 0

    def objective(self, weights: Mapping[str, float] = DEFAULT_WEIGHTS) -> float:
        return float(sum(weights.get(m, 0.0) * self.rmse[m] for m in METRICS))

    def to_json(self) -> dict:
        return {
            "candidate": self.candidate,
            "reference": self.reference,
            "rmse": dict(self.rmse),
            "ct_ratio": None if not math.isfinite(self.ct_ratio) else self.ct_ratio,
            "link_count": self.link_count,
            "excluded": self.excluded,
        }


def compare_rmse(reference: RunResult, candidate: RunResult) -> ComparisonReport:
    """Per-metric RMSE over links present in both runs.

    Links whose power is ``-inf`` in either run are excluded and counted.
    Spreads are compared over the remaining links where both are finite.
    """
    common = sorted(set(reference.links) & set(candidate.links))
    ref_p = reference.metric("received_power_dbm", common)
    cand_p = candidate.metric("received_power_dbm", common)
    finite = np.isfinite(ref_p) & np.isfinite(cand_p)
    if not finite.any():
        raise HarnessError("no common link with finite power in both runs")
    keys = [k for k, f in zip(common, finite) if f]
    rmse = {}
    for m in METRICS:
        a = reference.metric(_FIELDS[m], keys)
        b = candidate.metric(_FIELDS[m], keys)
        ok = np.isfinite(a) & np.isfinite(b)
        rmse[m] = float(np.sqrt(np.mean((b[ok] - a[ok]) ** 2))) if ok.any() else math.nan
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = candidate.ct / reference.ct if reference.ct > 0 else math.nan
    return ComparisonReport(candidate.model, reference.model, rmse, float(ratio), len(keys),
                            int((~finite).sum()))


@dataclass
class DistributionSummary:
    """Median and 5 %/95 % quantiles per metric (linear interpolation)."""

    model: str
    stats: dict[str, dict[str, float]]
    link_count: int

    def to_json(self) -> dict:
        return {"model": self.model, "link_count": self.link_count, "metrics": self.stats}


def quantile_summary(values: np.ndarray) -> dict[str, float]:
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return {"median": math.nan, "q05": math.nan, "q95": math.nan}
    q05, med, q95 = np.quantile(v, [0.05, 0.5, 0.95], method="linear")
    return {"median": float(med), "q05": float(q05), "q95": float(q95)}


def summarize_distribution(result: RunResult) -> DistributionSummary:
    keys = result.keys()
    power = result.metric("received_power_dbm", keys)
    finite = np.isfinite(power)
    if not finite.any():
        raise HarnessError("every link has -inf received power")
    keys = [k for k, f in zip(keys, finite) if f]
    stats = {m: quantile_summary(result.metric(_FIELDS[m], keys)) for m in METRICS}
    return DistributionSummary(result.model, stats, len(keys))


# -- tuning -------------------------------------------------------------------

_GRID_ITEM = re.compile(r"^\s*(\w+)\s*=\s*([-+0-9.eE]+)\s*:\s*([-+0-9.eE]+)\s*:\s*([-+0-9.eE]+)\s*$")
GRID_AXES = ("loss", "eps_re", "eps_im")


@dataclass(frozen=True)
class TuningGrid:
    """Candidate envelope values; points are visited in lexicographic order."""

    loss: tuple[float, ...]
    eps_re: tuple[float, ...]
    eps_im: tuple[float, ...]

    def points(self) -> list[tuple[float, float, float]]:
        return list(itertools.product(self.loss, self.eps_re, self.eps_im))

    def __len__(self) -> int:
        return len(self.loss) * len(self.eps_re) * len(self.eps_im)

    @classmethod
    def parse(cls, text: str) -> "TuningGrid":
        """Parse ``"loss=0:0.1:1,eps_re=1:0.1:3,eps_im=0:0.01:0.2"`` (start:step:stop, inclusive)."""
        axes: dict[str, tuple[float, ...]] = {}
        for item in text.split(","):
            m = _GRID_ITEM.match(item)
            if not m:
                raise HarnessError(f"bad grid item {item!r}; expected name=start:step:stop")
            name = m.group(1)
            if name not in GRID_AXES:
                raise HarnessError(f"unknown grid axis {name!r}")
            start, step, stop = (float(m.group(i)) for i in (2, 3, 4))
            if step <= 0 or stop < start:
                raise HarnessError(f"grid axis {name!r} needs step > 0 and stop >= start")
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            axes[name] = tuple(round(start + i * step, 12) for i in range(n))
        missing = set(GRID_AXES) - set(axes)
        if missing:
            raise HarnessError(f"grid misses axes {sorted(missing)}")
        return cls(axes["loss"], axes["eps_re"], axes["eps_im"])


COARSE_GRID = TuningGrid((0.0, 0.1, 0.2, 0.4, 0.8), (1.2, 1.99, 3.0), (0.03, 0.09, 0.2))


def envelope_material(point: Sequence[float], freq: float, name: str = "envelope_fit") -> Material:
    loss, re_, im = point
    return Material(name, MaterialKind.ENVELOPE, {freq: (re_, im)}, {freq: loss})


@dataclass
class TuningResult:
    material: Material
    report: ComparisonReport
    point: tuple[float, float, float]
    objective: float
    history: list = field(default_factory=list)


def tune_material(reference: RunResult, layout: TerminalLayout, config: FactoryConfig,
                  grid: TuningGrid | Iterable[Sequence[float]],
                  objective_weights: Mapping[str, float] = DEFAULT_WEIGHTS,
                  model: ModelSpec | None = None, links=None, workers: int = 1,
                  traces: Sequence[LinkTrace] | None = None) -> tuple[Material, ComparisonReport]:
    """Grid search for the envelope values that best fit ``reference``."""
    res = tune_material_full(reference, layout, config, grid, objective_weights, model, links, workers, traces)
    return res.material, res.report


def tune_material_full(reference: RunResult, layout: TerminalLayout, config: FactoryConfig,
                       grid, objective_weights: Mapping[str, float] = DEFAULT_WEIGHTS,
                       model: ModelSpec | None = None, links=None, workers: int = 1,
                       traces: Sequence[LinkTrace] | None = None) -> TuningResult:
    """:func:`tune_material` with the winning point, objective and full history.

    Paths of the simplified scene are traced once; each grid point only
    re-evaluates the fields.  The objective is the weighted sum of the four
    RMSEs; ties go to the lower power RMSE, then to the earlier grid point.
    """
    if reference.spec is not None and reference.spec.variant is not SceneVariant.DETAILED:
        log.warning("tuning against a %s-scene reference", reference.spec.variant.value)
    points = grid.points() if isinstance(grid, TuningGrid) else [tuple(map(float, p)) for p in grid]
    if not points:
        raise HarnessError("tuning grid is empty")
    freq = reference.frequency if math.isfinite(reference.frequency) else 2e9
    if model is None:
        model = ModelSpec("model4", SceneVariant.SIMPLIFIED, "3R1D", freq)
    links = sorted(reference.links) if links is None else links
    scene = factory_scene(config, model.variant)
    if traces is None:
        _, traces = run_p2mp(model, layout, config, links=links, workers=workers, keep_traces=True)
    best: tuple | None = None
    history = []
    for i, point in enumerate(points):
        mat = envelope_material(point, model.frequency)
        cand = evaluate_traces(model.with_envelope(mat), traces, scene)
        try:
            rep = compare_rmse(reference, cand)
        except HarnessError:
            warnings.warn(f"grid point {point} gives no valid link; skipped", RuntimeWarning, stacklevel=2)
            continue
        obj = rep.objective(objective_weights)
        history.append((point, obj, rep))
        rank = (obj, rep.rmse["power_db"], i)
        if best is None or rank < best[0]:
            best = (rank, point, mat, rep)
        log.debug("grid %s objective %.4f", point, obj)
    if best is None:
        raise HarnessError("no grid point produced valid links")
    (obj, _, _), point, mat, rep = best
    return TuningResult(mat, rep, point, obj, history)
