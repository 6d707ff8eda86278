"""CSV and JSON exchange formats of the harness."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from ..metrics import LinkMetrics, Visibility
from .models import HarnessError
from .runner import RunResult

CSV_HEADER = ["bs_id", "ut_id", "visibility", "received_power_dbm", "delay_spread_ns",
              "hads_deg", "haas_deg", "path_count"]


def _fmt(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return repr(float(x))


def meta_path(path: str | Path) -> Path:
    """Side-car JSON holding the run's model name and compute time."""
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_results_csv(result: RunResult, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for (b, u) in result.keys():
            m = result.links[(b, u)]
            w.writerow([b, u, m.visibility.value, _fmt(m.received_power_dbm), _fmt(m.delay_spread_ns),
                        _fmt(m.hads_deg), _fmt(m.haas_deg), m.path_count])
    meta = {"model": result.model, "ct_seconds": result.ct, "workers": result.workers,
            "frequency": result.frequency}
    if result.spec is not None:
        meta["spec"] = result.spec.describe()
    meta_path(path).write_text(json.dumps(meta, indent=2))


def read_results_csv(path: str | Path) -> RunResult:
    """Load a results table; compute time comes from the side-car file if present."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise HarnessError(f"{path}: unexpected header {header}")
        links = {}
        for row in reader:
            if not row:
                continue
            b, u, vis, p, ds, hads, haas, n = row
            links[(int(b), int(u))] = LinkMetrics(float(p), float(ds), float(hads), float(haas),
                                                  Visibility(vis), int(n))
    model, ct, workers, freq = path.stem, math.nan, 1, math.nan
    mp = meta_path(path)
    if mp.exists():
        meta = json.loads(mp.read_text())
        model = meta.get("model", model)
        ct = float(meta.get("ct_seconds", math.nan))
        workers = int(meta.get("workers", 1))
        freq = float(meta.get("frequency", math.nan))
    return RunResult(model, links, ct, workers, freq)


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_json(obj, path: str | Path) -> None:
    """Write ``obj`` (or its ``to_json()``) with non-finite floats as null."""
    data = obj.to_json() if hasattr(obj, "to_json") else obj
    Path(path).write_text(json.dumps(_clean(data), indent=2))
