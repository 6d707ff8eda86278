"""Point-to-multipoint runs over a terminal layout."""

from __future__ import annotations

import functools
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..geometry import Scene
from ..materials import MaterialLibrary
from ..metrics import LinkMetrics, PathArrays, Visibility, classify_visibility, link_metrics
from ..paths.antenna import DIPOLE, Antenna
from ..paths.field import DEFAULT_POWER_FLOOR_DB, evaluate_set, evaluate_sets
from ..paths.finder import PathFinder
from ..paths.model import PathSet
from ..scenario import FactoryConfig, SceneVariant, TerminalLayout, build_factory
from .models import HarnessError, ModelSpec

log = logging.getLogger(__name__)

Link = tuple[int, int]


@functools.lru_cache(maxsize=4)
def factory_scene(config: FactoryConfig, variant: SceneVariant) -> Scene:
    """Cached scene build (scenes are immutable)."""
    return build_factory(config, SceneVariant(variant))


@dataclass
class RunResult:
    """Per-link metrics of one model run and its compute time in seconds.

    ``ct`` covers path finding, field evaluation and metrics; scene
    construction is excluded.
    """

    model: str
    links: dict[Link, LinkMetrics]
    ct: float
    workers: int = 1
    frequency: float = math.nan
    spec: ModelSpec | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.links)

    def keys(self) -> list[Link]:
        return sorted(self.links)

    def metric(self, name: str, keys: Sequence[Link] | None = None) -> np.ndarray:
        keys = self.keys() if keys is None else keys
        return np.array([getattr(self.links[k], name) for k in keys], dtype=float)


@dataclass
class LinkTrace:
    """Geometric result of one link, reusable across material changes."""

    bs_id: int
    ut_id: int
    visibility: Visibility
    pathset: PathSet


def resolve_links(layout: TerminalLayout, links: str | Iterable[Link]) -> list[Link]:
    keys = layout.links(links) if isinstance(links, str) else [(int(b), int(u)) for b, u in links]
    if not keys:
        raise HarnessError("link mask is empty")
    n_bs, n_ut = len(layout.bs_positions), len(layout.ut_positions)
    for b, u in keys:
        if not (1 <= b <= n_bs and 1 <= u <= n_ut):
            raise HarnessError(f"link ({b}, {u}) is not in the layout")
    return sorted(set(keys), key=lambda k: (k[1], k[0]))


def link_arrays(pathset: PathSet, scene: Scene, lib: MaterialLibrary, freq: float,
                antenna: Antenna = DIPOLE, floor_db: float = DEFAULT_POWER_FLOOR_DB) -> tuple[PathArrays, list]:
    gains = evaluate_set(pathset, scene, lib, freq, antenna, antenna)
    return PathArrays.from_pathset(pathset, gains).above_floor(floor_db), gains


class _LinkWorker:
    """Path finder plus evaluation for one model; keeps base-station trees cached."""

    def __init__(self, model: ModelSpec, scene: Scene, layout: TerminalLayout, lib: MaterialLibrary,
                 coherent: bool = False, dump: bool = False, keep_traces: bool = False):
        self.model = model
        self.scene = scene
        self.layout = layout
        self.lib = lib
        self.coherent = coherent
        self.dump = dump
        self.keep_traces = keep_traces
        self.finder = PathFinder(scene, lib, model.budget, cache_size=len(layout.bs_positions) + 2)

    def run(self, links: Sequence[Link]):
        out = []
        for b, u in links:
            tx, rx = self.layout.bs(b), self.layout.ut(u)
            ps = self.finder.find_set(tx, rx)
            arr, gains = link_arrays(ps, self.scene, self.lib, self.model.frequency)
            vis = classify_visibility(self.scene, self.lib, tx, rx)
            m = link_metrics(arr, vis, self.model.tx_power_dbm, self.coherent, self.model.frequency)
            lines = _dump_lines(ps, gains, b, u, self.model.tx_power_dbm) if self.dump else None
            trace = LinkTrace(b, u, vis, ps) if self.keep_traces else None
            out.append(((b, u), m, lines, trace))
        return out


def _dump_lines(ps: PathSet, gains, bs_id: int, ut_id: int, tx_power_dbm: float) -> list[str]:
    floor = 10 ** (DEFAULT_POWER_FLOOR_DB / 20)
    paths = [p for batch, g in zip(ps.batches, gains) for p in batch.to_paths(g) if abs(p.gain) >= floor]
    paths.sort(key=lambda p: (p.delay, -abs(p.gain), p.key))
    out = []
    for p in paths:
        rec = {"bs_id": bs_id, "ut_id": ut_id}
        rec.update(p.to_json(tx_power_dbm))
        out.append(json.dumps(rec))
    return out


_WORKER: _LinkWorker | None = None


def _init_worker(*args) -> None:
    global _WORKER
    _WORKER = _LinkWorker(*args)


def _work(links: Sequence[Link]):
    assert _WORKER is not None
    return _WORKER.run(links)


def _by_terminal(keys: Sequence[Link]) -> list[list[Link]]:
    groups: dict[int, list[Link]] = {}
    for k in keys:
        groups.setdefault(k[1], []).append(k)
    return [groups[u] for u in sorted(groups)]


def _execute(model: ModelSpec, scene: Scene, layout: TerminalLayout, lib: MaterialLibrary,
             keys: list[Link], workers: int, coherent: bool, dump: bool, keep_traces: bool):
    args = (model, scene, layout, lib, coherent, dump, keep_traces)
    groups = _by_terminal(keys)
    if workers <= 1:
        worker = _LinkWorker(*args)
        return [r for g in groups for r in worker.run(g)]
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=args) as pool:
        return [r for part in pool.map(_work, groups) for r in part]


def run_p2mp(model: ModelSpec, layout: TerminalLayout, config: FactoryConfig | None = None,
             links: str | Iterable[Link] = "all", workers: int = 1, scene: Scene | None = None,
             coherent: bool = False, paths_dump=None, keep_traces: bool = False):
    """Run ``model`` on every selected (base station, user terminal) pair.

    Args:
        model: model specification.
        layout: terminal positions.
        config: factory configuration; ignored when ``scene`` is given.
        links: ``"all"``, ``"subset"`` or explicit ``(bs_id, ut_id)`` pairs.
        workers: number of worker processes (1 runs in-process).
        scene: use this scene instead of the generated factory.
        coherent: coherent received-power sum.
        paths_dump: open text file receiving one JSON line per path.
        keep_traces: also return the per-link path sets (for material tuning).

    Returns:
        A :class:`RunResult`, or ``(RunResult, traces)`` with ``keep_traces``.
    """
    keys = resolve_links(layout, links)
    if scene is None:
        if config is None:
            raise HarnessError("need a factory config or a scene")
        scene = factory_scene(config, model.variant)
    lib = model.library()
    for mid in set(scene.material_ids):
        lib.resolve(mid)
    t0 = time.perf_counter()
    results = _execute(model, scene, layout, lib, keys, max(1, int(workers)), coherent,
                       paths_dump is not None, keep_traces)
    ct = time.perf_counter() - t0
    results.sort(key=lambda r: r[0])
    metrics = {k: m for k, m, _, _ in results}
    if paths_dump is not None:
        for _, _, lines, _ in results:
            for line in lines:
                paths_dump.write(line + "\n")
    log.info("%s: %d links in %.1f s with %d worker(s)", model.name, len(metrics), ct, workers)
    run = RunResult(model.name, metrics, ct, max(1, int(workers)), model.frequency, model)
    if keep_traces:
        return run, [t for _, _, _, t in results]
    return run


def evaluate_traces(model: ModelSpec, traces: Sequence[LinkTrace], scene: Scene,
                    lib: MaterialLibrary | None = None) -> RunResult:
    """Metrics of already-traced links under ``model``'s materials (no path search)."""
    lib = model.library() if lib is None else lib
    t0 = time.perf_counter()
    all_gains = evaluate_sets([tr.pathset for tr in traces], scene, lib, model.frequency)
    out = {}
    for tr, gains in zip(traces, all_gains):
        arr = PathArrays.from_pathset(tr.pathset, gains).above_floor(DEFAULT_POWER_FLOOR_DB)
        out[(tr.bs_id, tr.ut_id)] = link_metrics(arr, tr.visibility, model.tx_power_dbm,
                                                 freq=model.frequency)
    return RunResult(model.name, out, time.perf_counter() - t0, 1, model.frequency, model)
