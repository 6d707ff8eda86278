"""End-to-end acceptance checks; each prints one PASS/FAIL line.

The two study fixtures run the full four-model comparison at 2 GHz (all
links, with envelope tuning) and at 28 GHz (base station 4 and its nearest
terminals), so this module takes tens of minutes on one core.
"""

import contextlib
import json
import math
import time
import warnings
from collections import OrderedDict

import numpy as np
import pytest

from factoryrt.geometry import scene_to_json
from factoryrt.harness import ComparisonReport, ModelSpec, RunResult, compare_rmse, run_p2mp, run_study
from factoryrt.materials import default_library, fresnel_reflection, interface_power_fractions
from factoryrt.metrics import (LinkMetrics, Visibility, circular_angle_spread, received_power,
                               rms_delay_spread)
from factoryrt.paths import DIPOLE_PEAK_GAIN, InteractionBudget, PathFinder, dipole_gain, evaluate_path, find_paths
from factoryrt.paths.field import evaluate_set
from factoryrt.scenario import FactoryConfig, SceneVariant, build_factory, paper_layout, terminal_layout

from oracles import brute_force_paths, fresnel_oracle, oracle_path, random_oracle_scene
from test_materials import dielectric
from test_metrics import ARR, cols
from test_paths import boundary_scan

LIB = default_library()
CRITERIA = {
    1: "path oracle equivalence",
    2: "budget monotonicity",
    3: "EM micro-checks",
    4: "metric formula checks",
    5: "CT trend",
    6: "RMSE ordering at 2 GHz",
    7: "tuning improvement",
    8: "28 GHz median consistency",
    9: "determinism and reciprocity",
}


@contextlib.contextmanager
def criterion(capsys, num):
    """Print ``PASS``/``FAIL`` for criterion ``num`` with the collected details."""
    info: dict = {}
    status = "FAIL"
    try:
        yield info
        status = "PASS"
    finally:
        detail = ", ".join(f"{k}={v}" for k, v in info.items())
        with capsys.disabled():
            print(f"\nCRITERION {num} {status}: {CRITERIA[num]} ({detail})")


def quiet(fn, *args, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return fn(*args, **kw)


@pytest.fixture(scope="session")
def study_2g():
    t0 = time.perf_counter()
    res = run_study(2e9)
    res.extra["wall"] = time.perf_counter() - t0
    return res


@pytest.fixture(scope="session")
def study_28g():
    return run_study(28e9)


def _db(g):
    return 20 * math.log10(abs(g)) if g != 0 else -math.inf


def test_criterion_1_oracle_equivalence(capsys):
    budgets = [(r, d) for r in range(3) for d in range(2)]
    seeds = range(24)
    with criterion(capsys, 1) as info:
        t0 = time.perf_counter()
        n_paths = worst_delay = worst_db = 0.0
        for seed in seeds:
            sc, tx, rx = random_oracle_scene(seed)
            assert len(sc) <= 6
            for r, d in budgets:
                ref = brute_force_paths(sc, LIB, tx, rx, r, d)
                got = {p.key: p for p in quiet(find_paths, sc, LIB, tx, rx, InteractionBudget(r, d))}
                assert set(got) == set(ref), (seed, r, d, set(got) ^ set(ref))
                if (r, d) != (2, 1):
                    continue
                for key, (verts, trans) in ref.items():
                    mine = evaluate_path(got[key], sc, LIB, 2e9)
                    theirs = evaluate_path(oracle_path(verts, key, trans), sc, LIB, 2e9)
                    worst_delay = max(worst_delay, abs(mine.delay - theirs.delay))
                    a, b = _db(mine.gain), _db(theirs.gain)
                    if math.isfinite(a) or math.isfinite(b):
                        worst_db = max(worst_db, abs(a - b))
                    n_paths += 1
        elapsed = time.perf_counter() - t0
        info.update(scenes=len(seeds), paths=int(n_paths), max_delay_err=f"{worst_delay:.1e}s",
                    max_power_err=f"{worst_db:.1e}dB", runtime=f"{elapsed:.1f}s")
        assert worst_delay <= 1e-12
        assert worst_db <= 1e-6
        assert elapsed < 60


def _keysets(finders, tx, rx):
    return {b: {k for batch in f.find_set(tx, rx).batches for k in batch.keys()} for b, f in finders.items()}


def test_criterion_2_budget_monotonicity(capsys):
    # deepest budget first so its image trees serve the smaller budgets
    budgets = [(r, d) for r in (3, 2, 1, 0) for d in (1, 0)]
    with criterion(capsys, 2) as info:
        links = checks = 0
        rng = np.random.default_rng(42)
        for seed in range(10):
            cfg = FactoryConfig(rng_seed=seed)
            sc = build_factory(cfg, SceneVariant.DETAILED, LIB)
            lay = terminal_layout(cfg)
            trees: OrderedDict = OrderedDict()
            finders = {b: PathFinder(sc, LIB, InteractionBudget(*b), tree_cache=trees) for b in budgets}
            for _ in range(5):
                tx = lay.bs(int(rng.integers(1, len(lay.bs_positions) + 1)))
                rx = lay.ut(int(rng.integers(1, len(lay.ut_positions) + 1)))
                ks = quiet(_keysets, finders, tx, rx)
                for r in (1, 2, 3):
                    for d in (0, 1):
                        assert ks[(r - 1, d)] <= ks[(r, d)], (seed, r, d)
                    assert ks[(r, 0)] <= ks[(r, 1)], (seed, r)
                    checks += 3
                links += 1
        info.update(scenes=10, links=links, inclusions=checks)
        assert links >= 50


def test_criterion_3_em_micro_checks(capsys):
    with criterion(capsys, 3) as info:
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(10_000):
            re, im = rng.uniform(0.2, 60), rng.uniform(0, 30)
            th = rng.uniform(0, math.pi / 2 - 1e-3)
            pol = "TE" if rng.random() < 0.5 else "TM"
            got = fresnel_reflection(dielectric(re, im), th, pol, 2e9)
            ref = fresnel_oracle(re, im, th, pol)
            worst = max(worst, abs(got - ref) / abs(ref))
        info["fresnel_rel_err"] = f"{worst:.1e}"
        assert worst < 1e-9

        jumps = {f"{pol}/{b}": boundary_scan(h, b) for h, pol in ((False, "soft"), (True, "hard"))
                 for b in ("shadow", "reflection")}
        info["max_boundary_jump"] = f"{max(jumps.values()):.3f}dB"
        assert max(jumps.values()) < 0.5

        peak = dipole_gain(math.pi / 2)
        info["dipole_peak"] = f"{peak:.6f}"
        assert abs(peak - 1.643) <= 1e-6 and DIPOLE_PEAK_GAIN == peak

        balance = 0.0
        for _ in range(2000):
            m = dielectric(rng.uniform(1.01, 80), 0.0)
            th = rng.uniform(0, math.pi / 2 - 1e-4)
            for pol in ("TE", "TM"):
                R, T = interface_power_fractions(m, th, pol, 2e9)
                balance = max(balance, abs(R + T - 1))
        info["power_balance_err"] = f"{balance:.1e}"
        assert balance < 1e-9


def test_criterion_4_metric_formulas(capsys):
    with criterion(capsys, 4) as info:
        p = received_power(cols([-90.0, -90.0]))
        ds = rms_delay_spread(cols(10 * np.log10([3.0, 1.0]), [0, 100]))
        az = circular_angle_spread(cols([-80, -80], aoa_deg=[0, 90]), ARR)
        rm = compare_rmse(_run([-80.0, -90.0, -70.0]), _run([-75.0, -90.0, -70.0])).rmse["power_db"]
        info.update(power=f"{p:.3f}dBm", ds=f"{ds:.3f}ns", spread=f"{az:.3f}deg", rmse=f"{rm:.3f}dB")
        assert abs(p - -86.99) <= 0.01
        assert abs(ds - 43.30) <= 0.01
        assert abs(az - 47.7) <= 0.01
        assert abs(rm - 2.887) <= 0.01


def _run(powers):
    links = {(1, i + 1): LinkMetrics(p, 0.0, 0.0, 0.0, Visibility.LOS, 1) for i, p in enumerate(powers)}
    return RunResult("m", links, 1.0)


def test_criterion_5_ct_trend(capsys, study_2g):
    with criterion(capsys, 5) as info:
        ct = {n: r.ct for n, r in study_2g.runs.items()}
        r2 = ct["model2"] / ct["reference"]
        r4 = ct["model4"] / ct["reference"]
        info.update(links=len(study_2g.runs["reference"]), ct_ref=f"{ct['reference']:.0f}s",
                    ratio_2R1D=f"{r2:.3f}", ratio_simplified=f"{r4:.3f}",
                    full_run=f"{study_2g.extra['wall'] / 60:.1f}min")
        assert len(study_2g.runs["reference"]) == 200
        assert r2 < 0.5
        assert r4 < 0.6
        assert study_2g.extra["wall"] < 30 * 60


def test_criterion_6_rmse_ordering(capsys, study_2g):
    with criterion(capsys, 6) as info:
        rep: dict[str, ComparisonReport] = study_2g.reports
        for m in ("power_db", "ds_ns"):
            info[m] = "/".join(f"{rep[n].rmse[m]:.2f}" for n in ("model2", "model3", "model4"))
        for m in ("power_db", "ds_ns"):
            assert rep["model2"].rmse[m] <= rep["model3"].rmse[m]
            assert rep["model2"].rmse[m] <= rep["model4"].rmse[m]


def test_criterion_7_tuning(capsys, study_2g):
    with criterion(capsys, 7) as info:
        t = study_2g.tuning
        before = study_2g.reports["model4"].rmse["power_db"]
        after = t.report.rmse["power_db"]
        info.update(default=f"{before:.2f}dB", tuned=f"{after:.2f}dB",
                    reduction=f"{before - after:.2f}dB", point=t.point)
        assert after < before


def test_criterion_8_high_band_medians(capsys, study_28g):
    with criterion(capsys, 8) as info:
        med = {n: s.stats["power_db"]["median"] for n, s in study_28g.summaries.items()}
        band = max(med.values()) - min(med.values())
        info.update(links=len(study_28g.runs["reference"]),
                    medians="/".join(f"{med[n]:.1f}" for n in ("reference", "model2", "model3", "model4")),
                    band=f"{band:.2f}dB")
        assert all(b == 4 for r in study_28g.runs.values() for b, _ in r.links)
        assert len(study_28g.runs["reference"]) == 24
        assert band <= 6.0


def _gains(finder, scene, tx, rx):
    ps = finder.find_set(tx, rx)
    g = evaluate_set(ps, scene, LIB, 2e9)
    return {p.key: p for b, gb in zip(ps.batches, g) for p in b.to_paths(gb)}


def test_criterion_9_determinism_reciprocity(capsys):
    with criterion(capsys, 9) as info:
        cfg = FactoryConfig(rng_seed=11)
        a = json.dumps(scene_to_json(build_factory(cfg, "detailed"))).encode()
        b = json.dumps(scene_to_json(build_factory(FactoryConfig(rng_seed=11), "detailed"))).encode()
        info["scene_bytes_equal"] = a == b
        assert a == b

        base, lay = paper_layout()
        links = [(b_, u) for b_ in range(1, 6) for u in (2, 9, 17, 33)]
        model = ModelSpec("m", "detailed", "2R1D")
        runs = [run_p2mp(model, lay, base, links=links, workers=w) for w in (1, 2, 3)]
        same = all(r.links == runs[0].links for r in runs[1:])
        info["workers_identical"] = same
        assert same

        sc = build_factory(base, "detailed", LIB)
        finder = PathFinder(sc, LIB, InteractionBudget(1, 1))
        rng = np.random.default_rng(7)
        worst = 0.0
        n_paths = 0
        for _ in range(100):
            tx = lay.bs(int(rng.integers(1, 6)))
            rx = lay.ut(int(rng.integers(1, 41)))
            fwd = quiet(_gains, finder, sc, tx, rx)
            bwd = quiet(_gains, finder, sc, rx, tx)
            assert len(fwd) == len(bwd)
            for key, p in fwd.items():
                q = bwd[tuple(reversed(key))]
                worst = max(worst, abs(p.delay - q.delay) / p.delay)
                if p.gain != 0 or q.gain != 0:
                    worst = max(worst, abs(abs(p.gain) - abs(q.gain)) / max(abs(p.gain), abs(q.gain)))
            n_paths += len(fwd)
        info.update(reciprocity_links=100, paths=n_paths, max_rel_err=f"{worst:.1e}")
        assert worst <= 1e-9
