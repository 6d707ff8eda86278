"""Command-line interface: run, compare, summarize, tune, reproduce-paper."""

from __future__ import annotations

import argparse
import logging
import sys

from ..paths.model import InteractionBudget
from ..scenario import FactoryConfig, SceneVariant, load_config, terminal_layout
from .analysis import COARSE_GRID, TuningGrid, compare_rmse, summarize_distribution, tune_material_full
from .io import read_results_csv, write_json, write_results_csv
from .models import ENVELOPE_ID, ModelSpec
from .runner import run_p2mp
from .study import link_mask, run_study, write_study


def _config(args) -> FactoryConfig:
    cfg = load_config(args.scene_config) if args.scene_config else FactoryConfig()
    if args.seed is not None:
        cfg = FactoryConfig.from_json({**cfg.to_json(), "rng_seed": args.seed})
    return cfg


def _scene_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scene-config", help="factory config JSON (default: built-in layout)")
    p.add_argument("--seed", type=int, help="override the config's rng_seed")
    p.add_argument("--workers", type=int, default=1)


def _cmd_run(args) -> int:
    cfg = _config(args)
    layout = terminal_layout(cfg)
    model = ModelSpec(f"{args.variant}_{args.budget}", SceneVariant(args.variant),
                      InteractionBudget.parse(args.budget), args.freq, {ENVELOPE_ID: args.envelope})
    links = args.links or link_mask(args.freq)
    if args.paths_dump:
        with open(args.paths_dump, "w") as fh:
            res = run_p2mp(model, layout, cfg, links=links, workers=args.workers, coherent=args.coherent,
                           paths_dump=fh)
    else:
        res = run_p2mp(model, layout, cfg, links=links, workers=args.workers, coherent=args.coherent)
    write_results_csv(res, args.out)
    print(f"{len(res)} links, CT {res.ct:.2f} s -> {args.out}")
    return 0


def _cmd_compare(args) -> int:
    rep = compare_rmse(read_results_csv(args.ref), read_results_csv(args.cand))
    write_json(rep, args.out)
    print(" ".join(f"{k}={v:.3f}" for k, v in rep.rmse.items()), f"links={rep.link_count}")
    return 0


def _cmd_summarize(args) -> int:
    write_json(summarize_distribution(read_results_csv(args.inp)), args.out)
    return 0


def _cmd_tune(args) -> int:
    cfg = _config(args)
    layout = terminal_layout(cfg)
    ref = read_results_csv(args.ref)
    freq = args.freq if args.freq else (ref.frequency if ref.frequency == ref.frequency else 2e9)
    model = ModelSpec("model4", SceneVariant.SIMPLIFIED, InteractionBudget.parse(args.budget), freq)
    grid = TuningGrid.parse(args.grid) if args.grid else COARSE_GRID
    res = tune_material_full(ref, layout, cfg, grid, model=model, workers=args.workers)
    out = {"material": {"name": res.material.name, **res.material.to_json()},
           "loss_db_per_m": res.point[0], "eps_re": res.point[1], "eps_im": res.point[2],
           "objective": res.objective, "report": res.report.to_json(), "grid_points": len(res.history)}
    write_json(out, args.out)
    print(f"best loss={res.point[0]} eps=({res.point[1]}, {res.point[2]}) objective={res.objective:.3f}")
    return 0


def _cmd_reproduce(args) -> int:
    cfg = _config(args)
    res = run_study(args.freq, cfg, terminal_layout(cfg), workers=args.workers,
                    tune=None if not args.no_tune else False)
    write_study(res, args.out)
    for name, rep in res.reports.items():
        print(f"{name:10s} CT {res.runs[name].ct:8.1f} s ratio {rep.ct_ratio:.3f} "
              + " ".join(f"{k}={v:.3f}" for k, v in rep.rmse.items()))
    if res.tuning is not None:
        print(f"tuned envelope {res.tuning.point}, power RMSE reduction {res.power_rmse_reduction():.2f} dB")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="factoryrt", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="P2MP run of one model")
    _scene_args(p)
    p.add_argument("--variant", choices=[v.value for v in SceneVariant], default="detailed")
    p.add_argument("--budget", default="3R1D")
    p.add_argument("--freq", type=float, default=2e9)
    p.add_argument("--envelope", default="envelope_default", help="library material for the rack envelopes")
    p.add_argument("--links", choices=["all", "subset"], help="default: all at 2 GHz, subset at 28 GHz")
    p.add_argument("--out", required=True)
    p.add_argument("--paths-dump")
    p.add_argument("--coherent", action="store_true")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("compare", help="RMSE of a candidate against a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--cand", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("summarize", help="median and 5/95 % quantiles")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_summarize)

    p = sub.add_parser("tune", help="grid search of the envelope material")
    _scene_args(p)
    p.add_argument("--ref", required=True)
    p.add_argument("--grid", help="e.g. loss=0:0.1:1,eps_re=1:0.1:3,eps_im=0:0.01:0.2")
    p.add_argument("--budget", default="3R1D")
    p.add_argument("--freq", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("reproduce-paper", help="all four models plus tables")
    _scene_args(p)
    p.add_argument("--freq", type=float, default=2e9)
    p.add_argument("--no-tune", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_reproduce)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
