"""Command-line entry point: ``nskorteweg <verb> [options]``."""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np
import tomli_w

from .diagnostics import SHARP_CONSTANT, check_functional_inequality, random_positive_trig
from .ensemble import (
    ConfigError,
    dump_config,
    galerkin_convergence_study,
    initial_state,
    load_config,
    pathwise_uniqueness_check,
    run_ensemble,
    strong_order_study,
)
from .integrator import simulate_path
from .params import regime_atlas

VERBS = ("simulate", "ensemble", "atlas", "study-galerkin", "study-order", "study-uniqueness", "check-inequality")


def _common(p: argparse.ArgumentParser, needs_config: bool):
    p.add_argument("--config", type=Path, required=needs_config, help="experiment config (TOML)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--seed", type=int, default=None, help="master seed (unsigned 64-bit), overrides the config")
    p.add_argument("--paths", type=int, default=None, help="number of paths, overrides the config")
    p.add_argument("--threads", type=int, default=None, help="worker threads, overrides the config")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nskorteweg", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    _common(sub.add_parser("simulate", help="one path: snapshots, diagnostics, manifest"), True)
    _common(sub.add_parser("ensemble", help="Monte Carlo ensemble with statistics"), True)

    p = sub.add_parser("atlas", help="(alpha, beta) regime sweep")
    _common(p, False)
    p.add_argument("--alpha", type=float, nargs=2, default=(0.0, 3.0), metavar=("LO", "HI"))
    p.add_argument("--beta", type=float, nargs=2, default=(-4.0, 3.0), metavar=("LO", "HI"))
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--plot", action="store_true", help="also write a regime map image")

    p = sub.add_parser("study-galerkin", help="convergence in the Galerkin order")
    _common(p, True)
    p.add_argument("--m-list", type=int, nargs="+", default=[16, 32, 64, 128])

    p = sub.add_parser("study-order", help="strong order in dt")
    _common(p, True)
    p.add_argument("--levels", type=int, nargs=2, default=(9, 13), metavar=("FIRST", "LAST"),
                   help="dt = 2**-level * t_end for level in [FIRST, LAST]")
    p.add_argument("--ref-factor", type=int, default=8, help="reference step = finest dt / factor")

    p = sub.add_parser("study-uniqueness", help="determinism and continuous dependence on data")
    _common(p, True)
    p.add_argument("--delta", type=float, default=1e-8)

    p = sub.add_parser("check-inequality", help="sampled functional inequality ratio")
    _common(p, False)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--degree", type=int, default=16)
    p.add_argument("--points", type=int, default=256)
    return parser


def _config(args):
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed: must be an unsigned 64-bit integer")
        changes["master_seed"] = args.seed
    if args.paths is not None:
        if args.paths < 1:
            raise ConfigError("--paths: must be >= 1")
        changes["n_paths"] = args.paths
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads: must be >= 1")
        changes["threads"] = args.threads
    changes["output_dir"] = str(args.out)
    return cfg.with_options(**changes)


def _write_rows(path, header, rows):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def cmd_simulate(args):
    cfg = _config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.seeds()[0]
    ic = initial_state(cfg.ic, cfg.params, 1)
    if ic.batched:
        ic = ic.path(0)
    traj, report, _ = simulate_path(ic, cfg.params, cfg.schedule, seed)
    traj.write_snapshots(out / "snapshots.bin")
    traj.write_diagnostics(out / "diagnostics.csv")
    doc = cfg.to_dict()
    doc["path_seed"] = str(seed)
    doc["stop"] = {k: v for k, v in asdict(report).items() if v is not None}
    (out / "manifest.toml").write_text(tomli_w.dumps(doc), encoding="utf-8")
    print(f"records={len(traj.times)} stopped={report.stopped} reason={report.reason} y_max={report.y_max:.6g}")
    return 0


def cmd_ensemble(args):
    cfg = _config(args)
    stats = run_ensemble(cfg, write=True)
    for reason, frac in stats.stop_fraction.items():
        print(f"stop_fraction[{reason}]={frac:.4g}")
    for name, by_p in stats.moments.items():
        for p, est in by_p.items():
            print(f"{name} p={p}: mean_of_powers={est['mean_of_powers']:.6g} power_of_mean={est['power_of_mean']:.6g}")
    return 0


def cmd_atlas(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    atlas = regime_atlas(tuple(args.alpha), tuple(args.beta), args.step)
    atlas.to_csv(out / "atlas.csv")
    if args.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        code = atlas.scc.astype(int) + 2 * atlas.nv.astype(int)
        fig, ax = plt.subplots(figsize=(5, 5))
        ax.pcolormesh(atlas.alpha, atlas.beta, code, shading="nearest", cmap="viridis")
        ax.set_xlabel("alpha")
        ax.set_ylabel("beta")
        ax.set_title("SCC (+1) and NV (+2)")
        fig.savefig(out / "atlas.png", dpi=120)
        plt.close(fig)
    print(f"atlas {atlas.shape[0]}x{atlas.shape[1]} scc={int(atlas.scc.sum())} nv={int(atlas.nv.sum())}")
    return 0


def cmd_study_galerkin(args):
    cfg = _config(args)
    rep = galerkin_convergence_study(cfg, args.m_list)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    rows = []
    for i, (m1, m2) in enumerate(zip(rep.m_list, rep.m_list[1:])):
        ratio = rep.ratios[i - 1] if i > 0 else float("nan")
        rows.append([m1, m2, repr(float(rep.errors[i])), repr(float(ratio))])
        print(f"m={m1}->{m2} sup_t H{rep.sobolev_index:g} error={rep.errors[i]:.6g} ratio={ratio:.4g}")
    _write_rows(Path(args.out) / "galerkin.csv", ["m", "m_next", "error", "ratio"], rows)
    dump_config(cfg, Path(args.out) / "manifest.toml")
    return 0


def cmd_study_order(args):
    cfg = _config(args)
    first, last = args.levels
    dts = [cfg.schedule.t_end * 2.0**-k for k in range(first, last + 1)]
    rep = strong_order_study(cfg, dts, ref_factor=args.ref_factor)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    _write_rows(Path(args.out) / "order.csv", ["dt", "strong_error"],
                [[repr(float(d)), repr(float(e))] for d, e in zip(rep.dt_list, rep.errors)])
    dump_config(cfg, Path(args.out) / "manifest.toml")
    print(f"fitted strong order {rep.slope:.4f} (reference dt {rep.dt_ref:.3g}, {rep.n_paths} paths, "
          f"{rep.excluded} excluded)")
    return 0


def cmd_study_uniqueness(args):
    cfg = _config(args)
    rep = pathwise_uniqueness_check(cfg, args.delta)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    _write_rows(Path(args.out) / "uniqueness.csv", ["t", "discrepancy"],
                [[repr(float(t)), repr(float(d))] for t, d in zip(rep.times, rep.discrepancy)])
    dump_config(cfg, Path(args.out) / "manifest.toml")
    print(f"bitwise_identical={rep.bitwise_identical} growth_rate={rep.growth_rate:.6g} max_ratio={rep.max_ratio:.6g}")
    return 0


def cmd_check_inequality(args):
    seed = 0 if args.seed is None else args.seed
    f = random_positive_trig(args.samples, args.degree, args.points, rng=seed)
    ratios = check_functional_inequality(f)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / "inequality.csv", ["sample", "ratio"], [[i, repr(float(r))] for i, r in enumerate(ratios)])
    worst = float(np.max(ratios))
    print(f"max ratio {worst:.10f} bound {SHARP_CONSTANT:.10f} violations={int(np.sum(ratios > SHARP_CONSTANT + 1e-8))}")
    return 0 if worst <= SHARP_CONSTANT + 1e-8 else 1


COMMANDS = {
    "simulate": cmd_simulate,
    "ensemble": cmd_ensemble,
    "atlas": cmd_atlas,
    "study-galerkin": cmd_study_galerkin,
    "study-order": cmd_study_order,
    "study-uniqueness": cmd_study_uniqueness,
    "check-inequality": cmd_check_inequality,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.verb](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
