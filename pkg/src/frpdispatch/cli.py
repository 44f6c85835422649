"""Command-line entry point: ``frpdispatch {requirements,run,mc,report}``.

Exit codes: 0 success, 1 runtime failure (e.g. an infeasible window),
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .config import (ConfigError, RunConfig, case_study_config, compute_requirements,
                     load_config, run_mode, run_monte_carlo)
from .engine import totals_report
from .market_model import WindowInfeasible

log = logging.getLogger("frpdispatch")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def fmt(x) -> str:
    """Plain decimal with at most 6 fractional digits."""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        s = f"{x:.6f}".rstrip("0").rstrip(".")
        return "0" if s in ("-0", "") else s
    return str(x)


def write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def cmd_requirements(cfg: RunConfig, out: Path, seed=None):
    res = compute_requirements(cfg, seed)
    tau = res.draws.interval
    rows = [(name, tau, r.fru, r.frd) for name, r in res.requirements.items()]
    files = [write_csv(out / "frp_requirements.csv", ["mode", "interval", "R_U", "R_D"], rows)]
    for name, h in res.histograms.items():
        files.append(write_csv(out / f"histogram_{name}.csv", ["bin_start", "bin_end", "count"], h.rows()))
    return res, files


def _dispatch_rows(cfg, traj):
    spec = cfg.system_spec()
    for rec in traj.records:
        phi_u = rec.price_fru[0] if rec.price_fru.size else ""
        phi_d = rec.price_frd[0] if rec.price_frd.size else ""
        patterns = ";".join(p.describe() for p in rec.patterns)
        shed = float(rec.shed.sum())
        for gen, mw in zip(spec.generators, rec.dispatch):
            yield (traj.mode, rec.interval, gen.id, float(mw), shed, rec.cost, rec.emissions,
                   rec.price_energy, phi_u, phi_d, patterns)


DISPATCH_HEADER = ["mode", "interval", "unit", "mw", "shed_mw", "cost", "emissions",
                   "lambda", "phi_u", "phi_d", "patterns"]


def cmd_run(cfg: RunConfig, mode: str, out: Path, seed=None):
    res = compute_requirements(cfg, seed)
    traj = run_mode(cfg, mode, res.requirements[mode], trial_seed=seed)
    path = write_csv(out / "binding_dispatch.csv", DISPATCH_HEADER, _dispatch_rows(cfg, traj))
    return traj, [path]


def cmd_mc(cfg: RunConfig, out: Path, seed=None, trials=None, workers=1):
    res = compute_requirements(cfg, seed)
    summaries = run_monte_carlo(cfg, res.requirements, trials, seed, workers)
    rows = []
    for name, s in summaries.items():
        for k, tau in enumerate(s.intervals):
            rows.append((name, tau, s.trials, float(s.mean_cost[k]), float(s.sd_cost[k]),
                         float(s.mean_emissions[k]), float(s.sd_emissions[k]),
                         s.sd_defined, s.infeasible_trial_count))
    files = [write_csv(out / "mc_summary.csv",
                       ["mode", "interval", "trials", "mean_cost", "sd_cost", "mean_emissions",
                        "sd_emissions", "sd_defined", "infeasible_count"], rows)]
    totals = totals_report(summaries)
    files.append(write_csv(out / "totals.csv", ["mode", "total_cost", "total_emissions"],
                           [(t.mode, t.total_cost, t.total_emissions) for t in totals]))
    return summaries, files


def cmd_report(cfg: RunConfig, out: Path, seed=None, trials=None, workers=1):
    res, files = cmd_requirements(cfg, out, seed)
    trajs = {m.name: run_mode(cfg, m.name, res.requirements[m.name]) for m in cfg.modes}
    rows = [r for t in trajs.values() for r in _dispatch_rows(cfg, t)]
    files.append(write_csv(out / "binding_dispatch.csv", DISPATCH_HEADER, rows))
    summaries, mc_files = cmd_mc(cfg, out, seed, trials, workers)
    files += mc_files

    names = [m.name for m in cfg.modes]
    col = lambda vals: "".join(f"{v:>12}" for v in vals)
    lines = ["FRP requirements at interval %d (MW)" % res.draws.interval,
             f"{'':<14}" + col(names),
             f"{'R_U':<14}" + col(f"{res.requirements[n].fru:.4f}" for n in names),
             f"{'R_D':<14}" + col(f"{res.requirements[n].frd:.4f}" for n in names),
             ""]
    first = {n: trajs[n].records[0] for n in names}
    gen_ids = [g.id for g in cfg.system.generators]
    lines.append(f"Binding interval {first[names[0]].interval}")
    for i, gid in enumerate(gen_ids):
        lines.append(f"{'g_' + gid:<14}" + col(f"{first[n].dispatch[i]:.4f}" for n in names))
    lines.append(f"{'phi_U':<14}" + col(f"{first[n].price_fru[0]:.4f}" for n in names))
    lines.append(f"{'phi_D':<14}" + col(f"{first[n].price_frd[0]:.4f}" for n in names))
    lines.append(f"{'cost':<14}" + col(f"{first[n].cost:.2f}" for n in names))
    lines.append(f"{'emissions':<14}" + col(f"{first[n].emissions:.4f}" for n in names))
    lines.append("")
    for k, tau in enumerate(summaries[names[0]].intervals):
        lines.append(f"Monte Carlo mean, binding interval {tau}")
        lines.append(f"{'cost':<14}" + col(f"{summaries[n].mean_cost[k]:.2f}" for n in names))
        lines.append(f"{'emissions':<14}" + col(f"{summaries[n].mean_emissions[k]:.4f}" for n in names))
    lines.append(f"{'infeasible':<14}" + col(summaries[n].infeasible_trial_count for n in names))
    lines.append("")
    lines.append("Totals over binding intervals (Monte Carlo means)")
    totals = {t.mode: t for t in totals_report(summaries)}
    lines.append(f"{'cost':<14}" + col(f"{totals[n].total_cost:.2f}" for n in names))
    lines.append(f"{'emissions':<14}" + col(f"{totals[n].total_emissions:.4f}" for n in names))
    text = "\n".join(lines) + "\n"
    (out / "report.txt").write_text(text)
    files.append(out / "report.txt")
    return text, files


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration (JSON); defaults to the bundled case study")
    common.add_argument("--seed", type=int, help="override sampling.master_seed")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="frpdispatch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("requirements", parents=[common], help="FRP requirements and histograms")
    run = sub.add_parser("run", parents=[common], help="one deterministic rolling trajectory")
    run.add_argument("--mode", required=True)
    for name in ("mc", "report"):
        p = sub.add_parser(name, parents=[common],
                           help="Monte Carlo summary" if name == "mc" else "all tables")
        p.add_argument("--trials", type=int, help="override sampling.mc_trials")
        p.add_argument("--workers", type=int, default=1)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else case_study_config()
    except ConfigError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out or cfg.output_dir)
    if getattr(args, "trials", None) is not None and args.trials < 1:
        parser.error("--trials must be >= 1")
    if args.command == "run" and args.mode not in [m.name for m in cfg.modes]:
        parser.error(f"unknown mode {args.mode!r}; choose from {[m.name for m in cfg.modes]}")

    try:
        if args.command == "requirements":
            _, files = cmd_requirements(cfg, out, args.seed)
        elif args.command == "run":
            _, files = cmd_run(cfg, args.mode, out, args.seed)
        elif args.command == "mc":
            _, files = cmd_mc(cfg, out, args.seed, args.trials, args.workers)
        else:
            text, files = cmd_report(cfg, out, args.seed, args.trials, args.workers)
            sys.stdout.write(text)
    except WindowInfeasible as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for f in files:
        log.info("wrote %s", f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
