"""Command line entry point.

Subcommands::

    epiframes simulate   --out DIR                 write a trace directory
    epiframes truth      --day D                   true totals for one day
    epiframes estimate   --day D --scheme A1B2     one replication, full report
    epiframes montecarlo --out DIR                 full scheme-by-day experiment
    epiframes waves      --times 10,20,30          chained follow-up estimates
    epiframes av         --N ... --f ...           anticipated-variance calculator

Every command accepts ``--config FILE`` (``key=value`` lines) and ``--seed``.
Errors exit with the status attached to their class (2 config, 3 design,
4 estimation, 70 internal inconsistency).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from pathlib import Path

from .anticipated import AvParams, av_table
from .config import read_key_values
from .designs import Sample, traced_sample
from .errors import ConfigError, EpiFramesError
from .frames import build_world
from .harness import ExperimentConfig, SchemeId, draw_replicate, emit_report, replicate, run_experiment
from .synthpop import EpidemicTrace, run_epidemic
from .waves import WaveConfig, run_waves, write_wave_csv


def _load_config(args) -> ExperimentConfig:
    values = read_key_values(args.config) if args.config else {}
    if args.seed is not None:
        values["seed"] = str(args.seed)
    cfg = ExperimentConfig.from_mapping(values)
    cfg.validate()
    return cfg


def _trace(args, cfg: ExperimentConfig) -> EpidemicTrace:
    if getattr(args, "trace", None):
        return EpidemicTrace.read(args.trace)
    return run_epidemic(cfg.sim)


def _write_text(text: str, out, name: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    d = Path(out)
    try:
        d.mkdir(parents=True, exist_ok=True)
        (d / name).write_text(text)
    except OSError as exc:
        raise EpiFramesError(f"cannot write {d / name}: {exc}") from exc


def cmd_simulate(args) -> None:
    cfg = _load_config(args)
    if not args.out:
        raise ConfigError("simulate needs --out")
    try:
        run_epidemic(cfg.sim).write(args.out)
    except OSError as exc:
        raise EpiFramesError(f"cannot write trace to {args.out}: {exc}") from exc


def cmd_truth(args) -> None:
    cfg = _load_config(args)
    world = build_world(_trace(args, cfg), args.day, cfg.window_length)
    t = world.truth
    if args.format == "json":
        text = json.dumps({"day": args.day, "Y": t.Y, "Y_A": t.Y_A, "Y_B": t.Y_B, "Y_AB": t.Y_AB},
                          indent=2) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["day", "Y", "Y_A", "Y_B", "Y_AB"])
        w.writerow([args.day, t.Y, t.Y_A, t.Y_B, t.Y_AB])
        text = buf.getvalue()
    _write_text(text, args.out, f"truth_day{args.day}.{args.format}")


def cmd_estimate(args) -> None:
    cfg = _load_config(args)
    world = build_world(_trace(args, cfg), args.day, cfg.window_length)
    rep, n_first, n_tested = replicate(world, SchemeId(args.scheme), cfg, args.replication)
    if args.format == "json":
        d = {k: v for k, v in rep.to_dict().items() if k not in ("Z_v", "Z_C")}
        d.update(day=args.day, scheme=args.scheme, replication=args.replication, Y_true=world.truth.Y,
                 units_without_contacts=n_first, units_with_contacts=n_tested)
        _write_text(json.dumps(d, indent=2, sort_keys=True) + "\n", args.out,
                    f"estimate_day{args.day}_{args.scheme}.json")
    else:
        keys = ["Y_A", "Y_B", "Y_AB_A", "Y_AB_B", "alpha", "Y_hat", "V"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["day", "scheme", "replication", *keys, "Y_true"])
        w.writerow([args.day, args.scheme, args.replication, *(repr(float(getattr(rep, k))) for k in keys),
                    world.truth.Y])
        _write_text(buf.getvalue(), args.out, f"estimate_day{args.day}_{args.scheme}.csv")
    if args.out and args.write_sample:
        s = draw_replicate(world, SchemeId(args.scheme), cfg, args.replication)
        label = args.scheme
        parts = [traced_sample(s.verified, s.traced_v, label), traced_sample(s.panel, s.traced_c, label)]
        Sample.concat(parts, label).write_csv(Path(args.out) / f"sample_day{args.day}_{label}.csv")


def cmd_montecarlo(args) -> None:
    cfg = _load_config(args)
    if args.days:
        cfg.days = tuple(int(x) for x in args.days.split(","))
        cfg.validate()
    if args.R is not None:
        cfg.R = args.R
        cfg.validate()
    result = run_experiment(cfg, EpidemicTrace.read(args.trace) if args.trace else None)
    if not args.out:
        raise ConfigError("montecarlo needs --out")
    emit_report(result, args.out, args.format)
    if args.plotdata:
        emit_report(result, args.out, "plotdata")


def cmd_waves(args) -> None:
    cfg = _load_config(args)
    trace = _trace(args, cfg)
    panel = None if args.panel_size == "census" else int(args.panel_size)
    n_v = None if args.n_v == "census" else int(args.n_v)
    wcfg = WaveConfig(times=tuple(int(x) for x in args.times.split(",")), n_v=n_v, panel_size=panel,
                      alpha_policy=cfg.alpha_policy, window_length=cfg.window_length, seed=cfg.seed)
    rows = run_waves(trace, wcfg)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_wave_csv(rows, Path(args.out) / "waves.csv")
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "Y_hat", "dD_hat", "dH_hat", "dY_hat", "Y_true"])
        for r in rows:
            w.writerow([r.t, repr(r.Y_hat), repr(r.dD_hat), repr(r.dH_hat), repr(r.dY_hat), r.Y_true])
        sys.stdout.write(buf.getvalue())


def cmd_av(args) -> None:
    p = AvParams(N=args.N, f=args.f, mu=args.mu, theta=args.theta, L=args.L, P_v=args.P_v, alpha=args.alpha,
                 gamma_A=args.gamma_A, gamma_B=args.gamma_B)
    table = av_table(p)
    if args.format == "json":
        text = json.dumps({"params": dataclasses.asdict(p), **table}, indent=2) + "\n"
    else:
        width = max(len(k) for k in table)
        text = "".join(f"{k:<{width}}  {v!r}\n" for k, v in table.items())
    _write_text(text, args.out, f"av.{'json' if args.format == 'json' else 'txt'}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="epiframes", description="Indirect sampling of epidemic frames.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, fmt=("csv", "json"), default="csv"):
        p.add_argument("--config", help="key=value configuration file")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--out", help="output directory (stdout when omitted, where supported)")
        p.add_argument("--format", choices=fmt, default=default)
        return p

    p = common(sub.add_parser("simulate", help="simulate an epidemic and write its trace"))
    p.set_defaults(func=cmd_simulate)

    p = common(sub.add_parser("truth", help="exact totals for one reference day"))
    p.add_argument("--day", type=int, required=True)
    p.add_argument("--trace", help="read the trace from this directory instead of simulating")
    p.set_defaults(func=cmd_truth)

    p = common(sub.add_parser("estimate", help="one replication with the full estimate report"), default="json")
    p.add_argument("--day", type=int, required=True)
    p.add_argument("--scheme", default="A1B2", choices=[s.value for s in SchemeId])
    p.add_argument("--replication", type=int, default=0)
    p.add_argument("--trace")
    p.add_argument("--write-sample", action="store_true", help="also write the drawn sample as CSV")
    p.set_defaults(func=cmd_estimate)

    p = common(sub.add_parser("montecarlo", help="full experiment over days and schemes"))
    p.add_argument("--trace")
    p.add_argument("--days", help="comma-separated evaluation days (overrides the config)")
    p.add_argument("--R", type=int, help="replications (overrides the config)")
    p.add_argument("--plotdata", action="store_true", help="also write per-day state counts")
    p.set_defaults(func=cmd_montecarlo)

    p = common(sub.add_parser("waves", help="chained follow-up estimates"), fmt=("csv",))
    p.add_argument("--trace")
    p.add_argument("--times", default="10,20,30,40,50")
    p.add_argument("--panel-size", default="900")
    p.add_argument("--n-v", default="census")
    p.set_defaults(func=cmd_waves)

    p = sub.add_parser("av", help="anticipated variances and efficiency")
    p.add_argument("--N", type=float, required=True)
    p.add_argument("--f", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--L", type=float, required=True)
    p.add_argument("--P_v", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--gamma_A", type=float, default=1.0)
    p.add_argument("--gamma_B", type=float, default=1.0)
    p.add_argument("--out")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_av)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except EpiFramesError as exc:
        print(f"epiframes: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"epiframes: invalid input: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
