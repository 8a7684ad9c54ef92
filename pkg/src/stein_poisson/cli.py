"""Command-line entry point: ``stein-poisson <subcommand> [--config PATH] ...``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

from .experiment import (ConfigError, ExperimentConfig, _json_default, read_rate_pairs,
                         run_experiment, simulate_point, summarize, write_plot_data)
from .parallel import default_threads
from .asymptotics import rate_fit


def _common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
    p.add_argument("--config", required=config_required, help="JSON experiment config")
    p.add_argument("--seed", type=int, help="override the config seed (u64)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads; results do not depend on it")
    p.add_argument("--emit-plot-data", action="store_true",
                   help="also write (log n, log phi, log W1) triples")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stein-poisson",
                                     description="Normal approximation diagnostics for "
                                                 "random geometric graph edge counts.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [("simulate", "edge counts only"),
                        ("bound", "phi1 and phi2 per intensity"),
                        ("wasserstein", "empirical W1 per intensity"),
                        ("constants", "optimality constants report"),
                        ("run", "full pipeline: CSV, summary, rate fit and constants")]:
        _common(sub.add_parser(name, help=help_))
    rf = sub.add_parser("rate-fit", help="log-log regression over a results CSV")
    rf.add_argument("csv", help="CSV with n,value columns or a results CSV")
    rf.add_argument("--column", default="phi")
    rf.add_argument("--out")
    st = sub.add_parser("selftest", help="run the invariant suites")
    st.add_argument("--quick", action="store_true")
    return parser


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    cfg.validate()
    return cfg


def _write(out: str, name: str, rows: list[dict]) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    target = path / name
    with open(target, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\r\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return target


def _per_n(cfg: ExperimentConfig, threads, fn) -> list[dict]:
    density = cfg.load_density()
    rows = []
    for n in cfg.intensities:
        us, method, sample = simulate_point(cfg, n, density, threads)
        rows.append({"n": n, "t": cfg.radius_for(n), "seed": cfg.seed, **fn(us, method, sample)})
    return rows


def cmd_simulate(args) -> int:
    from .experiment import _statistic
    from .parallel import ordered_map
    cfg = _load(args)
    density = cfg.load_density()
    rows = []
    for n in cfg.intensities:
        us = _statistic(cfg, n, density)

        def one(r, us=us):
            config = us.sample(cfg.seed, r)
            return len(config), int(round(us.raw(config)))
        for r, (m, f) in enumerate(ordered_map(one, range(cfg.replications), args.threads)):
            rows.append({"n": n, "t": cfg.radius_for(n), "replication": r, "points": m,
                         "edges": f})
    print(_write(cfg.out, "simulate.csv", rows))
    return 0


def cmd_bound(args) -> int:
    cfg = _load(args)

    def fn(us, method, s):
        from .experiment import _stats
        r = _stats(us, s, cfg.seed, cfg.control, method, us.intensity, 0.0)
        return {"replications": r.replications, "phi1": r.phi1, "phi1_stderr": r.phi1_stderr,
                "phi2": r.phi2, "phi2_stderr": r.phi2_stderr, "phi": r.phi, "method": method}
    rows = _per_n(cfg, args.threads, fn)
    print(_write(cfg.out, "bound.csv", rows))
    return 0


def cmd_wasserstein(args) -> int:
    from .stein import empirical_w1
    cfg = _load(args)
    rows = _per_n(cfg, args.threads,
                  lambda us, m, s: {"replications": s.value.size, "w1": empirical_w1(s.value)})
    print(_write(cfg.out, "wasserstein.csv", rows))
    return 0


def cmd_constants(args) -> int:
    cfg = _load(args)
    results = run_experiment(cfg, threads=args.threads, write=False)
    summary = summarize(cfg, results, with_constants=True)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "constants.json").write_text(json.dumps(summary["constants"], indent=2,
                                                   default=_json_default))
    print(out / "constants.json")
    return 0


def cmd_run(args) -> int:
    cfg = _load(args)
    results = run_experiment(cfg, threads=args.threads, emit_plot_data=args.emit_plot_data)
    for r in results:
        print(f"n={r.n:g} t={r.t:.4f} phi={r.phi:.5f} w1={r.w1:.5f} "
              f"T_n*sqrt(n)={r.T_n_sqrt_n:+.4f}")
    print(Path(cfg.out) / "summary.json")
    return 0


def cmd_rate_fit(args) -> int:
    fit = rate_fit(read_rate_pairs(args.csv, args.column))
    doc = json.dumps(asdict(fit), indent=2)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "rate_fit.json").write_text(doc)
    print(doc)
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest
    return 0 if run_selftest(quick=args.quick) else 1


COMMANDS = {"simulate": cmd_simulate, "bound": cmd_bound, "wasserstein": cmd_wasserstein,
            "constants": cmd_constants, "run": cmd_run, "rate-fit": cmd_rate_fit,
            "selftest": cmd_selftest}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", None) is None and hasattr(args, "threads"):
        args.threads = default_threads()
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
