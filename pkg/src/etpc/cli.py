"""Command-line front end.

    etpc simulate --config cfg.yaml [--out-dir DIR] [--controllers clf,zoh]
    etpc batch --config cfg.yaml [--threads 4] [--seed 1]
    etpc feasibility --config cfg.yaml
    etpc reproduce-example1 [--sweep] [--count 100]

``ETPC_OUT_DIR`` and ``ETPC_THREADS`` override the output directory and the
worker count when the corresponding flag is not given.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import yaml

from .config import ConfigError, ExperimentConfig, certify, example1_config_text, load_config, parse_config
from .controllers import CONTROLLER_KINDS
from .experiment import (
    LABELS,
    batch_experiment,
    sweep_grid,
    write_conditions_csv,
    write_summary_csv,
    write_trace_csv,
)
from .sim import guub_report, iet_stats, predictor_violations, post_event_violations, run_closed_loop, guarantee_report

log = logging.getLogger("etpc")

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2


def _controllers(arg, cfg: ExperimentConfig):
    if not arg:
        return cfg.controllers
    kinds = tuple(k.strip() for k in arg.split(",") if k.strip())
    for k in kinds:
        if k not in CONTROLLER_KINDS:
            raise ConfigError("--controllers", f"unknown controller {k!r}; expected {CONTROLLER_KINDS}")
    return kinds


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    return Path(args.out_dir or os.environ.get("ETPC_OUT_DIR") or cfg.output_dir)


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("ETPC_THREADS")
    return int(env) if env else 1


def _load(args) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError("--config", "a config file is required")
    return load_config(args.config)


def _print_certification(cfg: ExperimentConfig):
    rep = certify(cfg)
    for line in rep.lines():
        print(line)
    return rep


def simulate(cfg: ExperimentConfig, out_dir: Path, controllers) -> int:
    if cfg.x0 is None:
        raise ConfigError("run.x0", "missing required field for simulate")
    if cfg.steps is None and cfg.events is None:
        raise ConfigError("run.steps", "give run.steps or run.events")
    rep = _print_certification(cfg)
    certified = rep.ok
    if not certified:
        print("warning: preconditions failed; inter-event and boundedness guarantees are not certified")
    model = cfg.model()
    trig = cfg.trigger_config(rep.P) if rep.P is not None else None
    if trig is None:
        raise ConfigError("certificate.K", "A+BK is not Schur stable")
    eps_sq = trig.eps_sq
    status = EXIT_OK
    print(f"epsilon^2 = {eps_sq:.10g}")
    for kind in controllers:
        ctrl = cfg.controller(kind)
        tr = run_closed_loop(model, ctrl, trig, cfg.x0, T=cfg.steps, E=None if cfg.steps else cfg.events,
                             certified=certified)
        path = write_trace_csv(tr, out_dir / f"trace_{kind}.csv")
        n_int = len(tr.events) - 1
        entry, viol = guub_report(tr, eps_sq)
        thm = guarantee_report(tr, trig)
        l1 = predictor_violations(tr)
        l2 = post_event_violations(tr, trig)
        print(f"\n{LABELS[kind]} ({kind}): {tr.T} steps, {len(tr.events)} events -> {path}")
        if n_int >= 1:
            s = iet_stats(tr, n_int)
            print(f"  AIET = {s.aiet:.6g}, MIET = {s.miet} over {n_int} intervals")
        print(f"  first t with V <= eps^2: {entry}; later samples above eps^2: {viol}")
        ball = next((int(t) for t, v in zip(tr.events, tr.event_V) if v <= eps_sq), None)
        print(f"  first event with V(x(t_k)) <= eps^2: {ball}; exits afterwards: {thm['ball_exits']}")
        print(f"  final V = {tr.V[-1]:.6g}")
        print(f"  predictor bound violations: {l1}")
        if kind in ("clf", "zoh"):
            print(f"  post-event bound violations: {l2}; intervals < M: {thm['short_intervals']}; "
                  f"decrease-rate violations: {thm['rate_violations']}")
            bad = l1 or l2 or thm["short_intervals"] or thm["ball_exits"] or thm["rate_violations"]
            if certified and bad:
                print("  CERTIFIED INVARIANT VIOLATED")
                status = EXIT_VIOLATION
        elif l1 and certified:
            status = EXIT_VIOLATION
    return status


def batch(cfg: ExperimentConfig, out_dir: Path, controllers, seed, threads) -> int:
    if cfg.sampling is None:
        raise ConfigError("run.sampling", "missing required block for batch")
    if cfg.sampling.count == 0:
        raise ConfigError("run.sampling.count", "empty sample")
    res = batch_experiment(cfg, seed=seed, controllers=controllers, threads=threads)
    summary = write_summary_csv(res, out_dir / "summary.csv")
    write_conditions_csv(res, out_dir / "conditions.csv")
    print(f"{'controller':<16}{'N':>4}{'p':>4}{'avg AIET':>14}{'min MIET':>10}")
    for r in res.summary:
        print(f"{LABELS[r.controller]:<16}{r.N:>4}{r.p:>4}{r.avg_aiet:>14.4f}{r.min_miet:>10d}")
    if len({(r.N, r.p) for r in res.summary}) > 1 and "clf" in controllers:
        print()
        print(sweep_grid(res.summary))
    print(f"\nsummary -> {summary}")
    return EXIT_OK


def feasibility(cfg: ExperimentConfig) -> int:
    rep = _print_certification(cfg)
    return EXIT_OK if rep.ok else EXIT_VIOLATION


def reproduce_example1(args) -> int:
    raw = yaml.safe_load(example1_config_text())
    out = Path(args.out_dir or os.environ.get("ETPC_OUT_DIR") or raw.get("output_dir", "out"))
    if args.count is not None:
        raw["run"]["sampling"]["count"] = args.count
    cfg = parse_config(raw)
    print("== trajectories (p=3, N=25, x0=[2,5,6])")
    status = simulate(cfg, out / "example1", cfg.controllers)
    print("\n== controller comparison (N=30, p=3)")
    t1 = parse_config({**raw, "horizon": {"N": 30, "M": 2}})
    status |= batch(t1, out / "comparison", t1.controllers, args.seed, _threads(args))
    if args.sweep:
        print("\n== horizon and degree sweep (CLF, N in {10,20,30}, p in {2,3,4})")
        t2 = parse_config({**raw, "controllers": ["clf"], "sweep": {"N": [10, 20, 30], "p": [2, 3, 4]}})
        status |= batch(t2, out / "sweep", ("clf",), args.seed, _threads(args))
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="etpc", description="Event-triggered parameterized control simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="YAML experiment config")
        p.add_argument("--out-dir", help="output directory (env ETPC_OUT_DIR)")
        p.add_argument("--seed", type=int, help="override run.sampling.seed")
        p.add_argument("--threads", type=int, help="worker processes (env ETPC_THREADS)")
        p.add_argument("--controllers", help="comma-separated subset of clf,emulation,zoh")

    common(sub.add_parser("simulate", help="single trajectory from run.x0, trace CSV per controller"))
    common(sub.add_parser("batch", help="sampled initial states, AIET/MIET summary CSV"))
    common(sub.add_parser("feasibility", help="certificate and trigger-parameter audit"))
    rp = sub.add_parser("reproduce-example1", help="bundled example: trajectories, controller comparison, optional N x p sweep")
    common(rp, config_required=False)
    rp.add_argument("--sweep", action="store_true", help="also run the N x p sweep")
    rp.add_argument("--count", type=int, help="number of sampled initial states")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "reproduce-example1":
            return reproduce_example1(args)
        cfg = _load(args)
        controllers = _controllers(args.controllers, cfg)
        if args.command == "simulate":
            return simulate(cfg, _out_dir(args, cfg), controllers)
        if args.command == "batch":
            return batch(cfg, _out_dir(args, cfg), controllers, args.seed, _threads(args))
        if args.command == "feasibility":
            return feasibility(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
