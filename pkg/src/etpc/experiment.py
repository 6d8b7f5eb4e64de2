"""Batch experiments over sampled initial conditions and CSV export."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .sim import SimTrace, iet_stats, run_closed_loop

log = logging.getLogger(__name__)

LABELS = {"clf": "ETPC-CLF", "emulation": "ETPC-emulation", "zoh": "ETC-ZOH"}


def fmt(v) -> str:
    """17 significant digits: round-trips every double exactly."""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def sample_sphere(radius: float, count: int, dim: int, seed: int) -> np.ndarray:
    """Points uniformly distributed on the sphere of the given radius."""
    if radius <= 0:
        raise ValueError("radius must be > 0")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((count, dim))
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    return X / norms * radius


# -- traces ----------------------------------------------------------------

def trace_header(n: int, m: int) -> list[str]:
    return (["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{j + 1}" for j in range(m)]
            + ["V", "event", "predictor", "trigger_value", "threshold"] + [f"d{i + 1}" for i in range(n)])


def trace_rows(trace: SimTrace):
    n = trace.states.shape[1]
    m = trace.inputs.shape[1]
    ev = set(int(e) for e in trace.events)
    for t in range(trace.states.shape[0]):
        row = [t] + [fmt(v) for v in trace.states[t]]
        if t < trace.T:
            row += [fmt(v) for v in trace.inputs[t]]
        else:
            row += [""] * m
        row += [fmt(trace.V[t]), int(t in ev)]
        if t < trace.T:
            row += [fmt(trace.predictor[t]), fmt(trace.check[t]), fmt(trace.threshold[t])]
            row += [fmt(v) for v in trace.disturbances[t]]
        else:
            row += ["", "", ""] + [""] * n
        yield row


def write_trace_csv(trace: SimTrace, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_header(trace.states.shape[1], trace.inputs.shape[1]))
        w.writerows(trace_rows(trace))
    return path


def read_trace_csv(path) -> dict:
    """Parse a trace CSV back into arrays (t, V, events, states)."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    xs = sorted((k for k in rows[0] if k.startswith("x")), key=lambda k: int(k[1:]))
    return {
        "t": np.array([int(r["t"]) for r in rows]),
        "V": np.array([float(r["V"]) for r in rows]),
        "events": np.array([int(r["t"]) for r in rows if r["event"] == "1"]),
        "states": np.array([[float(r[k]) for k in xs] for r in rows]),
    }


# -- batch -----------------------------------------------------------------

@dataclass(frozen=True)
class ConditionResult:
    controller: str
    N: int
    p: int
    index: int
    aiet: float
    miet: int
    events: int


@dataclass(frozen=True)
class SummaryRow:
    controller: str
    N: int
    p: int
    avg_aiet: float
    min_miet: int
    conditions: int
    events: int


@dataclass
class BatchResult:
    conditions: list
    summary: list
    initial_states: np.ndarray


def _run_chunk(args):
    cfg, kind, N, p, idx, X, E = args
    cell = cfg.with_horizon(N, p)
    ctrl = cell.controller(kind)
    trig = cell.trigger_config(ctrl.P)
    out = []
    for i, x0 in zip(idx, X):
        tr = run_closed_loop(cell.model(), ctrl, trig, x0, E=E)
        s = iet_stats(tr, E)
        out.append(ConditionResult(kind, N, p, int(i), s.aiet, s.miet, E))
    return out


def batch_experiment(cfg: ExperimentConfig, radius: float | None = None, count: int | None = None,
                     seed: int | None = None, controllers=None, events: int | None = None,
                     cells=None, threads: int = 1) -> BatchResult:
    """Run every (controller, N, p) cell over the same sampled initial states.

    ``cells`` defaults to the config's N x p sweep, or its single (N, p).
    Summary rows hold the mean AIET and the minimum MIET across conditions.
    """
    samp = cfg.sampling
    if radius is None:
        radius = samp.radius if samp else float(np.linalg.norm(cfg.x0))
    count = samp.count if count is None and samp else count
    seed = (samp.seed if samp else 0) if seed is None else seed
    if not count:
        raise ValueError("empty sample")
    E = events or cfg.events or 100
    controllers = tuple(controllers or cfg.controllers)
    if cells is None:
        if cfg.sweep_N or cfg.sweep_p:
            cells = [(N, p) for p in (cfg.sweep_p or (cfg.p,)) for N in (cfg.sweep_N or (cfg.N,))]
        else:
            cells = [(cfg.N, cfg.p)]
    X = sample_sphere(radius, count, cfg.n, seed)

    chunks = max(1, int(threads))
    tasks = []
    for N, p in cells:
        for kind in controllers:
            for part in np.array_split(np.arange(count), min(chunks, count)):
                tasks.append((cfg, kind, N, p, part, X[part], E))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_run_chunk, tasks))
    else:
        parts = [_run_chunk(t) for t in tasks]
    order = {k: i for i, k in enumerate(controllers)}
    results = sorted((r for part in parts for r in part), key=lambda r: (order[r.controller], r.N, r.p, r.index))

    summary = []
    for N, p in cells:
        for kind in controllers:
            rs = [r for r in results if r.controller == kind and r.N == N and r.p == p]
            summary.append(SummaryRow(kind, N, p, float(np.mean([r.aiet for r in rs])),
                                      int(min(r.miet for r in rs)), len(rs), E))
    return BatchResult(results, summary, X)


SUMMARY_HEADER = ["controller", "N", "p", "avg_aiet", "min_miet", "conditions", "events"]
CONDITION_HEADER = ["controller", "N", "p", "condition", "aiet", "miet", "events"]


def write_summary_csv(result: BatchResult, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for r in result.summary:
            w.writerow([r.controller, r.N, r.p, fmt(r.avg_aiet), r.min_miet, r.conditions, r.events])
    return path


def write_conditions_csv(result: BatchResult, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CONDITION_HEADER)
        for r in result.conditions:
            w.writerow([r.controller, r.N, r.p, r.index, fmt(r.aiet), r.miet, r.events])
    return path


def read_summary_csv(path) -> list[SummaryRow]:
    with Path(path).open(newline="") as fh:
        return [SummaryRow(r["controller"], int(r["N"]), int(r["p"]), float(r["avg_aiet"]),
                           int(r["min_miet"]), int(r["conditions"]), int(r["events"]))
                for r in csv.DictReader(fh)]


def sweep_grid(summary, controller: str = "clf") -> str:
    """Text grid with N across and p down, AIET/MIET per cell."""
    rows = [r for r in summary if r.controller == controller]
    Ns = sorted({r.N for r in rows})
    ps = sorted({r.p for r in rows})
    cell = {(r.N, r.p): r for r in rows}
    lines = ["p \\ N " + "".join(f"{N:>20d}" for N in Ns)]
    for p in ps:
        parts = []
        for N in Ns:
            r = cell.get((N, p))
            parts.append(f"{r.avg_aiet:>12.4f} / {r.min_miet:<5d}" if r else " " * 20)
        lines.append(f"{p:<6d}" + "".join(parts))
    return "\n".join(lines)
