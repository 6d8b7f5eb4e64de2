"""Closed-loop rollout, inter-event statistics and boundedness checks."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .plant import SystemModel, disturbance_at
from .trigger import TriggerConfig, predictor

log = logging.getLogger(__name__)

TOL = 1e-9


class SimError(ValueError):
    pass


@dataclass
class SimTrace:
    """Record of one closed-loop run of length T.

    ``states`` and ``V`` have T+1 rows, per-step arrays have T rows.
    ``predictor[t]`` bounds V(x(t+1)) for the input actually applied at t;
    ``check[t]`` is the predictor under the previous plan that the trigger
    compared against ``threshold[t]`` (NaN at t = 0).
    """

    controller: str
    states: np.ndarray
    inputs: np.ndarray
    V: np.ndarray
    events: np.ndarray
    disturbances: np.ndarray
    predictor: np.ndarray
    check: np.ndarray
    threshold: np.ndarray
    event_V: np.ndarray
    eps_sq: float
    certified: bool = True
    solver_status: list = field(default_factory=list)

    @property
    def T(self) -> int:
        return self.inputs.shape[0]

    @property
    def inter_event_times(self) -> np.ndarray:
        return np.diff(self.events)

    def event_flags(self) -> np.ndarray:
        flags = np.zeros(self.T, dtype=int)
        flags[self.events[self.events < self.T]] = 1
        return flags


def run_closed_loop(model: SystemModel, controller, cfg: TriggerConfig, x0, T: int | None = None,
                    E: int | None = None, max_steps: int = 1_000_000, certified: bool | None = None) -> SimTrace:
    """Simulate plant + controller + event trigger.

    Runs exactly T steps, or until E inter-event intervals are complete
    (E+1 events) when T is None.  At every t > t_k the trigger evaluates the
    predictor under the stale plan; on a trigger the new plan is computed
    from x(t) and used from u(t) on.
    """
    if T is None and E is None:
        raise SimError("give a step budget T or an event budget E")
    if T is not None and T < 0:
        raise SimError("T must be >= 0")
    if certified is None:
        certified = cfg.certified
    if not certified:
        log.warning("trigger parameters not certified (sigma > sigma_bar); guarantees do not apply")

    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (model.n,):
        raise SimError(f"x0 must have shape ({model.n},)")
    A, B, P = model.A, model.B, cfg.P
    lam_max, eps_sq, beta = cfg.lam_max, cfg.eps_sq, cfg.beta
    D = model.D

    def vbar(y):
        return float(y @ P @ y) + lam_max * (D * D + 2.0 * D * math.sqrt(float(y @ y)))

    state = controller.on_event(x, 0)
    events = [0]
    event_V = [state.V_k]
    statuses = [getattr(state.solve_report, "status", None)]
    xs, us, ds, preds, checks, thrs = [x.copy()], [], [], [], [], []
    limit = T if T is not None else max_steps
    t = 0
    while t < limit:
        if E is not None and T is None and len(events) >= E + 1:
            break
        if t > state.t_k:
            u_plan = controller.control_input(state, t)
            pv = vbar(A @ x + B @ u_plan)
            thr = max(eps_sq, beta ** (t - state.t_k + 1) * state.V_k)
            checks.append(pv)
            thrs.append(thr)
            if pv > thr:
                state = controller.on_event(x, t)
                events.append(t)
                event_V.append(state.V_k)
                statuses.append(getattr(state.solve_report, "status", None))
                if E is not None and T is None and len(events) >= E + 1:
                    # the interval count is complete; the last event is logged
                    # but no further step is simulated
                    checks.pop()
                    thrs.pop()
                    break
        else:
            checks.append(math.nan)
            thrs.append(math.nan)
        u = controller.control_input(state, t)
        y = A @ x + B @ u
        d = disturbance_at(model.disturbance, t)
        preds.append(vbar(y))
        x = y + d
        xs.append(x)
        us.append(u)
        ds.append(d)
        t += 1
    else:
        if T is None and E is not None and len(events) < E + 1:
            log.warning("step limit %d reached with %d events", max_steps, len(events))

    states = np.array(xs)
    V = np.einsum("ti,ij,tj->t", states, P, states)
    return SimTrace(
        controller=getattr(controller, "kind", ""),
        states=states,
        inputs=np.array(us).reshape(len(us), model.m),
        V=V,
        events=np.array(events, dtype=int),
        disturbances=np.array(ds).reshape(len(ds), model.n),
        predictor=np.array(preds),
        check=np.array(checks),
        threshold=np.array(thrs),
        event_V=np.array(event_V),
        eps_sq=eps_sq,
        certified=certified,
        solver_status=statuses,
    )


@dataclass(frozen=True)
class IetStats:
    aiet: float
    miet: int
    event_count: int


def iet_stats(trace_or_events, E: int) -> IetStats:
    """Mean and minimum of the first E inter-event intervals."""
    events = trace_or_events.events if isinstance(trace_or_events, SimTrace) else np.asarray(trace_or_events)
    if E < 1:
        raise SimError("E must be >= 1")
    if len(events) < E + 1:
        raise SimError(f"need at least {E + 1} events, trace has {len(events)}")
    iet = np.diff(events[: E + 1])
    return IetStats(float(np.mean(iet)), int(np.min(iet)), E)


def guub_report(trace_or_V, epsilon_sq: float, tol: float = TOL):
    """(first t with V <= eps^2, number of later samples with V > eps^2 + tol).

    The entry time is None when the bound is never reached.
    """
    V = trace_or_V.V if isinstance(trace_or_V, SimTrace) else np.asarray(trace_or_V, dtype=float)
    inside = np.nonzero(V <= epsilon_sq)[0]
    if inside.size == 0:
        return None, 0
    first = int(inside[0])
    return first, int(np.sum(V[first:] > epsilon_sq + tol))


def predictor_violations(trace: SimTrace, tol: float = TOL) -> int:
    """Steps where V(x(t+1)) exceeds the predictor of the applied input."""
    return int(np.sum(trace.V[1: trace.T + 1] > trace.predictor + tol))


def post_event_violations(trace: SimTrace, cfg: TriggerConfig, tol: float = TOL) -> int:
    """Count (event, tau) pairs breaking the post-event predictor bounds.

    For an event with V_k >= eps^2 the predictor at t_k + tau must stay below
    beta**tau V_k; inside the ball it must stay below eps^2.
    """
    bad = 0
    ev = trace.events
    for k, t_k in enumerate(ev):
        nxt = ev[k + 1] if k + 1 < len(ev) else trace.T
        V_k = trace.event_V[k]
        for tau in range(1, cfg.M + 1):
            t = t_k + tau - 1
            if t >= nxt or t >= trace.T:
                break
            bound = cfg.beta**tau * V_k if V_k >= cfg.eps_sq else cfg.eps_sq
            if trace.predictor[t] > bound + tol:
                bad += 1
    return bad


def guarantee_report(trace: SimTrace, cfg: TriggerConfig, tol: float = TOL) -> dict:
    """Violation counts for the inter-event, invariance and decrease claims."""
    iet = trace.inter_event_times
    eps_sq = cfg.eps_sq
    V_ev = trace.event_V
    rate = 0
    for k in range(len(V_ev) - 1):
        if V_ev[k] > eps_sq and V_ev[k + 1] > max(cfg.beta**cfg.M * V_ev[k], eps_sq) + tol:
            rate += 1
    invariance = 0
    for k, t_k in enumerate(trace.events):
        if V_ev[k] <= eps_sq:
            invariance = int(np.sum(trace.V[t_k:] > eps_sq + tol))
            break
    return {
        "short_intervals": int(np.sum(iet < cfg.M)),
        "ball_exits": invariance,
        "rate_violations": rate,
        "guub_violations": guub_report(trace, eps_sq, tol)[1],
    }
