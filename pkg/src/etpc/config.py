"""Experiment configuration: YAML loading, validation and object construction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .basis import BasisError, BasisSet, check_independence, monomial_basis, tabulated_basis
from .controllers import CONTROLLER_KINDS, make_controller
from .feasibility import alpha_floor, construct_C, max_feasible_M
from .horizon import compute_horizon
from .linalg_core import is_schur_stable, solve_discrete_lyapunov, spectral_radius
from .plant import DisturbanceSource, SystemModel, sinusoid, uniform_ball, zero_disturbance
from .trigger import TriggerConfig, sigma_bar


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class Sampling:
    radius: float
    count: int
    seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    A: np.ndarray
    B: np.ndarray
    D: float
    disturbance: DisturbanceSource
    basis_kind: str
    p: int
    N: int
    M: int
    alpha: float
    beta: float
    sigma: float
    K: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    x0: np.ndarray | None = None
    steps: int | None = None
    events: int | None = None
    sampling: Sampling | None = None
    controllers: tuple = CONTROLLER_KINDS
    sweep_N: tuple = ()
    sweep_p: tuple = ()
    output_dir: str = "out"
    basis_table: np.ndarray | None = None
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def model(self) -> SystemModel:
        return SystemModel(self.A, self.B, self.D, self.disturbance)

    def basis(self, p: int | None = None) -> BasisSet:
        if self.basis_kind == "table":
            return tabulated_basis(self.basis_table)
        return monomial_basis(self.p if p is None else p)

    def with_horizon(self, N: int, p: int) -> "ExperimentConfig":
        return replace(self, N=N, p=p)

    def lyapunov(self) -> np.ndarray:
        return solve_discrete_lyapunov(self.A + self.B @ self.K, self.Q)

    def trigger_config(self, P=None) -> TriggerConfig:
        P = self.lyapunov() if P is None else P
        sb = sigma_bar(self.model(), P, self.alpha, self.beta, self.M)
        return TriggerConfig(self.alpha, self.beta, self.sigma, self.M, P, self.D, sigma_bar=sb)

    def controller(self, kind: str):
        return make_controller(kind, self.model(), self.basis(), self.N, self.M, self.R, self.alpha,
                               self.K, self.Q)


# -- parsing helpers -------------------------------------------------------

def _get(d: dict, key: str, path: str, default=...):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected a mapping")
    if key not in d:
        if default is ...:
            raise ConfigError(f"{path}.{key}" if path else key, "missing required field")
        return default
    return d[key]


def _matrix(value, path: str, shape=None) -> np.ndarray:
    try:
        arr = np.atleast_2d(np.asarray(value, dtype=float))
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, f"not a numeric matrix ({exc})") from None
    if arr.ndim != 2:
        raise ConfigError(path, "must be a matrix (list of rows)")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(path, "entries must be finite")
    if shape is not None and arr.shape != shape:
        raise ConfigError(path, f"expected shape {shape}, got {arr.shape}")
    return arr


def _vector(value, path: str, length=None) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, f"not a numeric vector ({exc})") from None
    if length is not None and arr.size != length:
        raise ConfigError(path, f"expected {length} entries, got {arr.size}")
    return arr


def _number(value, path: str, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if kind is int:
        if float(value) != int(value):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return int(value)
    v = float(value)
    if not math.isfinite(v):
        raise ConfigError(path, "must be finite")
    return v


def _square_or_scalar(value, path: str, n: int) -> np.ndarray:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value) * np.eye(n)
    return _matrix(value, path, (n, n))


def _disturbance(entry, n: int, D: float, path: str) -> DisturbanceSource:
    if entry is None:
        return zero_disturbance(n)
    kind = _get(entry, "kind", path)
    if kind == "zero":
        return zero_disturbance(n)
    if kind == "sinusoid":
        amp = _vector(_get(entry, "amplitude", path), f"{path}.amplitude", n)
        freq = _vector(_get(entry, "frequency", path), f"{path}.frequency", n)
        return sinusoid(amp, freq)
    if kind == "uniform-ball":
        seed = _number(_get(entry, "seed", path, 0), f"{path}.seed", int)
        return uniform_ball(n, D, seed)
    raise ConfigError(f"{path}.kind", f"unknown disturbance kind {kind!r}")


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a mapping")
    plant = _get(raw, "plant", "")
    A = _matrix(_get(plant, "A", "plant"), "plant.A")
    n = A.shape[0]
    if A.shape != (n, n):
        raise ConfigError("plant.A", f"must be square, got {A.shape}")
    B = _matrix(_get(plant, "B", "plant"), "plant.B")
    if B.shape[0] != n:
        raise ConfigError("plant.B", f"must have {n} rows, got {B.shape[0]}")
    m = B.shape[1]
    D = _number(_get(plant, "D", "plant"), "plant.D")
    if D < 0:
        raise ConfigError("plant.D", "must be >= 0")
    dist = _disturbance(plant.get("disturbance"), n, D, "plant.disturbance")
    if dist.norm_bound() > D * (1 + 1e-12):
        raise ConfigError("plant.disturbance", f"norm bound {dist.norm_bound():.6g} exceeds D={D:.6g}")

    basis = _get(raw, "basis", "")
    kind = _get(basis, "kind", "basis", "monomial")
    table = None
    if kind == "monomial":
        p = _number(_get(basis, "p", "basis"), "basis.p", int)
    elif kind == "table":
        table = _matrix(_get(basis, "table", "basis"), "basis.table")
        p = table.shape[1] - 1
    else:
        raise ConfigError("basis.kind", f"unknown basis kind {kind!r}")
    if p < 0:
        raise ConfigError("basis.p", "must be >= 0")

    horizon = _get(raw, "horizon", "")
    N = _number(_get(horizon, "N", "horizon"), "horizon.N", int)
    M = _number(_get(horizon, "M", "horizon"), "horizon.M", int)
    if N < 1:
        raise ConfigError("horizon.N", "must be >= 1")
    if not 1 <= M <= N:
        raise ConfigError("horizon.M", f"must satisfy 1 <= M <= N={N}")

    trig = _get(raw, "trigger", "")
    alpha = _number(_get(trig, "alpha", "trigger"), "trigger.alpha")
    beta = _number(_get(trig, "beta", "trigger"), "trigger.beta")
    sigma = _number(_get(trig, "sigma", "trigger"), "trigger.sigma")
    if not 0 < alpha < 1:
        raise ConfigError("trigger.alpha", "must lie in (0, 1)")
    if not 0 < beta < 1:
        raise ConfigError("trigger.beta", "must lie in (0, 1)")
    if not alpha < beta:
        raise ConfigError("trigger.beta", "must be strictly greater than alpha")
    if sigma <= 0:
        raise ConfigError("trigger.sigma", "must be > 0")

    cert = _get(raw, "certificate", "")
    K = _matrix(_get(cert, "K", "certificate"), "certificate.K", (m, n))
    Q = _square_or_scalar(_get(cert, "Q", "certificate"), "certificate.Q", n)
    cost = raw.get("cost", {}) or {}
    R = _square_or_scalar(cost.get("R", 1.0), "cost.R", m)

    run = _get(raw, "run", "", {}) or {}
    x0 = run.get("x0")
    x0 = None if x0 is None else _vector(x0, "run.x0", n)
    steps = run.get("steps")
    steps = None if steps is None else _number(steps, "run.steps", int)
    events = run.get("events")
    events = None if events is None else _number(events, "run.events", int)
    sampling = None
    if "sampling" in run and run["sampling"] is not None:
        s = run["sampling"]
        radius = s.get("radius") if isinstance(s, dict) else None
        radius = float(np.linalg.norm(x0)) if radius is None and x0 is not None else radius
        if radius is None:
            raise ConfigError("run.sampling.radius", "missing required field (no x0 to default from)")
        radius = _number(radius, "run.sampling.radius")
        if radius <= 0:
            raise ConfigError("run.sampling.radius", "must be > 0")
        count = _number(_get(s, "count", "run.sampling"), "run.sampling.count", int)
        if count < 0:
            raise ConfigError("run.sampling.count", "must be >= 0")
        seed = _number(s.get("seed", 0), "run.sampling.seed", int)
        sampling = Sampling(radius, count, seed)

    ctrls = raw.get("controllers", list(CONTROLLER_KINDS))
    if isinstance(ctrls, str):
        ctrls = [ctrls]
    for c in ctrls:
        if c not in CONTROLLER_KINDS:
            raise ConfigError("controllers", f"unknown controller {c!r}; expected {CONTROLLER_KINDS}")

    sweep = raw.get("sweep") or {}
    sweep_N = tuple(_number(v, "sweep.N", int) for v in sweep.get("N", []))
    sweep_p = tuple(_number(v, "sweep.p", int) for v in sweep.get("p", []))

    return ExperimentConfig(
        A=A, B=B, D=D, disturbance=dist, basis_kind=kind, p=p, N=N, M=M,
        alpha=alpha, beta=beta, sigma=sigma, K=K, Q=Q, R=R,
        x0=x0, steps=steps, events=events, sampling=sampling,
        controllers=tuple(ctrls), sweep_N=sweep_N, sweep_p=sweep_p,
        output_dir=str(raw.get("output_dir", "out")), basis_table=table, raw=raw,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config ({exc.strerror})") from None
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"invalid YAML ({exc})") from None
    return parse_config(raw)


def example1_config_text() -> str:
    return resources.files("etpc").joinpath("data/example1.yaml").read_text()


def example1_config() -> ExperimentConfig:
    return parse_config(yaml.safe_load(example1_config_text()))


# -- certification ---------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    detail: str
    fatal: bool = True


@dataclass
class CertificationReport:
    checks: list
    P: np.ndarray | None = None
    alpha_floor: float = math.nan
    sigma_bar: float = math.nan
    max_feasible_M: int = 0
    max_feasible_M_zoh: int | None = None
    epsilon: float = math.nan

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks if c.fatal)

    def lines(self) -> list[str]:
        out = []
        if self.P is not None:
            out.append("P =")
            out.extend("  " + " ".join(f"{v: .10g}" for v in row) for row in self.P)
        out.append(f"alpha floor       = {self.alpha_floor:.10g}")
        out.append(f"sigma_bar         = {self.sigma_bar:.10g}")
        out.append(f"max feasible M    = {self.max_feasible_M}")
        if self.max_feasible_M_zoh is not None:
            out.append(f"max feasible M (constant basis) = {self.max_feasible_M_zoh}")
        out.append(f"epsilon           = {self.epsilon:.10g}  (epsilon^2 = {self.epsilon ** 2:.10g})")
        for c in self.checks:
            tag = "PASS" if c.passed else ("FAIL" if c.fatal else "WARN")
            out.append(f"[{tag}] {c.name}: {c.detail}")
        return out


def certify(cfg: ExperimentConfig) -> CertificationReport:
    """Check every precondition of the inter-event and boundedness guarantees."""
    checks = []
    Acl = cfg.A + cfg.B @ cfg.K
    stable = is_schur_stable(Acl)
    checks.append(Check("A+BK Schur stable", stable, f"spectral radius {spectral_radius(Acl):.6g}"))
    checks.append(Check("0 < alpha < beta < 1", 0 < cfg.alpha < cfg.beta < 1,
                        f"alpha={cfg.alpha}, beta={cfg.beta}"))
    basis = cfg.basis()
    indep = check_independence(basis, cfg.N)
    checks.append(Check("basis independent on [0, N]", indep, f"p={cfg.p}, N={cfg.N}"))
    rep = CertificationReport(checks, epsilon=cfg.D / cfg.sigma)
    if cfg.D == 0:
        checks.append(Check("disturbance bound", True,
                            "D = 0: epsilon = 0, only the beta branch of the threshold is active; "
                            "ultimate boundedness reduces to convergence of V toward 0", fatal=False))
    if not stable:
        checks.append(Check("Lyapunov equation", False, "not Schur stable: cannot solve for P"))
        return rep
    P = solve_discrete_lyapunov(Acl, cfg.Q)
    rep.P = P
    rep.alpha_floor = alpha_floor(P, cfg.Q)
    checks.append(Check("alpha >= alpha floor", cfg.alpha >= rep.alpha_floor,
                        f"alpha={cfg.alpha} vs floor {rep.alpha_floor:.10g}"
                        + ("" if cfg.alpha >= rep.alpha_floor else
                           " (the M=1 feasibility guarantee for C with P(0)C=K does not apply)"),
                        fatal=False))
    if 0 < cfg.alpha <= cfg.beta < 1:
        rep.sigma_bar = sigma_bar(cfg.model(), P, cfg.alpha, cfg.beta, cfg.M)
    checks.append(Check("sigma <= sigma_bar", cfg.sigma <= rep.sigma_bar,
                        f"sigma={cfg.sigma} vs sigma_bar {rep.sigma_bar:.10g}"))
    if indep:
        try:
            h = compute_horizon(cfg.model(), basis, cfg.N)
            C = construct_C(cfg.K, basis)
            rep.max_feasible_M = max_feasible_M(C, h, P, cfg.alpha, cfg.N)
            checks.append(Check("M <= max feasible M", cfg.M <= rep.max_feasible_M,
                                f"M={cfg.M}, certificate holds for M in [1, {rep.max_feasible_M}]"))
        except BasisError as exc:
            checks.append(Check("certificate construction", False, str(exc)))
    if "zoh" in cfg.controllers:
        b0 = monomial_basis(0)
        h0 = compute_horizon(cfg.model(), b0, cfg.N)
        rep.max_feasible_M_zoh = max_feasible_M(construct_C(cfg.K, b0), h0, P, cfg.alpha, cfg.N)
        checks.append(Check("M <= max feasible M (constant basis)", cfg.M <= rep.max_feasible_M_zoh,
                            f"M={cfg.M}, certificate holds for M in [1, {rep.max_feasible_M_zoh}]"))
    return rep
