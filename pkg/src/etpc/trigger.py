"""Event-triggering rule based on a worst-case one-step Lyapunov predictor."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg_core import mat_pow, spectral_norm, sym_eig_extremes
from .plant import SystemModel


class TriggerError(ValueError):
    pass


@dataclass(frozen=True)
class TriggerConfig:
    alpha: float
    beta: float
    sigma: float
    M: int
    P: np.ndarray = field(repr=False)
    D: float
    sigma_bar: float = math.nan
    lam_max: float = field(default=math.nan, repr=False)

    def __post_init__(self):
        if not 0.0 < self.alpha < self.beta < 1.0:
            raise TriggerError("need 0 < alpha < beta < 1")
        if self.sigma <= 0:
            raise TriggerError("sigma must be > 0")
        if self.M < 1:
            raise TriggerError("M must be >= 1")
        P = np.asarray(self.P, dtype=float)
        object.__setattr__(self, "P", P)
        if math.isnan(self.lam_max):
            object.__setattr__(self, "lam_max", sym_eig_extremes(P).lambda_max)

    @property
    def epsilon(self) -> float:
        return self.D / self.sigma

    @property
    def eps_sq(self) -> float:
        return self.epsilon**2

    @property
    def certified(self) -> bool:
        """Whether sigma <= sigma_bar, i.e. the inter-event guarantee applies."""
        return not math.isnan(self.sigma_bar) and self.sigma <= self.sigma_bar


def make_trigger_config(model: SystemModel, P, alpha, beta, sigma, M) -> TriggerConfig:
    sb = sigma_bar(model, P, alpha, beta, M)
    return TriggerConfig(alpha, beta, sigma, M, P, model.D, sigma_bar=sb)


def predictor(x, u, model: SystemModel, P, lam_max: float | None = None) -> float:
    """Upper bound on V(x(t+1)) over all disturbances with norm <= D."""
    y = model.A @ x + model.B @ np.atleast_1d(u)
    if lam_max is None:
        lam_max = sym_eig_extremes(P).lambda_max
    D = model.D
    return float(y @ P @ y) + lam_max * (D * D + 2.0 * D * math.sqrt(float(y @ y)))


def threshold(t: int, t_k: int, V_k: float, cfg: TriggerConfig) -> float:
    if t < t_k:
        raise TriggerError("t must be >= t_k")
    return max(cfg.eps_sq, cfg.beta ** (t - t_k + 1) * V_k)


def should_trigger(x_t, t: int, t_k: int, V_k: float, u_planned, cfg: TriggerConfig, model: SystemModel) -> bool:
    return predictor(x_t, u_planned, model, cfg.P, cfg.lam_max) > threshold(t, t_k, V_k, cfg)


def abar_table(A, M: int) -> np.ndarray:
    """``Abar[tau] = ||sum_{j<tau} A**j||`` for tau = 0..M, Abar[0] = 0."""
    A = np.asarray(A, dtype=float)
    out = np.zeros(M + 1)
    S = np.zeros_like(A)
    for tau in range(1, M + 1):
        S = S + mat_pow(A, tau - 1)
        out[tau] = spectral_norm(S)
    return out


def sigma_bar(model: SystemModel, P, alpha: float, beta: float, M: int) -> float:
    """Largest sigma for which the first M steps after an event cannot trigger."""
    if alpha > beta:
        raise TriggerError("alpha must not exceed beta")
    if alpha == beta:
        return 0.0  # numerator vanishes at every tau
    if M < 1:
        raise TriggerError("M must be >= 1")
    ext = sym_eig_extremes(P)
    normA = spectral_norm(model.A)
    abar = abar_table(model.A, M)
    best = math.inf
    for tau in range(1, M + 1):
        r = alpha**tau / ext.lambda_min
        num = -math.sqrt(r) + math.sqrt(r + (beta**tau - alpha**tau) / ext.lambda_max)
        best = min(best, num / (1.0 + normA * abar[tau - 1]))
    return best
