"""Disturbed discrete-time LTI plant ``x(t+1) = A x(t) + B u(t) + d(t)``."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg_core import as_matrix


class PlantError(ValueError):
    pass


@dataclass(frozen=True)
class DisturbanceSource:
    """Bounded disturbance ``d(t)`` as a pure function of the time index.

    kinds:
      ``zero``         d(t) = 0
      ``sinusoid``     d_i(t) = amplitude_i * sin(frequency_i * t)  (radians)
      ``uniform-ball`` uniform sample from the ball of radius ``bound``,
                       drawn from PCG64 seeded by ``(seed, t)``
    """

    kind: str = "zero"
    dim: int = 1
    amplitude: tuple = ()
    frequency: tuple = ()
    bound: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("zero", "sinusoid", "uniform-ball"):
            raise PlantError(f"unknown disturbance kind {self.kind!r}")
        if self.kind == "sinusoid":
            if len(self.amplitude) != len(self.frequency):
                raise PlantError("sinusoid amplitude and frequency lengths differ")
            object.__setattr__(self, "dim", len(self.amplitude))
        if self.bound < 0:
            raise PlantError("disturbance bound must be >= 0")

    def norm_bound(self) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "sinusoid":
            return float(np.linalg.norm(self.amplitude))
        return float(self.bound)

    def at(self, t: int) -> np.ndarray:
        return disturbance_at(self, t)


def sinusoid(amplitude, frequency) -> DisturbanceSource:
    return DisturbanceSource(
        kind="sinusoid",
        amplitude=tuple(float(a) for a in amplitude),
        frequency=tuple(float(w) for w in frequency),
    )


def uniform_ball(dim: int, bound: float, seed: int = 0) -> DisturbanceSource:
    return DisturbanceSource(kind="uniform-ball", dim=dim, bound=float(bound), seed=int(seed))


def zero_disturbance(dim: int) -> DisturbanceSource:
    return DisturbanceSource(kind="zero", dim=dim)


def disturbance_at(source: DisturbanceSource, t: int) -> np.ndarray:
    if t < 0:
        raise PlantError("time index must be >= 0")
    if source.kind == "zero":
        return np.zeros(source.dim)
    if source.kind == "sinusoid":
        return np.asarray(source.amplitude) * np.sin(np.asarray(source.frequency) * t)
    if source.bound == 0.0:
        return np.zeros(source.dim)
    rng = np.random.default_rng([source.seed, t])
    v = rng.standard_normal(source.dim)
    nv = np.linalg.norm(v)
    radius = source.bound * rng.random() ** (1.0 / source.dim)
    d = v * (radius / nv) if nv > 0 else np.zeros(source.dim)
    # guard against rounding pushing the norm past the bound
    nd = np.linalg.norm(d)
    if nd > source.bound:
        d *= source.bound / nd
    return d


@dataclass(frozen=True)
class SystemModel:
    A: np.ndarray
    B: np.ndarray
    D: float = 0.0
    disturbance: DisturbanceSource = field(default=None)

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        if A.shape[0] != A.shape[1]:
            raise PlantError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise PlantError(f"B must have {A.shape[0]} rows, got {B.shape[0]}")
        if self.D < 0:
            raise PlantError("disturbance bound D must be >= 0")
        dist = self.disturbance if self.disturbance is not None else zero_disturbance(A.shape[0])
        if dist.dim != A.shape[0]:
            raise PlantError(f"disturbance dimension {dist.dim} != state dimension {A.shape[0]}")
        if dist.norm_bound() > self.D * (1 + 1e-12):
            raise PlantError(
                f"disturbance source can reach norm {dist.norm_bound():.6g} > D={self.D:.6g}"
            )
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "D", float(self.D))
        object.__setattr__(self, "disturbance", dist)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


def step(model: SystemModel, x, u, t: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if x.shape != (model.n,):
        raise PlantError(f"state must have shape ({model.n},), got {x.shape}")
    if u.shape != (model.m,):
        raise PlantError(f"input must have shape ({model.m},), got {u.shape}")
    return model.A @ x + model.B @ u + disturbance_at(model.disturbance, t)


def example1_model() -> SystemModel:
    """Third-order unstable plant with a sinusoidal disturbance of norm <= 0.01."""
    A = np.array([[0.7, -0.1, -0.1], [0.0, 0.8, -0.4], [0.0, 0.0, 1.2]])
    B = np.array([[0.0], [0.0], [1.0]])
    amp = 0.01 / np.sqrt(3.0)
    return SystemModel(A, B, D=0.01, disturbance=sinusoid([amp] * 3, [50.0, 20.0, 10.0]))
