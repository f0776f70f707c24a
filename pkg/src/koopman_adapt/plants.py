"""Ground-truth continuous-time plants with scheduled parameter changes.

Two kinds: a friction-damped pendulum (the nonlinear benchmark) and a
generic linear second-order system kept as the oracle-friendly test plant.
Integration is fixed-step RK4 under zero-order-hold input; mid-run changes
are timed parameter steps applied between samples.
"""

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, NonFiniteState, UnknownParameter

# Smooth Coulomb friction: tanh(velocity / EPS_COULOMB) in place of sign().
EPS_COULOMB = 1e-3

_PENDULUM_PARAMS = ("m", "l", "g", "d", "c")
_LINEAR_PARAMS = ("A", "B")


@dataclass(frozen=True)
class PlantModel:
    """A plant kind plus its named parameters and sensor/integration setup.

    noise_x is the per-state measurement noise std (used by the
    identification path); noise_y the scalar output noise std (observer
    path). dt is the controller sample time, integrated in `substeps` RK4
    steps.
    """

    kind: str
    params: Mapping
    noise_y: float = 0.0
    noise_x: Sequence[float] | float = 0.0
    dt: float = 1e-3
    substeps: int = 1

    def __post_init__(self):
        if self.kind not in ("pendulum", "linear2nd"):
            raise ValueError(f"unknown plant kind {self.kind!r}")
        if self.dt <= 0 or self.substeps < 1:
            raise ValueError("need dt > 0 and substeps >= 1")
        if self.noise_y < 0:
            raise ValueError("noise_y must be >= 0")
        if self.kind == "pendulum":
            p = self.params
            missing = [k for k in _PENDULUM_PARAMS if k not in p]
            if missing:
                raise ValueError(f"pendulum params missing {missing}")
            if p["m"] <= 0 or p["l"] <= 0 or p["g"] <= 0:
                raise ValueError("m, l, g must be positive")
            if p["d"] < 0 or p["c"] < 0:
                raise ValueError("d and c must be >= 0")
        else:
            A = np.asarray(self.params["A"], dtype=float)
            B = np.asarray(self.params["B"], dtype=float)
            if A.shape[0] != A.shape[1] or B.shape[0] != A.shape[0]:
                raise DimensionMismatch(
                    f"linear2nd needs square A and conformable B, got "
                    f"{A.shape} and {B.shape}")

    @property
    def n(self) -> int:
        return 2 if self.kind == "pendulum" else \
            np.asarray(self.params["A"]).shape[0]

    @property
    def p(self) -> int:
        return 1 if self.kind == "pendulum" else \
            np.asarray(self.params["B"]).shape[1]

    def noise_x_vector(self) -> np.ndarray:
        v = np.asarray(self.noise_x, dtype=float)
        if v.ndim == 0:
            v = np.full(self.n, float(v))
        if v.shape != (self.n,) or (v < 0).any():
            raise ValueError(
                f"noise_x must be a nonnegative scalar or length-{self.n} list")
        return v


@dataclass(frozen=True)
class PlantState:
    x: np.ndarray
    t: float = 0.0


@dataclass(frozen=True)
class ChangeSchedule:
    """Timed parameter steps (time, name, new value), time-sorted."""

    events: tuple = ()

    def __post_init__(self):
        times = [e[0] for e in self.events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("schedule events must be time-sorted")

    def next_event_time(self, t: float) -> float:
        """First event time strictly after t, or inf."""
        for time, _, _ in self.events:
            if time > t:
                return time
        return math.inf


def make_pendulum(m=0.4, l=0.5, g=9.81, d=0.04, c=0.0, **kwargs) -> PlantModel:
    return PlantModel("pendulum", {"m": m, "l": l, "g": g, "d": d, "c": c},
                      **kwargs)


def make_linear2nd(A, B, **kwargs) -> PlantModel:
    return PlantModel("linear2nd",
                      {"A": np.asarray(A, dtype=float),
                       "B": np.asarray(B, dtype=float)}, **kwargs)


def derivative(plant: PlantModel, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Continuous-time dynamics f(x) + B u."""
    if plant.kind == "pendulum":
        p = plant.params
        theta, omega = x
        ml2 = p["m"] * p["l"] * p["l"]
        torque = (u[0] - p["d"] * omega
                  - p["c"] * np.tanh(omega / EPS_COULOMB)
                  - p["m"] * p["g"] * p["l"] * np.sin(theta))
        return np.array([omega, torque / ml2])
    A = np.asarray(plant.params["A"], dtype=float)
    B = np.asarray(plant.params["B"], dtype=float)
    return A @ x + B @ u


def step_plant(plant: PlantModel, state: PlantState, u) -> PlantState:
    """Advance one sample time under zero-order-hold input via RK4."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (plant.p,):
        raise DimensionMismatch(
            f"expected input of shape ({plant.p},), got {u.shape}")
    x = np.asarray(state.x, dtype=float)
    h = plant.dt / plant.substeps
    # blow-up surfaces as NonFiniteState below, not as overflow warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(plant.substeps):
            k1 = derivative(plant, x, u)
            k2 = derivative(plant, x + 0.5 * h * k1, u)
            k3 = derivative(plant, x + 0.5 * h * k2, u)
            k4 = derivative(plant, x + h * k3, u)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.isfinite(x).all():
        raise NonFiniteState(
            f"plant state became non-finite at t={state.t + plant.dt:.6g}")
    return PlantState(x, state.t + plant.dt)


def apply_schedule(plant: PlantModel, schedule: ChangeSchedule,
                   t: float) -> PlantModel:
    """Plant with all events of time <= t applied, in order (idempotent)."""
    allowed = _PENDULUM_PARAMS if plant.kind == "pendulum" else _LINEAR_PARAMS
    params = dict(plant.params)
    changed = False
    for time, name, value in schedule.events:
        if time > t:
            break
        if name not in allowed:
            raise UnknownParameter(
                f"plant kind {plant.kind!r} has no parameter {name!r}")
        params[name] = value
        changed = True
    return replace(plant, params=params) if changed else plant


def measure(plant: PlantModel, state: PlantState, rng: np.random.Generator,
            output_coord: int = 0):
    """Noisy sensors: full-state measurement for the identification path
    and the scalar output for the observer path."""
    if not 0 <= output_coord < plant.n:
        raise ValueError(f"output_coord {output_coord} out of range")
    x = np.asarray(state.x, dtype=float)
    x_meas = x + plant.noise_x_vector() * rng.standard_normal(plant.n)
    y_meas = float(x[output_coord]) + plant.noise_y * rng.standard_normal()
    return x_meas, y_meas
