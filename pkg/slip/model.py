"""
Spring-mass (inverted elastic pendulum) stance model.
Domain types, nondimensionalization, governing right-hand sides and the
conserved quantities used as correctness oracles.

State vectors handed to the integrator are plain tuples ordered
(theta, theta_rate, L, L_rate); the State dataclass is the validated form
used at API boundaries.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from slip.errors import DomainError, SingularityError

# Leg length below which the model is considered collapsed.
L_MIN = 1e-6

# Indices into integrator state tuples.
THETA, LENGTH = 0, 2
POLAR_COLUMNS = ("theta", "theta_rate", "L", "L_rate")

Vector = Tuple[float, ...]
RightHandSide = Callable[[float, Sequence[float]], Vector]


def _require_finite(name: str, value: float) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise DomainError(f"{name} must be a real number, got {value!r}", field=name)
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value}", field=name, value=value)
    return value


@dataclass(frozen=True)
class DimensionalInputs:
    """
    Physical inputs of the stance model.

    Attributes:
        m: Body mass (kg)
        g: Gravitational acceleration (m/s^2)
        l0: Rest leg length (m)
        k: Spring constant (N/m)
        u: Horizontal touchdown speed (m/s)
        v: Vertical touchdown speed (m/s)
        alpha: Angle of attack from vertical (rad)
    """

    m: float
    g: float
    l0: float
    k: float
    u: float
    v: float
    alpha: float

    def __post_init__(self):
        for name in ("m", "g", "l0", "k", "u", "v", "alpha"):
            _require_finite(name, getattr(self, name))
        for name in ("m", "g", "l0"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)}", field=name)
        if self.k < 0:
            raise DomainError(f"spring constant must be non-negative, got {self.k}", field="k")
        if self.u < 0:
            raise DomainError(f"horizontal speed must be non-negative, got {self.u}", field="u")


@dataclass(frozen=True)
class TouchdownConditions:
    """Nondimensional touchdown data (alpha, U, V) without a stiffness."""

    alpha: float
    U: float
    V: float

    def __post_init__(self):
        for name in ("alpha", "U", "V"):
            object.__setattr__(self, name, _require_finite(name, getattr(self, name)))

    @property
    def theta_d(self) -> float:
        return derived_ic(self.alpha, self.U, self.V)[0]

    @property
    def L_d(self) -> float:
        return derived_ic(self.alpha, self.U, self.V)[1]

    def with_stiffness(self, K: float) -> "ModelParams":
        return ModelParams(alpha=self.alpha, U=self.U, V=self.V, K=K)


@dataclass(frozen=True)
class ModelParams:
    """
    Nondimensional model parameters.

    Only (alpha, U, V, K) are stored; theta_d, L_d and eps are recomputed on
    access so the two representations can never drift apart.
    """

    alpha: float
    U: float
    V: float
    K: float

    def __post_init__(self):
        for name in ("alpha", "U", "V", "K"):
            object.__setattr__(self, name, _require_finite(name, getattr(self, name)))
        if self.K <= 0:
            raise DomainError(f"stiffness K must be positive, got {self.K}", field="K", value=self.K)

    @property
    def theta_d(self) -> float:
        return derived_ic(self.alpha, self.U, self.V)[0]

    @property
    def L_d(self) -> float:
        return derived_ic(self.alpha, self.U, self.V)[1]

    @property
    def eps(self) -> float:
        return 1.0 / math.sqrt(self.K)

    @property
    def touchdown(self) -> TouchdownConditions:
        return TouchdownConditions(self.alpha, self.U, self.V)

    def with_K(self, K: float) -> "ModelParams":
        return replace(self, K=K)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "U": self.U, "V": self.V, "K": self.K}


@dataclass(frozen=True)
class State:
    """Instantaneous polar state on whichever time scale is active."""

    theta: float
    theta_rate: float
    L: float
    L_rate: float

    def __post_init__(self):
        for name in POLAR_COLUMNS:
            object.__setattr__(self, name, _require_finite(name, getattr(self, name)))
        if self.L <= 0:
            raise DomainError(f"leg length must be positive, got {self.L}", field="L")

    def as_tuple(self) -> Vector:
        return (self.theta, self.theta_rate, self.L, self.L_rate)

    @classmethod
    def from_sequence(cls, values: Sequence[float]) -> "State":
        theta, theta_rate, length, length_rate = (float(v) for v in values)
        return cls(theta, theta_rate, length, length_rate)


class StateDerivative(NamedTuple):
    theta_rate: float
    theta_acc: float
    L_rate: float
    L_acc: float


class CartesianState(NamedTuple):
    x: float
    x_rate: float
    y: float
    y_rate: float


class TimeScale(Enum):
    """Time variable a trajectory is labelled with."""

    SLOW = "t"
    FAST = "tau"
    STRAINED = "tau_plus"


def time_factor(scale: TimeScale, eps: float, omega: float = 1.0) -> float:
    """Multiplier taking slow time t to the given scale (tau = t/eps, tau+ = omega t/eps)."""
    if scale is TimeScale.SLOW:
        return 1.0
    if eps <= 0:
        raise DomainError("fast time scales need eps > 0", eps=eps)
    if scale is TimeScale.FAST:
        return 1.0 / eps
    return omega / eps


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Time-ordered samples of an ODE solution.

    Attributes:
        times: Strictly increasing sample times on `scale`
        states: Array of shape (len(times), len(columns))
        scale: Time scale the times and rates refer to
        step: Integration step used (in slow-time units)
        params: Parameter snapshot, if the trajectory comes from the model
        columns: Names of the state components
    """

    times: np.ndarray
    states: np.ndarray
    scale: TimeScale = TimeScale.SLOW
    step: Optional[float] = None
    params: Optional[ModelParams] = None
    columns: Tuple[str, ...] = field(default=POLAR_COLUMNS)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=float)
        if states.ndim == 1:
            states = states.reshape(len(times), -1)
        if times.ndim != 1 or len(times) == 0:
            raise DomainError("trajectory needs a non-empty 1-D time array")
        if states.shape != (len(times), len(self.columns)):
            raise DomainError(
                f"states shape {states.shape} does not match {len(times)} times x {len(self.columns)} columns"
            )
        if len(times) > 1 and not np.all(np.diff(times) > 0):
            raise DomainError("trajectory times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    def __len__(self) -> int:
        return len(self.times)

    def column(self, name: str) -> np.ndarray:
        return self.states[:, self.columns.index(name)]

    @property
    def theta(self) -> np.ndarray:
        return self.column("theta")

    @property
    def theta_rate(self) -> np.ndarray:
        return self.column("theta_rate")

    @property
    def L(self) -> np.ndarray:
        return self.column("L")

    @property
    def L_rate(self) -> np.ndarray:
        return self.column("L_rate")

    def state(self, index: int) -> State:
        return State.from_sequence(self.states[index])

    def relabel(self, scale: TimeScale, eps: float, omega: float = 1.0) -> "Trajectory":
        """
        Express the same samples on another time scale.

        Times are multiplied by the scale factor and every *_rate column is
        divided by it, so values stay the same curve.
        """
        factor = time_factor(scale, eps, omega) / time_factor(self.scale, eps, omega)
        states = self.states.copy()
        for i, name in enumerate(self.columns):
            if name.endswith("_rate"):
                states[:, i] /= factor
        return replace(self, times=self.times * factor, states=states, scale=scale)


def nondimensionalize(d: DimensionalInputs) -> ModelParams:
    """
    Convert physical inputs to (alpha, U, V, K).

    K = k l0 / (m g), U = u / sqrt(g l0), V = v / sqrt(g l0).
    """
    speed_scale = math.sqrt(d.g * d.l0)
    return ModelParams(
        alpha=d.alpha,
        U=d.u / speed_scale,
        V=d.v / speed_scale,
        K=d.k * d.l0 / (d.m * d.g),
    )


def derived_ic(alpha: float, U: float, V: float) -> Tuple[float, float]:
    """Touchdown angular and radial rates (theta_d, L_d) from the Froude numbers."""
    alpha = _require_finite("alpha", alpha)
    U = _require_finite("U", U)
    V = _require_finite("V", V)
    ca, sa = math.cos(alpha), math.sin(alpha)
    return U * ca - V * sa, U * sa + V * ca


def initial_state(p: Union[ModelParams, TouchdownConditions]) -> State:
    """Touchdown state: theta = -alpha, theta' = theta_d, L = 1, L' = -L_d."""
    theta_d, L_d = derived_ic(p.alpha, p.U, p.V)
    return State(theta=-p.alpha, theta_rate=theta_d, L=1.0, L_rate=-L_d)


def rhs_polar(s: Union[State, Sequence[float]], K: float, l_min: float = L_MIN) -> StateDerivative:
    """
    Polar equations of motion on the slow scale.

    theta'' = (sin theta - 2 L' theta') / L
    L''     = theta'^2 L + K (1 - L) - cos theta

    Raises:
        SingularityError: if L <= l_min
    """
    values = s.as_tuple() if isinstance(s, State) else tuple(s)
    theta, theta_rate, length, length_rate = values
    if not length > l_min:
        raise SingularityError(f"leg length {length!r} at or below guard {l_min}", state=values)
    return StateDerivative(
        theta_rate,
        (math.sin(theta) - 2.0 * length_rate * theta_rate) / length,
        length_rate,
        theta_rate * theta_rate * length + K * (1.0 - length) - math.cos(theta),
    )


def polar_system(K: float, l_min: float = L_MIN) -> RightHandSide:
    """Right-hand side f(t, y) of the polar system for the integrator."""
    sin, cos = math.sin, math.cos

    def f(t: float, y: Sequence[float]) -> Vector:
        theta, theta_rate, length, length_rate = y
        if not length > l_min:
            raise SingularityError(f"leg length {length!r} at or below guard {l_min}", time=t, state=y)
        return (
            theta_rate,
            (sin(theta) - 2.0 * length_rate * theta_rate) / length,
            length_rate,
            theta_rate * theta_rate * length + K * (1.0 - length) - cos(theta),
        )

    return f


def rhs_cartesian(x: float, x_rate: float, y: float, y_rate: float, K: float) -> CartesianState:
    """
    Cartesian equations of motion (nondimensional).

    x'' = K x (1/rho - 1),  y'' = K y (1/rho - 1) - 1,  rho = sqrt(x^2 + y^2)

    Returns:
        (x', x'', y', y'') packed in a CartesianState
    """
    rho = math.hypot(x, y)
    if rho == 0.0:
        raise SingularityError("mass at the foot contact point", state=(x, x_rate, y, y_rate))
    spring = K * (1.0 / rho - 1.0)
    return CartesianState(x_rate, spring * x, y_rate, spring * y - 1.0)


def polar_to_cartesian(s: Union[State, Sequence[float]]) -> CartesianState:
    """x = L sin theta, y = L cos theta and their rates."""
    theta, theta_rate, length, length_rate = s.as_tuple() if isinstance(s, State) else s
    st, ct = math.sin(theta), math.cos(theta)
    return CartesianState(
        length * st,
        length_rate * st + length * theta_rate * ct,
        length * ct,
        length_rate * ct - length * theta_rate * st,
    )


def cartesian_to_polar(c: Sequence[float]) -> State:
    """Inverse of polar_to_cartesian."""
    x, x_rate, y, y_rate = c
    length = math.hypot(x, y)
    if length == 0.0:
        raise SingularityError("polar angle undefined at the origin", state=tuple(c))
    return State(
        theta=math.atan2(x, y),
        theta_rate=(y * x_rate - x * y_rate) / (length * length),
        L=length,
        L_rate=(x * x_rate + y * y_rate) / length,
    )


def polar_cartesian_convert(values: Sequence[float], direction: str) -> Union[State, CartesianState]:
    """
    Convert a state in either direction.

    Args:
        values: State vector in the source frame
        direction: "to_cartesian" or "to_polar"
    """
    if direction == "to_cartesian":
        return polar_to_cartesian(values)
    if direction == "to_polar":
        return cartesian_to_polar(values)
    raise DomainError(f"unknown conversion direction {direction!r}")


def cartesian_acceleration(s: State, d: StateDerivative) -> Tuple[float, float]:
    """Second derivatives of (x, y) implied by a polar state and its derivative."""
    st, ct = math.sin(s.theta), math.cos(s.theta)
    centripetal = s.L * s.theta_rate ** 2
    tangential = 2.0 * s.L_rate * s.theta_rate + s.L * d.theta_acc
    return (
        (d.L_acc - centripetal) * st + tangential * ct,
        (d.L_acc - centripetal) * ct - tangential * st,
    )


def energy(s: Union[State, Sequence[float]], K: float) -> float:
    """
    First integral of the polar system.

    E = (L'^2 + L^2 theta'^2)/2 + K (1 - L)^2 / 2 + L cos theta
    """
    theta, theta_rate, length, length_rate = s.as_tuple() if isinstance(s, State) else s
    kinetic = 0.5 * (length_rate ** 2 + (length * theta_rate) ** 2)
    return kinetic + 0.5 * K * (1.0 - length) ** 2 + length * math.cos(theta)


def energy_series(traj: Trajectory) -> np.ndarray:
    """Energy at every sample of a slow-scale trajectory."""
    if traj.params is None:
        raise DomainError("energy needs the trajectory's parameter snapshot")
    theta, theta_rate, length, length_rate = traj.states.T
    kinetic = 0.5 * (length_rate ** 2 + (length * theta_rate) ** 2)
    return kinetic + 0.5 * traj.params.K * (1.0 - length) ** 2 + length * np.cos(theta)


def angular_momentum_residual(traj: Trajectory) -> float:
    """
    Largest defect of d/dt(L^2 theta') = L sin theta over interior samples.

    The derivative is taken with the three-point (possibly non-uniform)
    central difference, so on an exact solution the result is O(h^2).
    """
    if traj.scale is not TimeScale.SLOW:
        raise DomainError("angular momentum residual is defined on the slow scale")
    if len(traj) < 3:
        raise DomainError(f"need at least 3 samples, got {len(traj)}")
    t = traj.times
    momentum = traj.L ** 2 * traj.theta_rate
    h1 = t[1:-1] - t[:-2]
    h2 = t[2:] - t[1:-1]
    derivative = (
        -h2 / (h1 * (h1 + h2)) * momentum[:-2]
        + (h2 - h1) / (h1 * h2) * momentum[1:-1]
        + h1 / (h2 * (h1 + h2)) * momentum[2:]
    )
    torque = traj.L[1:-1] * np.sin(traj.theta[1:-1])
    return float(np.max(np.abs(derivative - torque)))
