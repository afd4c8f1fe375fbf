"""
Fixed-step classical Runge-Kutta integration with event location.
The state is a plain tuple of floats; right-hand sides have the signature
f(t, y) -> tuple. Events are located by detecting a sign change across a
step and bisecting with single re-integrated sub-steps.
"""

import math
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from slip.errors import DomainError, EventNotFoundError, SingularityError, StepBudgetError
from slip.model import (
    L_MIN,
    LENGTH,
    POLAR_COLUMNS,
    THETA,
    ModelParams,
    RightHandSide,
    State,
    TimeScale,
    Trajectory,
    Vector,
    initial_state,
    polar_system,
)

DEFAULT_STEP = 1e-3
DEFAULT_MAX_STEPS = 10_000_000
DEFAULT_ROOT_TOL = 1e-12
POINTS_PER_UNIT_FAST_TIME = 50


def default_step(eps: float, cap: float = DEFAULT_STEP) -> float:
    """Slow-scale step resolving the fast oscillation (period ~ 2 pi eps) with >= 100 points."""
    return min(eps / POINTS_PER_UNIT_FAST_TIME, cap)


@dataclass(frozen=True)
class IntegratorConfig:
    """
    Integrator settings.

    Attributes:
        step: Fixed step in units of the integrated time variable
        max_steps: Step budget per call
        l_min: Leg-length guard below which integration halts
    """

    step: float = DEFAULT_STEP
    max_steps: int = DEFAULT_MAX_STEPS
    l_min: float = L_MIN

    def __post_init__(self):
        if not (math.isfinite(self.step) and self.step > 0):
            raise DomainError(f"integrator step must be positive, got {self.step}", field="step")
        if int(self.max_steps) != self.max_steps or self.max_steps < 1:
            raise DomainError(f"max_steps must be a positive integer, got {self.max_steps}", field="max_steps")
        if not 0 < self.l_min < 1:
            raise DomainError(f"l_min must lie in (0, 1), got {self.l_min}", field="l_min")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, config: Optional[Dict[str, Any]] = None) -> "IntegratorConfig":
        return cls(**(config or {}))

    @classmethod
    def for_eps(cls, eps: float, cap: float = DEFAULT_STEP, **overrides: Any) -> "IntegratorConfig":
        return cls(step=default_step(eps, cap), **overrides)


class Direction(Enum):
    RISING = "rising"
    FALLING = "falling"
    ANY = "any"


EventFunction = Callable[[float, Sequence[float]], float]


@dataclass(frozen=True)
class EventSpec:
    """
    Scalar threshold event.

    Attributes:
        function: g(t, y); the event is a sign change of g
        direction: Which sign changes count
        root_tol: Width of the final bracketing interval (time units)
        name: Label recorded in reports
    """

    function: EventFunction
    direction: Direction = Direction.ANY
    root_tol: float = DEFAULT_ROOT_TOL
    name: str = "custom"

    def __post_init__(self):
        if not self.root_tol > 0:
            raise DomainError(f"root tolerance must be positive, got {self.root_tol}", field="root_tol")

    def crossed(self, before: float, after: float) -> bool:
        rising = before < 0.0 <= after
        falling = before > 0.0 >= after
        if self.direction is Direction.RISING:
            return rising
        if self.direction is Direction.FALLING:
            return falling
        return rising or falling

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "direction": self.direction.value, "root_tol": self.root_tol}


def theta_crossing(
    alpha: float,
    direction: Direction = Direction.RISING,
    root_tol: float = DEFAULT_ROOT_TOL
) -> EventSpec:
    """Event theta = alpha (take-off angle)."""
    return EventSpec(lambda t, y: y[THETA] - alpha, direction, root_tol, name=f"theta-alpha (alpha={alpha!r})")


def length_crossing(
    level: float = 1.0,
    direction: Direction = Direction.RISING,
    root_tol: float = DEFAULT_ROOT_TOL
) -> EventSpec:
    """Event L = level (return of the spring to its rest length by default)."""
    return EventSpec(lambda t, y: y[LENGTH] - level, direction, root_tol, name=f"L-{level!r}")


def rk4_step(f: RightHandSide, t: float, y: Sequence[float], h: float) -> Vector:
    """One classical fourth-order Runge-Kutta step."""
    half = 0.5 * h
    k1 = f(t, y)
    k2 = f(t + half, tuple(a + half * b for a, b in zip(y, k1)))
    k3 = f(t + half, tuple(a + half * b for a, b in zip(y, k2)))
    k4 = f(t + h, tuple(a + h * b for a, b in zip(y, k3)))
    sixth = h / 6.0
    return tuple(
        a + sixth * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)
    )


def _step_count(span: float, h: float) -> int:
    # a final step within 1e-9 h of a full step is merged rather than left as a sliver
    return max(1, int(math.ceil(span / h - 1e-9)))


def _as_vector(s0: Union[State, Sequence[float]]) -> Vector:
    return s0.as_tuple() if isinstance(s0, State) else tuple(float(v) for v in s0)


def _advance(f: RightHandSide, t: float, y: Vector, h: float) -> Vector:
    try:
        return rk4_step(f, t, y, h)
    except SingularityError as e:
        raise SingularityError(
            f"integration halted at t={t!r}: {e.message}", time=t, state=y
        ) from e


def integrate(
    rhs: RightHandSide,
    s0: Union[State, Sequence[float]],
    t0: float,
    t1: float,
    cfg: Optional[IntegratorConfig] = None,
    params: Optional[ModelParams] = None,
    columns: Tuple[str, ...] = POLAR_COLUMNS
) -> Trajectory:
    """
    Integrate from t0 to t1 with a fixed step.

    The last step is shortened so the trajectory lands exactly on t1; both
    endpoints are included.

    Args:
        rhs: Right-hand side f(t, y)
        s0: Initial state
        t0: Start time
        t1: End time, must exceed t0
        cfg: Integrator settings (defaults if None)
        params: Parameter snapshot stored on the trajectory
        columns: Names of the state components

    Returns:
        Slow-scale Trajectory

    Raises:
        SingularityError: a stage evaluation hit the leg-length guard
        StepBudgetError: more than cfg.max_steps steps were needed
    """
    cfg = cfg or IntegratorConfig()
    if not t1 > t0:
        raise DomainError(f"integration interval must be increasing, got [{t0}, {t1}]")
    h = cfg.step
    n = _step_count(t1 - t0, h)
    y = _as_vector(s0)
    times: List[float] = [t0]
    states: List[Vector] = [y]
    for k in range(n):
        if k >= cfg.max_steps:
            raise StepBudgetError(
                f"step budget of {cfg.max_steps} exhausted at t={times[-1]!r}", time=times[-1], state=y
            )
        t = times[-1]
        t_next = t1 if k == n - 1 else t0 + (k + 1) * h
        y = _advance(rhs, t, y, t_next - t)
        times.append(t_next)
        states.append(y)
    return Trajectory(np.array(times), np.array(states), TimeScale.SLOW, h, params, columns)


def integrate_grid(
    rhs: RightHandSide,
    s0: Union[State, Sequence[float]],
    grid: Sequence[float],
    cfg: Optional[IntegratorConfig] = None,
    params: Optional[ModelParams] = None,
    columns: Tuple[str, ...] = POLAR_COLUMNS
) -> Trajectory:
    """
    Integrate and report the solution exactly at the given increasing grid.

    Each grid interval is split into the fewest equal sub-steps no longer
    than cfg.step.
    """
    cfg = cfg or IntegratorConfig()
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise DomainError("time grid must be a non-empty 1-D sequence")
    if len(grid) > 1 and not np.all(np.diff(grid) > 0):
        raise DomainError("time grid must be strictly increasing")
    y = _as_vector(s0)
    states: List[Vector] = [y]
    used = 0
    for a, b in zip(grid[:-1], grid[1:]):
        a, b = float(a), float(b)
        n = _step_count(b - a, cfg.step)
        h = (b - a) / n
        for k in range(n):
            if used >= cfg.max_steps:
                raise StepBudgetError(f"step budget of {cfg.max_steps} exhausted", time=a + k * h, state=y)
            y = _advance(rhs, a + k * h, y, h)
            used += 1
        states.append(y)
    return Trajectory(grid, np.array(states), TimeScale.SLOW, cfg.step, params, columns)


def integrate_to_event(
    rhs: RightHandSide,
    s0: Union[State, Sequence[float]],
    t0: float,
    t_max: float,
    event: EventSpec,
    cfg: Optional[IntegratorConfig] = None,
    params: Optional[ModelParams] = None,
    columns: Tuple[str, ...] = POLAR_COLUMNS
) -> Trajectory:
    """
    Integrate until the first qualifying crossing of the event function.

    The returned trajectory ends at the located event. The crossing is
    bracketed within one step, then bisected by re-integrating a single
    sub-step from the start of the bracketing step until the bracket is
    narrower than event.root_tol.

    Raises:
        EventNotFoundError: no qualifying sign change before t_max
        SingularityError: the guard tripped before the crossing
        StepBudgetError: more than cfg.max_steps steps were needed
    """
    cfg = cfg or IntegratorConfig()
    if not t_max > t0:
        raise DomainError(f"event search interval must be increasing, got [{t0}, {t_max}]")
    h = cfg.step
    n = _step_count(t_max - t0, h)
    g = event.function
    y = _as_vector(s0)
    g_prev = g(t0, y)
    times: List[float] = [t0]
    states: List[Vector] = [y]
    for k in range(n):
        if k >= cfg.max_steps:
            raise StepBudgetError(
                f"step budget of {cfg.max_steps} exhausted at t={times[-1]!r}", time=times[-1], state=y
            )
        t = times[-1]
        t_next = t_max if k == n - 1 else t0 + (k + 1) * h
        y_next = _advance(rhs, t, y, t_next - t)
        g_next = g(t_next, y_next)
        if event.crossed(g_prev, g_next):
            offset = _bisect(rhs, event, t, y, g_prev, t_next - t)
            times.append(t + offset)
            states.append(_advance(rhs, t, y, offset))
            return Trajectory(np.array(times), np.array(states), TimeScale.SLOW, h, params, columns)
        times.append(t_next)
        states.append(y_next)
        y, g_prev = y_next, g_next
    raise EventNotFoundError(
        f"no {event.direction.value} crossing of {event.name} in [{t0!r}, {t_max!r}]",
        event=event.to_dict(),
        t_max=t_max,
    )


def _bisect(
    rhs: RightHandSide,
    event: EventSpec,
    t: float,
    y: Vector,
    g_start: float,
    width: float
) -> float:
    """Offset from t of the crossing bracketed by [t, t + width]."""
    lo, hi = 0.0, width
    g_lo = g_start
    while hi - lo > event.root_tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        g_mid = event.function(t + mid, _advance(rhs, t, y, mid))
        if event.crossed(g_lo, g_mid):
            hi = mid
        else:
            lo, g_lo = mid, g_mid
    return hi


def locate_event(
    rhs: RightHandSide,
    s0: Union[State, Sequence[float]],
    t0: float,
    t_max: float,
    event: EventSpec,
    cfg: Optional[IntegratorConfig] = None,
    columns: Tuple[str, ...] = POLAR_COLUMNS
) -> Tuple[float, Union[State, Vector]]:
    """
    Time and state of the first qualifying crossing.

    Returns:
        (t_event, state); the state is a State for polar systems and a
        plain tuple otherwise
    """
    traj = integrate_to_event(rhs, s0, t0, t_max, event, cfg, columns=columns)
    final = traj.states[-1]
    if tuple(columns) == POLAR_COLUMNS:
        return float(traj.times[-1]), State.from_sequence(final)
    return float(traj.times[-1]), tuple(float(v) for v in final)


def simulate(p: ModelParams, t_end: float, cfg: Optional[IntegratorConfig] = None) -> Trajectory:
    """
    Integrate the stance model from touchdown to t_end.

    t_end = 0 yields the single touchdown sample.
    """
    cfg = cfg or IntegratorConfig.for_eps(p.eps)
    s0 = initial_state(p)
    if t_end == 0:
        return Trajectory(np.array([0.0]), np.array([s0.as_tuple()]), TimeScale.SLOW, cfg.step, p)
    if t_end < 0:
        raise DomainError(f"horizon must be non-negative, got {t_end}", field="T")
    return integrate(polar_system(p.K, cfg.l_min), s0, 0.0, t_end, cfg, params=p)
