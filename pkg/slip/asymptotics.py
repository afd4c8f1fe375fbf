"""
Poincare-Lindstedt approximations of the stance phase.
Strained frequency, fast-scale closed forms for L and theta, the slow-scale
leading-order pendulum and advisory consistency checks on the parameters.
"""

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from slip.errors import DomainError
from slip.integrator import IntegratorConfig, integrate_grid
from slip.model import ModelParams, TimeScale, TouchdownConditions, Trajectory

ArrayLike = Union[float, Sequence[float], np.ndarray]

SLOW_COLUMNS = ("theta", "theta_rate")
SLOW_METHODS = ("numerical", "small_angle")
DEFAULT_SLOW_STEP = 1e-4
DEFAULT_MARGIN = 10.0

# Parameter box of typical human running.
TYPICAL_RANGES: Dict[str, Tuple[float, float]] = {
    "alpha": (0.2, 0.8),
    "U": (0.8, 2.6),
    "V": (0.05, 0.5),
}


@dataclass(frozen=True)
class StrainedFrequency:
    """
    Frequency correction removing secular terms.

    omega = 1 + eps * omega1 + eps**2 * omega2 with omega1 = 0 and
    omega2 = -theta_d**2 / 2.
    """

    omega: float
    eps: float
    omega1: float
    omega2: float

    def __post_init__(self):
        if not 0 < self.omega <= 1:
            raise DomainError(f"strained frequency must lie in (0, 1], got {self.omega}", omega=self.omega)

    def tau_plus(self, t: ArrayLike) -> ArrayLike:
        """Strained fast time omega t / eps."""
        if self.eps <= 0:
            raise DomainError("strained time needs eps > 0", eps=self.eps)
        return self.omega * np.asarray(t, dtype=float) / self.eps

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def omega_tilde(eps: float, theta_d: float) -> StrainedFrequency:
    if not eps >= 0:
        raise DomainError(f"eps must be non-negative, got {eps}", eps=eps)
    omega2 = -0.5 * theta_d ** 2
    omega = 1.0 + eps ** 2 * omega2
    if omega <= 0:
        raise DomainError(
            f"strained frequency {omega} is not positive (eps={eps}, theta_d={theta_d})",
            eps=eps,
            theta_d=theta_d,
        )
    return StrainedFrequency(omega=omega, eps=eps, omega1=0.0, omega2=omega2)


def _check_order(order: int) -> None:
    if order not in (0, 1, 2):
        raise DomainError(f"approximation order must be 0, 1 or 2, got {order}", order=order)


def _result(values: np.ndarray, scalar: bool) -> ArrayLike:
    return float(values) if scalar else values


def l_tilde(tau_plus: ArrayLike, p: ModelParams, order: int = 2) -> ArrayLike:
    """
    Fast-scale leg length approximation.

    L = 1 - eps L_d sin(tau+) - eps^2 (cos alpha - theta_d^2)(1 - cos tau+)

    Args:
        tau_plus: Strained fast time (scalar or array)
        p: Model parameters
        order: Number of eps corrections kept (0, 1 or 2)

    Returns:
        Approximation with the shape of tau_plus
    """
    _check_order(order)
    scalar = np.ndim(tau_plus) == 0
    tau = np.asarray(tau_plus, dtype=float)
    eps = p.eps
    values = np.ones_like(tau)
    if order >= 1:
        values = values - eps * p.L_d * np.sin(tau)
    if order >= 2:
        values = values - eps ** 2 * (math.cos(p.alpha) - p.theta_d ** 2) * (1.0 - np.cos(tau))
    return _result(values, scalar)


def theta_tilde(tau_plus: ArrayLike, p: ModelParams, order: int = 2) -> ArrayLike:
    """
    Fast-scale leg angle approximation.

    theta = -alpha + eps theta_d tau+ - eps^2 sin(alpha) tau+^2 / 2
            + 2 eps^2 L_d theta_d (1 - cos tau+)
    """
    _check_order(order)
    scalar = np.ndim(tau_plus) == 0
    tau = np.asarray(tau_plus, dtype=float)
    eps = p.eps
    values = np.full_like(tau, -p.alpha)
    if order >= 1:
        values = values + eps * p.theta_d * tau
    if order >= 2:
        values = values + eps ** 2 * (
            -0.5 * math.sin(p.alpha) * tau ** 2 + 2.0 * p.L_d * p.theta_d * (1.0 - np.cos(tau))
        )
    return _result(values, scalar)


def theta_tilde_nonperiodic(tau_plus: ArrayLike, p: ModelParams) -> ArrayLike:
    """Polynomial part of theta_tilde; the remainder is 2 pi-periodic in tau+."""
    scalar = np.ndim(tau_plus) == 0
    tau = np.asarray(tau_plus, dtype=float)
    values = -p.alpha + p.eps * p.theta_d * tau - 0.5 * p.eps ** 2 * math.sin(p.alpha) * tau ** 2
    return _result(values, scalar)


@dataclass(frozen=True)
class FastApproximation:
    """Fast-scale approximation bound to one parameter set."""

    params: ModelParams
    frequency: StrainedFrequency
    order: int = 2

    def L(self, tau_plus: ArrayLike) -> ArrayLike:
        return l_tilde(tau_plus, self.params, self.order)

    def theta(self, tau_plus: ArrayLike) -> ArrayLike:
        return theta_tilde(tau_plus, self.params, self.order)

    def tau_plus(self, t: ArrayLike) -> ArrayLike:
        return self.frequency.tau_plus(t)

    def on_trajectory(self, traj: Trajectory) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(tau+, L approximation, theta approximation) at the sample times of traj."""
        if traj.scale is TimeScale.STRAINED:
            tau = traj.times
        elif traj.scale is TimeScale.SLOW:
            tau = self.tau_plus(traj.times)
        else:
            raise DomainError("fast-scale comparison needs slow or strained times", scale=traj.scale.value)
        return tau, np.asarray(self.L(tau)), np.asarray(self.theta(tau))


def fast_approximation(p: ModelParams, order: int = 2) -> FastApproximation:
    _check_order(order)
    return FastApproximation(p, omega_tilde(p.eps, p.theta_d), order)


def _pendulum(t: float, y: Sequence[float]) -> Tuple[float, float]:
    return y[1], math.sin(y[0])


def theta0_slow(
    t_grid: Sequence[float],
    p: Union[ModelParams, TouchdownConditions],
    method: str = "numerical",
    cfg: Optional[IntegratorConfig] = None
) -> Trajectory:
    """
    Leading-order slow-scale angle: theta'' = sin(theta), theta(0) = -alpha, theta'(0) = theta_d.

    Args:
        t_grid: Increasing non-negative slow times
        p: Parameters (K is not used)
        method: "numerical" (RK4) or "small_angle" (-alpha cosh t + theta_d sinh t)
        cfg: Integrator settings for the numerical method

    Returns:
        Trajectory with columns (theta, theta_rate) on exactly t_grid
    """
    if method not in SLOW_METHODS:
        raise DomainError(f"unknown slow-scale method {method!r}; expected one of {SLOW_METHODS}")
    grid = np.asarray(t_grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise DomainError("time grid must be a non-empty 1-D sequence")
    if grid[0] < 0:
        raise DomainError(f"time grid must start at t >= 0, got {grid[0]}")
    params = p if isinstance(p, ModelParams) else None
    if method == "small_angle":
        theta = -p.alpha * np.cosh(grid) + p.theta_d * np.sinh(grid)
        rate = -p.alpha * np.sinh(grid) + p.theta_d * np.cosh(grid)
        return Trajectory(grid, np.column_stack([theta, rate]), TimeScale.SLOW, None, params, SLOW_COLUMNS)

    cfg = cfg or IntegratorConfig(step=DEFAULT_SLOW_STEP)
    y0 = (-p.alpha, p.theta_d)
    if grid[0] > 0:
        traj = integrate_grid(_pendulum, y0, np.concatenate([[0.0], grid]), cfg, params, SLOW_COLUMNS)
        return Trajectory(grid, traj.states[1:], TimeScale.SLOW, cfg.step, params, SLOW_COLUMNS)
    return integrate_grid(_pendulum, y0, grid, cfg, params, SLOW_COLUMNS)


def theta0_energy(traj: Trajectory) -> np.ndarray:
    """First integral theta'^2/2 + cos(theta) along a slow-scale pendulum trajectory."""
    return 0.5 * traj.theta_rate ** 2 + np.cos(traj.theta)


@dataclass(frozen=True)
class Inequality:
    """One "small << large" condition evaluated as large/small >= margin."""

    name: str
    small: float
    large: float
    ratio: float
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class ConsistencyReport:
    """
    Advisory validity report for the asymptotic regime.

    Attributes:
        margin: Ratio required for "<<"
        conditions: Stiffness and speed conditions
        v_window: Lower and upper bound on V for the small-angle regime
        in_typical_range: Whether (alpha, U, V) lie in TYPICAL_RANGES
    """

    margin: float
    conditions: List[Inequality] = field(default_factory=list)
    v_window: List[Inequality] = field(default_factory=list)
    in_typical_range: bool = True

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    @property
    def v_window_passed(self) -> bool:
        return all(c.passed for c in self.v_window)

    def failures(self) -> List[str]:
        return [c.name for c in self.conditions + self.v_window if not c.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "margin": self.margin,
            "passed": self.passed,
            "v_window_passed": self.v_window_passed,
            "in_typical_range": self.in_typical_range,
            "conditions": [c.to_dict() for c in self.conditions],
            "v_window": [c.to_dict() for c in self.v_window],
        }


def _inequality(name: str, small: float, large: float, margin: float) -> Inequality:
    # both sides are magnitudes; a negative left side counts as a failure
    if small > 0:
        ratio = large / small
    elif small == 0 and large > 0:
        ratio = math.inf
    else:
        ratio = 0.0
    return Inequality(name, small, large, ratio, ratio >= margin)


def in_typical_range(alpha: float, U: float, V: float) -> bool:
    values = {"alpha": alpha, "U": U, "V": V}
    return all(lo <= values[name] <= hi for name, (lo, hi) in TYPICAL_RANGES.items())


def consistency_check(p: ModelParams, margin: float = DEFAULT_MARGIN) -> ConsistencyReport:
    """
    Evaluate the conditions under which the fast-scale expansion is meaningful.

    Checks theta_d^2/sqrt(K) << L_d << sqrt(K), U << sqrt(K) and K >> 1,
    plus the V-window 2 U alpha / pi << V << pi U / (2 alpha). Advisory only.
    """
    if not margin > 1:
        raise DomainError(f"margin must exceed 1, got {margin}", margin=margin)
    root_k = math.sqrt(p.K)
    theta_d, L_d = p.theta_d, p.L_d
    conditions = [
        _inequality("theta_d^2/sqrt(K) << L_d", theta_d ** 2 / root_k, L_d, margin),
        _inequality("L_d << sqrt(K)", L_d, root_k, margin),
        _inequality("U << sqrt(K)", p.U, root_k, margin),
        _inequality("1 << K", 1.0, p.K, margin),
    ]
    if p.alpha > 0:
        lower = 2.0 * p.U * p.alpha / math.pi
        upper = math.pi * p.U / (2.0 * p.alpha)
    else:
        lower, upper = 0.0, math.inf
    v_window = [
        _inequality("2 U alpha/pi << V", lower, p.V, margin),
        _inequality("V << pi U/(2 alpha)", p.V, upper, margin),
    ]
    return ConsistencyReport(margin, conditions, v_window, in_typical_range(p.alpha, p.U, p.V))
