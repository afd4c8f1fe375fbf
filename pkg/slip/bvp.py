"""
Stance boundary-value problem: find the stiffness K* and take-off time t*.
Shooting on K with the secant method, plus the closed-form stiffness and
return-time approximations used to seed and check it.
"""

import math
import sys
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm
from tqdm.contrib.concurrent import process_map

from slip.asymptotics import omega_tilde
from slip.errors import (
    ConvergenceError,
    DomainError,
    EventNotFoundError,
    IterationBudgetError,
    SingularityError,
    SlipError,
    StepBudgetError,
)
from slip.integrator import (
    DEFAULT_MAX_STEPS,
    DEFAULT_ROOT_TOL,
    IntegratorConfig,
    default_step,
    integrate_to_event,
    length_crossing,
    theta_crossing,
)
from slip.model import ModelParams, TouchdownConditions, Trajectory, energy_series, initial_state, polar_system

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 50
DEFAULT_MAX_REJECTIONS = 30
DEFAULT_STEP_CAP = 1e-4
ALPHA_VALIDITY = 0.9
STAGNATION_RATIO = 1e-14
SECOND_SEED_FACTOR = 1.1

# Failures that reject a secant iterate instead of aborting the solve.
REJECTABLE = (EventNotFoundError, SingularityError, StepBudgetError)


def k_star_approx(p: Union[TouchdownConditions, ModelParams]) -> float:
    """
    Closed-form stiffness estimate (pi theta_d / (2 alpha))^2.

    Args:
        p: Touchdown conditions; a stiffness, if present, is ignored

    Returns:
        Approximate K*
    """
    if not p.alpha > 0:
        raise DomainError(f"stiffness estimate needs alpha > 0, got {p.alpha}", field="alpha")
    return (math.pi * p.theta_d / (2.0 * p.alpha)) ** 2


def quadratic_reference(alpha: float) -> float:
    """Leading U^2 coefficient of the closed-form estimate, (pi cos(alpha) / (2 alpha))^2."""
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}", field="alpha")
    return (math.pi * math.cos(alpha) / (2.0 * alpha)) ** 2


@dataclass(frozen=True)
class RefinedReturn:
    """First return of the fast approximation of L to 1, in strained time."""

    mu: float
    cos_mu: float
    degenerate: bool

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def refined_return(p: ModelParams) -> RefinedReturn:
    """
    Root mu in (0, 2 pi) of L_d sin(mu) + eps (cos(alpha) - theta_d^2)(1 - cos(mu)) = 0.

    mu = 2 atan2(L_d, -eps c) with c = cos(alpha) - theta_d^2; its cosine is
    -1 + 2 eps^2 c^2 / (L_d^2 + eps^2 c^2). When c > 0 the return lies past pi.
    """
    c = math.cos(p.alpha) - p.theta_d ** 2
    L_d = p.L_d
    if L_d == 0 and c == 0:
        return RefinedReturn(math.pi, -1.0, True)
    if not L_d > 0:
        raise DomainError(f"refined return time needs L_d > 0, got {L_d}", field="L_d")
    ec = p.eps * c
    mu = 2.0 * math.atan2(L_d, -ec)
    cos_mu = -1.0 + 2.0 * ec ** 2 / (L_d ** 2 + ec ** 2)
    return RefinedReturn(mu, cos_mu, False)


def tau_star_refined(p: ModelParams) -> float:
    return refined_return(p).mu


def stance_horizon(K: float, alpha: float, theta_d: float) -> float:
    """Event search horizon: four times the fast contact estimate plus the linear sweep time."""
    sweep = 2.0 * alpha / theta_d if theta_d > 0 else 0.0
    return 4.0 * (math.pi / math.sqrt(K) + sweep)


@dataclass(frozen=True)
class ShootingConfig:
    """
    Secant shooting settings.

    Attributes:
        k0, k1: Initial secant pair; None seeds from the closed-form estimate
        tol: Tolerance on |L(t*) - 1|
        max_iter: Secant update budget
        max_rejections: Halvings allowed per rejected iterate
        step: Fixed integration step; None uses min(eps(k0)/50, step_cap)
        step_cap: Upper bound on the derived step
        horizon: Event search horizon in slow time; None derives it per iterate
        root_tol: Event bracketing tolerance
        alpha_validity: Upper bound on the angle of attack
        max_steps: Integrator step budget per iterate
    """

    k0: Optional[float] = None
    k1: Optional[float] = None
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    max_rejections: int = DEFAULT_MAX_REJECTIONS
    step: Optional[float] = None
    step_cap: float = DEFAULT_STEP_CAP
    horizon: Optional[float] = None
    root_tol: float = DEFAULT_ROOT_TOL
    alpha_validity: float = ALPHA_VALIDITY
    max_steps: int = DEFAULT_MAX_STEPS

    def __post_init__(self):
        for name in ("k0", "k1"):
            value = getattr(self, name)
            if value is not None and not (math.isfinite(value) and value > 0):
                raise DomainError(f"secant seed {name} must be positive, got {value}", field=name)
        if self.k0 is not None and self.k0 == self.k1:
            raise DomainError("secant seeds must differ", k0=self.k0, k1=self.k1)
        if not self.tol > 0:
            raise DomainError(f"residual tolerance must be positive, got {self.tol}", field="tol")
        if self.max_iter < 1 or self.max_rejections < 0:
            raise DomainError("iteration budgets must be positive", max_iter=self.max_iter)
        for name in ("step", "horizon"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise DomainError(f"{name} must be positive, got {value}", field=name)
        if not self.step_cap > 0:
            raise DomainError(f"step_cap must be positive, got {self.step_cap}", field="step_cap")

    def seeds(self, touchdown: TouchdownConditions) -> Tuple[float, float]:
        k0 = self.k0 if self.k0 is not None else k_star_approx(touchdown)
        k1 = self.k1 if self.k1 is not None else SECOND_SEED_FACTOR * k0
        if not k0 > 0:
            raise DomainError(f"secant seed must be positive, got {k0}", k0=k0)
        return k0, k1

    def integrator(self, k0: float) -> IntegratorConfig:
        step = self.step if self.step is not None else default_step(1.0 / math.sqrt(k0), self.step_cap)
        return IntegratorConfig(step=step, max_steps=self.max_steps)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, config: Optional[Dict[str, Any]] = None) -> "ShootingConfig":
        return cls(**(config or {}))


@dataclass(frozen=True, eq=False)
class StanceSolution:
    """
    Solution of the stance boundary-value problem.

    Attributes:
        K_star: Stiffness making take-off symmetric
        t_star: Slow take-off time (first rising theta = alpha crossing)
        tau_star: Take-off time in strained fast units
        residual: |L(t*) - 1|
        theta_residual: |theta(t*) - alpha|
        iterations: Secant updates performed
        trajectory: Stance trajectory at K*
        diagnostics: Seeds, step, iterate history and rejections
    """

    K_star: float
    t_star: float
    tau_star: float
    residual: float
    theta_residual: float
    iterations: int
    trajectory: Trajectory
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "K_star": self.K_star,
            "t_star": self.t_star,
            "tau_star": self.tau_star,
            "residual": self.residual,
            "theta_residual": self.theta_residual,
            "iterations": self.iterations,
            "diagnostics": self.diagnostics,
        }


def _warn(message: str, show_progress: bool) -> None:
    if show_progress:
        tqdm.write(f"  [WARN] {message}", file=sys.stderr)


class StiffnessShooter:
    """Residual R(K) = L(t*(K)) - 1 at a fixed step, and the secant iteration zeroing it."""

    def __init__(self, touchdown: TouchdownConditions, cfg: ShootingConfig, show_progress: bool = False):
        self.touchdown = touchdown
        self.cfg = cfg
        self.show_progress = show_progress
        self.k0, self.k1 = cfg.seeds(touchdown)
        self.integrator_cfg = cfg.integrator(self.k0)
        self.event = theta_crossing(touchdown.alpha, root_tol=cfg.root_tol)
        self.history: List[Dict[str, float]] = []
        self.rejections: List[Dict[str, Any]] = []

    def horizon(self, K: float) -> float:
        if self.cfg.horizon is not None:
            return self.cfg.horizon
        return stance_horizon(K, self.touchdown.alpha, self.touchdown.theta_d)

    def residual(self, K: float) -> Tuple[float, Trajectory]:
        p = self.touchdown.with_stiffness(K)
        traj = integrate_to_event(
            polar_system(K, self.integrator_cfg.l_min),
            initial_state(p),
            0.0,
            self.horizon(K),
            self.event,
            self.integrator_cfg,
            params=p,
        )
        R = float(traj.L[-1]) - 1.0
        self.history.append({"K": K, "R": R})
        return R, traj

    def attempt(self, K: float, anchor: float) -> Tuple[float, float, Trajectory]:
        """Evaluate R at K, halving the step toward anchor while the iterate is rejected."""
        for _ in range(self.cfg.max_rejections + 1):
            if K > 0 and math.isfinite(K):
                try:
                    R, traj = self.residual(K)
                    return K, R, traj
                except REJECTABLE as e:
                    reason = f"{type(e).__name__}: {e.message}"
            else:
                reason = "non-positive or non-finite iterate"
            self.rejections.append({"K": K, "reason": reason})
            _warn(f"rejected K={K:.6g} ({reason}); halving toward K={anchor:.6g}", self.show_progress)
            K = anchor + 0.5 * (K - anchor)
        raise ConvergenceError(
            f"iterate rejected {self.cfg.max_rejections + 1} times near K={anchor!r}",
            diagnostics=self.diagnostics(),
        )

    def diagnostics(self) -> Dict[str, Any]:
        return {
            "k0": self.k0,
            "k1": self.k1,
            "K_approx": k_star_approx(self.touchdown),
            "step": self.integrator_cfg.step,
            "history": list(self.history),
            "rejections": list(self.rejections),
        }

    def solve(self) -> StanceSolution:
        try:
            R_prev, traj = self.residual(self.k0)
        except REJECTABLE as e:
            raise ConvergenceError(
                f"first secant seed K={self.k0!r} is not admissible: {e.message}",
                diagnostics=self.diagnostics(),
            ) from e
        K_prev = self.k0
        if abs(R_prev) < self.cfg.tol:
            return self._solution(K_prev, R_prev, traj, 0)
        K, R, traj = self.attempt(self.k1, K_prev)
        for iteration in range(1, self.cfg.max_iter + 1):
            if abs(R) < self.cfg.tol:
                return self._solution(K, R, traj, iteration - 1)
            if abs(K - K_prev) < STAGNATION_RATIO * abs(K) or R == R_prev:
                raise ConvergenceError(
                    f"secant stagnated at K={K!r} with residual {R!r}",
                    diagnostics=self.diagnostics(),
                )
            K_next = K - R * (K - K_prev) / (R - R_prev)
            K_prev, R_prev = K, R
            K, R, traj = self.attempt(K_next, K_prev)
        if abs(R) < self.cfg.tol:
            return self._solution(K, R, traj, self.cfg.max_iter)
        raise IterationBudgetError(
            f"secant budget of {self.cfg.max_iter} iterations exhausted at K={K!r}, residual {R!r}",
            diagnostics=self.diagnostics(),
        )

    def _solution(self, K: float, R: float, traj: Trajectory, iterations: int) -> StanceSolution:
        t_star = float(traj.times[-1])
        p = self.touchdown.with_stiffness(K)
        frequency = omega_tilde(p.eps, p.theta_d)
        return StanceSolution(
            K_star=K,
            t_star=t_star,
            tau_star=float(frequency.tau_plus(t_star)),
            residual=abs(R),
            theta_residual=abs(float(traj.theta[-1]) - p.alpha),
            iterations=iterations,
            trajectory=traj,
            diagnostics=self.diagnostics(),
        )


def check_stance_inputs(alpha: float, U: float, V: float, alpha_validity: float = ALPHA_VALIDITY) -> TouchdownConditions:
    touchdown = TouchdownConditions(alpha, U, V)
    if not 0 < alpha < alpha_validity:
        raise DomainError(f"alpha must lie in (0, {alpha_validity}), got {alpha}", field="alpha")
    if not U > 0:
        raise DomainError(f"U must be positive, got {U}", field="U")
    if not touchdown.theta_d > 0:
        raise DomainError(
            f"touchdown angular rate theta_d = {touchdown.theta_d} must be positive",
            field="theta_d",
        )
    return touchdown


def solve_stiffness(
    alpha: float,
    U: float,
    V: float,
    cfg: Optional[ShootingConfig] = None,
    show_progress: bool = False
) -> StanceSolution:
    """
    Solve theta(t*) = alpha, L(t*) = 1 for K* by secant shooting.

    Args:
        alpha: Angle of attack
        U: Horizontal Froude number
        V: Vertical Froude number
        cfg: Shooting settings (defaults if None)
        show_progress: Print status lines to standard error

    Returns:
        StanceSolution at the converged stiffness

    Raises:
        DomainError: inputs violate the preconditions
        ConvergenceError: secant stagnation or an iterate that cannot be rescued
        IterationBudgetError: max_iter secant updates without convergence
    """
    cfg = cfg or ShootingConfig()
    touchdown = check_stance_inputs(alpha, U, V, cfg.alpha_validity)
    shooter = StiffnessShooter(touchdown, cfg, show_progress)
    solution = shooter.solve()
    if show_progress:
        tqdm.write(
            f"  [OK] alpha={alpha:g} U={U:g} V={V:g}: K*={solution.K_star:.10g} "
            f"({solution.iterations} iterations, residual {solution.residual:.2e})",
            file=sys.stderr,
        )
    return solution


@dataclass(frozen=True)
class ReturnTime:
    """Measured first return of L to 1 at fixed parameters."""

    params: ModelParams
    t_star: float
    tau: float
    tau_plus: float
    mu: float
    energy_drift: float = math.nan

    def to_dict(self) -> Dict[str, Any]:
        return {
            **self.params.to_dict(),
            "eps": self.params.eps,
            "t_star": self.t_star,
            "tau": self.tau,
            "tau_plus": self.tau_plus,
            "mu": self.mu,
            "energy_drift": self.energy_drift,
        }


def measure_return_time(p: ModelParams, cfg: Optional[IntegratorConfig] = None, root_tol: float = DEFAULT_ROOT_TOL) -> ReturnTime:
    """
    Locate the first rising crossing L = 1 after touchdown.

    Returns the slow time t*, the fast time t*/eps, the strained time
    omega t*/eps and the refined closed-form estimate mu.
    """
    if not p.L_d > 0:
        raise DomainError(f"return time needs a compressing touchdown (L_d > 0), got {p.L_d}", field="L_d")
    cfg = cfg or IntegratorConfig.for_eps(p.eps)
    traj = integrate_to_event(
        polar_system(p.K, cfg.l_min),
        initial_state(p),
        0.0,
        4.0 * math.pi * p.eps,
        length_crossing(1.0, root_tol=root_tol),
        cfg,
        params=p,
    )
    t_star = float(traj.times[-1])
    frequency = omega_tilde(p.eps, p.theta_d)
    E = energy_series(traj)
    drift = float(np.max(np.abs(E - E[0])))
    return ReturnTime(p, t_star, t_star / p.eps, float(frequency.tau_plus(t_star)), tau_star_refined(p), drift)


SWEEP_COLUMNS = ("alpha", "U", "V", "K_star", "K_approx", "t_star", "tau_star", "iterations", "residual", "error")


@dataclass(frozen=True)
class SweepRow:
    """One grid point of a stiffness sweep; failed rows carry NaN values and an error name."""

    alpha: float
    U: float
    V: float
    K_star: float = math.nan
    K_approx: float = math.nan
    t_star: float = math.nan
    tau_star: float = math.nan
    iterations: int = 0
    residual: float = math.nan
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error

    @property
    def ratio(self) -> float:
        return self.K_star / self.K_approx

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class SweepTable:
    rows: List[SweepRow]
    config: Dict[str, Any] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(row, name) for row in self.rows], dtype=float)

    @property
    def succeeded(self) -> List[SweepRow]:
        return [row for row in self.rows if row.ok]

    @property
    def all_failed(self) -> bool:
        return not self.succeeded

    def to_dict(self) -> Dict[str, Any]:
        return {"config": self.config, "rows": [row.to_dict() for row in self.rows]}


def solve_row(args: Tuple[float, float, float, Optional[ShootingConfig]]) -> SweepRow:
    """Solve one sweep grid point, recording any library failure in the row."""
    alpha, U, V, cfg = args
    try:
        K_approx = k_star_approx(TouchdownConditions(alpha, U, V))
    except SlipError:
        K_approx = math.nan
    try:
        solution = solve_stiffness(alpha, U, V, cfg)
    except SlipError as e:
        return SweepRow(alpha, U, V, K_approx=K_approx, error=f"{type(e).__name__}: {e.message}")
    return SweepRow(
        alpha, U, V,
        K_star=solution.K_star,
        K_approx=K_approx,
        t_star=solution.t_star,
        tau_star=solution.tau_star,
        iterations=solution.iterations,
        residual=solution.residual,
    )


def stance_sweep(
    alphas: Sequence[float],
    Us: Sequence[float],
    V: float,
    cfg: Optional[ShootingConfig] = None,
    workers: int = 1,
    show_progress: bool = False
) -> SweepTable:
    """
    Solve the stance problem over the grid alphas x Us at fixed V.

    Rows follow the input order (alpha outer, U inner) regardless of worker
    completion order; a failing point is recorded, not raised.

    Args:
        alphas: Angles of attack
        Us: Horizontal Froude numbers
        V: Vertical Froude number
        cfg: Shooting settings shared by every point
        workers: Process count; 1 runs in-process
        show_progress: Draw a progress bar and report failed rows

    Returns:
        SweepTable with one row per grid point
    """
    alphas, Us = list(alphas), list(Us)
    if not alphas or not Us:
        raise DomainError("sweep grids must be non-empty", alphas=len(alphas), Us=len(Us))
    if workers < 1:
        raise DomainError(f"workers must be at least 1, got {workers}", field="workers")
    cfg = cfg or ShootingConfig()
    tasks = [(alpha, U, V, cfg) for alpha in alphas for U in Us]
    if workers == 1:
        rows = [solve_row(task) for task in tqdm(tasks, desc="sweep", disable=not show_progress, file=sys.stderr)]
    else:
        rows = process_map(
            solve_row, tasks, max_workers=workers, chunksize=1, desc="sweep",
            disable=not show_progress, file=sys.stderr,
        )
    for row in rows:
        if not row.ok:
            _warn(f"alpha={row.alpha:g} U={row.U:g}: {row.error}", show_progress)
    config = {"alphas": alphas, "Us": Us, "V": V, "shooting": cfg.to_dict(), "workers": workers}
    return SweepTable(list(rows), config)


def quadratic_fit(Us: Sequence[float], Ks: Sequence[float]) -> Tuple[float, float, float]:
    """Least-squares a U^2 + b U + c through K*(U); needs three points."""
    Us, Ks = np.asarray(Us, dtype=float), np.asarray(Ks, dtype=float)
    mask = np.isfinite(Ks)
    if mask.sum() < 3:
        raise DomainError("quadratic fit needs at least three solved points", points=int(mask.sum()))
    a, b, c = np.polyfit(Us[mask], Ks[mask], 2)
    return float(a), float(b), float(c)


