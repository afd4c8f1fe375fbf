"""
Numerical convergence experiments for the stance-phase approximations.
Each experiment sweeps the stiffness K, measures an error per sample and
fits the log-log slope of error against K.
"""

import math
import sys
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm
from tqdm.contrib.concurrent import process_map

from slip.asymptotics import fast_approximation, theta0_slow
from slip.bvp import ShootingConfig, SweepTable, measure_return_time, stance_sweep
from slip.errors import ConvergenceError, DomainError, SlipError
from slip.integrator import IntegratorConfig, simulate
from slip.model import TouchdownConditions, energy_series

NORMS = ("sup", "endpoint")
MIN_SAMPLES = 4
NOISE_FLOOR = 1e-13
# Allowed energy drift per unit of the interval length.
DRIFT_TOLERANCE = 1e-12
STEP_CAP = 1e-3
DEFAULT_K_GRID = tuple(float(K) for K in np.logspace(2, 6, 9))
DEFAULT_ALPHAS = (0.05, 0.1, 0.2, 0.4)


def default_k_grid() -> List[float]:
    return list(DEFAULT_K_GRID)


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Settings shared by the convergence experiments.

    The comparison step is min(eps / resolution, 1e-3) / refinement.

    Attributes:
        resolution: Steps per unit fast time before refinement
        refinement: Extra step subdivision for the reference solution
        norm: "sup" over the interval or "endpoint" at its end
        noise_floor: Errors below this are excluded from fits
    """

    resolution: int = 50
    refinement: int = 16
    norm: str = "sup"
    noise_floor: float = NOISE_FLOOR

    def __post_init__(self):
        if self.resolution < 1 or self.refinement < 1:
            raise DomainError("resolution and refinement must be positive integers")
        if self.norm not in NORMS:
            raise DomainError(f"unknown error norm {self.norm!r}; expected one of {NORMS}", field="norm")
        if not self.noise_floor >= 0:
            raise DomainError(f"noise floor must be non-negative, got {self.noise_floor}")

    def step(self, eps: float) -> float:
        return min(eps / self.resolution, STEP_CAP) / self.refinement

    def integrator(self, eps: float) -> IntegratorConfig:
        return IntegratorConfig(step=self.step(eps))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, config: Optional[Dict[str, Any]] = None) -> "ExperimentConfig":
        return cls(**(config or {}))


# Long integrations (expanding interval, slow scale) run at the unrefined step.
LONG_RUN = ExperimentConfig(refinement=1)


@dataclass(frozen=True)
class Sample:
    """One K of an experiment; a failed sample has NaN errors and a failure note."""

    K: float
    eps: float
    error: float
    sup_error: float = math.nan
    endpoint_error: float = math.nan
    energy_drift: float = math.nan
    drift_bound: float = math.nan
    failure: str = ""

    @property
    def ok(self) -> bool:
        return not self.failure

    @property
    def drift_ok(self) -> bool:
        return not self.energy_drift > self.drift_bound

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class OrderFit(NamedTuple):
    slope: float
    residual: float


def fit_order(samples: Sequence[Tuple[float, float]], noise_floor: float = NOISE_FLOOR) -> OrderFit:
    """
    Least-squares line through (log10 K, log10 error).

    Args:
        samples: (K, error) pairs
        noise_floor: Errors below this are dropped before fitting

    Returns:
        OrderFit with the slope and the RMS residual in decades
    """
    pairs = [(float(K), float(e)) for K, e in samples]
    if any(not e > 0 for _, e in pairs):
        raise DomainError("errors must be positive to fit an order", errors=[e for _, e in pairs])
    kept = [(K, e) for K, e in pairs if e >= noise_floor]
    if len(kept) < 2:
        raise DomainError(f"need at least two samples above the noise floor, got {len(kept)}")
    x = np.log10([K for K, _ in kept])
    y = np.log10([e for _, e in kept])
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return OrderFit(float(slope), residual)


@dataclass(frozen=True)
class ConvergenceReport:
    """
    Errors over a K grid and their fitted order.

    Attributes:
        experiment: Identifier such as "fast-L"
        samples: One Sample per K, in increasing K
        slope: Fitted d log(error) / d log(K); NaN if too few samples succeeded
        residual: RMS fit residual (decades)
        excluded: K values dropped for lying under the noise floor
        metadata: Norm, interval and integrator settings
    """

    experiment: str
    samples: List[Sample]
    slope: float = math.nan
    residual: float = math.nan
    excluded: List[float] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.samples) < MIN_SAMPLES:
            raise DomainError(f"a convergence report needs at least {MIN_SAMPLES} samples, got {len(self.samples)}")
        Ks = [s.K for s in self.samples]
        if any(b <= a for a, b in zip(Ks, Ks[1:])):
            raise DomainError("report K values must be strictly increasing", Ks=Ks)

    @property
    def errors(self) -> np.ndarray:
        return np.array([s.error for s in self.samples])

    @property
    def Ks(self) -> np.ndarray:
        return np.array([s.K for s in self.samples])

    @property
    def failed(self) -> List[Sample]:
        return [s for s in self.samples if not s.ok]

    @property
    def all_failed(self) -> bool:
        return len(self.failed) == len(self.samples)

    @property
    def drift_flagged(self) -> List[float]:
        """K values whose reference run drifted more than its bound."""
        return [s.K for s in self.samples if s.ok and not s.drift_ok]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "experiment": self.experiment,
            "slope": self.slope,
            "residual": self.residual,
            "excluded": self.excluded,
            "drift_flagged": self.drift_flagged,
            "metadata": self.metadata,
            "samples": [s.to_dict() for s in self.samples],
        }


def build_report(experiment: str, samples: List[Sample], noise_floor: float, metadata: Dict[str, Any]) -> ConvergenceReport:
    """Fit the successful samples; the slope stays NaN when fewer than two remain."""
    usable = [(s.K, s.error) for s in samples if s.ok and s.error > 0]
    excluded = [K for K, e in usable if e < noise_floor]
    excluded += [s.K for s in samples if s.ok and s.error == 0]
    try:
        slope, residual = fit_order(usable, noise_floor)
    except DomainError:
        slope, residual = math.nan, math.nan
    metadata = {**metadata, "noise_floor": noise_floor, "drift_tolerance": DRIFT_TOLERANCE}
    return ConvergenceReport(experiment, samples, slope, residual, sorted(excluded), metadata)


def sup_error(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def _check_grid(Ks: Sequence[float], minimum: float = 0.0) -> List[float]:
    Ks = [float(K) for K in Ks]
    if len(Ks) < MIN_SAMPLES:
        raise DomainError(f"K grid needs at least {MIN_SAMPLES} points, got {len(Ks)}")
    if any(b <= a for a, b in zip(Ks, Ks[1:])):
        raise DomainError("K grid must be strictly increasing", Ks=Ks)
    if Ks[0] < minimum:
        raise DomainError(f"K grid must start at K >= {minimum}, got {Ks[0]}", Ks=Ks)
    return Ks


def _run(worker: Callable, tasks: List[tuple], workers: int, desc: str, show_progress: bool) -> List[Any]:
    """Evaluate tasks in input order, optionally across processes."""
    if workers < 1:
        raise DomainError(f"workers must be at least 1, got {workers}", field="workers")
    if workers == 1:
        return [worker(task) for task in tqdm(tasks, desc=desc, disable=not show_progress, file=sys.stderr)]
    return process_map(
        worker, tasks, max_workers=workers, chunksize=1, desc=desc,
        disable=not show_progress, file=sys.stderr,
    )


def _failed(K: float, e: SlipError) -> Tuple[Sample, Sample]:
    failure = f"{type(e).__name__}: {e.message}"
    sample = Sample(K, 1.0 / math.sqrt(K), math.nan, failure=failure)
    return sample, sample


def _warn_failures(samples: List[Sample], show_progress: bool) -> None:
    if show_progress:
        for s in samples:
            if not s.ok:
                tqdm.write(f"  [WARN] K={s.K:.6g} failed: {s.failure}", file=sys.stderr)
            elif not s.drift_ok:
                tqdm.write(f"  [WARN] K={s.K:.6g} energy drift {s.energy_drift:.3g} exceeds {s.drift_bound:.3g}", file=sys.stderr)


def _fast_sample(task: tuple) -> Tuple[Sample, Sample]:
    touchdown, K, T, expanding, order, cfg = task
    p = touchdown.with_stiffness(K)
    try:
        approx = fast_approximation(p, order)
        omega = approx.frequency.omega
        tau_end = T / p.eps if expanding else T
        traj = simulate(p, tau_end * p.eps / omega, cfg.integrator(p.eps))
    except SlipError as e:
        return _failed(K, e)
    tau, L_approx, theta_approx = approx.on_trajectory(traj)
    E = energy_series(traj)
    drift, bound = float(np.max(np.abs(E - E[0]))), DRIFT_TOLERANCE * tau_end
    pair = []
    for actual, approximation in ((traj.L, L_approx), (traj.theta, theta_approx)):
        diff = np.abs(actual - approximation)
        sup, endpoint = float(np.max(diff)), float(diff[-1])
        pair.append(Sample(K, p.eps, sup if cfg.norm == "sup" else endpoint, sup, endpoint, drift, bound))
    return pair[0], pair[1]


def fast_scale_error(
    touchdown: TouchdownConditions,
    Ks: Optional[Sequence[float]] = None,
    T: float = math.pi,
    expanding: bool = False,
    order: int = 2,
    cfg: Optional[ExperimentConfig] = None,
    workers: int = 1,
    show_progress: bool = False
) -> Tuple[ConvergenceReport, ConvergenceReport]:
    """
    Compare the integrated stance with the fast-scale approximations.

    For each K the model is integrated up to strained time T (or T/eps on
    the expanding interval), times are relabelled to tau+ = omega t / eps
    and the errors of L and theta are measured on the trajectory grid.

    Args:
        touchdown: (alpha, U, V)
        Ks: Increasing stiffness grid, all >= 10
        T: Interval end in strained time
        expanding: Use the interval tau+ <= T / eps
        order: Approximation order (0, 1 or 2)
        cfg: Experiment settings; defaults to refinement 16, or 1 when expanding
        workers: Process count
        show_progress: Draw a progress bar

    Returns:
        (L report, theta report)
    """
    Ks = _check_grid(Ks if Ks is not None else default_k_grid(), minimum=10.0)
    if not T > 0:
        raise DomainError(f"interval end must be positive, got {T}", field="T")
    cfg = cfg or (LONG_RUN if expanding else ExperimentConfig())
    tasks = [(touchdown, K, T, expanding, order, cfg) for K in Ks]
    pairs = _run(_fast_sample, tasks, workers, "fast", show_progress)
    L_samples = [pair[0] for pair in pairs]
    theta_samples = [pair[1] for pair in pairs]
    _warn_failures(L_samples, show_progress)
    metadata = {
        "touchdown": asdict(touchdown),
        "T": T,
        "interval": "tau+ <= T/eps" if expanding else "tau+ <= T",
        "order": order,
        "experiment_config": cfg.to_dict(),
    }
    tag = "expanding" if expanding else "fast"
    return (
        build_report(f"{tag}-L", L_samples, cfg.noise_floor, metadata),
        build_report(f"{tag}-theta", theta_samples, cfg.noise_floor, metadata),
    )


def _slow_sample(task: tuple) -> Sample:
    touchdown, K, T, method, cfg = task
    p = touchdown.with_stiffness(K)
    try:
        traj = simulate(p, T, cfg.integrator(p.eps))
        reference = theta0_slow(traj.times, p, method, IntegratorConfig(step=cfg.step(p.eps)))
    except SlipError as e:
        return _failed(K, e)[0]
    diff = np.abs(traj.theta - reference.theta)
    sup, endpoint = float(np.max(diff)), float(diff[-1])
    E = energy_series(traj)
    drift = float(np.max(np.abs(E - E[0])))
    return Sample(K, p.eps, sup if cfg.norm == "sup" else endpoint, sup, endpoint, drift, DRIFT_TOLERANCE * T)


def slow_scale_error(
    touchdown: TouchdownConditions,
    Ks: Optional[Sequence[float]] = None,
    T: float = 1.0,
    method: str = "numerical",
    cfg: Optional[ExperimentConfig] = None,
    workers: int = 1,
    show_progress: bool = False
) -> ConvergenceReport:
    """Error of the leading-order slow angle theta0 against the integrated stance on t <= T."""
    Ks = _check_grid(Ks if Ks is not None else default_k_grid(), minimum=10.0)
    if not T > 0:
        raise DomainError(f"interval end must be positive, got {T}", field="T")
    cfg = cfg or LONG_RUN
    samples = _run(_slow_sample, [(touchdown, K, T, method, cfg) for K in Ks], workers, "slow", show_progress)
    _warn_failures(samples, show_progress)
    metadata = {
        "touchdown": asdict(touchdown),
        "T": T,
        "interval": "t <= T",
        "method": method,
        "experiment_config": cfg.to_dict(),
    }
    return build_report(f"slow-{method}", samples, cfg.noise_floor, metadata)


def _return_sample(task: tuple) -> Tuple[Sample, Sample]:
    touchdown, K, cfg = task
    p = touchdown.with_stiffness(K)
    try:
        measured = measure_return_time(p, cfg.integrator(p.eps))
    except SlipError as e:
        return _failed(K, e)
    raw = abs(measured.tau - math.pi)
    refined = abs(measured.tau_plus - measured.mu)
    drift, bound = measured.energy_drift, DRIFT_TOLERANCE * measured.tau
    return (
        Sample(K, p.eps, raw, raw, raw, drift, bound),
        Sample(K, p.eps, refined, refined, refined, drift, bound),
    )


def t_star_order(
    touchdown: TouchdownConditions,
    Ks: Optional[Sequence[float]] = None,
    cfg: Optional[ExperimentConfig] = None,
    workers: int = 1,
    show_progress: bool = False
) -> Tuple[ConvergenceReport, ConvergenceReport]:
    """
    Order of the return-time estimates at fixed K.

    Measures the first return of L to 1 and reports two deviations:
    raw |t*/eps - pi| and refined |omega t*/eps - mu|.

    Returns:
        (raw report, refined report)
    """
    Ks = _check_grid(Ks if Ks is not None else default_k_grid(), minimum=10.0)
    cfg = cfg or ExperimentConfig()
    pairs = _run(_return_sample, [(touchdown, K, cfg) for K in Ks], workers, "t*", show_progress)
    raw = [pair[0] for pair in pairs]
    refined = [pair[1] for pair in pairs]
    _warn_failures(raw, show_progress)
    metadata = {
        "touchdown": asdict(touchdown),
        "event": "first rising L = 1",
        "experiment_config": cfg.to_dict(),
    }
    return (
        build_report("tstar-raw", raw, cfg.noise_floor, metadata),
        build_report("tstar-refined", refined, cfg.noise_floor, metadata),
    )


def k_ratio_study(
    alphas: Sequence[float] = DEFAULT_ALPHAS,
    U: float = 1.0,
    V: float = 0.1,
    cfg: Optional[ShootingConfig] = None,
    workers: int = 1,
    show_progress: bool = False
) -> SweepTable:
    """Solved K* against the closed-form estimate for each alpha; row.ratio gives K*/K~*."""
    alphas = list(alphas)
    if not alphas:
        raise DomainError("alpha list must be non-empty")
    return stance_sweep(alphas, [U], V, cfg, workers, show_progress)


def ratio_deviation(table: SweepTable) -> np.ndarray:
    """|K*/K~* - 1| per row, NaN for failed rows."""
    return np.array([abs(row.ratio - 1.0) if row.ok else math.nan for row in table.rows])


def solved_t_star_report(table: SweepTable) -> ConvergenceReport:
    """
    Return-time deviation |t* - pi eps| along the solved stiffnesses.

    Each successful row contributes one sample at K = K*, so eps shrinks
    as alpha does. Failed rows are left out and named in the metadata.
    """
    rows = sorted((r for r in table.rows if r.ok), key=lambda r: r.K_star)
    if len(table.rows) >= MIN_SAMPLES and len(rows) < MIN_SAMPLES:
        failed = {r.alpha: r.error for r in table.rows if not r.ok}
        raise ConvergenceError(f"only {len(rows)} of {len(table.rows)} stiffness solves succeeded", failed=failed)
    samples = []
    for row in rows:
        eps = 1.0 / math.sqrt(row.K_star)
        deviation = abs(row.t_star - math.pi * eps)
        samples.append(Sample(row.K_star, eps, deviation, deviation, deviation))
    metadata = {
        "sweep": table.config,
        "event": "theta = alpha and L = 1 at solved K*",
        "failed_alphas": [r.alpha for r in table.rows if not r.ok],
    }
    return build_report("tstar-solved", samples, NOISE_FLOOR, metadata)


def solved_t_star_order(
    alphas: Sequence[float] = DEFAULT_ALPHAS,
    U: float = 1.0,
    V: float = 0.1,
    cfg: Optional[ShootingConfig] = None,
    workers: int = 1,
    show_progress: bool = False
) -> ConvergenceReport:
    """Solve K* for each alpha and fit the order of |t* - pi eps| against K*."""
    return solved_t_star_report(k_ratio_study(alphas, U, V, cfg, workers, show_progress))
