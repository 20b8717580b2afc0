"""End-to-end studies linking the evolution of a state to test power.

Every study returns plain dataclass records; rows are always emitted in a
fixed order so reports are reproducible whatever the thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .core import (
    HamiltonianSchedule,
    PureState,
    as_state,
    energy_moments,
    evolve_schedule,
    sudden_error_exact,
    sudden_error_perturbative,
)
from .errors import EnumerationTooLarge, StationaryStateError
from .hypothesis_testing import (
    gamma_max,
    log_beta_star,
    monte_carlo_power,
    mp_test,
    power_approx_fisher,
    power_approx_stein,
    test_performance,
)
from .information import classical_fisher, kl_divergence, quantum_fisher, quantum_fisher_energy
from .measurement import (
    Povm,
    outcome_distribution,
    projector_test_povm,
    random_povm,
    sld_optimal_povm,
)

ATTAIN_RTOL = 1e-8
RESIDUAL_FLOOR = 1e-13
FIT_POINTS = 5

__all__ = [
    "Model",
    "SweepRow",
    "SweepResult",
    "OptimalityReport",
    "SuddenRow",
    "SuddenReport",
    "ConditionResult",
    "AnomalyRow",
    "resolve_measurements",
    "discernibility_sweep",
    "best_rows",
    "measurement_optimality_study",
    "sudden_scaling_study",
    "uncertainty_condition",
    "vertex_anomaly_study",
    "loglog_slope",
]


@dataclass(frozen=True, eq=False)
class Model:
    """Initial state plus the Hamiltonian schedule that drives it."""

    psi0: PureState
    schedule: HamiltonianSchedule
    label: str = "model"

    def __post_init__(self):
        object.__setattr__(self, "psi0", as_state(self.psi0))
        if self.psi0.dim != self.schedule.dim:
            raise ValueError("state and Hamiltonian dimensions differ")

    @classmethod
    def constant(cls, psi0, H, hbar: float = 1.0, label: str = "model") -> "Model":
        return cls(as_state(psi0), HamiltonianSchedule.constant(H, 1.0, hbar=hbar), label)

    @property
    def hbar(self) -> float:
        return self.schedule.hbar

    @property
    def H0(self):
        return self.schedule.initial_hamiltonian()

    @property
    def energy_variance(self) -> float:
        return energy_moments(self.psi0, self.H0).variance

    def state_at(self, dt: float) -> PureState:
        """State after evolving for ``dt`` under H(t) from t0."""
        return evolve_schedule(self.schedule.truncated(dt), self.psi0)


def _derived_seed(seed: int, *path: int) -> int:
    return int(np.random.SeedSequence([seed, *path]).generate_state(1)[0])


def _random_outcome_count(d: int, i: int) -> int:
    return 2 + i % (d * d - 1)


def resolve_measurements(specs: Sequence, model: Model, seed: int = 0) -> list[tuple[str, Povm]]:
    """Turn measurement specs into labelled POVMs.

    Accepted specs: ``"pi"`` (projector onto the initial state and its
    complement), ``"sld"`` (SLD eigenbasis for H(t0)), ``"random:<count>"``
    (``count`` seeded random POVMs), a ``Povm``, or a ``(label, Povm)`` pair.
    """
    out = []
    d = model.psi0.dim
    for idx, spec in enumerate(specs):
        if isinstance(spec, Povm):
            out.append((f"povm{idx}", spec))
        elif isinstance(spec, tuple):
            out.append((str(spec[0]), spec[1]))
        elif spec == "pi":
            out.append(("pi", projector_test_povm(model.psi0)))
        elif spec == "sld":
            out.append(("sld", sld_optimal_povm(model.psi0, model.H0, model.hbar)))
        elif isinstance(spec, str) and spec.startswith("random:"):
            count = int(spec.split(":", 1)[1])
            for i in range(count):
                m = _random_outcome_count(d, i)
                povm = random_povm(d, m, _derived_seed(seed, idx, i))
                out.append((f"random{i}", povm))
        else:
            raise ValueError(f"unknown measurement spec {spec!r}")
    return out


@dataclass(frozen=True)
class SweepRow:
    measurement: str
    dt: float
    n: int
    exact_power: float
    alpha: float
    gamma_max_prediction: float
    stein_prediction: float
    fisher_prediction: float
    fisher_value: float
    kl_value: float
    method: str = "exact"


@dataclass
class SweepResult:
    rows: list[SweepRow]
    metadata: dict = field(default_factory=dict)


def _power(p0, p1, n, alpha_star, mc_samples, seed, threads):
    try:
        perf = test_performance(mp_test(p0, p1, n, alpha_star), p0, p1)
        return perf.power, perf.alpha, "exact"
    except EnumerationTooLarge:
        if not mc_samples:
            raise
    mc = monte_carlo_power(p0, p1, n, alpha_star, mc_samples, seed, threads)
    return mc.power, mc.alpha, "monte-carlo"


def discernibility_sweep(
    model: Model,
    measurements: Sequence,
    n_values: Sequence[int],
    dt_values: Sequence[float],
    alpha_star: float = 0.05,
    seed: int = 0,
    threads: int = 1,
    monte_carlo_samples: int | None = None,
) -> SweepResult:
    """Exact most-powerful-test power for H0: rho(t0) vs H1: rho(t0 + dt).

    For each measurement, dt and n the power is recorded next to the
    optimum-test prediction 1 - exp(-2 n dt^2 Var(H)/hbar^2) and the
    per-measurement predictions built from the divergence and the Fisher
    information. Grid points with an infeasible enumeration fall back to
    Monte Carlo only when ``monte_carlo_samples`` is given.
    """
    meas = resolve_measurements(measurements, model, seed)
    dts = sorted({float(t) for t in dt_values})
    ns = sorted({int(n) for n in n_values})
    hbar, H0 = model.hbar, model.H0
    dH2 = model.energy_variance

    def cell(task):
        mi, di = task
        label, povm = meas[mi]
        dt = dts[di]
        p0 = outcome_distribution(model.psi0, povm)
        p1 = outcome_distribution(model.state_at(dt), povm)
        J = classical_fisher(model.psi0, H0, hbar, povm)
        D = kl_divergence(p0, p1)
        rows = []
        for ni, n in enumerate(ns):
            pw, a, how = _power(
                p0, p1, n, alpha_star, monte_carlo_samples,
                _derived_seed(seed, mi, di, ni), threads,
            )
            rows.append(SweepRow(
                label, dt, n, pw, a,
                gamma_max(n, dH2, dt, hbar)[0],
                power_approx_stein(n, D),
                power_approx_fisher(n, J, dt),
                J, D, how,
            ))
        return rows

    tasks = [(mi, di) for mi in range(len(meas)) for di in range(len(dts))]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        chunks = list(pool.map(cell, tasks))
    rows = [r for chunk in chunks for r in chunk]
    meta = {
        "model": model.label,
        "hbar": hbar,
        "alpha_star": alpha_star,
        "seed": seed,
        "energy_variance": dH2,
        "measurements": [m for m, _ in meas],
    }
    return SweepResult(rows, meta)


def best_rows(result: SweepResult) -> list[SweepRow]:
    """The highest-power measurement at each (dt, n); first listed wins ties."""
    best: dict = {}
    for r in result.rows:
        key = (r.dt, r.n)
        if key not in best or r.exact_power > best[key].exact_power:
            best[key] = r
    return [best[k] for k in sorted(best)]


@dataclass
class OptimalityReport:
    quantum_fisher: float
    quantum_fisher_energy: float
    pi_fisher: float
    sld_fisher: float | None
    random_fisher: np.ndarray
    violations: int

    @property
    def max_random(self) -> float:
        return float(self.random_fisher.max()) if self.random_fisher.size else 0.0

    @property
    def pi_attains(self) -> bool:
        return _attains(self.pi_fisher, self.quantum_fisher)

    @property
    def sld_attains(self) -> bool:
        return self.sld_fisher is not None and _attains(self.sld_fisher, self.quantum_fisher)


def _attains(value: float, target: float, rtol: float = ATTAIN_RTOL) -> bool:
    return abs(value - target) <= rtol * max(abs(target), 1e-300) or value == target


def measurement_optimality_study(model: Model, trials: int = 500, seed: int = 0) -> OptimalityReport:
    """Compare random measurements against the quantum Fisher information.

    No measurement can exceed J^s; the projector measurement and the SLD
    measurement should reach it. For a stationary state the SLD does not
    exist and ``sld_fisher`` is None.
    """
    psi0, H0, hbar = model.psi0, model.H0, model.hbar
    d = psi0.dim
    Js = quantum_fisher(psi0, H0, hbar)
    Je = quantum_fisher_energy(psi0, H0, hbar)
    pi = classical_fisher(psi0, H0, hbar, projector_test_povm(psi0))
    try:
        sld = classical_fisher(psi0, H0, hbar, sld_optimal_povm(psi0, H0, hbar))
    except StationaryStateError:
        sld = None
    vals = np.array([
        classical_fisher(
            psi0, H0, hbar,
            random_povm(d, _random_outcome_count(d, i), _derived_seed(seed, i)),
        )
        for i in range(trials)
    ])
    violations = int(np.sum(vals > Js + ATTAIN_RTOL))
    return OptimalityReport(Js, Je, pi, sld, vals, violations)


@dataclass(frozen=True)
class SuddenRow:
    dt: float
    exact: float
    perturbative: float
    residual: float


@dataclass
class SuddenReport:
    rows: list[SuddenRow]
    slope: float | None
    fit_dt: list[float]

    @property
    def order_ok(self) -> bool:
        return self.slope is None or self.slope >= 3.0


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(np.asarray(x)), np.log(np.asarray(y)), 1)[0])


def sudden_scaling_study(model: Model, dt_values: Sequence[float]) -> SuddenReport:
    """Exact vs leading-order sudden-approximation error as the switch time shrinks.

    The schedule's switching profile is compressed into a window of length
    dt. The log-log slope of |exact - perturbative| is fitted on the five
    smallest dt whose residual exceeds 1e-13; ``slope`` is None when fewer
    than two such points exist (e.g. a stationary state).
    """
    rows = []
    for dt in sorted({float(t) for t in dt_values}):
        sched = model.schedule.scaled_to(dt)
        w = sudden_error_exact(sched, model.psi0)
        wp = sudden_error_perturbative(sched, model.psi0)
        rows.append(SuddenRow(dt, w, wp, abs(w - wp)))
    usable = [r for r in rows if r.dt > 0 and r.residual > RESIDUAL_FLOOR][:FIT_POINTS]
    if len(usable) < 2:
        return SuddenReport(rows, None, [r.dt for r in usable])
    slope = loglog_slope([r.dt for r in usable], [r.residual for r in usable])
    return SuddenReport(rows, slope, [r.dt for r in usable])


class ConditionResult(NamedTuple):
    value: float
    satisfied: bool


def uncertainty_condition(
    n: int, dt: float, dH2: float, hbar: float = 1.0, threshold: float = 0.1
) -> ConditionResult:
    """Evaluate 2 n dt^2 Var(H) / hbar^2 against ``threshold``.

    "Much less than one" has no numeric value; 0.1 is the default
    convention, not a derived bound.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    value = 2.0 * n * dt * dt * dH2 / hbar**2
    return ConditionResult(value, value <= threshold)


@dataclass(frozen=True)
class AnomalyRow:
    measurement: str
    dt: float
    n: int | None
    kl: float
    kl_reverse: float
    fisher: float
    fisher_prediction: float
    stein_ratio: float
    log_beta: float | None
    finite_exponent: float | None
    finite_ratio: float | None


def _ratio(a: float, b: float) -> float:
    if b == 0:
        return math.inf if a > 0 else math.nan
    return a / b


def vertex_anomaly_study(
    model: Model,
    dt_values: Sequence[float],
    n_values: Sequence[int] = (),
    alpha_star: float = 0.05,
) -> list[AnomalyRow]:
    """Stein exponent against the Fisher prediction for the projector and SLD measurements.

    ``stein_ratio`` is D(p_t0 || p_t0+dt) / ((1/2) J dt^2), the asymptotic
    type-II exponent over its quadratic Fisher approximation.
    ``kl_reverse`` is the divergence in the other orientation. With
    ``n_values``, the finite-n exponent -ln(beta_n*)/n is added per n.
    For the qubit model the ratio tends to 1/2 for the projector
    measurement and to 1 for the SLD measurement.
    """
    meas = resolve_measurements(["pi", "sld"], model)
    ns = sorted({int(n) for n in n_values})
    rows = []
    for label, povm in meas:
        J = classical_fisher(model.psi0, model.H0, model.hbar, povm)
        for dt in sorted({float(t) for t in dt_values}):
            if dt <= 0:
                raise ValueError("vertex_anomaly_study needs dt > 0")
            p0 = outcome_distribution(model.psi0, povm)
            p1 = outcome_distribution(model.state_at(dt), povm)
            D = kl_divergence(p0, p1)
            Dr = kl_divergence(p1, p0)
            pred = 0.5 * J * dt * dt
            ratio = _ratio(D, pred)
            if not ns:
                rows.append(AnomalyRow(label, dt, None, D, Dr, J, pred, ratio, None, None, None))
            for n in ns:
                lb = log_beta_star(p0, p1, n, alpha_star)
                fe = -lb / n
                rows.append(AnomalyRow(label, dt, n, D, Dr, J, pred, ratio, lb, fe, _ratio(fe, pred)))
    return rows
