"""End-to-end simulation of the adaptive estimation protocol.

Two measurement backends share the same adaptive loop:

* "gaussian" draws each iteration's estimate from the asymptotic normal law
  of the optimal measurement. The covariance is evaluated at the operating
  point the schedule assumes for that iteration (the mean-field residual
  magnitude, or the refined one when time refinement is on) along the true
  residual direction. Evaluating it at the realized residual instead would
  put weight arbitrarily close to the csc^2 divergence and give the realized
  squared error an infinite mean, which the contraction recursion never
  models; with the mean-field operating point the realized deviation factors
  follow the control-error law exactly, at every iteration.
* "bell" samples Bell-basis outcome counts from the exact probabilities and
  estimates the residual field by maximum likelihood. The Bell probabilities
  are even in every component of the residual, so the likelihood has an
  eight-fold sign degeneracy plus a phase-branch degeneracy; both are
  resolved toward the prior for the iteration.

Iteration 1 runs without a control. Iteration k >= 2 applies the control
-beta_hat_{k-1} and estimates the remaining residual. Evolution times follow
the planned contraction schedule; with time_refinement enabled, the time for
iteration k is re-derived from a fresh estimate at the previous settings
while holding that iteration's total time budget n * t_planned fixed.
"""

import concurrent.futures
import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .adaptive import g0, gain, iteration_covariance, optimal_time
from .core import evolve_unitary, pauli_compose
from .errors import DomainError, MleNonconvergence
from .util import sample_stream

PROBABILITY_LOG_FLOOR = 1e-300
MLE_MAX_ITERATIONS = 200
BELL_MIN_TRIALS = 100


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of one adaptive run.

    beta0_guess defaults to the true field (a well-calibrated prior);
    beta0_bound defaults to |beta0_guess| and seeds the planned schedule
    through dE2_1 = 4 bound^2. pi0 is the target phase used by time
    refinement (defaults to the optimal phase g0). extra_trials is the
    budget of the refinement measurement (defaults to n).
    """

    beta_true: tuple
    m: int
    n: int
    backend: str = "gaussian"
    seed: int = 0
    time_refinement: bool = False
    extra_trials: int | None = None
    beta0_guess: tuple | None = None
    beta0_bound: float | None = None
    pi0: float | None = None

    def __post_init__(self):
        beta = np.asarray(self.beta_true, dtype=float)
        if beta.shape != (3,) or not np.all(np.isfinite(beta)):
            raise DomainError("beta_true must be a finite 3-vector")
        object.__setattr__(self, "beta_true", tuple(beta.tolist()))
        if self.backend not in ("gaussian", "bell"):
            raise DomainError(f"unknown backend {self.backend!r}")
        if self.m < 1:
            raise DomainError("iteration count must be >= 1")
        if self.n < 1:
            raise DomainError("trial count must be >= 1")
        if self.backend == "bell" and self.n < BELL_MIN_TRIALS:
            raise DomainError(f"bell backend needs n >= {BELL_MIN_TRIALS} for a usable fit")
        if self.seed < 0:
            raise DomainError("seed must be a nonnegative integer")
        if self.extra_trials is not None and self.extra_trials < 1:
            raise DomainError("extra_trials must be >= 1")
        if self.beta0_guess is not None:
            guess = np.asarray(self.beta0_guess, dtype=float)
            if guess.shape != (3,) or not np.all(np.isfinite(guess)):
                raise DomainError("beta0_guess must be a finite 3-vector")
            object.__setattr__(self, "beta0_guess", tuple(guess.tolist()))
        if self.beta0_bound is not None and not self.beta0_bound > 0.0:
            raise DomainError("beta0_bound must be positive")
        if self.pi0 is not None and not 0.0 < self.pi0 < math.pi:
            raise DomainError("pi0 must lie in (0, pi)")

    def resolved_guess(self) -> np.ndarray:
        if self.beta0_guess is not None:
            return np.asarray(self.beta0_guess, dtype=float)
        return np.asarray(self.beta_true, dtype=float)

    def resolved_bound(self) -> float:
        if self.beta0_bound is not None:
            return float(self.beta0_bound)
        bound = float(np.linalg.norm(self.resolved_guess()))
        if bound == 0.0:
            raise DomainError("prior bound is zero; provide beta0_bound explicitly")
        return bound

    def resolved_pi0(self) -> float:
        return float(self.pi0) if self.pi0 is not None else g0()

    def resolved_extra(self) -> int:
        return int(self.extra_trials) if self.extra_trials is not None else int(self.n)


@dataclass(frozen=True)
class BellOutcomeCounts:
    """Outcome totals of n Bell-basis measurements, ordered
    (Phi+, Psi+, Psi-, Phi-)."""

    counts: tuple
    n: int

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        object.__setattr__(self, "counts", counts)
        if len(counts) != 4 or any(c < 0 for c in counts):
            raise DomainError("counts must be four nonnegative outcome totals")
        if sum(counts) != self.n:
            raise DomainError("counts must sum to n")


@dataclass(frozen=True)
class IterationOutcome:
    k: int
    control: tuple
    t: float
    n_used: int
    dE2_planned: float
    residual_norm_sq: float
    trace_cov: float | None
    d_factor: float
    counts: tuple | None
    beta_hat: tuple
    error_norm: float


@dataclass(frozen=True)
class ExperimentTrace:
    config: ExperimentConfig
    rep: int
    iterations: tuple
    beta_hat: tuple
    planned_v_m: float
    realized_sq_error: float
    aborted: bool = False


def bell_probabilities(delta_beta, t: float) -> np.ndarray:
    """Bell-basis outcome probabilities after evolving one half of a
    maximally entangled pair under the residual field for time t.

    Outcome order: (Phi+, Psi+, Psi-, Phi-).
    """
    delta_beta = np.asarray(delta_beta, dtype=float)
    u = evolve_unitary(pauli_compose(delta_beta), t)
    amps = np.array(
        [
            (u[0, 0] + u[1, 1]) / 2.0,
            (u[0, 1] + u[1, 0]) / 2.0,
            (u[0, 1] - u[1, 0]) / 2.0,
            (u[0, 0] - u[1, 1]) / 2.0,
        ]
    )
    p = np.abs(amps) ** 2
    return p / p.sum()


def sample_counts(p, n: int, rng: np.random.Generator) -> BellOutcomeCounts:
    """Multinomial draw of n Bell-outcome totals from probabilities p."""
    p = np.asarray(p, dtype=float)
    if p.shape != (4,) or np.any(p < 0.0):
        raise DomainError("p must be four nonnegative probabilities")
    if abs(p.sum() - 1.0) > 1e-9:
        raise DomainError(f"probabilities sum to {p.sum():.12g}, not 1")
    if n < 1:
        raise DomainError("trial count must be >= 1")
    counts = rng.multinomial(n, p / p.sum())
    return BellOutcomeCounts(counts=tuple(int(c) for c in counts), n=int(n))


def _operating_residual(delta_beta_true: np.ndarray, model_magnitude: float | None) -> np.ndarray:
    if model_magnitude is None:
        return delta_beta_true
    if not model_magnitude > 0.0:
        raise DomainError("model_magnitude must be positive")
    norm = float(np.linalg.norm(delta_beta_true))
    if norm == 0.0:
        raise DomainError("residual direction is undefined at zero residual")
    return delta_beta_true * (model_magnitude / norm)


def estimate_step_gaussian(
    delta_beta_true,
    n: int,
    t: float,
    rng: np.random.Generator,
    model_magnitude: float | None = None,
) -> np.ndarray:
    """Draw one iteration's estimation error from its asymptotic covariance.

    The error is C^{1/2} z with the symmetric square root from an
    eigendecomposition, so estimate = delta_beta_true + returned error. The
    covariance is evaluated along the true residual direction at magnitude
    model_magnitude (the operating point the caller's schedule assumes);
    by default it is evaluated at the true residual itself.
    """
    delta_beta_true = np.asarray(delta_beta_true, dtype=float)
    operating = _operating_residual(delta_beta_true, model_magnitude)
    cov = iteration_covariance(operating, n, t).m
    w, v = np.linalg.eigh(cov)
    root = v @ np.diag(np.sqrt(np.clip(w, 0.0, None))) @ v.T
    return root @ rng.standard_normal(3)


def _sign_pattern_candidates(x: np.ndarray) -> list:
    mags = np.abs(x)
    return [mags * np.array(signs) for signs in itertools.product((1.0, -1.0), repeat=3)]


def _phase_candidates(theta0: float, target: float) -> list:
    top = int(math.ceil((target + math.pi) / (2.0 * math.pi))) + 1
    cands = []
    for j in range(top + 1):
        cands.append(2.0 * math.pi * j + theta0)
        cands.append(2.0 * math.pi * (j + 1) - theta0)
        cands.append(2.0 * math.pi * j + (math.pi - theta0))
        cands.append(2.0 * math.pi * j + (math.pi + theta0))
    return [c for c in cands if c >= 0.0]


def _fit_bell_counts(counts: np.ndarray, t: float, prior: np.ndarray) -> np.ndarray:
    """Maximum-likelihood residual from Bell-outcome counts.

    The likelihood is invariant under per-component sign flips and under
    phase reflections theta -> pi j +/- theta, so the fit is seeded in the
    branch nearest the prior and the final sign pattern is chosen nearest
    the prior among the eight equal-likelihood candidates.
    """
    n = counts.sum()
    prior_norm = float(np.linalg.norm(prior))

    phat = counts / n
    s2 = float(phat[1] + phat[2] + phat[3])
    theta0 = math.asin(min(1.0, math.sqrt(s2)))
    target = prior_norm * t
    theta_init = min(_phase_candidates(theta0, target), key=lambda c: abs(c - target))
    if theta_init == 0.0 or (s2 == 0.0 and theta_init < 1e-12):
        return np.zeros(3)
    if s2 > 0.0:
        unit = np.sqrt(phat[1:] / s2)
    elif prior_norm > 0.0:
        unit = np.abs(prior) / prior_norm
    else:
        return np.zeros(3)
    signs = np.where(prior >= 0.0, 1.0, -1.0)
    x0 = (theta_init / t) * unit * signs

    def nll(x):
        p = np.clip(bell_probabilities(x, t), PROBABILITY_LOG_FLOOR, None)
        return -float(counts @ np.log(p))

    res = scipy.optimize.minimize(
        nll, x0, method="L-BFGS-B", options={"maxiter": MLE_MAX_ITERATIONS}
    )
    if res.status == 1:
        raise MleNonconvergence(
            f"likelihood fit did not converge within {MLE_MAX_ITERATIONS} iterations"
        )
    best = min(_sign_pattern_candidates(res.x), key=lambda c: np.linalg.norm(c - prior))
    return best


def estimate_step_bell(
    delta_beta_true, n: int, t: float, prior, rng: np.random.Generator
) -> np.ndarray:
    """Sample n Bell-basis outcomes under the true residual and return the
    maximum-likelihood estimate, degeneracies resolved toward the prior."""
    if n < BELL_MIN_TRIALS:
        raise DomainError(f"bell estimation needs n >= {BELL_MIN_TRIALS} for a usable fit")
    if not t > 0.0:
        raise DomainError(f"evolution time must be positive, got {t}")
    prior = np.asarray(prior, dtype=float)
    bc = sample_counts(bell_probabilities(delta_beta_true, t), n, rng)
    return _fit_bell_counts(np.asarray(bc.counts, dtype=float), t, prior)


def run_adaptive_experiment(
    config: ExperimentConfig, rng: np.random.Generator | None = None, rep: int = 0
) -> ExperimentTrace:
    """Run one adaptive estimation experiment.

    Iteration 1 measures the bare field with no control; every later
    iteration applies the control -beta_hat_{k-1} and estimates the residual
    at the planned (or refined) time. A likelihood fit that fails to
    converge aborts the run and returns the trace collected so far with the
    aborted flag set.

    By default the draw stream is (config.seed, rep); pass rng to override.
    """
    if rng is None:
        rng = sample_stream(config.seed, rep)
    beta_true = np.asarray(config.beta_true, dtype=float)
    bound = config.resolved_bound()
    contraction = gain(g0()) / config.n
    v0 = bound * bound
    planned_v_m = v0 * contraction**config.m

    beta_hat = np.zeros(3)
    dE2_plan = 4.0 * v0
    records = []
    aborted = False
    prev_estimate = None
    prev_settings = None  # (residual_true, t, trace_cov, model_magnitude)
    for k in range(1, config.m + 1):
        control = -beta_hat
        residual_true = beta_true + control
        t_plan = optimal_time(dE2_plan)
        t_k = t_plan
        n_k = config.n
        model_mag = math.sqrt(dE2_plan) / 2.0
        try:
            if k >= 2 and config.time_refinement and prev_settings is not None:
                budget = config.n * t_plan
                prev_residual, prev_t, _, prev_mag = prev_settings
                extra = config.resolved_extra()
                if config.backend == "gaussian":
                    second = prev_residual + estimate_step_gaussian(
                        prev_residual, extra, prev_t, rng, prev_mag
                    )
                else:
                    second = estimate_step_bell(
                        prev_residual, max(extra, BELL_MIN_TRIALS), prev_t, prev_estimate, rng
                    )
                omega_tilde = float(np.linalg.norm(prev_estimate - second))
                if omega_tilde > 0.0:
                    t_k = config.resolved_pi0() / omega_tilde
                    n_k = max(1, round(budget / t_k))
                    model_mag = omega_tilde

            counts_out = None
            if config.backend == "gaussian":
                err = estimate_step_gaussian(residual_true, n_k, t_k, rng, model_mag)
                estimate = residual_true + err
                operating = _operating_residual(residual_true, model_mag)
                trace_cov = float(np.trace(iteration_covariance(operating, n_k, t_k).m))
            else:
                bc = sample_counts(bell_probabilities(residual_true, t_k), n_k, rng)
                prior = config.resolved_guess() if k == 1 else np.zeros(3)
                estimate = _fit_bell_counts(np.asarray(bc.counts, dtype=float), t_k, prior)
                trace_cov = None
                counts_out = bc.counts
        except MleNonconvergence:
            aborted = True
            break

        res_sq = float(residual_true @ residual_true)
        if k >= 2 and prev_settings is not None and prev_settings[2] is not None:
            d_factor = res_sq / prev_settings[2]
        else:
            d_factor = 4.0 * res_sq / dE2_plan
        beta_hat = beta_hat + estimate
        records.append(
            IterationOutcome(
                k=k,
                control=tuple(control.tolist()),
                t=float(t_k),
                n_used=int(n_k),
                dE2_planned=dE2_plan,
                residual_norm_sq=res_sq,
                trace_cov=trace_cov,
                d_factor=float(d_factor),
                counts=counts_out,
                beta_hat=tuple(beta_hat.tolist()),
                error_norm=float(np.linalg.norm(beta_hat - beta_true)),
            )
        )
        prev_estimate = estimate
        prev_settings = (residual_true, t_k, trace_cov, model_mag)
        dE2_plan = dE2_plan * contraction

    err = beta_hat - beta_true
    return ExperimentTrace(
        config=config,
        rep=rep,
        iterations=tuple(records),
        beta_hat=tuple(beta_hat.tolist()),
        planned_v_m=planned_v_m,
        realized_sq_error=float(err @ err),
        aborted=aborted,
    )


def run_repetitions(config: ExperimentConfig, reps: int, workers: int = 1) -> list:
    """Run independent repetitions on per-rep streams, order-stable for any
    worker count."""
    if reps < 1:
        raise DomainError("repetition count must be >= 1")
    if workers < 1:
        raise DomainError("worker count must be >= 1")
    if workers == 1:
        return [run_adaptive_experiment(config, rep=r) for r in range(reps)]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_adaptive_experiment, config, None, r) for r in range(reps)]
        return [f.result() for f in futures]
