"""
Monte Carlo identification experiments for the Tobit model.

Covariates are equicorrelated normals, the response follows the censored
linear model with beta = (beta0, 0.1, 0.2, 0.3, 0.4, 0, 0, 0, 0), and each run
records which dimension every criterion selects along the nested scan.
"""
import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from multiprocessing.context import BaseContext
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from config import get_config
from errors import ContractViolation, DomainError, NonIdentifiable
from logging_config import log_performance
from models.tobit import CensoredDataset
from services.bootstrap import BootstrapSpec, Mechanism
from services.criteria import TABLE_CRITERIA, BiasConstantMode, CandidateScorer, CriterionId
from services.rng import derive_seed, standard_normal, substream
from services.selection import Classification, nested_scan


logger = logging.getLogger(__name__)

DEFAULT_SLOPES = (0.1, 0.2, 0.3, 0.4)

# Substream channels of one Monte Carlo run.
COVARIATES = 0
NOISE = 1
BOOTSTRAP = 2


def equicorrelation(p: int, rho: float) -> np.ndarray:
    """p x p matrix with unit diagonal and rho off the diagonal."""
    sigma = np.full((p, p), float(rho))
    np.fill_diagonal(sigma, 1.0)
    return sigma


def marginal_variance(beta_sub, sigma_sub, sigma2: float) -> float:
    """Var(x'beta + eps) = beta' Sigma beta + sigma2."""
    beta_sub = np.asarray(beta_sub, dtype=float).reshape(-1)
    sigma_sub = np.asarray(sigma_sub, dtype=float)
    if beta_sub.size == 0:
        return float(sigma2)
    if sigma_sub.shape != (beta_sub.size, beta_sub.size):
        raise ContractViolation(f"Sigma must be {beta_sub.size} x {beta_sub.size}, got {sigma_sub.shape}")
    if not np.allclose(sigma_sub, sigma_sub.T):
        raise DomainError("Sigma must be symmetric")
    try:
        np.linalg.cholesky(sigma_sub)
    except np.linalg.LinAlgError as e:
        raise DomainError("Sigma is not positive definite") from e
    return float(beta_sub @ sigma_sub @ beta_sub) + float(sigma2)


def solve_intercept(target_rate: float, beta_sub, sigma_sub, sigma2: float) -> float:
    """beta0 with P(N(beta0, v) < 0) = target_rate, v the marginal variance."""
    if not 0.0 < target_rate < 1.0:
        raise ContractViolation(f"target censoring rate must be in (0, 1), got {target_rate}")
    v = marginal_variance(beta_sub, sigma_sub, sigma2)
    return -math.sqrt(v) * float(special.ndtri(target_rate)) + 0.0


@dataclass(frozen=True)
class SimulationConfig:
    """One Monte Carlo design at a single sample size.

    ``runs`` is the number of Monte Carlo runs M and ``replicates`` the
    bootstrap size B of every bootstrap criterion within a run.
    """
    n: int
    beta_true: Tuple[float, ...]
    sigma2: float = 1.0
    rho: float = 0.3
    runs: int = 500
    replicates: int = 200
    criteria: Tuple[CriterionId, ...] = TABLE_CRITERIA
    seed: int = 20190601
    max_k: Optional[int] = None
    max_redraws: int = 100
    bias_constant_mode: BiasConstantMode = BiasConstantMode.NORMALIZED
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "beta_true", tuple(float(b) for b in self.beta_true))
        object.__setattr__(self, "criteria", tuple(
            c if isinstance(c, CriterionId) else CriterionId.parse(c) for c in self.criteria))
        object.__setattr__(self, "bias_constant_mode", BiasConstantMode(self.bias_constant_mode))
        if self.n < 2:
            raise ContractViolation(f"n must be >= 2, got {self.n}")
        if len(self.beta_true) < 1:
            raise ContractViolation("beta_true needs at least the intercept")
        if not self.sigma2 > 0:
            raise DomainError(f"sigma2 must be positive, got {self.sigma2}")
        if self.p > 1 and not self.rho > -1.0 / (self.p - 1):
            raise DomainError(f"rho={self.rho} makes the {self.p}-variable equicorrelation matrix singular")
        if self.runs < 1 or self.replicates < 1:
            raise ContractViolation("runs and replicates must be >= 1")
        if not self.criteria:
            raise ContractViolation("at least one criterion is required")
        if self.max_k is not None and not 1 <= self.max_k <= self.p + 2:
            raise ContractViolation(f"max_k must be in [1, {self.p + 2}]")

    @property
    def p(self) -> int:
        return len(self.beta_true) - 1

    @property
    def d0(self) -> int:
        return sum(1 for b in self.beta_true[1:] if b != 0.0)

    @property
    def scan_max_k(self) -> int:
        return self.max_k if self.max_k is not None else self.p + 2

    @property
    def covariance(self) -> np.ndarray:
        return equicorrelation(self.p, self.rho)

    @property
    def censoring_rate(self) -> float:
        """Model-implied marginal censoring rate."""
        v = marginal_variance(self.beta_true[1:], self.covariance, self.sigma2)
        return float(special.ndtr(-self.beta_true[0] / math.sqrt(v)))

    def with_n(self, n: int) -> "SimulationConfig":
        return dataclasses.replace(self, n=n)

    def bootstrap_spec(self, run_index: int) -> BootstrapSpec:
        return BootstrapSpec(
            mechanism=Mechanism.NONPARAMETRIC,
            replicates=self.replicates,
            max_redraws=self.max_redraws,
            base_seed=derive_seed(self.seed, run_index, BOOTSTRAP),
        )

    @classmethod
    def build(
        cls,
        n: int,
        beta0: Optional[float] = None,
        target_censoring: Optional[float] = None,
        p: int = 8,
        slopes: Sequence[float] = DEFAULT_SLOPES,
        rho: float = 0.3,
        sigma2: float = 1.0,
        **kwargs,
    ) -> "SimulationConfig":
        """Design with the given leading slopes padded by zeros to p variables.

        Exactly one of ``beta0`` and ``target_censoring`` must be given.
        """
        if (beta0 is None) == (target_censoring is None):
            raise ContractViolation("give exactly one of beta0 and target_censoring")
        if len(slopes) > p:
            raise ContractViolation(f"{len(slopes)} slopes for p={p}")
        beta_sub = tuple(slopes) + (0.0,) * (p - len(slopes))
        if beta0 is None:
            beta0 = solve_intercept(target_censoring, beta_sub, equicorrelation(p, rho), sigma2)
        return cls(n=n, beta_true=(float(beta0),) + beta_sub, rho=rho, sigma2=sigma2, **kwargs)


@dataclass(frozen=True)
class TablePreset:
    number: int
    censoring_rate: float
    beta0: float
    n_grid: Tuple[int, ...] = (100, 120, 150, 200)


# Published designs; beta0 is the two-decimal caption value.
TABLE_PRESETS: Dict[int, TablePreset] = {
    1: TablePreset(1, 0.75, -0.84),
    2: TablePreset(2, 0.70, -0.65),
    3: TablePreset(3, 0.60, -0.28),
    4: TablePreset(4, 0.50, 0.0),
}


def preset_config(table: int, n: int, **kwargs) -> SimulationConfig:
    if table not in TABLE_PRESETS:
        raise ContractViolation(f"unknown table preset {table}; choose from {sorted(TABLE_PRESETS)}")
    defaults = get_config().simulation
    kwargs.setdefault("p", defaults.p)
    kwargs.setdefault("rho", defaults.rho)
    kwargs.setdefault("sigma2", defaults.sigma2)
    return SimulationConfig.build(n=n, beta0=TABLE_PRESETS[table].beta0, **kwargs)


def gen_dataset(config: SimulationConfig, run_index: int) -> CensoredDataset:
    """Simulated dataset of run ``run_index``; intercept in column 0."""
    p, n = config.p, config.n
    beta = np.asarray(config.beta_true)
    design = np.ones((n, p + 1))
    if p:
        factor = np.linalg.cholesky(config.covariance)
        z = standard_normal(substream(config.seed, run_index, COVARIATES), (n, p))
        design[:, 1:] = z @ factor.T
    noise = math.sqrt(config.sigma2) * standard_normal(substream(config.seed, run_index, NOISE), n)
    latent = design @ beta + noise
    return CensoredDataset(
        responses=np.where(latent > 0.0, latent, 0.0),
        design=design,
        column_names=("const",) + tuple(f"x{j}" for j in range(1, p + 1)),
        intercept_column=0,
    )


@dataclass(frozen=True)
class CriterionCounts:
    under: int = 0
    correct: int = 0
    over: int = 0

    @property
    def total(self) -> int:
        return self.under + self.correct + self.over

    @property
    def risk(self) -> float:
        """Probability of correct identification, correct / M."""
        return self.correct / self.total if self.total else math.nan

    def add(self, classification: Classification) -> "CriterionCounts":
        return dataclasses.replace(
            self, **{classification.value: getattr(self, classification.value) + 1})


@dataclass(frozen=True)
class IdentificationTable:
    """Under/correct/over counts per criterion over the completed runs."""
    n: int
    d0: int
    runs: int
    counts: Dict[str, CriterionCounts]
    failed_runs: int = 0
    skipped_families: int = 0
    mean_censoring: float = math.nan

    def risk(self, label: str) -> float:
        return self.counts[label].risk


@dataclass(frozen=True)
class RunOutcome:
    run_index: int
    classifications: Dict[str, Classification] = field(default_factory=dict)
    failed: bool = False
    skipped_families: int = 0
    censoring_rate: float = math.nan


def simulate_run(config: SimulationConfig, run_index: int) -> RunOutcome:
    """Generate one dataset and run the nested scan for every criterion."""
    data = gen_dataset(config, run_index)
    spec = config.bootstrap_spec(run_index)
    scorer = CandidateScorer(data, spec, config.bias_constant_mode)
    classifications: Dict[str, Classification] = {}
    skipped = 0
    for criterion in config.criteria:
        try:
            result = nested_scan(data, criterion, config.scan_max_k, spec, d0=config.d0, scorer=scorer)
        except NonIdentifiable as e:
            logger.warning(f"Run {run_index} failed for {criterion.label}: {e}")
            return RunOutcome(run_index, failed=True, censoring_rate=data.censoring_rate)
        classifications[criterion.label] = result.classification
        skipped += len(result.skipped)
    return RunOutcome(run_index, classifications, False, skipped, data.censoring_rate)


def _simulate_run_star(args) -> RunOutcome:
    return simulate_run(*args)


def _apply_settings(settings: Dict[str, Any]) -> None:
    """Worker initializer: spawned workers start from defaults and environment only."""
    get_config().update_from_dict(settings)


@log_performance("Monte Carlo simulation")
def monte_carlo(config: SimulationConfig, mp_context: Optional[BaseContext] = None) -> IdentificationTable:
    """Run M replications and tabulate selections against d0; reduced by run index.

    With ``config.workers > 1`` the runs go to a process pool whose workers
    receive the current application settings.
    """
    logger.info(
        f"Monte Carlo n={config.n}, M={config.runs}, B={config.replicates}, "
        f"{len(config.criteria)} criteria, {config.workers} worker(s)"
    )
    jobs = [(config, r) for r in range(config.runs)]
    if config.workers > 1:
        pool = ProcessPoolExecutor(
            max_workers=config.workers,
            mp_context=mp_context,
            initializer=_apply_settings,
            initargs=(get_config().to_dict(),),
        )
        with pool:
            outcomes = list(pool.map(_simulate_run_star, jobs, chunksize=max(1, config.runs // (4 * config.workers))))
    else:
        outcomes = []
        step = max(1, config.runs // 10)
        for job in jobs:
            outcomes.append(simulate_run(*job))
            if len(outcomes) % step == 0:
                logger.info(f"n={config.n}: {len(outcomes)}/{config.runs} runs done")

    outcomes.sort(key=lambda o: o.run_index)
    counts = {c.label: CriterionCounts() for c in config.criteria}
    completed = [o for o in outcomes if not o.failed]
    for outcome in completed:
        for label, classification in outcome.classifications.items():
            counts[label] = counts[label].add(classification)

    failed = len(outcomes) - len(completed)
    if failed:
        logger.warning(f"n={config.n}: {failed} of {config.runs} runs failed and were excluded")
    return IdentificationTable(
        n=config.n,
        d0=config.d0,
        runs=len(completed),
        counts=counts,
        failed_runs=failed,
        skipped_families=sum(o.skipped_families for o in completed),
        mean_censoring=float(np.mean([o.censoring_rate for o in outcomes])),
    )


# Plotted first, the rest follow in table order.
_RISK_FIRST = ("BIC", "BCV", "CV632")


def risk_curve(tables: Sequence[IdentificationTable]) -> Dict[str, List[Tuple[int, float]]]:
    """Risk-versus-n series for every criterion shared by the tables."""
    if not tables:
        return {}
    labels = list(tables[0].counts)
    for table in tables[1:]:
        if list(table.counts) != labels:
            raise ContractViolation("risk curves need tables over the same criteria")
    ordered = [l for l in _RISK_FIRST if l in labels] + [l for l in labels if l not in _RISK_FIRST]
    return {label: [(t.n, t.risk(label)) for t in tables] for label in ordered}
