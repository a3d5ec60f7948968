"""
Model-selection criteria on the deviance scale (smaller is better).

Closed forms: AIC, AICc, BIC, HQ. Bootstrap forms: EIC1-EIC5 under any of the
three mechanisms, BCV and its .632 blend CV632 (nonparametric), BQCV and its
.632 blend QCV632 (parametric). All bootstrap criteria of one candidate and
mechanism are computed from the same B refits.
"""
import dataclasses
import logging
import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from errors import ContractViolation, NonIdentifiable, PenaltyUndefined
from logging_config import LoggingMixin
from models.interfaces import IReplicateGenerator
from models.tobit import CensoredDataset, TobitFit, fit_mle, log_likelihood
from services.bootstrap import (
    BootstrapSpec,
    Mechanism,
    draw_valid_replicate,
    make_generator,
    oob_complement,
)
from services.refit_cache import RefitCache
from services.rng import derive_seed


logger = logging.getLogger(__name__)

IN_SAMPLE_WEIGHT = 0.368
BOOTSTRAP_WEIGHT = 0.632

# Seed channel of the per-candidate refit streams.
CANDIDATE_STREAM = 3


class CriterionFamily(str, Enum):
    AIC = "AIC"
    AICC = "AICc"
    BIC = "BIC"
    HQ = "HQ"
    EIC1 = "EIC1"
    EIC2 = "EIC2"
    EIC3 = "EIC3"
    EIC4 = "EIC4"
    EIC5 = "EIC5"
    BCV = "BCV"
    CV632 = "CV632"
    BQCV = "BQCV"
    QCV632 = "QCV632"

    @property
    def is_eic(self) -> bool:
        return self.value.startswith("EIC")

    @property
    def is_closed_form(self) -> bool:
        return self in (CriterionFamily.AIC, CriterionFamily.AICC, CriterionFamily.BIC, CriterionFamily.HQ)

    @property
    def eic_index(self) -> int:
        return int(self.value[3:])


class BiasConstantMode(str, Enum):
    """``normalized``: B_j = E{D_j} for all j. ``literal``: B2-B5 carry the extra factor 2."""
    NORMALIZED = "normalized"
    LITERAL = "literal"


_FIXED_MECHANISM = {
    CriterionFamily.BCV: Mechanism.NONPARAMETRIC,
    CriterionFamily.CV632: Mechanism.NONPARAMETRIC,
    CriterionFamily.BQCV: Mechanism.PARAMETRIC,
    CriterionFamily.QCV632: Mechanism.PARAMETRIC,
}

_ALIASES = {"632CV": "CV632", "632QCV": "QCV632", "AICC": "AICc"}


@dataclass(frozen=True)
class CriterionId:
    """A criterion family plus, for EIC1-EIC5, its bootstrap mechanism."""
    family: CriterionFamily
    mechanism: Optional[Mechanism] = None

    def __post_init__(self):
        family = CriterionFamily(self.family)
        object.__setattr__(self, "family", family)
        if family.is_eic:
            if self.mechanism is None:
                raise ContractViolation(f"{family.value} needs a bootstrap mechanism")
            object.__setattr__(self, "mechanism", Mechanism.parse(self.mechanism))
        elif self.mechanism is not None:
            raise ContractViolation(f"{family.value} does not take a mechanism")

    @property
    def sampling_mechanism(self) -> Optional[Mechanism]:
        """Mechanism used to draw replicates (fixed for the CV-style criteria)."""
        return self.mechanism or _FIXED_MECHANISM.get(self.family)

    @property
    def is_bootstrap(self) -> bool:
        return not self.family.is_closed_form

    @property
    def label(self) -> str:
        if self.mechanism is None:
            return self.family.value
        return f"{self.family.value}_{self.mechanism.tag}"

    def __str__(self) -> str:
        return self.label

    @classmethod
    def parse(cls, text: str) -> "CriterionId":
        """Parse labels such as ``bic``, ``eic4:pb``, ``EIC2_npp`` or ``632cv``."""
        parts = re.split(r"[:_]", str(text).strip(), maxsplit=1)
        name = parts[0].upper()
        name = _ALIASES.get(name, name)
        by_upper = {family.value.upper(): family for family in CriterionFamily}
        if name.upper() not in by_upper:
            raise ContractViolation(f"Unknown criterion: {text!r}")
        family = by_upper[name.upper()]
        mechanism = Mechanism.parse(parts[1]) if len(parts) > 1 else None
        return cls(family, mechanism)


def _eic_ids():
    for j in range(1, 6):
        for mechanism in (Mechanism.NONPARAMETRIC, Mechanism.PARAMETRIC, Mechanism.HYBRID):
            yield CriterionId(CriterionFamily(f"EIC{j}"), mechanism)


# Row order of the identification tables.
TABLE_CRITERIA: Tuple[CriterionId, ...] = (
    CriterionId(CriterionFamily.AIC),
    CriterionId(CriterionFamily.BIC),
    CriterionId(CriterionFamily.AICC),
    CriterionId(CriterionFamily.HQ),
    *_eic_ids(),
    CriterionId(CriterionFamily.BCV),
    CriterionId(CriterionFamily.CV632),
    CriterionId(CriterionFamily.BQCV),
    CriterionId(CriterionFamily.QCV632),
)


@dataclass(frozen=True)
class CriterionScore:
    """A criterion value; ``bias_se`` is the Monte Carlo SE of the bootstrap term."""
    id: CriterionId
    value: float
    bias_se: Optional[float] = None
    replicates_used: int = 0

    @property
    def skipped(self) -> bool:
        return math.isinf(self.value)

    @classmethod
    def skip(cls, criterion: CriterionId) -> "CriterionScore":
        return cls(id=criterion, value=math.inf)


# Closed-form criteria

def aic(fit: TobitFit) -> float:
    return -2 * fit.loglik + 2 * fit.k


def bic(fit: TobitFit, n: int) -> float:
    if n < 1:
        raise ContractViolation(f"BIC needs n >= 1, got {n}")
    return -2 * fit.loglik + fit.k * math.log(n)


def aicc(fit: TobitFit, n: int) -> float:
    if n <= fit.k + 1:
        raise PenaltyUndefined(f"AICc needs n > k + 1 (n={n}, k={fit.k})")
    return -2 * fit.loglik + 2 * fit.k * n / (n - fit.k - 1)


def hq(fit: TobitFit, n: int) -> float:
    if n < 3:
        raise PenaltyUndefined(f"HQ needs n >= 3, got {n}")
    return -2 * fit.loglik + 2 * fit.k * math.log(math.log(n))


def blend_632(in_sample_deviance: float, bootstrap_value: float) -> float:
    return IN_SAMPLE_WEIGHT * in_sample_deviance + BOOTSTRAP_WEIGHT * bootstrap_value


# Bootstrap evaluations

@dataclass(frozen=True, eq=False)
class ReplicateEvaluations:
    """Per-replicate log-likelihoods of one refit stream.

    boot_at_boot = l(y^b; theta^b), data_at_boot = l(y; theta^b),
    boot_at_orig = l(y^b; theta_hat); oob_at_boot = l(y^-; theta^b) and
    m_star are filled when the stream requires an out-of-bag complement.
    """
    boot_at_boot: np.ndarray
    data_at_boot: np.ndarray
    boot_at_orig: np.ndarray
    oob_at_boot: Optional[np.ndarray] = None
    m_star: Optional[np.ndarray] = None
    redraws: int = 0

    @property
    def size(self) -> int:
        return self.boot_at_boot.size


def mean_and_se(values: np.ndarray) -> Tuple[float, float]:
    """Mean and its Monte Carlo standard error (0 for a single value)."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def collect_replicates(
    data: CensoredDataset,
    fit: Optional[TobitFit],
    spec: BootstrapSpec,
    generator: Optional[IReplicateGenerator] = None,
    require_oob: bool = False,
) -> ReplicateEvaluations:
    """Draw and refit spec.replicates valid replicates; reduce in replicate order."""
    generator = generator or make_generator(spec)

    def evaluate(b: int):
        drawn = draw_valid_replicate(generator, data, fit, b, spec.max_redraws, require_oob)
        sample, params = drawn.replicate.sample, drawn.fit.params
        row = [
            drawn.fit.loglik,
            log_likelihood(data, params),
            log_likelihood(sample, fit.params) if fit is not None else math.nan,
            math.nan,
            math.nan,
            drawn.replicate.redraws_used,
        ]
        if require_oob:
            row[3] = log_likelihood(oob_complement(data, drawn.replicate), params)
            row[4] = drawn.replicate.m_star
        return row

    rows = np.array([evaluate(b) for b in range(spec.replicates)], dtype=float)
    redraws = int(rows[:, 5].sum())
    if redraws:
        logger.debug(f"{spec.mechanism.value} stream used {redraws} redraws over {spec.replicates} replicates")
    return ReplicateEvaluations(
        boot_at_boot=rows[:, 0],
        data_at_boot=rows[:, 1],
        boot_at_orig=rows[:, 2],
        oob_at_boot=rows[:, 3] if require_oob else None,
        m_star=rows[:, 4] if require_oob else None,
        redraws=redraws,
    )


def deviance_differences(which: int, evaluations: ReplicateEvaluations, loglik: float) -> np.ndarray:
    """Per-replicate bracket D_which of the EIC bias term."""
    bb = evaluations.boot_at_boot
    db = evaluations.data_at_boot
    bo = evaluations.boot_at_orig
    if which == 1:
        return 2 * bb - 2 * db
    if which == 2:
        return 2 * loglik - 2 * db
    if which == 3:
        return 2 * bb - 2 * bo
    if which == 4:
        return 2 * bo - 2 * db
    if which == 5:
        return 2 * bb - 2 * loglik
    raise ContractViolation(f"EIC variant must be 1..5, got {which}")


def eic_bias(
    which: int,
    data: CensoredDataset,
    fit: TobitFit,
    spec: BootstrapSpec,
    mode: BiasConstantMode = BiasConstantMode.NORMALIZED,
    generator: Optional[IReplicateGenerator] = None,
    evaluations: Optional[ReplicateEvaluations] = None,
) -> Tuple[float, float]:
    """Bootstrap bias term B_which as (mean, standard error) over the replicates."""
    if which not in (1, 2, 3, 4, 5):
        raise ContractViolation(f"EIC variant must be 1..5, got {which}")
    if evaluations is None:
        if spec.replicates < 2:
            raise ContractViolation("EIC bias needs at least 2 replicates")
        if not fit.converged:
            raise ContractViolation("EIC bias needs a converged fit")
        evaluations = collect_replicates(data, fit, spec, generator)
    mean, se = mean_and_se(deviance_differences(which, evaluations, fit.loglik))
    if BiasConstantMode(mode) is BiasConstantMode.LITERAL and which > 1:
        mean, se = 2 * mean, 2 * se
    return mean, se


def eic(
    which: int,
    data: CensoredDataset,
    fit: TobitFit,
    spec: BootstrapSpec,
    mode: BiasConstantMode = BiasConstantMode.NORMALIZED,
    generator: Optional[IReplicateGenerator] = None,
    evaluations: Optional[ReplicateEvaluations] = None,
) -> CriterionScore:
    mean, se = eic_bias(which, data, fit, spec, mode, generator, evaluations)
    used = evaluations.size if evaluations is not None else spec.replicates
    return CriterionScore(
        id=CriterionId(CriterionFamily(f"EIC{which}"), spec.mechanism),
        value=-2 * fit.loglik + mean,
        bias_se=se,
        replicates_used=used,
    )


def _candidate(data: CensoredDataset, candidate_columns: Optional[Sequence[int]]) -> CensoredDataset:
    return data if candidate_columns is None else data.select_columns(candidate_columns)


def bcv(
    data: CensoredDataset,
    candidate_columns: Optional[Sequence[int]],
    spec: BootstrapSpec,
    fit: Optional[TobitFit] = None,
    generator: Optional[IReplicateGenerator] = None,
    evaluations: Optional[ReplicateEvaluations] = None,
) -> CriterionScore:
    """Out-of-bag deviance of the refit, rescaled by n / m*, averaged over replicates."""
    candidate = _candidate(data, candidate_columns)
    if candidate.n < 2:
        raise ContractViolation("BCV needs n >= 2")
    spec = spec.with_mechanism(Mechanism.NONPARAMETRIC)
    if evaluations is None:
        if fit is None:
            fit = fit_mle(candidate)
        evaluations = collect_replicates(candidate, fit, spec, generator, require_oob=True)
    terms = -2 * evaluations.oob_at_boot * (candidate.n / evaluations.m_star)
    mean, se = mean_and_se(terms)
    return CriterionScore(CriterionId(CriterionFamily.BCV), mean, se, evaluations.size)


def cv632(
    data: CensoredDataset,
    candidate_columns: Optional[Sequence[int]],
    fit: TobitFit,
    spec: BootstrapSpec,
    generator: Optional[IReplicateGenerator] = None,
    evaluations: Optional[ReplicateEvaluations] = None,
) -> CriterionScore:
    cross = bcv(data, candidate_columns, spec, fit, generator, evaluations)
    return CriterionScore(
        CriterionId(CriterionFamily.CV632),
        blend_632(fit.deviance, cross.value),
        BOOTSTRAP_WEIGHT * cross.bias_se,
        cross.replicates_used,
    )


def bqcv(
    data: CensoredDataset,
    candidate_columns: Optional[Sequence[int]],
    fit: TobitFit,
    spec: BootstrapSpec,
    generator: Optional[IReplicateGenerator] = None,
    evaluations: Optional[ReplicateEvaluations] = None,
) -> CriterionScore:
    """Deviance of the full sample at parametric-bootstrap refits."""
    candidate = _candidate(data, candidate_columns)
    spec = spec.with_mechanism(Mechanism.PARAMETRIC)
    if evaluations is None:
        evaluations = collect_replicates(candidate, fit, spec, generator)
    mean, se = mean_and_se(-2 * evaluations.data_at_boot)
    return CriterionScore(CriterionId(CriterionFamily.BQCV), mean, se, evaluations.size)


def qcv632(
    data: CensoredDataset,
    candidate_columns: Optional[Sequence[int]],
    fit: TobitFit,
    spec: BootstrapSpec,
    generator: Optional[IReplicateGenerator] = None,
    evaluations: Optional[ReplicateEvaluations] = None,
) -> CriterionScore:
    quasi = bqcv(data, candidate_columns, fit, spec, generator, evaluations)
    return CriterionScore(
        CriterionId(CriterionFamily.QCV632),
        blend_632(fit.deviance, quasi.value),
        BOOTSTRAP_WEIGHT * quasi.bias_se,
        quasi.replicates_used,
    )


class CandidateScorer(LoggingMixin):
    """Scores candidate column sets of one dataset, caching fits and refit streams.

    Each candidate draws its replicates from its own seed, derived from
    ``spec.base_seed`` and its columns. Within a candidate, EIC1-EIC5 of a
    mechanism, and BQCV with the parametric EICs, reuse the same B refits.
    Thread-safe: families may be scored concurrently.
    """

    def __init__(
        self,
        data: CensoredDataset,
        spec: BootstrapSpec,
        mode: BiasConstantMode = BiasConstantMode.NORMALIZED,
        cache: Optional[RefitCache] = None,
    ):
        self.data = data
        self.spec = spec
        self.mode = BiasConstantMode(mode)
        self.cache = cache or RefitCache()

    def stream_spec(self, columns: Sequence[int], mechanism: Mechanism) -> BootstrapSpec:
        """Bootstrap spec of the candidate's refit stream under ``mechanism``."""
        columns = tuple(int(j) for j in columns)
        seed = derive_seed(self.spec.base_seed, CANDIDATE_STREAM, len(columns), *sorted(columns))
        return dataclasses.replace(self.spec.with_mechanism(mechanism), base_seed=seed)

    def fit(self, columns: Sequence[int]) -> TobitFit:
        """Fit of the candidate; non-convergence is reported as NonIdentifiable."""
        columns = tuple(columns)
        fit = self.cache.get_fit(columns)
        if fit is None:
            fit = fit_mle(self.data.select_columns(columns))
            self.cache.cache_fit(columns, fit)
        if not fit.converged:
            raise NonIdentifiable(
                f"MLE for columns {columns} did not converge "
                f"(gradient norm {fit.gradient_norm:.3e} after {fit.iterations} iterations)"
            )
        return fit

    def evaluations(self, columns: Sequence[int], mechanism: Mechanism, require_oob: bool = False) -> ReplicateEvaluations:
        columns = tuple(columns)
        cached = self.cache.get_replicates(columns, mechanism.value, require_oob)
        if cached is not None:
            return cached
        fit = self.fit(columns)
        evaluations = collect_replicates(
            self.data.select_columns(columns),
            fit,
            self.stream_spec(columns, mechanism),
            require_oob=require_oob,
        )
        self.logger.debug(
            f"Refitted {evaluations.size} {mechanism.value} replicates for columns {columns} "
            f"({evaluations.redraws} redraws)"
        )
        self.cache.cache_replicates(columns, mechanism.value, require_oob, evaluations)
        return evaluations

    def score(self, criterion: CriterionId, columns: Sequence[int]) -> CriterionScore:
        columns = tuple(columns)
        fit = self.fit(columns)
        n = self.data.n
        family = criterion.family

        if family is CriterionFamily.AIC:
            return CriterionScore(criterion, aic(fit))
        if family is CriterionFamily.BIC:
            return CriterionScore(criterion, bic(fit, n))
        if family is CriterionFamily.AICC:
            return CriterionScore(criterion, aicc(fit, n))
        if family is CriterionFamily.HQ:
            return CriterionScore(criterion, hq(fit, n))

        candidate = self.data.select_columns(columns)
        if family.is_eic:
            if self.spec.replicates < 2:
                raise ContractViolation("EIC bias needs at least 2 replicates")
            evaluations = self.evaluations(columns, criterion.mechanism)
            return eic(family.eic_index, candidate, fit, self.spec.with_mechanism(criterion.mechanism),
                       self.mode, evaluations=evaluations)
        if family in (CriterionFamily.BCV, CriterionFamily.CV632):
            evaluations = self.evaluations(columns, Mechanism.NONPARAMETRIC, require_oob=True)
            if family is CriterionFamily.BCV:
                return bcv(candidate, None, self.spec, fit, evaluations=evaluations)
            return cv632(candidate, None, fit, self.spec, evaluations=evaluations)
        evaluations = self.evaluations(columns, Mechanism.PARAMETRIC)
        if family is CriterionFamily.BQCV:
            return bqcv(candidate, None, fit, self.spec, evaluations=evaluations)
        return qcv632(candidate, None, fit, self.spec, evaluations=evaluations)
