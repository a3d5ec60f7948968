"""
Candidate family search: the nested scan F(1) ⊂ F(2) ⊂ ... used by the
simulations and the exhaustive best-subset search used on real data.
"""
import itertools
import logging
import math
from concurrent.futures import Executor
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from errors import FIT_FAILURES, ContractViolation, DegenerateReplicate, NonIdentifiable
from models.tobit import CensoredDataset
from services.bootstrap import BootstrapSpec
from services.criteria import BiasConstantMode, CandidateScorer, CriterionId, CriterionScore


logger = logging.getLogger(__name__)

# Failures that make a family unscorable without aborting the search.
SKIPPABLE = FIT_FAILURES + (DegenerateReplicate,)

MAX_SUBSET_VARIABLES = 20


class Classification(str, Enum):
    UNDER = "under"
    CORRECT = "correct"
    OVER = "over"


@dataclass(frozen=True)
class CandidateFamily:
    """Explanatory design columns of a candidate, plus whether it carries the intercept."""
    columns: Tuple[int, ...]
    intercept: bool = True

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(int(j) for j in self.columns))
        if not self.intercept and self.columns:
            raise ContractViolation("a family without intercept cannot carry explanatory columns")

    @property
    def d(self) -> int:
        return len(self.columns)

    @property
    def k(self) -> int:
        return self.d + int(self.intercept) + 1

    @property
    def label(self) -> str:
        return f"F({self.k})"

    def design_columns(self, data: CensoredDataset) -> Tuple[int, ...]:
        if not self.intercept:
            return ()
        return (data.intercept_column,) + self.columns

    def variable_names(self, data: CensoredDataset) -> Tuple[str, ...]:
        return tuple(data.column_names[j] for j in self.columns)


@dataclass(frozen=True)
class SelectionResult:
    chosen: CandidateFamily
    d_hat: int
    scores: Dict[CandidateFamily, CriterionScore]
    classification: Optional[Classification] = None
    skipped: Tuple[CandidateFamily, ...] = ()


@dataclass(frozen=True)
class SubsetMinimum:
    """Best family of one dimension d, with the number of subsets scored."""
    d: int
    family: CandidateFamily
    score: CriterionScore
    candidates: int


@dataclass(frozen=True)
class SubsetSearchResult:
    criterion: CriterionId
    minima: Dict[int, SubsetMinimum]
    best: SubsetMinimum
    skipped: Tuple[CandidateFamily, ...] = ()

    @property
    def evaluated(self) -> int:
        return sum(m.candidates for m in self.minima.values())


def classify(d_hat: int, d0: int) -> Classification:
    if d_hat < d0:
        return Classification.UNDER
    if d_hat == d0:
        return Classification.CORRECT
    return Classification.OVER


def _require_intercept(data: CensoredDataset) -> None:
    if data.intercept_column is None:
        raise ContractViolation("candidate families need an intercept column in the design")


def nested_families(data: CensoredDataset, max_k: int) -> List[CandidateFamily]:
    """F(1) noise only, F(2) intercept only, F(j + 2) adds the first j explanatory columns."""
    _require_intercept(data)
    explanatory = data.explanatory_columns
    if not 1 <= max_k <= len(explanatory) + 2:
        raise ContractViolation(f"max_k must be in [1, {len(explanatory) + 2}], got {max_k}")
    families = [CandidateFamily((), intercept=False)]
    families += [CandidateFamily(explanatory[:j]) for j in range(max_k - 1)]
    return families


def score_families(
    scorer: CandidateScorer,
    criterion: CriterionId,
    families: Iterable[CandidateFamily],
    executor: Optional[Executor] = None,
) -> Tuple[Dict[CandidateFamily, CriterionScore], Tuple[CandidateFamily, ...]]:
    """Score every family; failed families get +inf and are returned as skipped.

    With an executor the families are scored concurrently; scores keep family order.
    """
    families = list(families)

    def evaluate(family: CandidateFamily) -> CriterionScore:
        try:
            return scorer.score(criterion, family.design_columns(scorer.data))
        except SKIPPABLE as e:
            logger.warning(f"Skipping {family.label} {family.columns} for {criterion.label}: {e}")
            return CriterionScore.skip(criterion)

    mapper = executor.map if executor is not None else map
    scores = dict(zip(families, mapper(evaluate, families)))
    skipped = tuple(f for f in families if scores[f].skipped)
    return scores, skipped


def _argmin(scores: Dict[CandidateFamily, CriterionScore]) -> Optional[CandidateFamily]:
    """Smallest score; ties go to the smaller k, then to the earlier family."""
    chosen = None
    for family in sorted(scores, key=lambda f: f.k):
        value = scores[family].value
        if math.isinf(value):
            continue
        if chosen is None or value < scores[chosen].value:
            chosen = family
    return chosen


def _as_criterion(criterion: Union[CriterionId, str]) -> CriterionId:
    return criterion if isinstance(criterion, CriterionId) else CriterionId.parse(criterion)


def nested_scan(
    data: CensoredDataset,
    criterion: Union[CriterionId, str],
    max_k: int,
    spec: BootstrapSpec,
    d0: Optional[int] = None,
    scorer: Optional[CandidateScorer] = None,
    mode: BiasConstantMode = BiasConstantMode.NORMALIZED,
    executor: Optional[Executor] = None,
) -> SelectionResult:
    """Score F(1)..F(max_k) and pick the minimizing family.

    Raises:
        NonIdentifiable: every family failed to fit.
    """
    criterion = _as_criterion(criterion)
    scorer = scorer or CandidateScorer(data, spec, mode)
    scores, skipped = score_families(scorer, criterion, nested_families(data, max_k), executor)
    chosen = _argmin(scores)
    if chosen is None:
        raise NonIdentifiable(f"no nested family could be scored with {criterion.label}")
    return SelectionResult(
        chosen=chosen,
        d_hat=chosen.d,
        scores=scores,
        classification=classify(chosen.d, d0) if d0 is not None else None,
        skipped=skipped,
    )


def best_subset(
    data: CensoredDataset,
    criterion: Union[CriterionId, str],
    spec: BootstrapSpec,
    d_range: Optional[Sequence[int]] = None,
    scorer: Optional[CandidateScorer] = None,
    mode: BiasConstantMode = BiasConstantMode.NORMALIZED,
    executor: Optional[Executor] = None,
) -> SubsetSearchResult:
    """Exhaustive search over all C(p, d) explanatory subsets for each d, intercept always included."""
    _require_intercept(data)
    criterion = _as_criterion(criterion)
    explanatory = data.explanatory_columns
    p = len(explanatory)
    if p > MAX_SUBSET_VARIABLES:
        raise ContractViolation(f"best subset search supports at most {MAX_SUBSET_VARIABLES} variables, got {p}")
    d_values = sorted(set(range(p + 1) if d_range is None else (int(d) for d in d_range)))
    if not d_values or d_values[0] < 0 or d_values[-1] > p:
        raise ContractViolation(f"d_range must lie within [0, {p}]")

    scorer = scorer or CandidateScorer(data, spec, mode)
    minima: Dict[int, SubsetMinimum] = {}
    skipped: List[CandidateFamily] = []
    for d in d_values:
        families = [CandidateFamily(cols) for cols in itertools.combinations(explanatory, d)]
        scores, failed = score_families(scorer, criterion, families, executor)
        skipped.extend(failed)
        chosen = _argmin(scores)
        if chosen is None:
            logger.warning(f"No subset of size {d} could be scored with {criterion.label}")
            continue
        minima[d] = SubsetMinimum(d, chosen, scores[chosen], len(families))
        logger.debug(f"{criterion.label} d={d}: {len(families)} subsets, min {scores[chosen].value:.6g}")

    if not minima:
        raise NonIdentifiable(f"no candidate subset could be scored with {criterion.label}")
    best = min(minima.values(), key=lambda m: (m.score.value, m.d))
    return SubsetSearchResult(criterion, minima, best, tuple(skipped))
