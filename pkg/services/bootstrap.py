"""
Bootstrap training samples for the Tobit model.

Three mechanisms: nonparametric (resample observation pairs), parametric
(simulate responses from the fitted model on the original design) and hybrid
(simulate responses on resampled design rows). Replicate r of a spec draws
from substreams keyed by (base_seed, r) only.
"""
import dataclasses
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from config import BootstrapConfig, get_config
from errors import FIT_FAILURES, ContractViolation, DegenerateReplicate, EmptyComplement
from models.interfaces import BootstrapReplicate, IReplicateGenerator
from models.tobit import CensoredDataset, TobitFit, fit_mle
from services.rng import derive_seed, standard_normal, substream, uniform_indices


logger = logging.getLogger(__name__)

# Substream channels within one replicate attempt.
ROWS = 0
NOISE = 1


class Mechanism(str, Enum):
    NONPARAMETRIC = "nonparametric"
    PARAMETRIC = "parametric"
    HYBRID = "hybrid"

    @property
    def tag(self) -> str:
        """Short tag used in criterion labels."""
        return _TAGS[self]

    @classmethod
    def parse(cls, value) -> "Mechanism":
        if isinstance(value, Mechanism):
            return value
        text = str(value).strip().lower()
        for mechanism in cls:
            if text in (mechanism.value, mechanism.tag):
                return mechanism
        raise ContractViolation(f"Unknown bootstrap mechanism: {value!r}")


_TAGS = {
    Mechanism.NONPARAMETRIC: "np",
    Mechanism.PARAMETRIC: "pb",
    Mechanism.HYBRID: "npp",
}


@dataclass(frozen=True)
class BootstrapSpec:
    """Mechanism, replicate count B, redraw budget and base seed."""
    mechanism: Mechanism = Mechanism.NONPARAMETRIC
    replicates: int = 200
    max_redraws: int = 100
    base_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mechanism", Mechanism.parse(self.mechanism))
        if self.replicates < 1:
            raise ContractViolation(f"replicates must be >= 1, got {self.replicates}")
        if self.max_redraws < 0:
            raise ContractViolation(f"max_redraws must be >= 0, got {self.max_redraws}")
        if not 0 <= int(self.base_seed) < 2 ** 64:
            raise ContractViolation(f"base_seed must be a 64-bit unsigned integer, got {self.base_seed}")

    def with_mechanism(self, mechanism) -> "BootstrapSpec":
        return dataclasses.replace(self, mechanism=Mechanism.parse(mechanism))

    @classmethod
    def from_config(cls, settings: Optional[BootstrapConfig] = None) -> "BootstrapSpec":
        settings = settings or get_config().bootstrap
        return cls(
            mechanism=Mechanism.parse(settings.mechanism),
            replicates=settings.replicates,
            max_redraws=settings.max_redraws,
            base_seed=settings.base_seed,
        )


def replicate_from_indices(data: CensoredDataset, indices) -> BootstrapReplicate:
    """Pairs-resampled replicate built from explicit row draws."""
    indices = np.asarray(indices, dtype=np.intp).reshape(-1)
    if indices.size != data.n or np.any(indices < 0) or np.any(indices >= data.n):
        raise ContractViolation(f"need {data.n} row indices in [0, {data.n})")
    indices.setflags(write=False)
    oob = np.setdiff1d(np.arange(data.n, dtype=np.intp), indices)
    oob.setflags(write=False)
    return BootstrapReplicate(sample=data.take(indices), source_indices=indices, oob_indices=oob)


def _check_fit(data: CensoredDataset, fit: TobitFit) -> None:
    if fit is None or fit.params.q != data.q:
        raise ContractViolation("parametric draws need a fit matching the design columns")


def _censored_responses(design: np.ndarray, fit: TobitFit, rng: np.random.Generator) -> np.ndarray:
    latent = design @ fit.params.beta + fit.params.sigma * standard_normal(rng, design.shape[0])
    return np.where(latent > 0.0, latent, 0.0)


def _nonparametric_draw(data: CensoredDataset, seed: int, attempt: int) -> BootstrapReplicate:
    rows = uniform_indices(substream(seed, ROWS, attempt), data.n, data.n)
    return replicate_from_indices(data, rows)


def _parametric_draw(data: CensoredDataset, fit: TobitFit, seed: int, attempt: int) -> BootstrapReplicate:
    responses = _censored_responses(data.design, fit, substream(seed, NOISE, attempt))
    return BootstrapReplicate(sample=data.with_responses(responses))


def _hybrid_draw(data: CensoredDataset, fit: TobitFit, seed: int, attempt: int) -> BootstrapReplicate:
    rows = uniform_indices(substream(seed, ROWS, attempt), data.n, data.n)
    rows.setflags(write=False)
    design = data.design[rows]
    responses = _censored_responses(design, fit, substream(seed, NOISE, attempt))
    sample = CensoredDataset(
        responses=responses,
        design=design,
        column_names=data.column_names,
        intercept_column=data.intercept_column,
    )
    oob = np.setdiff1d(np.arange(data.n, dtype=np.intp), rows)
    oob.setflags(write=False)
    return BootstrapReplicate(sample=sample, source_indices=rows, oob_indices=oob)


def _first_uncensored(draw, max_redraws: Optional[int]) -> BootstrapReplicate:
    max_redraws = get_config().bootstrap.max_redraws if max_redraws is None else max_redraws
    for attempt in range(max_redraws + 1):
        replicate = draw(attempt)
        if replicate.sample.u > 0:
            return dataclasses.replace(replicate, redraws_used=attempt)
    raise DegenerateReplicate(f"every draw was fully censored after {max_redraws} redraws", max_redraws)


def resample_nonparametric(data: CensoredDataset, seed: int) -> BootstrapReplicate:
    """Draw n (response, design-row) pairs uniformly with replacement."""
    return _nonparametric_draw(data, seed, 0)


def generate_parametric(data: CensoredDataset, fit: TobitFit, seed: int,
                        max_redraws: Optional[int] = None) -> BootstrapReplicate:
    """Responses y* = x'beta_hat + eps, eps ~ N(0, sigma_hat^2), censored at zero, on the original design."""
    _check_fit(data, fit)
    return _first_uncensored(lambda attempt: _parametric_draw(data, fit, seed, attempt), max_redraws)


def generate_hybrid(data: CensoredDataset, fit: TobitFit, seed: int,
                    max_redraws: Optional[int] = None) -> BootstrapReplicate:
    """Parametric responses on design rows resampled with replacement."""
    _check_fit(data, fit)
    return _first_uncensored(lambda attempt: _hybrid_draw(data, fit, seed, attempt), max_redraws)


def oob_complement(data: CensoredDataset, replicate: BootstrapReplicate) -> CensoredDataset:
    """Rows never drawn into the replicate."""
    if replicate.source_indices is None:
        raise ContractViolation("replicate has no source indices")
    if replicate.m_star == 0:
        raise EmptyComplement("every observation was drawn into the replicate")
    return data.take(replicate.oob_indices)


class NonparametricGenerator(IReplicateGenerator):
    def __init__(self, base_seed: int):
        self.base_seed = base_seed

    def draw(self, data, fit, replicate, attempt=0):
        return _nonparametric_draw(data, derive_seed(self.base_seed, replicate), attempt)


class ParametricGenerator(IReplicateGenerator):
    def __init__(self, base_seed: int):
        self.base_seed = base_seed

    def draw(self, data, fit, replicate, attempt=0):
        _check_fit(data, fit)
        return _parametric_draw(data, fit, derive_seed(self.base_seed, replicate), attempt)


class HybridGenerator(IReplicateGenerator):
    def __init__(self, base_seed: int):
        self.base_seed = base_seed

    def draw(self, data, fit, replicate, attempt=0):
        _check_fit(data, fit)
        return _hybrid_draw(data, fit, derive_seed(self.base_seed, replicate), attempt)


_GENERATORS = {
    Mechanism.NONPARAMETRIC: NonparametricGenerator,
    Mechanism.PARAMETRIC: ParametricGenerator,
    Mechanism.HYBRID: HybridGenerator,
}


def make_generator(spec: BootstrapSpec) -> IReplicateGenerator:
    return _GENERATORS[spec.mechanism](spec.base_seed)


@dataclass(frozen=True)
class RefittedReplicate:
    """A valid replicate together with its refit."""
    replicate: BootstrapReplicate
    fit: TobitFit


def draw_valid_replicate(
    generator: IReplicateGenerator,
    data: CensoredDataset,
    fit: Optional[TobitFit],
    replicate: int,
    max_redraws: int,
    require_oob: bool = False,
) -> RefittedReplicate:
    """Draw replicate ``replicate`` and refit it, redrawing degenerate attempts.

    An attempt is degenerate when it is fully censored, when its refit fails or
    does not converge, or (with ``require_oob``) when its complement is empty.
    """
    start = fit.params if fit is not None else None
    for attempt in range(max_redraws + 1):
        candidate = generator.draw(data, fit, replicate, attempt)
        if require_oob and candidate.m_star == 0:
            continue
        if candidate.sample.u == 0:
            continue
        try:
            refit = fit_mle(candidate.sample, start=start)
        except FIT_FAILURES as e:
            logger.debug(f"Replicate {replicate} attempt {attempt} refit failed: {e}")
            continue
        if not refit.converged:
            logger.debug(f"Replicate {replicate} attempt {attempt} refit did not converge")
            continue
        if attempt:
            logger.debug(f"Replicate {replicate} valid after {attempt} redraws")
        return RefittedReplicate(dataclasses.replace(candidate, redraws_used=attempt), refit)
    raise DegenerateReplicate(
        f"replicate {replicate} stayed degenerate after {max_redraws} redraws", max_redraws
    )
