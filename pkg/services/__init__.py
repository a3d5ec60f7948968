"""
Services package for tobitsel.
Bootstrap generation, selection criteria, model search, simulation and I/O.
"""

from .bootstrap import (
    BootstrapSpec,
    Mechanism,
    resample_nonparametric,
    generate_parametric,
    generate_hybrid,
    oob_complement,
    make_generator,
)

from .refit_cache import (
    RefitCache,
    LRUCache,
    CacheEntry,
)

from .criteria import (
    CriterionFamily,
    CriterionId,
    CriterionScore,
    BiasConstantMode,
    CandidateScorer,
    TABLE_CRITERIA,
    aic,
    bic,
    aicc,
    hq,
    eic_bias,
    eic,
    bcv,
    cv632,
    bqcv,
    qcv632,
)

from .selection import (
    CandidateFamily,
    Classification,
    SelectionResult,
    nested_scan,
    best_subset,
    classify,
)

from .simulation import (
    SimulationConfig,
    IdentificationTable,
    TABLE_PRESETS,
    marginal_variance,
    solve_intercept,
    gen_dataset,
    monte_carlo,
    risk_curve,
)

from .data_io import (
    ingest_csv,
    emit_histogram,
    make_affairs_like,
)

from .workflows import (
    RunConfig,
    run_fit,
    run_select,
    run_simulate,
    run_summarize,
)

__all__ = [
    # Bootstrap
    'BootstrapSpec',
    'Mechanism',
    'resample_nonparametric',
    'generate_parametric',
    'generate_hybrid',
    'oob_complement',
    'make_generator',

    # Refit cache
    'RefitCache',
    'LRUCache',
    'CacheEntry',

    # Criteria
    'CriterionFamily',
    'CriterionId',
    'CriterionScore',
    'BiasConstantMode',
    'CandidateScorer',
    'TABLE_CRITERIA',
    'aic',
    'bic',
    'aicc',
    'hq',
    'eic_bias',
    'eic',
    'bcv',
    'cv632',
    'bqcv',
    'qcv632',

    # Selection
    'CandidateFamily',
    'Classification',
    'SelectionResult',
    'nested_scan',
    'best_subset',
    'classify',

    # Simulation
    'SimulationConfig',
    'IdentificationTable',
    'TABLE_PRESETS',
    'marginal_variance',
    'solve_intercept',
    'gen_dataset',
    'monte_carlo',
    'risk_curve',

    # Data and workflows
    'ingest_csv',
    'emit_histogram',
    'make_affairs_like',
    'RunConfig',
    'run_fit',
    'run_select',
    'run_simulate',
    'run_summarize',
]
