"""
Models package for tobitsel.
Contains the Tobit model and the bootstrap replicate interface.
"""

from .tobit import (
    CensoredDataset,
    TobitParams,
    TobitFit,
    log_likelihood,
    log_likelihood_gradient,
    fit_mle,
    censoring_probability,
    inverse_mills,
)

from .interfaces import (
    BootstrapReplicate,
    IReplicateGenerator,
)

__all__ = [
    # Tobit model
    'CensoredDataset',
    'TobitParams',
    'TobitFit',
    'log_likelihood',
    'log_likelihood_gradient',
    'fit_mle',
    'censoring_probability',
    'inverse_mills',

    # Interfaces
    'BootstrapReplicate',
    'IReplicateGenerator',
]
