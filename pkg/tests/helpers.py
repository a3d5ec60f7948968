"""
Test doubles and small dataset builders.
"""
import numpy as np

from models.interfaces import BootstrapReplicate, IReplicateGenerator
from models.tobit import CensoredDataset, TobitFit, TobitParams
from services.bootstrap import replicate_from_indices


def make_fit(loglik: float, k: int) -> TobitFit:
    """Fit record with the given log-likelihood and dimension (parameters unused)."""
    return TobitFit(
        params=TobitParams(beta=np.zeros(max(k - 1, 0)), sigma=1.0),
        loglik=loglik,
        k=k,
        converged=True,
        iterations=0,
        gradient_norm=0.0,
    )


def censored_sample(n: int = 80, seed: int = 7, beta=(0.2, 1.0, -0.5)) -> CensoredDataset:
    """Intercept-first design with standard normal covariates and unit noise."""
    rng = np.random.default_rng(seed)
    beta = np.asarray(beta, dtype=float)
    design = np.column_stack([np.ones(n), rng.standard_normal((n, beta.size - 1))])
    latent = design @ beta + rng.standard_normal(n)
    return CensoredDataset(
        responses=np.where(latent > 0, latent, 0.0),
        design=design,
        column_names=("const",) + tuple(f"x{j}" for j in range(1, beta.size)),
        intercept_column=0,
    )


class IdentityGenerator(IReplicateGenerator):
    """Returns the data itself as every replicate."""

    def draw(self, data, fit, replicate, attempt=0):
        return BootstrapReplicate(sample=data)


class ScriptedGenerator(IReplicateGenerator):
    """Pairs resampling from a script; draw (b, attempt) uses rows[b * per_replicate + attempt]."""

    def __init__(self, rows, per_replicate: int):
        self.rows = rows
        self.per_replicate = per_replicate

    def draw(self, data, fit, replicate, attempt=0):
        return replicate_from_indices(data, self.rows[replicate * self.per_replicate + attempt])
