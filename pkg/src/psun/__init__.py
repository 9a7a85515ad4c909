"""Perturbed unified skew-normal (pSUN) distributions and Bayesian binary regression.

The pSUN family conjugates with probit and logit likelihoods under Gaussian,
scale-mixture-of-Gaussian and Dirichlet-Laplace priors; this package provides
its density, normalising constant, a blocked Gibbs sampler, the regression
posteriors, marginal likelihoods and a coverage simulation study.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .core import (
    ChainConfig,
    DrawMatrix,
    GibbsSampler,
    PsunParams,
    log_psi_estimate,
    psi_estimate,
    psun_log_density,
    sample_chain,
    sample_chains,
)
from .diagnostics import acf, ess, quantiles, summarize
from .mixing import (
    DirichletLaplace,
    Exponential,
    InverseGamma,
    LogisticKolmogorov,
    PointMass,
    ProductLaw,
)
from .regression import (
    BinaryDesign,
    PriorSpec,
    build_posterior,
    fit_exact_iid,
    fit_gibbs,
    log_marginal_likelihood,
    prior_from_recipe,
    standardize,
)
from .simstudy import StudyConfig, run_study

__all__ = [
    "ChainConfig", "DrawMatrix", "GibbsSampler", "PsunParams", "log_psi_estimate",
    "psi_estimate", "psun_log_density", "sample_chain", "sample_chains", "acf", "ess",
    "quantiles", "summarize", "DirichletLaplace", "Exponential", "InverseGamma",
    "LogisticKolmogorov", "PointMass", "ProductLaw", "BinaryDesign", "PriorSpec",
    "build_posterior", "fit_exact_iid", "fit_gibbs", "log_marginal_likelihood",
    "prior_from_recipe", "standardize", "StudyConfig", "run_study",
]
