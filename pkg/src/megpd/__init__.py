"""Threshold-free modelling of multivariate extremes.

A library and command-line tool for the extended generalized Pareto family
(all of the data informs the fit; no threshold selection) and its
multivariate extension built from a radial law with a semi-parametric
Bernstein-polynomial density and a Gaussian angular law whose scale varies
smoothly with the radius.

Layout
------
``gpd``       unit-scale generalized Pareto primitives, numerically hardened
``egpd``      extended family: carrier densities on (0,1), simulation,
              reciprocal-transform parameters
``bernstein`` Bernstein-polynomial density estimation on (0,1)
``radial``    step 1: semi-parametric fit of the radial law
``angular``   polar coordinates, the joint density, simulation, chi
``splines``   step 2: penalized-spline heteroscedastic angular fit
``copulas``   reference copula simulators and ground-truth chi curves
``data``      csv ingestion and invertible preprocessing
``modelfile`` versioned, lossless model persistence
``pipeline``  end-to-end fit, parametric bootstrap, diagnostics
``cli``       command-line entry point (``megpd ...``)
"""

from .angular import (EquicorrMatrix, MegpdModel, PolarSample, chi_coefficient,
                      from_polar, megpd_pdf, megpd_simulate, risk_functional,
                      to_polar)
from .bernstein import BernsteinDensity, default_degree, fit_bernstein
from .copulas import (CopulaSpec, compose_with_margins, simulate_copula,
                      true_chi_curve)
from .data import (DataError, Dataset, apply_preprocess, inverse_preprocess,
                   load_csv, preprocess)
from .egpd import (EgpdParams, UniformDensity, UnitDensity, egpd_cdf,
                   egpd_inverse_params, egpd_pdf, egpd_quantile, egpd_simulate)
from .gpd import gpd_cdf, gpd_logpdf, gpd_pdf, gpd_quantile, gpd_sf
from .modelfile import ModelFile
from .pipeline import (BootstrapResult, FitConfig, PipelineError, diagnostics,
                       fit_pipeline, parametric_bootstrap)
from .radial import RadialFit, fit_radial, pseudo_uniform, radial_loglik
from .splines import (AngularFit, DeltaFunction, SplineBasis, basis_from_knots,
                      build_basis, constant_delta, fit_angular, fit_gamma,
                      penalized_loglik, select_lambda)

__version__ = "0.1.0"

__all__ = [
    "AngularFit", "BernsteinDensity", "BootstrapResult", "CopulaSpec",
    "DataError", "Dataset", "DeltaFunction", "EgpdParams", "EquicorrMatrix",
    "FitConfig", "MegpdModel", "ModelFile", "PipelineError", "PolarSample",
    "RadialFit", "SplineBasis", "UniformDensity", "UnitDensity",
    "apply_preprocess", "basis_from_knots", "build_basis", "chi_coefficient",
    "compose_with_margins", "constant_delta", "default_degree", "diagnostics",
    "egpd_cdf", "egpd_inverse_params", "egpd_pdf", "egpd_quantile",
    "egpd_simulate", "fit_angular", "fit_bernstein", "fit_gamma",
    "fit_pipeline", "fit_radial", "from_polar", "gpd_cdf", "gpd_logpdf",
    "gpd_pdf", "gpd_quantile", "gpd_sf", "inverse_preprocess", "load_csv",
    "megpd_pdf", "megpd_simulate", "parametric_bootstrap", "penalized_loglik",
    "preprocess", "pseudo_uniform", "radial_loglik", "risk_functional",
    "select_lambda", "simulate_copula", "to_polar", "true_chi_curve",
    "__version__",
]
