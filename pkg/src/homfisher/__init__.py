"""Classical and quantum Fisher information for Hong-Ou-Mandel delay estimation.

The package models two-photon interference with finite visibility, photon
loss, bucket or number-resolving detectors and finite detector time bins,
and provides Fisher-information analysis, Monte Carlo simulation and
maximum-likelihood estimation on top of that model.
"""

__version__ = "0.1.0"

from .binned import (BinningConfig, DetectorConfig, Measurement, Outcome, OutcomeDistribution, Protocol,
                     binned_bunching, binned_coincidence, binned_nohom, gaussian_linear_segment_integral,
                     measurement_for, outcome_distribution)
from .errors import (BoundaryError, ConfigError, ConvergenceError, DegenerateDataError,
                     DegenerateDistributionWarning, FlatFunctionWarning, HomFisherError, ParameterError,
                     SearchBoundaryWarning, SingularInformationError)
from .estimate import EstimationResult, log_likelihood, mle_delta, mle_joint
from .information import (FimAnalysis, FisherMatrix, ParameterSet, cfi_bucket_notr, cfi_delta, cfi_nr_notr,
                          closed_form_fim_bucket, closed_form_fim_nr, fim_analysis, fim_numeric, optimal_delta,
                          qfi, qfi_two_photon, relative_information)
from .model import (PhysicalParams, SpectrumNote, bunching_density, coincidence_density, nohom_density,
                    total_rates)
from .simulate import CountsHistogram, RandomSeed, sample_generative, sample_outcomes
from .verify import QuadratureSpec, quad_integrate, score_integral_cfi
