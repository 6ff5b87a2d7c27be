"""Two-source planar localization from Poisson detector streams."""

__version__ = "0.1.0"

from .errors import (ConfigError, DataError, DegenerateInputError, DomainError,
                     IdentifiabilityError, RegimeError, SingularFisherError)
from .geometry import (CrossWitness, DetectorArray, Line, ParameterBox,
                       ThetaVector, arrival_signature_equal, arrival_times,
                       arrival_time_gradient, confusable_pair,
                       direction_vectors, lies_on_cross, swap_min_error)
from .signal import (FrontSpec, IntensityModel, Regime, integrated_intensity,
                     intensity, validate_scenario)
from .simulate import (DetectorRecord, ObservationSet, count_path, read_jsonl,
                       simulate, write_jsonl)
from .likelihood import (FisherMatrix, LogLikelihoodValue, fisher_information,
                         fisher_display_elements, log_likelihood,
                         log_likelihood_batch, q_kappa_squared, score)
from .estimate import (EstimateResult, bayes_estimate, mle,
                       self_normalized_mean, truncated_gaussian_prior)
from .limits import (EtaSampler, GridSpec, Law, LimitLawSample, XiSampler,
                     sample_eta, sample_xi, sample_zeta, write_draws_csv)
from .experiments import (ExperimentConfig, RateReport, ScreenVerdict,
                          energy_distance, energy_permutation_test,
                          identifiability_screen, limit_law_check,
                          normality_check, run_rate_experiment)
from .config import (ScenarioConfig, experiment_config, load_config,
                     parse_config)

__all__ = [name for name in dir() if not name.startswith("_")]
