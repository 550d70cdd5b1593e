"""Mobile-survey emission rate inference with online changepoint detection."""

from .bocd import (
    DEFAULT_LAMBDA,
    DEFAULT_PREDICTIVE_METHOD,
    HazardConfig,
    RunLengthState,
    bocd_step,
    changepoint_probability,
    initial_state,
    predictive_probability,
)
from .detector import (
    DetectionEvent,
    DetectorConfig,
    PassReport,
    detect_series,
    estimate_series,
    run_detector,
)
from .errors import (
    ConfigError,
    DetectionError,
    InputDataError,
    InsufficientDataError,
    MeasurementIncompatibleError,
    PlumeCpdError,
)
from .inference import (
    DEFAULT_GRID,
    EmissionPosterior,
    LikelihoodConfig,
    QGrid,
    bayes_update,
    bayes_update_from_likelihood,
    estimate_sigma_e,
    grid_integrate,
    likelihood_vector,
    posterior_mean_std,
    posterior_mode,
    uniform_prior,
)
from .metrics import (
    OutcomeLabel,
    PerformanceReport,
    bootstrap_ci,
    classify_outcome,
    compute_metrics,
    evaluate_cell,
)
from .surrogate import (
    make_surrogate_experiment,
    make_unit_forward_experiment,
    stratified_lognormal_series,
)
from .synthesis import (
    ExperimentRecord,
    SignalStats,
    SynthesizedInstance,
    instance_rng,
    signal_stats,
    synthesize_batch,
    synthesize_instance,
)
from .transport import (
    ConstantDispersion,
    ForwardModel,
    Geometry,
    MetSummary,
    PassMeasurement,
    RawSample,
    ReflectedGaussianDispersion,
    ambient_baseline,
    build_forward_model,
    cross_plume_integrate,
    dispersion_factor,
    forward_concentration,
    ppm_to_mass_concentration,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConstantDispersion",
    "DEFAULT_GRID",
    "DEFAULT_LAMBDA",
    "DEFAULT_PREDICTIVE_METHOD",
    "DetectionError",
    "DetectionEvent",
    "DetectorConfig",
    "EmissionPosterior",
    "ExperimentRecord",
    "ForwardModel",
    "Geometry",
    "HazardConfig",
    "InputDataError",
    "InsufficientDataError",
    "LikelihoodConfig",
    "MeasurementIncompatibleError",
    "MetSummary",
    "OutcomeLabel",
    "PassMeasurement",
    "PassReport",
    "PerformanceReport",
    "PlumeCpdError",
    "QGrid",
    "RawSample",
    "ReflectedGaussianDispersion",
    "RunLengthState",
    "SignalStats",
    "SynthesizedInstance",
    "ambient_baseline",
    "bayes_update",
    "bayes_update_from_likelihood",
    "bocd_step",
    "bootstrap_ci",
    "build_forward_model",
    "changepoint_probability",
    "classify_outcome",
    "compute_metrics",
    "cross_plume_integrate",
    "detect_series",
    "dispersion_factor",
    "estimate_series",
    "estimate_sigma_e",
    "evaluate_cell",
    "forward_concentration",
    "grid_integrate",
    "initial_state",
    "instance_rng",
    "likelihood_vector",
    "make_surrogate_experiment",
    "make_unit_forward_experiment",
    "posterior_mean_std",
    "posterior_mode",
    "ppm_to_mass_concentration",
    "predictive_probability",
    "run_detector",
    "signal_stats",
    "stratified_lognormal_series",
    "synthesize_batch",
    "synthesize_instance",
    "uniform_prior",
]
