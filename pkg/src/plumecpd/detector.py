"""Streaming orchestration: joint rate estimation and change detection.

Each pass updates two things with one shared likelihood evaluation, the
run-length posterior used for detection and a running rate posterior used
for reporting. When the changepoint probability crosses the configured
threshold the detector emits an event carrying the rate posterior as it
stood after the previous pass, then restarts both recursions: the rate
posterior returns to the flat prior and the run-length state is cleared.
The measurement noise scale is widened once for all passes after the
first detected change, reflecting that post-change rates are no longer
pinned by a controlled release.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bocd import (
    DEFAULT_LAMBDA,
    DEFAULT_PREDICTIVE_METHOD,
    HazardConfig,
    PredictiveMethod,
    RunLengthState,
    bocd_step,
    changepoint_probability,
    initial_state,
)
from .errors import DetectionError, PlumeCpdError
from .inference import (
    DEFAULT_GRID,
    EmissionPosterior,
    LikelihoodConfig,
    QGrid,
    bayes_update_from_likelihood,
    likelihood_vector,
    posterior_mean_std,
    posterior_mode,
    uniform_prior,
)
from .transport import ForwardModel, PassMeasurement


@dataclass(frozen=True)
class DetectorConfig:
    threshold: float
    sigma_e_initial: float
    lam: float = DEFAULT_LAMBDA
    sigma_e_post_factor: float = 10.0
    grid: QGrid = DEFAULT_GRID
    predictive_method: PredictiveMethod = DEFAULT_PREDICTIVE_METHOD

    def __post_init__(self) -> None:
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must lie strictly between 0 and 1")
        if self.sigma_e_initial <= 0:
            raise ValueError("sigma_e_initial must be positive")
        if not self.lam > 1:
            raise ValueError("lambda must exceed 1")
        if self.sigma_e_post_factor < 1:
            raise ValueError("sigma_e_post_factor must be at least 1")


@dataclass(frozen=True)
class DetectionEvent:
    """A threshold crossing, keeping the last pre-change rate posterior."""

    pass_index: int
    changepoint_probability: float
    pre_change_posterior: EmissionPosterior
    regime_index: int


@dataclass(frozen=True)
class PassReport:
    pass_index: int
    cy_g_per_m2: float
    changepoint_probability: float
    mode_g_per_s: float
    mean_g_per_s: float
    std_g_per_s: float


def _forward_models_per_pass(
    fms: ForwardModel | Sequence[ForwardModel], n: int
) -> Sequence[ForwardModel]:
    if isinstance(fms, ForwardModel):
        return [fms] * n
    if len(fms) != n:
        raise ValueError("need one forward model per pass")
    return fms


def detect_series(
    cys: Sequence[float],
    fms: ForwardModel | Sequence[ForwardModel],
    cfg: DetectorConfig,
    pass_indices: Sequence[int] | None = None,
    collect_reports: bool = True,
) -> tuple[list[PassReport], list[DetectionEvent]]:
    """Run the detector over raw integrated concentrations.

    ``collect_reports=False`` skips the per-pass moment computations, a
    cheap win inside large synthetic sweeps where only events matter.
    """
    cys = np.asarray(cys, dtype=float)
    if cys.size == 0:
        raise ValueError("empty measurement stream")
    fms = _forward_models_per_pass(fms, cys.size)
    if pass_indices is None:
        pass_indices = range(1, cys.size + 1)

    grid = cfg.grid
    hz = HazardConfig(cfg.lam)
    lik_cfg = LikelihoodConfig(cfg.sigma_e_initial)
    state: RunLengthState = initial_state(grid)
    running = uniform_prior(grid)
    reports: list[PassReport] = []
    events: list[DetectionEvent] = []

    for idx, cy, fm in zip(pass_indices, cys, fms):
        try:
            lik = likelihood_vector(float(cy), grid, fm, lik_cfg)
            state = bocd_step(
                state,
                float(cy),
                fm,
                lik_cfg,
                hz,
                method=cfg.predictive_method,
                likelihood=lik,
            )
            updated = bayes_update_from_likelihood(running, lik)
        except (PlumeCpdError, ValueError) as exc:
            raise DetectionError(f"pass {idx}: {exc}") from exc
        cp = changepoint_probability(state)
        if collect_reports:
            mean, std = posterior_mean_std(updated)
            reports.append(
                PassReport(
                    pass_index=int(idx),
                    cy_g_per_m2=float(cy),
                    changepoint_probability=cp,
                    mode_g_per_s=posterior_mode(updated),
                    mean_g_per_s=mean,
                    std_g_per_s=std,
                )
            )
        if cp >= cfg.threshold:
            events.append(
                DetectionEvent(
                    pass_index=int(idx),
                    changepoint_probability=cp,
                    pre_change_posterior=running,
                    regime_index=len(events) + 1,
                )
            )
            # Restart both recursions; the triggering measurement is
            # treated as the first of the new regime and is not folded
            # into the reset posterior.
            running = uniform_prior(grid)
            state = initial_state(grid)
            lik_cfg = LikelihoodConfig(cfg.sigma_e_initial * cfg.sigma_e_post_factor)
        else:
            running = updated
    return reports, events


def run_detector(
    stream: Sequence[PassMeasurement],
    fms: ForwardModel | Sequence[ForwardModel],
    cfg: DetectorConfig,
) -> tuple[list[PassReport], list[DetectionEvent]]:
    """Detector over reduced pass measurements, in stream order."""
    if len(stream) == 0:
        raise ValueError("empty measurement stream")
    return detect_series(
        [m.cy_g_per_m2 for m in stream],
        fms,
        cfg,
        pass_indices=[m.pass_index for m in stream],
    )


def estimate_series(
    stream: Sequence[PassMeasurement] | Sequence[float],
    fms: ForwardModel | Sequence[ForwardModel],
    grid: QGrid,
    sigma_e: float,
    lam: float = DEFAULT_LAMBDA,
    method: PredictiveMethod = DEFAULT_PREDICTIVE_METHOD,
) -> list[PassReport]:
    """Recursive estimation with no thresholding and no resets.

    Runs the same two coupled recursions as the detector, so with no
    threshold crossings the reports match the detector's exactly; the
    changepoint probability is reported but never acted on.
    """
    cys = [m.cy_g_per_m2 if isinstance(m, PassMeasurement) else float(m) for m in stream]
    indices = [
        m.pass_index if isinstance(m, PassMeasurement) else i + 1
        for i, m in enumerate(stream)
    ]
    fms = _forward_models_per_pass(fms, len(cys))
    lik_cfg = LikelihoodConfig(sigma_e)
    hz = HazardConfig(lam)
    state = initial_state(grid)
    posterior = uniform_prior(grid)
    reports = []
    for idx, cy, fm in zip(indices, cys, fms):
        try:
            lik = likelihood_vector(cy, grid, fm, lik_cfg)
            state = bocd_step(state, cy, fm, lik_cfg, hz, method=method, likelihood=lik)
            posterior = bayes_update_from_likelihood(posterior, lik)
        except (PlumeCpdError, ValueError) as exc:
            raise DetectionError(f"pass {idx}: {exc}") from exc
        mean, std = posterior_mean_std(posterior)
        reports.append(
            PassReport(
                pass_index=int(idx),
                cy_g_per_m2=float(cy),
                changepoint_probability=changepoint_probability(state),
                mode_g_per_s=posterior_mode(posterior),
                mean_g_per_s=mean,
                std_g_per_s=std,
            )
        )
    return reports
