"""Cross-plume measurement reduction and the forward plume model.

A mobile analyzer repeatedly drives through a plume downwind of a point
source. Each traverse ("pass") yields a time series of mixing ratios that
is reduced to a single cross-plume integrated mass concentration, in
g/m^2. A candidate emission rate Q (g/s) maps to a predicted integrated
concentration through a vertical dispersion factor and a plume advection
velocity, so the forward model is linear in Q.

All quantities are SI-based: g/s, g/m^3, g/m^2, m/s, K, Pa.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InputDataError

GAS_CONSTANT_J_PER_MOL_K = 8.314462618
METHANE_MOLAR_MASS_G_PER_MOL = 16.04
STANDARD_PRESSURE_PA = 101325.0

# Default measurement geometry: analyzer inlet on a vehicle roof, source
# released near ground level.
DEFAULT_SENSOR_HEIGHT_M = 1.3
DEFAULT_SOURCE_HEIGHT_M = 0.05


@dataclass(frozen=True)
class RawSample:
    """One 10 Hz-class analyzer sample taken while crossing the plume."""

    time_s: float
    mixing_ratio_ppm: float
    vehicle_speed_mps: float
    road_angle_deg: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.time_s):
            raise ValueError("sample time must be finite")
        if self.mixing_ratio_ppm < 0:
            raise ValueError("mixing ratio must be non-negative")
        if self.vehicle_speed_mps <= 0:
            raise ValueError("vehicle speed must be positive")
        if not 0 < self.road_angle_deg <= 90:
            raise ValueError("road angle must lie in (0, 90] degrees")


@dataclass(frozen=True)
class MetSummary:
    """Experiment-scale meteorological summary from a sonic anemometer.

    ``turbulent_intensity`` may be supplied redundantly with sigma_u and
    the mean velocity; it is then checked for consistency.
    """

    mean_velocity_mps: float
    sigma_u_mps: float
    sigma_w_mps: float
    friction_velocity_mps: float
    temperature_k: float
    turbulent_intensity: float | None = None
    wind_direction_deg: float | None = None
    sensible_heat_flux_w_m2: float | None = None
    stability_z_over_l: float | None = None
    obukhov_length_m: float | None = None
    surface_roughness_m: float | None = None

    def __post_init__(self) -> None:
        if self.mean_velocity_mps <= 0:
            raise ValueError("mean velocity must be positive")
        if self.sigma_u_mps <= 0 or self.sigma_w_mps <= 0:
            raise ValueError("velocity standard deviations must be positive")
        if self.friction_velocity_mps <= 0:
            raise ValueError("friction velocity must be positive")
        if self.temperature_k <= 0:
            raise ValueError("temperature must be positive")
        if self.turbulent_intensity is not None:
            derived = self.sigma_u_mps / self.mean_velocity_mps
            if abs(self.turbulent_intensity - derived) > 1e-6 * derived:
                raise ValueError(
                    "turbulent intensity inconsistent with sigma_u / mean velocity"
                )

    @property
    def intensity(self) -> float:
        if self.turbulent_intensity is not None:
            return self.turbulent_intensity
        return self.sigma_u_mps / self.mean_velocity_mps


@dataclass(frozen=True)
class Geometry:
    """Source-to-road fetch and the two release/measurement heights."""

    fetch_m: float
    sensor_height_m: float = DEFAULT_SENSOR_HEIGHT_M
    source_height_m: float = DEFAULT_SOURCE_HEIGHT_M

    def __post_init__(self) -> None:
        if self.fetch_m <= 0:
            raise ValueError("fetch must be positive")
        if self.sensor_height_m < 0 or self.source_height_m < 0:
            raise ValueError("heights must be non-negative")


@dataclass(frozen=True)
class PassMeasurement:
    """One reduced pass: a cross-plume integrated concentration in g/m^2."""

    pass_index: int
    cy_g_per_m2: float
    geometry: Geometry | None = None
    met: MetSummary | None = None

    def __post_init__(self) -> None:
        if self.pass_index < 1:
            raise ValueError("pass index is 1-based")
        if self.cy_g_per_m2 < 0:
            raise ValueError("integrated concentration must be non-negative")


@dataclass(frozen=True)
class ForwardModel:
    """Linear map from emission rate to integrated concentration.

    predicted cy = Q * dispersion_factor / advection_velocity
    """

    advection_velocity_mps: float
    dispersion_factor_per_m: float

    def __post_init__(self) -> None:
        if self.advection_velocity_mps <= 0:
            raise ValueError("advection velocity must be positive")
        if self.dispersion_factor_per_m < 0:
            raise ValueError("dispersion factor must be non-negative")


def ambient_baseline(series: Sequence[float]) -> float:
    """Nearest-rank 5th percentile of a raw mixing-ratio series.

    The rank is ceil(0.05 * n) in 1-based terms, computed with integer
    arithmetic so that e.g. n = 20 gives rank 1, n = 100 gives rank 5.
    """
    values = np.asarray(series, dtype=float)
    n = values.size
    if n == 0:
        raise InputDataError("no samples")
    rank = (5 * n + 99) // 100
    return float(np.sort(values)[rank - 1])


def ppm_to_mass_concentration(
    ppm: float,
    temperature_k: float,
    pressure_pa: float = STANDARD_PRESSURE_PA,
    molar_mass_g_per_mol: float = METHANE_MOLAR_MASS_G_PER_MOL,
) -> float:
    """Convert a mixing ratio in ppm to a mass concentration in g/m^3."""
    if temperature_k <= 0 or pressure_pa <= 0:
        raise ValueError("temperature and pressure must be positive")
    if ppm < 0:
        raise ValueError("mixing ratio must be non-negative")
    molar_volume = GAS_CONSTANT_J_PER_MOL_K * temperature_k / pressure_pa
    return ppm * 1e-6 * molar_mass_g_per_mol / molar_volume


def cross_plume_integrate(
    samples: Iterable[tuple[float, float, float, float]],
) -> float:
    """Integrate above-ambient mass concentration across one pass.

    Each sample is (concentration g/m^3, dt s, vehicle speed m/s,
    road angle deg). The along-road step dt * V is projected onto the
    cross-plume direction with sin(road angle). An empty iterable
    integrates to zero.
    """
    total = 0.0
    for conc, dt, speed, angle_deg in samples:
        if dt <= 0:
            raise ValueError("sample spacing must be positive")
        if speed <= 0:
            raise ValueError("vehicle speed must be positive")
        if not 0 < angle_deg <= 90:
            raise ValueError("road angle must lie in (0, 90] degrees")
        total += conc * dt * speed * math.sin(math.radians(angle_deg))
    return total


class DispersionModel(abc.ABC):
    """Maps met statistics and geometry to a vertical dispersion factor."""

    @abc.abstractmethod
    def vertical_factor(self, met: MetSummary, geom: Geometry) -> float:
        """Return D_z in 1/m, evaluated at the sensor height."""


@dataclass(frozen=True)
class ReflectedGaussianDispersion(DispersionModel):
    """Gaussian vertical profile with full ground reflection.

    The vertical spread is sigma_z = spread_factor * sigma_w * fetch / u,
    a neutral-surface-layer scaling. spread_factor defaults to 1 and is
    the hook for swapping in a calibrated plume spread.
    """

    spread_factor: float = 1.0

    def vertical_factor(self, met: MetSummary, geom: Geometry) -> float:
        if self.spread_factor <= 0:
            raise ValueError("spread factor must be positive")
        sigma_z = (
            self.spread_factor * met.sigma_w_mps * geom.fetch_m / met.mean_velocity_mps
        )
        if sigma_z <= 0:
            raise ValueError("degenerate vertical spread")
        z, h = geom.sensor_height_m, geom.source_height_m
        direct = math.exp(-((z - h) ** 2) / (2.0 * sigma_z**2))
        image = math.exp(-((z + h) ** 2) / (2.0 * sigma_z**2))
        return (direct + image) / (math.sqrt(2.0 * math.pi) * sigma_z)


@dataclass(frozen=True)
class ConstantDispersion(DispersionModel):
    """Fixed dispersion factor, mainly for tests and controlled sweeps."""

    value_per_m: float

    def vertical_factor(self, met: MetSummary, geom: Geometry) -> float:
        if self.value_per_m < 0:
            raise ValueError("dispersion factor must be non-negative")
        return self.value_per_m


def dispersion_factor(
    met: MetSummary, geom: Geometry, spread_factor: float = 1.0
) -> float:
    """Reflected-Gaussian vertical dispersion factor (1/m)."""
    return ReflectedGaussianDispersion(spread_factor).vertical_factor(met, geom)


def build_forward_model(
    met: MetSummary,
    geom: Geometry,
    model: DispersionModel | None = None,
    velocity_scale: float = 1.0,
) -> ForwardModel:
    """Assemble the linear forward model for one experiment.

    The advection velocity is the mean streamwise velocity times an
    optional scale, which is the adjustment point if a plume-specific
    advection speed is ever calibrated.
    """
    if velocity_scale <= 0:
        raise ValueError("velocity scale must be positive")
    dispersion = model if model is not None else ReflectedGaussianDispersion()
    return ForwardModel(
        advection_velocity_mps=met.mean_velocity_mps * velocity_scale,
        dispersion_factor_per_m=dispersion.vertical_factor(met, geom),
    )


def forward_concentration(q_g_per_s, fm: ForwardModel):
    """Predicted integrated concentration for rate(s) Q, linear in Q.

    Accepts a scalar or an ndarray of rates.
    """
    q = np.asarray(q_g_per_s, dtype=float)
    if np.any(q < 0):
        raise ValueError("emission rate must be non-negative")
    out = q * (fm.dispersion_factor_per_m / fm.advection_velocity_mps)
    if np.isscalar(q_g_per_s) or out.ndim == 0:
        return float(out)
    return out
