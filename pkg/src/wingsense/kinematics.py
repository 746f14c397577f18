"""Prescribed wing kinematics: flapping profile, steady rotation, band-limited
disturbances, and the sigmoidal startup ramp.

Time is measured in milliseconds throughout; angular velocities are returned
in rad/s.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi

# Fixed step (ms) for the quadrature of the ramped flapping velocity.
ANGLE_QUAD_STEP_MS = 0.1


@dataclass(frozen=True)
class FlapProfile:
    """Two-harmonic flapping angle profile."""

    amplitude: float = np.pi / 6.0          # rad
    base_frequency: float = 25.0            # Hz
    harmonic_ratio: float = 0.2             # second harmonic relative weight

    def __post_init__(self):
        if self.amplitude <= 0:
            raise ValueError("amplitude must be positive")
        if self.base_frequency <= 0:
            raise ValueError("base_frequency must be positive")
        if not 0 <= self.harmonic_ratio < 1:
            raise ValueError("harmonic_ratio must lie in [0, 1)")


@dataclass(frozen=True)
class RotationSpec:
    """Steady body rotation rate about the vertical axis."""

    steady_rate: float = 0.0                # rad/s

    def __post_init__(self):
        if self.steady_rate < 0:
            raise ValueError("steady_rate must be nonnegative")


@dataclass(frozen=True)
class DisturbanceSpec:
    """Band-limited white-noise disturbance built from random sinusoids."""

    target_std: float = 0.0                 # rad/s
    n_components: int = 15
    freq_low: float = 1.0                   # Hz
    freq_high: float = 10.0                 # Hz
    seed: int = 0

    def __post_init__(self):
        if self.target_std < 0:
            raise ValueError("target_std must be nonnegative")
        if self.n_components < 1:
            raise ValueError("n_components must be at least 1")
        if not 0 < self.freq_low < self.freq_high:
            raise ValueError("need 0 < freq_low < freq_high")


@dataclass(frozen=True)
class DisturbanceRealization:
    """Realized (frequency, phase) pairs of one disturbance draw.

    Frequencies are stored as the rho coefficient such that one component is
    sin(2 * rho * t + kappa) with t in ms; rho = pi * 1e-3 * f_Hz puts the
    component at f_Hz.
    """

    rho: np.ndarray                         # rad/ms analog, shape (n,)
    kappa: np.ndarray                       # rad, shape (n,)
    per_component_amplitude: float          # rad/s

    def __post_init__(self):
        if self.rho.shape != self.kappa.shape:
            raise ValueError("rho and kappa must have matching shapes")


def flap_angle(profile: FlapProfile, t):
    """Flapping angle (rad) at time t (ms)."""
    arg = 2e-3 * np.pi * profile.base_frequency * np.asarray(t, dtype=float)
    return profile.amplitude * (np.sin(arg) + profile.harmonic_ratio * np.sin(2.0 * arg))


def flap_velocity(profile: FlapProfile, t):
    """Analytic time derivative of flap_angle, in rad/s."""
    c = 2e-3 * np.pi * profile.base_frequency
    arg = c * np.asarray(t, dtype=float)
    # d/dt in rad/ms, then * 1000 -> rad/s
    return 1e3 * profile.amplitude * c * (np.cos(arg) + 2.0 * profile.harmonic_ratio * np.cos(2.0 * arg))


def flap_acceleration(profile: FlapProfile, t):
    """Second time derivative of flap_angle, in rad/s^2."""
    c = 2e-3 * np.pi * profile.base_frequency
    arg = c * np.asarray(t, dtype=float)
    return -1e6 * profile.amplitude * c * c * (np.sin(arg) + 4.0 * profile.harmonic_ratio * np.sin(2.0 * arg))


def realize_disturbance(spec: DisturbanceSpec) -> DisturbanceRealization:
    """Draw component frequencies and phases for one disturbance signal.

    The per-component amplitude is target_std / sqrt(n/2) so the summed
    signal's long-horizon standard deviation equals target_std.
    """
    rng = np.random.default_rng(spec.seed)
    freqs_hz = rng.uniform(spec.freq_low, spec.freq_high, spec.n_components)
    kappa = rng.uniform(0.0, TWO_PI, spec.n_components)
    rho = np.pi * 1e-3 * freqs_hz
    amplitude = spec.target_std / np.sqrt(spec.n_components / 2.0)
    return DisturbanceRealization(rho=rho, kappa=kappa, per_component_amplitude=amplitude)


def eval_disturbance(real: DisturbanceRealization, t):
    """Disturbance velocity (rad/s) at time t (ms)."""
    t = np.asarray(t, dtype=float)
    phase = 2.0 * np.multiply.outer(t, real.rho) + real.kappa
    return real.per_component_amplitude * np.sin(phase).sum(axis=-1)


def eval_disturbance_derivative(real: DisturbanceRealization, t):
    """Time derivative of the disturbance, in rad/s^2."""
    t = np.asarray(t, dtype=float)
    phase = 2.0 * np.multiply.outer(t, real.rho) + real.kappa
    # d/dt_ms of sin(2 rho t + kappa) = 2 rho cos(...), * 1e3 -> per second
    return real.per_component_amplitude * 1e3 * (2.0 * real.rho * np.cos(phase)).sum(axis=-1)


def ramp(t, f: float):
    """Sigmoidal startup ramp in [0, 1)."""
    u = (2e-3 * np.pi * f * np.asarray(t, dtype=float)) ** 3
    return u / (10.0 + u)


def ramp_derivative(t, f: float):
    """d(ramp)/dt in 1/s."""
    c = 2e-3 * np.pi * f
    x = c * np.asarray(t, dtype=float)
    u = x ** 3
    # du/dt_ms = 3 c x^2; d(ramp)/du = 10 / (10 + u)^2
    return 1e3 * (10.0 * 3.0 * c * x ** 2) / (10.0 + u) ** 2


_ZERO_DISTURBANCE = DisturbanceRealization(
    rho=np.zeros(1), kappa=np.zeros(1), per_component_amplitude=0.0
)


def zero_disturbance() -> DisturbanceRealization:
    """A disturbance realization that evaluates to zero for all t."""
    return _ZERO_DISTURBANCE


@dataclass
class KinematicDrive:
    """Full prescribed drive: steady flap + rotation plus disturbances, all
    multiplied by the startup ramp."""

    flap: FlapProfile = field(default_factory=FlapProfile)
    rotation: RotationSpec = field(default_factory=RotationSpec)
    flap_disturbance: DisturbanceRealization = field(default_factory=zero_disturbance)
    rotation_disturbance: DisturbanceRealization = field(default_factory=zero_disturbance)

    def __post_init__(self):
        self._angle_grid_t = None
        self._angle_grid = None

    @property
    def ramp_frequency(self) -> float:
        return self.flap.base_frequency

    def flap_velocity_total(self, t):
        """phi_dot_T(t) in rad/s (ramped)."""
        raw = flap_velocity(self.flap, t) + eval_disturbance(self.flap_disturbance, t)
        return ramp(t, self.ramp_frequency) * raw

    def flap_acceleration_total(self, t):
        """d(phi_dot_T)/dt in rad/s^2, by the product rule (exact)."""
        nu = ramp(t, self.ramp_frequency)
        nu_dot = ramp_derivative(t, self.ramp_frequency)
        raw = flap_velocity(self.flap, t) + eval_disturbance(self.flap_disturbance, t)
        raw_dot = flap_acceleration(self.flap, t) + eval_disturbance_derivative(self.flap_disturbance, t)
        return nu_dot * raw + nu * raw_dot

    def rotation_velocity_total(self, t):
        """theta_dot_T(t) in rad/s (ramped)."""
        raw = self.rotation.steady_rate + eval_disturbance(self.rotation_disturbance, t)
        return ramp(t, self.ramp_frequency) * raw

    def _ensure_angle_grid(self, t_max: float):
        """Precompute phi_T on a fixed 0.1 ms grid by trapezoidal quadrature
        of the ramped flapping velocity."""
        if self._angle_grid_t is not None and self._angle_grid_t[-1] >= t_max:
            return
        grid = np.arange(0.0, t_max + 2 * ANGLE_QUAD_STEP_MS, ANGLE_QUAD_STEP_MS)
        vel = self.flap_velocity_total(grid) * 1e-3  # rad/ms
        angle = np.concatenate(([0.0], np.cumsum(0.5 * (vel[1:] + vel[:-1]) * np.diff(grid))))
        self._angle_grid_t = grid
        self._angle_grid = angle

    def flap_angle_total(self, t):
        """phi_T(t) in rad, by quadrature of the ramped velocity."""
        t = np.asarray(t, dtype=float)
        self._ensure_angle_grid(float(np.max(t)) if t.size else 0.0)
        return np.interp(t, self._angle_grid_t, self._angle_grid)

    def total_velocities(self, t):
        """(phi_dot_T rad/s, theta_dot_T rad/s, phi_T rad) at time t (ms)."""
        return (
            self.flap_velocity_total(t),
            self.rotation_velocity_total(t),
            self.flap_angle_total(t),
        )


def total_velocities(drive: KinematicDrive, t):
    """Module-level convenience wrapper around KinematicDrive.total_velocities."""
    return drive.total_velocities(t)
