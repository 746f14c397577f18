"""Neural-inspired encoding of strain: temporal filter plus nonlinear
activation, mapping raw strain to a probability of firing in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .fields import GridField

WINDOW_LEN = 40


@dataclass(frozen=True)
class StaParams:
    """Temporal filter: damped cosine over the 40 ms history window.

    f_sta is in rad/ms; delay and width are in ms. identity=True replaces
    the kernel with a unit impulse at lag -delay (the narrow-width limit).
    """

    f_sta: float = 2.0 * np.pi / 25.0
    delay: float = 5.0
    width: float = 4.0
    window_len: int = WINDOW_LEN
    identity: bool = False

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("width must be positive")
        if self.window_len < 1:
            raise ValueError("window_len must be at least 1")


@dataclass(frozen=True)
class NlaParams:
    """Sigmoid activation 1 / (1 + exp(-slope * (xi - half_max))).

    linear=True swaps in an affine map clipped to [0, 1] (the degenerate
    no-nonlinearity variant used by parameter sweeps).
    """

    slope: float = 10.0
    half_max: float = 0.1
    linear: bool = False

    def __post_init__(self):
        if not np.isfinite(self.slope):
            raise ValueError("slope must be finite")


def sta_kernel(p: StaParams) -> np.ndarray:
    """Kernel values at lags tau = -(window_len-1) .. 0 ms."""
    tau = np.arange(-(p.window_len - 1), 1, dtype=float)
    if p.identity:
        kernel = np.zeros(p.window_len)
        idx = int(round(-p.delay)) + (p.window_len - 1)
        kernel[np.clip(idx, 0, p.window_len - 1)] = 1.0
        return kernel
    return np.cos(p.f_sta * (tau + p.delay)) * np.exp(-((tau + p.delay) ** 2) / p.width ** 2)


def project(strain_ts: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Causal correlation of strain history with the kernel.

    xi(t) = sum_{tau=-(L-1)}^{0} strain(t - tau) * kernel[tau]; defined from
    sample L-1 onward, so the output is shorter by window_len - 1 samples.
    Works on a single series or a (sensors, T) matrix.
    """
    strain_ts = np.asarray(strain_ts, dtype=float)
    L = kernel.shape[0]
    if strain_ts.shape[-1] <= L:
        raise ValueError("series must be longer than the kernel window")
    # sum_tau eps(t - tau) k(tau) over tau <= 0 is a convolution of the
    # series with the lag-reversed kernel, valid part only.
    return fftconvolve(strain_ts, kernel[::-1][np.newaxis, :] if strain_ts.ndim == 2 else kernel[::-1],
                       mode="valid", axes=-1)


def normalize(xi: np.ndarray):
    """Joint normalization constant over all sensors and times.

    Returns (C_xi, xi / C_xi) with C_xi = max |xi|.
    """
    c = float(np.max(np.abs(xi)))
    if c == 0.0:
        raise ValueError("all-zero projection; cannot normalize")
    return c, xi / c


def nla(xi, p: NlaParams):
    """Activation mapping normalized projection to firing probability."""
    xi = np.asarray(xi, dtype=float)
    if p.linear:
        return np.clip(0.5 + 0.5 * (xi - p.half_max), 0.0, 1.0)
    return 1.0 / (1.0 + np.exp(-p.slope * (xi - p.half_max)))


def encode_field(strain: GridField, sta: StaParams, nla_params: NlaParams,
                 norm_constant: float = None) -> GridField:
    """Per-sensor projection, joint normalization, then activation.

    norm_constant lets two conditions share one scale: compute it jointly
    with joint_norm_constant and pass it to both encode calls.
    """
    kernel = sta_kernel(sta)
    xi = project(strain.values, kernel)
    if norm_constant is None:
        c, xi_n = normalize(xi)
    else:
        c = float(norm_constant)
        if c <= 0:
            raise ValueError("norm_constant must be positive")
        xi_n = xi / c
    p_fire = nla(xi_n, nla_params)
    meta = dict(strain.meta)
    meta.update({
        "norm_constant": c,
        "sta_f": sta.f_sta, "sta_delay": sta.delay, "sta_width": sta.width,
        "sta_identity": sta.identity,
        "nla_slope": nla_params.slope, "nla_half_max": nla_params.half_max,
        "nla_linear": nla_params.linear,
    })
    return GridField(values=p_fire,
                     t_start_ms=strain.t_start_ms + (sta.window_len - 1) / strain.sample_rate_khz,
                     sample_rate_khz=strain.sample_rate_khz, meta=meta)


def joint_norm_constant(strains, sta: StaParams) -> float:
    """C_xi over several strain fields jointly (both classes share a scale)."""
    kernel = sta_kernel(sta)
    return max(float(np.max(np.abs(project(s.values, kernel)))) for s in strains)
