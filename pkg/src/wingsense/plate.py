"""Euler-Lagrange model of a clamped-root rectangular flexible plate.

The plate is clamped along its root edge (y = 0) and described by six
degrees of freedom: displacement and two slopes at each of the two free
tip corners, q = (d3, p3, t3, d4, p4, t4). The transverse displacement is
w(x, y, t) = N(x, y)^T q(t) with separable polynomial shape functions:
cubic clamped-free functions in y crossed with cubic Hermite functions
in x.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import solve_ivp
from scipy.linalg import eigh

from .fields import GridField, N_CHORD, N_SPAN, grid_coordinates
from .kinematics import KinematicDrive


@dataclass(frozen=True)
class PlateParams:
    """Geometry and material of the flat plate, SI units."""

    span: float = 0.050                  # m, y direction
    chord: float = 0.025                 # m, x direction
    thickness: float = 1.27e-5           # m
    elastic_modulus: float = 3.0e9       # Pa
    poisson_ratio: float = 0.3
    areal_density: float = 1.45e-4       # kg/m^2; first mode ~14 Hz, twist ~63 Hz
    damping_coefficient: Optional[float] = None  # 1/s; None -> Q ~ 10 at mode 1
    centrifugal_on: bool = False

    def __post_init__(self):
        for name in ("span", "chord", "thickness", "elastic_modulus", "areal_density"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 <= self.poisson_ratio < 0.5:
            raise ValueError("poisson_ratio must lie in [0, 0.5)")

    @property
    def bending_rigidity(self) -> float:
        h = self.thickness
        return self.elastic_modulus * h ** 3 / (12.0 * (1.0 - self.poisson_ratio ** 2))


def _hermite_chord(chord: float):
    """Cubic Hermite value/slope functions on [0, chord]."""
    u = Polynomial([0.0, 1.0 / chord])          # u = x / chord
    h00 = 1 - 3 * u ** 2 + 2 * u ** 3
    h10 = chord * (u - 2 * u ** 2 + u ** 3)
    h01 = 3 * u ** 2 - 2 * u ** 3
    h11 = chord * (-(u ** 2) + u ** 3)
    return h00, h10, h01, h11


def _clamped_span(span: float):
    """Clamped-at-root cubics with unit tip displacement / tip slope."""
    v = Polynomial([0.0, 1.0 / span])           # v = y / span
    hd = 3 * v ** 2 - 2 * v ** 3                # value 1, slope 0 at tip
    hs = span * (v ** 3 - v ** 2)               # value 0, slope 1 at tip
    return hd, hs


class ShapeBasis:
    """Six separable shape functions N_i(x, y) = chord_i(x) * span_i(y)."""

    def __init__(self, params: PlateParams):
        self.params = params
        h00, h10, h01, h11 = _hermite_chord(params.chord)
        hd, hs = _clamped_span(params.span)
        # DOF order: (d3, p3, t3) at corner 3 (x=0, y=span),
        #            (d4, p4, t4) at corner 4 (x=chord, y=span).
        self.chord_polys = [h00, h00, h10, h01, h01, h11]
        self.span_polys = [hd, hs, hd, hd, hs, hd]

    def evaluate(self, x, y) -> np.ndarray:
        """N_i at broadcastable (x, y); leading axis is the DOF index."""
        return np.array([c(np.asarray(x)) * s(np.asarray(y))
                         for c, s in zip(self.chord_polys, self.span_polys)])

    def d2dy2(self, x, y) -> np.ndarray:
        """Second y-derivatives of the shape functions."""
        return np.array([c(np.asarray(x)) * s.deriv(2)(np.asarray(y))
                         for c, s in zip(self.chord_polys, self.span_polys)])

    def deflection(self, x, y, q) -> np.ndarray:
        return np.tensordot(np.asarray(q), self.evaluate(x, y), axes=(0, 0))


def build_shape_basis(params: PlateParams) -> ShapeBasis:
    return ShapeBasis(params)


def _integ(poly: Polynomial, lo: float, hi: float) -> float:
    anti = poly.integ()
    return anti(hi) - anti(lo)


@dataclass
class SystemMatrices:
    """Assembled constant matrices of the 6-DOF plate model."""

    M: np.ndarray
    K: np.ndarray
    M_a: np.ndarray                      # rigid base-excitation coupling
    I_c: np.ndarray                      # Coriolis (twist) coupling
    damping_rate: float                  # eta_d, 1/s
    params: PlateParams

    def __post_init__(self):
        self.M_inv = np.linalg.inv(self.M)
        self.natural_frequencies_hz = np.sqrt(eigh(self.K, self.M, eigvals_only=True)) / (2 * np.pi)


def assemble_matrices(basis: ShapeBasis, params: PlateParams) -> SystemMatrices:
    """Mass, stiffness and coupling matrices by exact polynomial quadrature."""
    cp, sp = basis.chord_polys, basis.span_polys
    C, S = params.chord, params.span
    n = len(cp)

    M = np.empty((n, n))
    K = np.empty((n, n))
    D = params.bending_rigidity
    nu = params.poisson_ratio
    for i in range(n):
        for j in range(n):
            cx = _integ(cp[i] * cp[j], 0, C)
            sy = _integ(sp[i] * sp[j], 0, S)
            M[i, j] = params.areal_density * cx * sy
            k_xx = _integ(cp[i].deriv(2) * cp[j].deriv(2), 0, C) * sy
            k_yy = cx * _integ(sp[i].deriv(2) * sp[j].deriv(2), 0, S)
            k_cross = (_integ(cp[i].deriv(2) * cp[j], 0, C) * _integ(sp[i] * sp[j].deriv(2), 0, S)
                       + _integ(cp[i] * cp[j].deriv(2), 0, C) * _integ(sp[i].deriv(2) * sp[j], 0, S))
            k_xy = _integ(cp[i].deriv(1) * cp[j].deriv(1), 0, C) * _integ(sp[i].deriv(1) * sp[j].deriv(1), 0, S)
            K[i, j] = D * (k_xx + k_yy + nu * k_cross + 2.0 * (1.0 - nu) * k_xy)

    if np.linalg.cond(M) > 1e14:
        raise ValueError("singular mass matrix; check basis and areal density")

    # Rigid base acceleration coupling: integral of rho * N over the plate.
    M_a = np.array([params.areal_density * _integ(cp[i], 0, C) * _integ(sp[i], 0, S)
                    for i in range(n)])

    # Coriolis coupling: chordwise-antisymmetric moment arm (x - C/2) with
    # spanwise lever y, normalized by the span so I_c * Omega carries the same
    # generalized-force units as M_a * dv0/dt. The lever normalization sets
    # the twist-to-flap strain ratio a few 1e-3 below the flapping mode.
    x_arm = Polynomial([-C / 2.0, 1.0])
    I_c = np.array([params.areal_density
                    * _integ(cp[i] * x_arm, 0, C)
                    * _integ(sp[i] * Polynomial([0.0, 1.0]), 0, S)
                    / S
                    for i in range(n)])

    if params.damping_coefficient is not None:
        eta = params.damping_coefficient
    else:
        # mass-proportional damping, quality factor ~10 at the first mode
        omega1 = np.sqrt(eigh(K, M, eigvals_only=True)[0])
        eta = omega1 / 10.0
    return SystemMatrices(M=M, K=K, M_a=M_a, I_c=I_c, damping_rate=eta, params=params)


def eom_rhs(sys: SystemMatrices, drive: KinematicDrive, t_ms: float, state: np.ndarray) -> np.ndarray:
    """Time derivative (per second) of [q, q_dot] at time t_ms."""
    if not np.all(np.isfinite(state)):
        raise FloatingPointError(f"non-finite state at t = {t_ms} ms")
    q = state[:6]
    qd = state[6:]
    phidd = drive.flap_acceleration_total(t_ms)
    thd = drive.rotation_velocity_total(t_ms)
    phid = drive.flap_velocity_total(t_ms)
    phi = drive.flap_angle_total(t_ms)
    a0 = 0.5 * sys.params.span * phidd               # base normal acceleration, m/s^2
    omega_c = 2.0 * np.sin(phi) * phid * thd         # Coriolis product, 1/s^2
    qdd = (-sys.M_inv @ sys.M_a * a0
           - sys.M_inv @ (sys.K @ q)
           + sys.M_inv @ sys.I_c * omega_c
           - sys.damping_rate * qd)
    if sys.params.centrifugal_on:
        qdd = qdd + thd * thd * q
    return np.concatenate([qd, qdd])


@dataclass
class Trajectory:
    """DOF trajectory sampled at 1 kHz."""

    t_ms: np.ndarray                     # (T,)
    q: np.ndarray                        # (6, T)
    q_dot: np.ndarray                    # (6, T), per second


# Drive-signal table spacing used by integrate(); the tables keep the RK45
# right-hand side cheap. Consistent with the angle quadrature step.
DRIVE_TABLE_STEP_MS = 0.05


def integrate(sys: SystemMatrices, drive: KinematicDrive,
              t_span=(1.0, 4000.0), initial_state=None,
              rtol: float = 1e-6, atol: float = 1e-9) -> Trajectory:
    """Adaptive RK45 solution resampled on a 1 ms grid.

    Drive signals are tabulated on a 0.05 ms grid and linearly interpolated
    inside the right-hand side; matrices are folded into products once.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError("t_span must be increasing")
    y0 = np.zeros(12) if initial_state is None else np.asarray(initial_state, dtype=float)

    dt = DRIVE_TABLE_STEP_MS
    tab_t = np.arange(0.0, t1 + 2 * dt, dt)
    a0_tab = 0.5 * sys.params.span * drive.flap_acceleration_total(tab_t)
    thd_tab = drive.rotation_velocity_total(tab_t)
    omc_tab = 2.0 * np.sin(drive.flap_angle_total(tab_t)) * drive.flap_velocity_total(tab_t) * thd_tab
    thd2_tab = thd_tab * thd_tab
    if not (np.all(np.isfinite(a0_tab)) and np.all(np.isfinite(omc_tab))):
        raise RuntimeError("non-finite drive signal")

    neg_minv_k = -sys.M_inv @ sys.K
    f_base = -sys.M_inv @ sys.M_a
    f_cor = sys.M_inv @ sys.I_c
    eta = sys.damping_rate
    centrifugal = sys.params.centrifugal_on
    inv_dt = 1.0 / dt
    n_tab = tab_t.size

    def fun(t_s, y):
        u = t_s * 1e3 * inv_dt
        i = int(u)
        if i >= n_tab - 1:
            i = n_tab - 2
        frac = u - i
        a0 = a0_tab[i] + frac * (a0_tab[i + 1] - a0_tab[i])
        omc = omc_tab[i] + frac * (omc_tab[i + 1] - omc_tab[i])
        q = y[:6]
        qd = y[6:]
        qdd = neg_minv_k @ q + f_base * a0 + f_cor * omc - eta * qd
        if centrifugal:
            th2 = thd2_tab[i] + frac * (thd2_tab[i + 1] - thd2_tab[i])
            qdd = qdd + th2 * q
        return np.concatenate([qd, qdd])

    t_eval = np.arange(np.ceil(t0), np.floor(t1) + 1.0)
    sol = solve_ivp(fun, (t0 * 1e-3, t1 * 1e-3), y0, method="RK45",
                    t_eval=t_eval * 1e-3, rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"integration failed: {sol.message} (reached t = {sol.t[-1] * 1e3:.1f} ms)")
    return Trajectory(t_ms=t_eval, q=sol.y[:6], q_dot=sol.y[6:])


def strain_field(trajectory: Trajectory, basis: ShapeBasis, params: PlateParams,
                 discard: float = 960.0) -> GridField:
    """Spanwise normal strain on the 51 x 26 grid, transient removed.

    strain = -(h/2) * d2w/dy2 evaluated at the grid sensors.
    """
    keep = trajectory.t_ms > discard
    if not np.any(keep):
        raise ValueError("discard window covers the whole trajectory")
    x_mm, y_mm = grid_coordinates()
    b_rows = basis.d2dy2(x_mm * 1e-3, y_mm * 1e-3)            # (6, 1326)
    strain_map = -(params.thickness / 2.0) * b_rows.T          # (1326, 6)
    values = strain_map @ trajectory.q[:, keep]
    return GridField(values=values, t_start_ms=float(trajectory.t_ms[keep][0]),
                     meta={"discard_ms": float(discard)})
