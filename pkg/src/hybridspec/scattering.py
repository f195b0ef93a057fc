"""Reflection and transmission of the coupled system, plus coil-sweep maps.

The closed-form coefficients evaluate the nested self-energy directly::

    r(w) = 1 - kappa_c1 / D(w)
    t(w) = -sqrt(kappa_c1 kappa_c2) / D(w)
    D(w) = -i Dc + kappa_c/2 + g_ac^2 / (-i Da + kappa_ai/2 + sum_n g_n^2 / (-i Db_n + gamma_n/2))

with detunings ``D* = w - w_*``. :func:`brute_force_response` solves the full
linear system instead and is kept deliberately independent of this path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import SystemParams, build_mode_matrix, require_valid
from .units import TWO_PI


class NonFiniteResultError(ArithmeticError):
    """The response diverges: the probe sits on an undamped pole."""


class EigenSolverError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SpectrumTrace:
    freqs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=float)
        values = np.asarray(self.values)
        if freqs.ndim != 1 or freqs.shape != values.shape:
            raise ValueError("freqs and values must be 1-D arrays of equal length")
        if freqs.size and np.any(np.diff(freqs) <= 0):
            raise ValueError("freqs must be strictly increasing")
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.freqs.size

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)


@dataclass(frozen=True)
class SweepGrid:
    currents: np.ndarray
    freqs: np.ndarray
    magnitude: np.ndarray

    def __post_init__(self):
        mag = np.asarray(self.magnitude, dtype=float)
        currents = np.asarray(self.currents, dtype=float)
        freqs = np.asarray(self.freqs, dtype=float)
        if mag.shape != (currents.size, freqs.size):
            raise ValueError(
                f"magnitude shape {mag.shape} != ({currents.size}, {freqs.size})"
            )
        if np.any(mag < 0):
            raise ValueError("magnitudes must be non-negative")
        object.__setattr__(self, "currents", currents)
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "magnitude", mag)


def _denominator(params: SystemParams, omega, omega_a=None):
    """Self-energy denominator D(w); ``omega_a`` may override (and broadcast) w_a."""
    omega = np.asarray(omega, dtype=float)
    cav, mw = params.cavity, params.microwave
    w_a = mw.omega if omega_a is None else np.asarray(omega_a, dtype=float)

    mech_term = 0.0
    for mode, g in zip(params.mechanical, params.g_ab):
        mech_term = mech_term + g * g / (-1j * (omega - mode.omega) + 0.5 * mode.linewidth)
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = -1j * (omega - w_a) + 0.5 * mw.linewidth + mech_term
        microwave_term = params.g_ac**2 / inner if params.g_ac else 0.0
        d = -1j * (omega - cav.omega_c) + 0.5 * cav.kappa_c + microwave_term
    # numpy scalars divide by zero to inf instead of raising
    return np.asarray(d, dtype=complex)[()]


def _checked(value, omega):
    if not np.all(np.isfinite(value)):
        bad = np.asarray(omega)[~np.isfinite(value)] if np.ndim(value) else omega
        raise NonFiniteResultError(f"response diverges at omega={np.ravel(bad)[:3]} rad/s")
    return value


def _with_errstate(fn):
    def wrapper(*args, **kwargs):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return fn(*args, **kwargs)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_with_errstate
def reflection(params: SystemParams, omega):
    """Port-1 reflection r(w); ``omega`` (rad/s) may be a scalar or an array."""
    require_valid(params)
    d = _denominator(params, omega)
    r = 1.0 - params.cavity.kappa_c1 / d
    return _checked(r, omega)


@_with_errstate
def transmission(params: SystemParams, omega):
    """Port-1 to port-2 transmission t(w)."""
    require_valid(params)
    cav = params.cavity
    d = _denominator(params, omega)
    t = -math.sqrt(cav.kappa_c1) * math.sqrt(cav.kappa_c2) / d
    return _checked(t, omega)


def s21(params: SystemParams, omega):
    """Transmission scaled by the measurement-chain offset."""
    return params.c_offset * transmission(params, omega)


def brute_force_response(params: SystemParams, omega):
    """Solve the equations of motion directly and apply the port boundary conditions.

    Returns ``(r, t)`` with the same shape as ``omega``. Boundary conditions
    follow the convention matched to the drive sign of the mode matrix:
    ``c_out1 = c_in + sqrt(kappa_c1) c`` and ``c_out2 = sqrt(kappa_c2) c``.
    """
    mm = build_mode_matrix(params)
    omega_arr = np.atleast_1d(np.asarray(omega, dtype=float))
    dim = mm.dimension
    a = (-1j * omega_arr)[:, None, None] * np.eye(dim) - mm.matrix[None, :, :]
    rhs = np.broadcast_to(-mm.drive_vector, (omega_arr.size, dim))[..., None]
    try:
        x = np.linalg.solve(a, rhs)[..., 0]
    except np.linalg.LinAlgError as exc:
        raise NonFiniteResultError(f"singular mode system: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise NonFiniteResultError("singular mode system")
    c = x[:, 0]
    cav = params.cavity
    r = 1.0 + math.sqrt(cav.kappa_c1) * c
    t = math.sqrt(cav.kappa_c2) * c
    if np.ndim(omega) == 0:
        return complex(r[0]), complex(t[0])
    return r.reshape(np.shape(omega)), t.reshape(np.shape(omega))


def hybridized_modes(params: SystemParams) -> list[tuple[float, float]]:
    """Normal modes as ``(frequency, decay rate)`` pairs in rad/s, ascending in frequency."""
    mm = build_mode_matrix(params)
    try:
        eig = np.linalg.eigvals(mm.matrix)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(str(exc)) from exc
    if not np.all(np.isfinite(eig)):
        raise EigenSolverError("eigenvalues not finite")
    modes = [(float(-ev.imag), float(-2.0 * ev.real)) for ev in eig]
    return sorted(modes)


def local_maxima(values: np.ndarray) -> np.ndarray:
    """Indices of strict three-point local maxima (end points excluded)."""
    v = np.asarray(values)
    inner = (v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:])
    return np.flatnonzero(inner) + 1


def transmission_peaks(params: SystemParams, freqs_hz: Sequence[float]) -> np.ndarray:
    """Frequencies (Hz) of local maxima of |t| on the given grid."""
    freqs_hz = np.asarray(freqs_hz, dtype=float)
    mag = np.abs(transmission(params, TWO_PI * freqs_hz))
    return freqs_hz[local_maxima(mag)]


def sweep(params: SystemParams, tuning, currents, freqs) -> SweepGrid:
    """|S21| map over coil current (mA) and probe frequency (Hz).

    Each row swaps in the microwave frequency given by ``tuning`` at that
    current; every other parameter stays fixed.
    """
    from .tuning import frequency_at_current, validate_tuning

    require_valid(params)
    validate_tuning(tuning)
    currents = np.asarray(currents, dtype=float)
    freqs = np.asarray(freqs, dtype=float)
    omega = TWO_PI * freqs
    rows = np.empty((currents.size, freqs.size))
    for i, current in enumerate(currents):
        row_params = params.with_microwave_omega(float(frequency_at_current(tuning, current)))
        rows[i] = np.abs(s21(row_params, omega))
    return SweepGrid(currents, freqs, rows)


def refined_peaks(freqs, values) -> np.ndarray:
    """Local maxima of ``values`` refined by a three-point parabola, in ``freqs`` units."""
    freqs = np.asarray(freqs, dtype=float)
    v = np.asarray(values, dtype=float)
    idx = local_maxima(v)
    if idx.size == 0:
        return np.empty(0)
    y0, y1, y2 = v[idx - 1], v[idx], v[idx + 1]
    curv = y0 - 2.0 * y1 + y2
    with np.errstate(divide="ignore", invalid="ignore"):
        offset = np.where(curv < 0, 0.5 * (y0 - y2) / curv, 0.0)
    # uniform grids are assumed locally; the step is taken from the right neighbour
    step = freqs[idx + 1] - freqs[idx]
    return freqs[idx] + offset * step


@dataclass(frozen=True)
class CrossingGap:
    center: float  # Hz
    splitting: float  # Hz, nan when no row shows both branches
    current: float  # mA of the narrowest row


def crossing_gaps(grid: SweepGrid, centers_hz, half_window_hz: float) -> list[CrossingGap]:
    """Minimum peak-to-peak splitting around each bare frequency in ``centers_hz``.

    In every row, the nearest peaks below and above the centre (within
    ``half_window_hz``) are taken as the two branches of the avoided crossing;
    the narrowest such pair over all rows gives the splitting and its current.
    """
    rows = [refined_peaks(grid.freqs, row) for row in grid.magnitude]
    out = []
    for center in centers_hz:
        best, best_current = math.inf, math.nan
        for current, peaks in zip(grid.currents, rows):
            near = peaks[np.abs(peaks - center) <= half_window_hz]
            below, above = near[near <= center], near[near > center]
            if below.size and above.size:
                gap = above.min() - below.max()
                if gap < best:
                    best, best_current = gap, float(current)
        out.append(CrossingGap(float(center), best if math.isfinite(best) else math.nan, best_current))
    return out
