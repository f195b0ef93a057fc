"""Kinetic-inductance tuning of the microwave resonator by coil current.

The nanowire inductance grows quadratically with current,
``L_k(I) = L_k(0) [1 + (I/I*)^2]``. With ``alpha_k = L_k(0) / L_total`` the LC
resonance follows ``w(I) = w_a0 / sqrt(1 + alpha_k (I/I*_eff)^2)``, where
``I*_eff`` is referred to the coil current (mA).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import optimize

MU_0 = 1.25663706212e-6  # H/m


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class KineticInductanceParams:
    lambda_L: float
    length_l: float
    width_w: float
    thickness_t: float
    i_star: float

    def __post_init__(self):
        for name in ("lambda_L", "length_l", "width_w", "thickness_t", "i_star"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class TuningModel:
    omega_a0: float
    alpha_k: float
    i_star_eff: float
    coil_cal: float = 0.01  # mT/mA, reporting only

    @property
    def curvature(self) -> float:
        """Combined ``alpha_k / I*_eff^2`` in 1/mA^2."""
        return self.alpha_k / self.i_star_eff**2

    def field_mT(self, current_mA):
        return self.coil_cal * np.asarray(current_mA, dtype=float)


def validate_tuning(m: TuningModel) -> None:
    if not (m.omega_a0 > 0):
        raise ValueError("omega_a0 must be positive")
    if not (0 < m.alpha_k <= 1):
        raise ValueError("alpha_k must lie in (0, 1]")
    if not (m.i_star_eff > 0):
        raise ValueError("i_star_eff must be positive")
    if not (m.coil_cal > 0):
        raise ValueError("coil_cal must be positive")


def kinetic_inductance(p: KineticInductanceParams, current):
    """Kinetic inductance (H) of a wire carrying ``current`` (A)."""
    l0 = MU_0 * p.lambda_L**2 * p.length_l / (p.width_w * p.thickness_t)
    return l0 * (1.0 + (np.asarray(current, dtype=float) / p.i_star) ** 2)


def frequency_at_current(m: TuningModel, current):
    """Microwave angular frequency at coil current ``current`` (mA)."""
    x = np.asarray(current, dtype=float) / m.i_star_eff
    return m.omega_a0 / np.sqrt(1.0 + m.alpha_k * x * x)


def current_at_frequency(m: TuningModel, omega) -> float:
    """Non-negative coil current (mA) that tunes the mode to ``omega``."""
    ratio = (m.omega_a0 / omega) ** 2 - 1.0
    if ratio < 0:
        raise ValueError("frequency above the zero-current value is unreachable")
    return m.i_star_eff * math.sqrt(ratio / m.alpha_k)


def calibrate(
    omega_points: Iterable[tuple[float, float]],
    omega_a0_hint: float | None = None,
    alpha_k: float = 1.0,
    coil_cal: float = 0.01,
) -> TuningModel:
    """Fit ``w_a0`` and the curvature to ``(current mA, omega rad/s)`` points.

    ``1/w^2`` is linear in ``I^2``, which gives a closed-form start; the
    result is then refined on the frequency residual itself. Only the product
    ``alpha_k / I*_eff^2`` is identifiable, so ``alpha_k`` is taken as given
    and ``i_star_eff`` is solved for.
    """
    pts = np.asarray(list(omega_points), dtype=float).reshape(-1, 2)
    if pts.shape[0] < 2 or np.unique(np.abs(pts[:, 0])).size < 2:
        raise CalibrationError("degenerate calibration input: need two distinct |I| values")
    if not (0 < alpha_k <= 1):
        raise CalibrationError("alpha_k must lie in (0, 1]")
    i2 = pts[:, 0] ** 2
    w = pts[:, 1]
    if np.any(w <= 0):
        raise CalibrationError("frequencies must be positive")

    # w^-2 = A + B I^2 with A = w0^-2, B = curvature * w0^-2
    design = np.column_stack([np.ones_like(i2), i2])
    (a, b), *_ = np.linalg.lstsq(design, w**-2.0, rcond=None)
    if a <= 0:
        raise CalibrationError("calibration points imply a non-physical zero-current frequency")
    w0, curv = 1.0 / math.sqrt(a), b / a

    if pts.shape[0] > 2 or omega_a0_hint is not None:
        scale = float(np.max(w))
        x0 = [w0 if omega_a0_hint is None else omega_a0_hint, curv]
        if x0[1] <= 0:
            x0[1] = abs(curv) or 1.0 / np.max(i2)

        def residual(x):
            return (x[0] / np.sqrt(1.0 + x[1] * i2) - w) / scale

        sol = optimize.least_squares(
            residual, x0, x_scale=[scale, abs(x0[1])], xtol=1e-15, ftol=1e-15, gtol=1e-15
        )
        w0, curv = float(sol.x[0]), float(sol.x[1])

    if curv <= 0:
        raise CalibrationError(
            "calibration points do not tune downward with current (non-positive curvature)"
        )
    return TuningModel(
        omega_a0=w0, alpha_k=alpha_k, i_star_eff=math.sqrt(alpha_k / curv), coil_cal=coil_cal
    )


def fixture_tuning(
    alpha_k: float = 0.5, i_star_eff: float = 300.0, freq0_hz: float = 2.65e9
) -> TuningModel:
    """Synthetic coil-tuning fixture, 2.65 GHz at zero current by default.

    The paper gives no cut currents; use :func:`cut_currents` to obtain the
    currents at which this model hits the three fitted microwave frequencies.
    Sweeps that must cross the 2.651 GHz mechanical mode need a higher
    ``freq0_hz``.
    """
    return TuningModel(omega_a0=2 * math.pi * freq0_hz, alpha_k=alpha_k, i_star_eff=i_star_eff)


def cut_currents(m: TuningModel, omegas: Iterable[float]) -> list[float]:
    return [current_at_frequency(m, w) for w in omegas]
