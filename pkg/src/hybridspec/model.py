"""Parameters of the cavity / microwave / mechanics system and its mode matrix.

All rates and frequencies are angular (rad/s). Mode ordering in every vector
and matrix is fixed: ``[cavity, microwave, mech_1, ..., mech_N]``.

The equations of motion in the Fourier domain read::

    -i w x = M x - d c_in

with ``M`` from :func:`build_mode_matrix` and ``d = [sqrt(kappa_c1), 0, ...]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .units import TWO_PI


class InvalidParamsError(ValueError):
    """Raised when an operation receives parameters that fail validation."""


@dataclass(frozen=True)
class ModeParams:
    omega: float
    linewidth: float = 0.0


@dataclass(frozen=True)
class CavityParams:
    omega_c: float
    kappa_c1: float
    kappa_c2: float
    kappa_ci: float

    @property
    def kappa_c(self) -> float:
        """Total cavity linewidth; always derived, never stored."""
        return self.kappa_c1 + self.kappa_c2 + self.kappa_ci

    @classmethod
    def symmetric(cls, omega_c: float, kappa_c: float, kappa_ext: float) -> "CavityParams":
        """Equal port couplings ``kappa_ext`` each; the remainder is intrinsic."""
        return cls(omega_c, kappa_ext, kappa_ext, kappa_c - 2.0 * kappa_ext)


@dataclass(frozen=True)
class SystemParams:
    cavity: CavityParams
    microwave: ModeParams
    mechanical: tuple[ModeParams, ...] = ()
    g_ac: float = 0.0
    g_ab: tuple[float, ...] = ()
    c_offset: complex = 1.0

    def __post_init__(self):
        # accept lists from callers but keep the object hashable and immutable
        object.__setattr__(self, "mechanical", tuple(self.mechanical))
        object.__setattr__(self, "g_ab", tuple(float(g) for g in self.g_ab))

    @property
    def n_mech(self) -> int:
        return len(self.mechanical)

    def with_microwave_omega(self, omega_a: float) -> "SystemParams":
        return replace(self, microwave=replace(self.microwave, omega=omega_a))


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class ModeMatrix:
    matrix: np.ndarray
    drive_vector: np.ndarray

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


def _finite(x) -> bool:
    return bool(np.isfinite(x))


def validate(params: SystemParams) -> ValidationReport:
    """List every violated invariant of ``params``; an empty report means valid."""
    v: list[str] = []
    cav = params.cavity
    if not (_finite(cav.omega_c) and cav.omega_c > 0):
        v.append("cavity: omega_c must be positive")
    for name in ("kappa_c1", "kappa_c2", "kappa_ci"):
        value = getattr(cav, name)
        if not _finite(value) or value < 0:
            v.append(f"cavity: negative rate {name}={value}")
    if not (_finite(params.microwave.omega) and params.microwave.omega > 0):
        v.append("microwave: omega must be positive")
    if not _finite(params.microwave.linewidth) or params.microwave.linewidth < 0:
        v.append(f"microwave: negative rate linewidth={params.microwave.linewidth}")
    for n, mode in enumerate(params.mechanical):
        if not (_finite(mode.omega) and mode.omega > 0):
            v.append(f"mechanical[{n}]: omega must be positive")
        if not _finite(mode.linewidth) or mode.linewidth < 0:
            v.append(f"mechanical[{n}]: negative rate linewidth={mode.linewidth}")
    if len(params.g_ab) != len(params.mechanical):
        v.append(
            f"coupling list length mismatch: {len(params.g_ab)} g_ab values "
            f"for {len(params.mechanical)} mechanical modes"
        )
    if not _finite(params.g_ac) or params.g_ac < 0:
        v.append(f"negative rate g_ac={params.g_ac}")
    for n, g in enumerate(params.g_ab):
        if not _finite(g) or g < 0:
            v.append(f"negative rate g_ab[{n}]={g}")
    if not (_finite(abs(params.c_offset)) and abs(params.c_offset) > 0):
        v.append("c_offset magnitude must be positive")
    return ValidationReport(tuple(v))


def require_valid(params: SystemParams) -> None:
    report = validate(params)
    if not report.ok:
        raise InvalidParamsError(report.violations[0])


def build_mode_matrix(params: SystemParams) -> ModeMatrix:
    require_valid(params)
    n = params.n_mech
    cav, mw = params.cavity, params.microwave
    omegas = [cav.omega_c, mw.omega] + [m.omega for m in params.mechanical]
    decays = [cav.kappa_c, mw.linewidth] + [m.linewidth for m in params.mechanical]

    mat = np.zeros((n + 2, n + 2), dtype=complex)
    mat[np.diag_indices(n + 2)] = -1j * np.asarray(omegas) - 0.5 * np.asarray(decays)
    mat[0, 1] = mat[1, 0] = -1j * params.g_ac
    for k, g in enumerate(params.g_ab):
        mat[1, k + 2] = mat[k + 2, 1] = -1j * g

    drive = np.zeros(n + 2, dtype=complex)
    drive[0] = math.sqrt(cav.kappa_c1)
    return ModeMatrix(mat, drive)


def flipchip_params(
    cut: int = 1,
    kappa_ext_hz: float = 100e3,
    c_offset: complex = 1.0,
) -> SystemParams:
    """Flip-chip fit values, one of three cuts (``cut`` in 0..2).

    Only the total cavity linewidth is known; the port couplings are set to
    ``kappa_ext_hz`` each and the rest is assigned to intrinsic loss.
    """
    f = FLIPCHIP_HZ
    cavity = CavityParams.symmetric(
        TWO_PI * f["omega_c"], TWO_PI * f["kappa_c"], TWO_PI * kappa_ext_hz
    )
    mw = ModeParams(TWO_PI * f["omega_a"][cut], TWO_PI * f["kappa_ai"][cut])
    mech = tuple(
        ModeParams(TWO_PI * w, TWO_PI * g) for w, g in zip(f["omega_m"], f["gamma_m"])
    )
    return SystemParams(
        cavity=cavity,
        microwave=mw,
        mechanical=mech,
        g_ac=TWO_PI * f["g_ac"],
        g_ab=tuple(TWO_PI * g for g in f["g_ab"]),
        c_offset=c_offset,
    )


# Fitted values (cyclic units, Hz) for the flip-chip and the cross-chip
# wirebond chip pairs. The three microwave entries are the three fit cuts.
FLIPCHIP_HZ = {
    "omega_c": 2.923e9,
    "kappa_c": 444e3,
    "omega_a": (2.572e9, 2.589e9, 2.604e9),
    "kappa_ai": (295e3, 346e3, 339e3),
    "omega_m": (2.485e9, 2.526e9, 2.559e9, 2.606e9, 2.651e9),
    "gamma_m": (81e3, 80e3, 149e3, 72e3, 836e3),
    "g_ac": 83.466e6,
    "g_ab": (15.314e6, 14.364e6, 14.255e6, 13.590e6, 13.633e6),
}

WIREBOND_HZ = {
    "omega_c": 2.837e9,
    "kappa_c": 1026e3,
    "omega_a": (2.141e9, 2.171e9, 2.194e9),
    "kappa_ai": (346e3, 342e3, 239e3),
    "omega_m": (2.086e9, 2.111e9, 2.139e9, 2.164e9, 2.201e9),
    "gamma_m": (1073e3, 270e3, 88e3, 207e3, 98e3),
    "g_ac": 68.295e6,
    "g_ab": (14.234e6, 13.549e6, 12.774e6, 13.026e6, 12.883e6),
}


def random_params(rng: np.random.Generator, n_mech: int, lossless: bool = False) -> SystemParams:
    """Random valid parameters in a GHz-scale band, for property tests."""
    w0 = TWO_PI * 2.5e9

    def rate(scale):
        return 0.0 if lossless else float(rng.uniform(0.1, 1.0) * scale)

    # port couplings stay finite so a lossless system still scatters
    k1, k2 = (float(rng.uniform(0.1, 1.0) * TWO_PI * 1e6) for _ in range(2))
    cavity = CavityParams(w0 * rng.uniform(1.05, 1.2), k1, k2, rate(TWO_PI * 1e6))
    mw = ModeParams(w0 * rng.uniform(0.97, 1.03), rate(TWO_PI * 1e6))
    mech = tuple(
        ModeParams(w0 * rng.uniform(0.95, 1.05), rate(TWO_PI * 1e6)) for _ in range(n_mech)
    )
    return SystemParams(
        cavity=cavity,
        microwave=mw,
        mechanical=mech,
        g_ac=float(TWO_PI * rng.uniform(10e6, 100e6)),
        g_ab=tuple(float(TWO_PI * rng.uniform(1e6, 20e6)) for _ in range(n_mech)),
    )
