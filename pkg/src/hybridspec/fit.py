"""Multi-cut parameter extraction with a genetic algorithm.

Mechanical frequencies, linewidths, the couplings and the transmission
offset are shared by every cut; the microwave frequency and intrinsic loss
are free per cut. The cavity is fixed beforehand from a wide scan
(:func:`prefit_cavity`).

The GA works on normalized genes in ``[0, 1]``. Frequencies map linearly onto
their bounds and rates map logarithmically, so a Gaussian step in gene space
is a linear step for frequencies and a log-space step for rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import optimize

from .model import CavityParams, ModeParams, SystemParams
from .scattering import SpectrumTrace, SweepGrid, s21, sweep
from .tuning import TuningModel, calibrate, frequency_at_current
from .units import TWO_PI

SHARED_KEYS = ("omega_m", "gamma_m", "g_ab", "g_ac", "c_offset")
PER_CUT_KEYS = ("omega_a", "kappa_ai")
_LOG_KEYS = {"gamma_m", "g_ab", "g_ac", "c_offset", "kappa_ai"}


class FitError(RuntimeError):
    pass


class PrefitError(ValueError):
    pass


@dataclass(frozen=True)
class CutTrace:
    cut_id: str
    trace: SpectrumTrace
    current: float | None = None

    def __post_init__(self):
        if len(self.trace) == 0:
            raise ValueError(f"cut {self.cut_id!r} has an empty trace")


@dataclass(frozen=True)
class GaSettings:
    population: int = 200
    generations: int = 500
    crossover_rate: float = 0.9
    mutation_rate: float = 0.2
    mutation_scale: float = 1.0
    elite_count: int = 2
    seed: int = 0
    stall_generations: int = 500
    tournament_size: int = 3
    # "adaptive": per-gene sigma = mutation_scale * population spread of that gene;
    # "annealed": sigma = mutation_scale, shrunk geometrically to
    # mutation_scale * mutation_decay by the last generation
    mutation_mode: str = "adaptive"
    mutation_decay: float = 0.01

    def validate(self) -> None:
        if self.population < 2 * self.elite_count or self.population < 2:
            raise ValueError("population must be at least 2 * elite_count")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.mutation_scale <= 0 or not 0 < self.mutation_decay <= 1:
            raise ValueError("mutation_scale must be positive and mutation_decay in (0, 1]")
        if self.generations < 1 or self.tournament_size < 1 or self.elite_count < 0:
            raise ValueError("generations and tournament_size must be positive")
        if self.mutation_mode not in ("annealed", "adaptive"):
            raise ValueError(f"unknown mutation_mode {self.mutation_mode!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


Bound = tuple[float, float]


@dataclass(frozen=True)
class FitProblem:
    """Cuts to fit plus search bounds (rad/s for rates and frequencies).

    ``shared_bounds`` maps ``omega_m``, ``gamma_m`` and ``g_ab`` to one
    ``(lo, hi)`` pair per mechanical mode, and ``g_ac`` / ``c_offset`` to a
    single pair. ``per_cut_bounds`` maps ``omega_a`` and ``kappa_ai`` to one
    pair per cut.
    """

    cuts: tuple[CutTrace, ...]
    fixed: CavityParams
    shared_bounds: dict
    per_cut_bounds: dict
    ga: GaSettings = field(default_factory=GaSettings)
    complex_residuals: bool = False

    def __post_init__(self):
        object.__setattr__(self, "cuts", tuple(self.cuts))

    @property
    def n_mech(self) -> int:
        return len(self.shared_bounds["omega_m"])

    @property
    def n_cuts(self) -> int:
        return len(self.cuts)


@dataclass(frozen=True)
class FitResult:
    params_per_cut: tuple[SystemParams, ...]
    cost: float
    history: tuple[float, ...]
    seed_used: int
    vector: tuple[float, ...] = ()

    @property
    def shared(self) -> SystemParams:
        return self.params_per_cut[0]


class ParameterSpace:
    """Layout of the flat candidate vector and its map to ``[0, 1]`` genes.

    Order: ``omega_m[N], gamma_m[N], g_ab[N], g_ac, c_offset, omega_a[K], kappa_ai[K]``.
    """

    def __init__(self, problem: FitProblem):
        n, k = problem.n_mech, problem.n_cuts
        sb, pb = problem.shared_bounds, problem.per_cut_bounds
        entries: list[tuple[str, Bound]] = []
        for key in ("omega_m", "gamma_m", "g_ab"):
            if len(sb[key]) != n:
                raise ValueError(f"{key}: expected {n} bounds, got {len(sb[key])}")
            entries += [(key, tuple(b)) for b in sb[key]]
        entries += [("g_ac", tuple(sb["g_ac"])), ("c_offset", tuple(sb["c_offset"]))]
        for key in PER_CUT_KEYS:
            if len(pb[key]) != k:
                raise ValueError(f"{key}: expected {k} bounds (one per cut), got {len(pb[key])}")
            entries += [(key, tuple(b)) for b in pb[key]]

        self.n_mech, self.n_cuts = n, k
        self.keys = [e[0] for e in entries]
        self.lo = np.array([b[0] for _, b in entries], dtype=float)
        self.hi = np.array([b[1] for _, b in entries], dtype=float)
        if np.any(~(self.lo < self.hi)):
            bad = [self.keys[i] for i in np.flatnonzero(~(self.lo < self.hi))]
            raise ValueError(f"lower bound must be below upper bound for {bad}")
        self.log = np.array([key in _LOG_KEYS for key in self.keys])
        if np.any(self.lo[self.log] <= 0):
            raise ValueError("rate bounds must be positive (searched in log space)")
        self._a = np.where(self.log, np.log(np.where(self.log, self.lo, 1.0)), self.lo)
        self._b = np.where(self.log, np.log(np.where(self.log, self.hi, 1.0)), self.hi)

    @property
    def size(self) -> int:
        return self.lo.size

    def slices(self) -> dict[str, slice]:
        n, k = self.n_mech, self.n_cuts
        return {
            "omega_m": slice(0, n),
            "gamma_m": slice(n, 2 * n),
            "g_ab": slice(2 * n, 3 * n),
            "g_ac": slice(3 * n, 3 * n + 1),
            "c_offset": slice(3 * n + 1, 3 * n + 2),
            "omega_a": slice(3 * n + 2, 3 * n + 2 + k),
            "kappa_ai": slice(3 * n + 2 + k, 3 * n + 2 + 2 * k),
        }

    def decode(self, genes: np.ndarray) -> np.ndarray:
        x = self._a + genes * (self._b - self._a)
        x[..., self.log] = np.exp(x[..., self.log])
        return x

    def encode(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        x = np.where(self.log, np.log(np.where(self.log, values, 1.0)), values)
        return (x - self._a) / (self._b - self._a)

    def center(self) -> np.ndarray:
        return self.decode(np.full(self.size, 0.5))

    def vector_from_params(self, params_per_cut: Sequence[SystemParams]) -> np.ndarray:
        first = params_per_cut[0]
        vec = [m.omega for m in first.mechanical]
        vec += [m.linewidth for m in first.mechanical]
        vec += list(first.g_ab)
        vec += [first.g_ac, abs(first.c_offset)]
        vec += [p.microwave.omega for p in params_per_cut]
        vec += [p.microwave.linewidth for p in params_per_cut]
        return np.array(vec, dtype=float)

    def params_from_vector(self, vec, cavity: CavityParams) -> tuple[SystemParams, ...]:
        s = self.slices()
        vec = np.asarray(vec, dtype=float)
        mech = tuple(
            ModeParams(float(w), float(g)) for w, g in zip(vec[s["omega_m"]], vec[s["gamma_m"]])
        )
        shared = dict(
            cavity=cavity,
            mechanical=mech,
            g_ac=float(vec[s["g_ac"]][0]),
            g_ab=tuple(float(g) for g in vec[s["g_ab"]]),
            c_offset=float(vec[s["c_offset"]][0]),
        )
        return tuple(
            SystemParams(microwave=ModeParams(float(w), float(k)), **shared)
            for w, k in zip(vec[s["omega_a"]], vec[s["kappa_ai"]])
        )


def _model_s21(space: ParameterSpace, cavity: CavityParams, X: np.ndarray, cut: int, omega):
    """Model S21 for a population ``X`` (P, D) on one cut grid -> (P, M)."""
    s = space.slices()
    w = omega[None, :]
    mech = 0.0
    for n in range(space.n_mech):
        wm = X[:, s["omega_m"]][:, n, None]
        gm = X[:, s["gamma_m"]][:, n, None]
        g = X[:, s["g_ab"]][:, n, None]
        mech = mech + g * g / (-1j * (w - wm) + 0.5 * gm)
    wa = X[:, s["omega_a"]][:, cut, None]
    ka = X[:, s["kappa_ai"]][:, cut, None]
    g_ac = X[:, s["g_ac"]]
    c_off = X[:, s["c_offset"]]
    denom = (
        -1j * (w - cavity.omega_c)
        + 0.5 * cavity.kappa_c
        + g_ac**2 / (-1j * (w - wa) + 0.5 * ka + mech)
    )
    return -c_off * math.sqrt(cavity.kappa_c1 * cavity.kappa_c2) / denom


class _Evaluator:
    """Vectorized cost over a population, cuts summed in their stored order."""

    def __init__(self, problem: FitProblem, space: ParameterSpace):
        self.problem = problem
        self.space = space
        self.omegas = [TWO_PI * c.trace.freqs for c in problem.cuts]
        if problem.complex_residuals:
            self.data = [np.asarray(c.trace.values, dtype=complex) for c in problem.cuts]
        else:
            self.data = [np.abs(c.trace.values).astype(float) for c in problem.cuts]

    def __call__(self, X: np.ndarray) -> np.ndarray:
        total = np.zeros(X.shape[0])
        with np.errstate(all="ignore"):
            for k, (omega, data) in enumerate(zip(self.omegas, self.data)):
                model = _model_s21(self.space, self.problem.fixed, X, k, omega)
                if self.problem.complex_residuals:
                    res = np.abs(model - data[None, :]) ** 2
                else:
                    res = (np.abs(model) - data[None, :]) ** 2
                total = total + res.sum(axis=1)
        total[~np.isfinite(total)] = np.inf
        return total


def cost(problem: FitProblem, candidate) -> float:
    """Sum of squared |S21| residuals over every cut and frequency point.

    Returns ``inf`` when the model cannot be evaluated at some point.
    """
    space = ParameterSpace(problem)
    x = np.asarray(candidate, dtype=float)
    if x.shape != (space.size,):
        raise ValueError(f"candidate must have {space.size} entries")
    if np.any(x < space.lo) or np.any(x > space.hi):
        raise ValueError("candidate outside bounds")
    return float(_Evaluator(problem, space)(x[None, :])[0])


def _tournament(rng, fitness, count, size):
    entrants = rng.integers(0, fitness.size, size=(count, size))
    winners = np.argmin(fitness[entrants], axis=1)
    return entrants[np.arange(count), winners]


def _reflect(genes):
    # mirror at the box walls; a second pass covers large steps
    genes = np.abs(genes)
    genes = 1.0 - np.abs(1.0 - genes)
    return np.clip(genes, 0.0, 1.0)


def fit(problem: FitProblem, seed: int | None = None, progress=None) -> FitResult:
    """Run the GA and return the best candidate as per-cut parameter sets.

    Identical problem, settings and seed give bitwise-identical results.
    """
    ga = problem.ga if seed is None else replace(problem.ga, seed=seed)
    ga.validate()
    space = ParameterSpace(problem)
    evaluate = _Evaluator(problem, space)
    rng = np.random.default_rng(ga.seed)
    P, D, E = ga.population, space.size, ga.elite_count

    genes = rng.random((P, D))
    fitness = evaluate(space.decode(genes))
    if not np.any(np.isfinite(fitness)):
        raise FitError(
            f"all {P} initial candidates are infeasible (model evaluation failed); "
            "check bounds and cut data"
        )

    history = []
    best, stall = np.inf, 0
    n_children = P - E
    for gen in range(ga.generations):
        order = np.argsort(fitness, kind="stable")
        if fitness[order[0]] < best:
            best, stall = float(fitness[order[0]]), 0
        else:
            stall += 1
        history.append(best)
        if progress is not None:
            progress(gen, best)
        if stall >= ga.stall_generations:
            break

        if ga.mutation_mode == "adaptive":
            sigma = ga.mutation_scale * np.maximum(genes.std(axis=0), 1e-9)
        else:
            sigma = ga.mutation_scale * ga.mutation_decay ** (gen / max(ga.generations - 1, 1))
        mothers = genes[_tournament(rng, fitness, n_children, ga.tournament_size)]
        fathers = genes[_tournament(rng, fitness, n_children, ga.tournament_size)]
        do_cross = rng.random(n_children) < ga.crossover_rate
        take_father = (rng.random((n_children, D)) < 0.5) & do_cross[:, None]
        children = np.where(take_father, fathers, mothers)
        mutate = rng.random((n_children, D)) < ga.mutation_rate
        steps = rng.normal(0.0, sigma, (n_children, D))
        children = _reflect(children + mutate * steps)

        child_fitness = evaluate(space.decode(children))
        genes = np.concatenate([genes[order[:E]], children])
        fitness = np.concatenate([fitness[order[:E]], child_fitness])

    order = np.argsort(fitness, kind="stable")
    if fitness[order[0]] < best:
        best = float(fitness[order[0]])
        history.append(best)
    if not math.isfinite(best):
        raise FitError("no feasible candidate found")
    vec = space.decode(genes[order[0]])
    params = space.params_from_vector(vec, problem.fixed)
    return FitResult(
        params_per_cut=params,
        cost=float(fitness[order[0]]),
        history=tuple(history),
        seed_used=int(ga.seed),
        vector=tuple(float(v) for v in vec),
    )


def _lorentz_mag(f, amp, f0, width):
    return amp / np.sqrt(1.0 + (2.0 * (f - f0) / width) ** 2)


def prefit_cavity(
    wide_trace: SpectrumTrace, kappa_ext: float | None = None
) -> CavityParams:
    """Fit an isolated cavity peak in |S21| for ``omega_c`` and total ``kappa_c``.

    The port split is not observable from |S21| alone; ports get ``kappa_ext``
    each (default: a quarter of the total) and the rest is intrinsic.
    """
    f = wide_trace.freqs
    mag = wide_trace.magnitude
    if mag.size < 5:
        raise PrefitError("no peak: trace too short")
    i0 = int(np.argmax(mag))
    peak, floor = mag[i0], float(np.median(mag))
    if not peak > 2.0 * floor or np.ptp(mag) <= 1e-12 * max(peak, 1e-300):
        raise PrefitError("no peak: trace has no resolvable resonance")
    half = peak / math.sqrt(2.0)
    left = np.flatnonzero(mag[:i0] < half)
    right = np.flatnonzero(mag[i0:] < half)
    if i0 in (0, mag.size - 1) or left.size == 0 or right.size == 0:
        raise PrefitError("peak not bracketed by the trace")
    width0 = f[i0 + right[0]] - f[left[-1]]

    # a narrow window around the peak keeps the fit insensitive to other structure
    window = (f > f[i0] - 10 * width0) & (f < f[i0] + 10 * width0)
    popt, _ = optimize.curve_fit(
        _lorentz_mag,
        f[window],
        mag[window],
        p0=(peak, f[i0], width0),
        xtol=1e-14,
        ftol=1e-14,
        maxfev=20000,
    )
    _, f0, width = popt
    kappa_c = TWO_PI * abs(width)
    k_ext = 0.25 * kappa_c if kappa_ext is None else kappa_ext
    if 2 * k_ext > kappa_c:
        raise PrefitError("port coupling exceeds the fitted total linewidth")
    return CavityParams.symmetric(TWO_PI * f0, kappa_c, k_ext)


@dataclass(frozen=True)
class Reconstruction:
    grid: SweepGrid
    tuning: TuningModel
    mechanical_hz: tuple[float, ...]
    microwave_hz: np.ndarray  # tuned bare microwave frequency per current

    def overlays(self) -> dict:
        return {
            "currents_mA": self.grid.currents.tolist(),
            "mechanical_hz": list(self.mechanical_hz),
            "microwave_hz": np.asarray(self.microwave_hz).tolist(),
        }


def reconstruct_sweep(
    result: FitResult,
    tuning: TuningModel | None,
    currents,
    freqs,
    cut_currents: Sequence[float] | None = None,
) -> Reconstruction:
    """Rebuild the coil sweep from a fit.

    Without ``tuning``, the tuning law is calibrated from the fitted per-cut
    microwave frequencies at ``cut_currents``. The intrinsic microwave loss is
    interpolated linearly between cuts.
    """
    currents = np.asarray(currents, dtype=float)
    freqs = np.asarray(freqs, dtype=float)
    per_cut = result.params_per_cut
    if tuning is None:
        if cut_currents is None:
            raise ValueError("cut_currents are required to calibrate the tuning model")
        tuning = calibrate(
            [(i, p.microwave.omega) for i, p in zip(cut_currents, per_cut)],
            omega_a0_hint=max(p.microwave.omega for p in per_cut),
        )
    base = result.shared
    if cut_currents is not None and len(cut_currents) == len(per_cut):
        order = np.argsort(np.abs(cut_currents))
        xs = np.abs(np.asarray(cut_currents, dtype=float))[order]
        ks = np.array([per_cut[i].microwave.linewidth for i in order])
        kappa = np.interp(np.abs(currents), xs, ks)
    else:
        kappa = np.full(currents.size, np.mean([p.microwave.linewidth for p in per_cut]))

    rows = np.empty((currents.size, freqs.size))
    for i, (current, k) in enumerate(zip(currents, kappa)):
        row_params = replace(base, microwave=ModeParams(base.microwave.omega, float(k)))
        rows[i] = sweep(row_params, tuning, [current], freqs).magnitude[0]
    grid = SweepGrid(currents, freqs, rows)
    return Reconstruction(
        grid=grid,
        tuning=tuning,
        mechanical_hz=tuple(m.omega / TWO_PI for m in base.mechanical),
        microwave_hz=frequency_at_current(tuning, currents) / TWO_PI,
    )


def synthetic_cuts(
    params_per_cut: Sequence[SystemParams],
    freqs_hz,
    noise: float = 0.0,
    rng: np.random.Generator | None = None,
    currents: Sequence[float] | None = None,
) -> tuple[CutTrace, ...]:
    """|S21| traces for each parameter set; ``noise`` is relative amplitude noise."""
    freqs_hz = np.asarray(freqs_hz, dtype=float)
    cuts = []
    for k, p in enumerate(params_per_cut):
        mag = np.abs(s21(p, TWO_PI * freqs_hz))
        if noise:
            mag = mag * (1.0 + noise * rng.standard_normal(mag.size))
        cuts.append(
            CutTrace(
                cut_id=f"cut{k}",
                trace=SpectrumTrace(freqs_hz, mag),
                current=None if currents is None else float(currents[k]),
            )
        )
    return tuple(cuts)
