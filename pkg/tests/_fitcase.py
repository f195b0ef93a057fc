"""Synthetic three-cut fitting problems shared by the fit and acceptance tests."""

import numpy as np

from hybridspec.fit import FitProblem, GaSettings, synthetic_cuts
from hybridspec.model import flipchip_params
from hybridspec.units import TWO_PI

FIT_FREQS_HZ = np.linspace(2.45e9, 2.68e9, 2301)
NOISE_RNG_SEED = 1


def freq_bounds(omega, lo_mhz, hi_mhz):
    return (omega - TWO_PI * lo_mhz * 1e6, omega + TWO_PI * hi_mhz * 1e6)


def rate_bounds(rate, lo=0.4, hi=2.5):
    return (rate * lo, rate * hi)


def flipchip_bounds(truth):
    """Bounds that hold the truth off-centre: +/-1.5 MHz windows, rates x[0.4, 2.5]."""
    p = truth[0]
    shared = {
        "omega_m": [
            freq_bounds(m.omega, 1.5 * (0.6 + 0.1 * i), 1.5 * (1.4 - 0.1 * i))
            for i, m in enumerate(p.mechanical)
        ],
        "gamma_m": [rate_bounds(m.linewidth) for m in p.mechanical],
        "g_ab": [rate_bounds(g, 0.75, 1.3) for g in p.g_ab],
        "g_ac": rate_bounds(p.g_ac, 0.8, 1.25),
        "c_offset": (0.3, 3.0),
    }
    per_cut = {
        "omega_a": [freq_bounds(q.microwave.omega, 1.8, 1.2) for q in truth],
        "kappa_ai": [rate_bounds(q.microwave.linewidth) for q in truth],
    }
    return shared, per_cut


def flipchip_problem(noise=0.0, freqs_hz=FIT_FREQS_HZ, **ga):
    truth = [flipchip_params(k) for k in range(3)]
    rng = np.random.default_rng(NOISE_RNG_SEED)
    cuts = synthetic_cuts(truth, freqs_hz, noise, rng)
    shared, per_cut = flipchip_bounds(truth)
    return FitProblem(cuts, truth[0].cavity, shared, per_cut, GaSettings(**ga)), truth
