"""Plain-text serialization: trace/grid/length CSVs, PGM heatmaps and JSON.

Every writer takes an optional :class:`Provenance`; it becomes ``#`` comment
lines at the top of CSV/PGM/text files and a ``provenance`` key in JSON.
Nothing time-dependent goes into a file, so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .model import CavityParams, ModeParams, SystemParams
from .scattering import SpectrumTrace, SweepGrid
from .units import TWO_PI


class TraceFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Provenance:
    config_sha256: str
    seed: int | None = None
    version: str = __version__

    @classmethod
    def from_bytes(cls, raw: bytes, seed: int | None = None) -> "Provenance":
        return cls(hashlib.sha256(raw).hexdigest(), seed)

    def lines(self) -> list[str]:
        return [
            f"config_sha256={self.config_sha256}",
            f"seed={'none' if self.seed is None else self.seed}",
            f"version=hybridspec {self.version}",
        ]

    def as_dict(self) -> dict:
        return {"config_sha256": self.config_sha256, "seed": self.seed, "version": self.version}


def _fmt(x: float) -> str:
    return repr(float(x))


def _header(prov: Provenance | None) -> str:
    return "".join(f"# {line}\n" for line in prov.lines()) if prov else ""


def _write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="\n")


# traces ------------------------------------------------------------------


def write_trace_csv(path, trace: SpectrumTrace, prov: Provenance | None = None) -> None:
    """Columns ``freq_hz, s21_mag_linear, s21_phase_rad``; ``trace.freqs`` in Hz."""
    buf = io.StringIO()
    buf.write(_header(prov))
    buf.write("freq_hz,s21_mag_linear,s21_phase_rad\n")
    values = np.asarray(trace.values)
    for f, v in zip(trace.freqs, values):
        buf.write(f"{_fmt(f)},{_fmt(abs(v))},{_fmt(np.angle(v))}\n")
    _write_text(path, buf.getvalue())


def read_trace_csv(path) -> SpectrumTrace:
    """Read a trace CSV. The phase column is optional (zero if absent)."""
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines()
             if ln.strip() and not ln.lstrip().startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        raise TraceFormatError(f"{path}: empty trace file")
    header = [h.strip() for h in rows[0]]
    if header[:2] != ["freq_hz", "s21_mag_linear"]:
        raise TraceFormatError(
            f"{path}: expected columns freq_hz,s21_mag_linear[,s21_phase_rad], got {header}"
        )
    has_phase = len(header) > 2 and header[2] == "s21_phase_rad"
    try:
        data = np.array([[float(x) for x in r[: 3 if has_phase else 2]] for r in rows[1:]])
    except ValueError as exc:
        raise TraceFormatError(f"{path}: non-numeric entry ({exc})") from exc
    if data.size == 0:
        raise TraceFormatError(f"{path}: no data rows")
    phase = data[:, 2] if has_phase else 0.0
    try:
        return SpectrumTrace(data[:, 0], data[:, 1] * np.exp(1j * phase))
    except ValueError as exc:
        raise TraceFormatError(f"{path}: {exc}") from exc


# sweep grids -------------------------------------------------------------


def write_grid_csv(path, grid: SweepGrid, prov: Provenance | None = None) -> None:
    """Header row of frequencies (Hz), first column currents (mA)."""
    buf = io.StringIO()
    buf.write(_header(prov))
    buf.write("current_ma\\freq_hz," + ",".join(_fmt(f) for f in grid.freqs) + "\n")
    for current, row in zip(grid.currents, grid.magnitude):
        buf.write(_fmt(current) + "," + ",".join(_fmt(v) for v in row) + "\n")
    _write_text(path, buf.getvalue())


def read_grid_csv(path) -> SweepGrid:
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines()
             if ln.strip() and not ln.startswith("#")]
    rows = list(csv.reader(lines))
    freqs = np.array([float(x) for x in rows[0][1:]])
    body = np.array([[float(x) for x in r] for r in rows[1:]]).reshape(-1, freqs.size + 1)
    return SweepGrid(body[:, 0], freqs, body[:, 1:])


def write_pgm(path, grid: SweepGrid, prov: Provenance | None = None) -> None:
    """Plain (P2) graymap, maxval 65535, rows = currents, min-max normalized."""
    mag = grid.magnitude
    lo, hi = float(mag.min()), float(mag.max())
    span = hi - lo
    scaled = np.zeros(mag.shape, dtype=np.int64) if span <= 0 else \
        np.rint((mag - lo) / span * 65535).astype(np.int64)
    rows, cols = mag.shape
    buf = io.StringIO()
    buf.write("P2\n")
    buf.write(_header(prov))
    buf.write(f"{cols} {rows}\n65535\n")
    for row in scaled:
        buf.write(" ".join(str(v) for v in row) + "\n")
    _write_text(path, buf.getvalue())


def read_pgm(path) -> np.ndarray:
    tokens = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        tokens += line.split("#", 1)[0].split()
    if not tokens or tokens[0] != "P2":
        raise ValueError(f"{path}: not a plain PGM file")
    cols, rows, maxval = (int(t) for t in tokens[1:4])
    data = np.array([int(t) for t in tokens[4:]], dtype=np.int64)
    if data.size != rows * cols or maxval != 65535:
        raise ValueError(f"{path}: malformed PGM body")
    return data.reshape(rows, cols)


# tables ------------------------------------------------------------------


def write_rows_csv(path, header: list[str], rows, prov: Provenance | None = None) -> None:
    buf = io.StringIO()
    buf.write(_header(prov))
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    _write_text(path, buf.getvalue())


def write_json(path, doc: dict, prov: Provenance | None = None) -> None:
    if prov is not None:
        doc = {"provenance": prov.as_dict(), **doc}
    _write_text(path, json.dumps(doc, indent=2, sort_keys=False, allow_nan=False) + "\n")


def _hz(x: float) -> float:
    return x / TWO_PI


def params_to_dict(p: SystemParams) -> dict:
    """Hz-based JSON document for one parameter set (matches the config schema)."""
    cav = p.cavity
    return {
        "cavity": {
            "freq_hz": _hz(cav.omega_c),
            "kappa_1_hz": _hz(cav.kappa_c1),
            "kappa_2_hz": _hz(cav.kappa_c2),
            "kappa_i_hz": _hz(cav.kappa_ci),
        },
        "microwave": {"freq_hz": _hz(p.microwave.omega), "linewidth_hz": _hz(p.microwave.linewidth)},
        "mechanical": [
            {"freq_hz": _hz(m.omega), "linewidth_hz": _hz(m.linewidth)} for m in p.mechanical
        ],
        "g_ac_hz": _hz(p.g_ac),
        "g_ab_hz": [_hz(g) for g in p.g_ab],
        "c_offset": p.c_offset,
    }


def params_from_dict(doc: dict) -> SystemParams:
    cav = doc["cavity"]
    mw = doc["microwave"]
    return SystemParams(
        cavity=CavityParams(
            TWO_PI * cav["freq_hz"],
            TWO_PI * cav["kappa_1_hz"],
            TWO_PI * cav["kappa_2_hz"],
            TWO_PI * cav.get("kappa_i_hz", 0.0),
        ),
        microwave=ModeParams(TWO_PI * mw["freq_hz"], TWO_PI * mw.get("linewidth_hz", 0.0)),
        mechanical=tuple(
            ModeParams(TWO_PI * m["freq_hz"], TWO_PI * m.get("linewidth_hz", 0.0))
            for m in doc.get("mechanical", [])
        ),
        g_ac=TWO_PI * doc.get("g_ac_hz", 0.0),
        g_ab=tuple(TWO_PI * g for g in doc.get("g_ab_hz", [])),
        c_offset=doc.get("c_offset", 1.0),
    )


def fit_result_to_dict(result, cut_ids) -> dict:
    return {
        "cost": result.cost,
        "seed_used": result.seed_used,
        "generations_run": len(result.history),
        "history": list(result.history),
        "cuts": [
            {"id": cid, "params": params_to_dict(p)}
            for cid, p in zip(cut_ids, result.params_per_cut)
        ],
    }


def fit_problem_to_dict(problem) -> dict:
    """Bounds in Hz, GA settings and cut ids; the trace data itself stays in its CSVs."""
    def hz_pairs(pairs):
        return [[_hz(lo), _hz(hi)] for lo, hi in pairs]

    sb, pb = problem.shared_bounds, problem.per_cut_bounds
    return {
        "cuts": [{"id": c.cut_id, "current_ma": c.current, "points": len(c.trace)}
                 for c in problem.cuts],
        "cavity": params_to_dict(
            SystemParams(problem.fixed, ModeParams(problem.fixed.omega_c))
        )["cavity"],
        "bounds": {
            "omega_m_hz": hz_pairs(sb["omega_m"]),
            "gamma_m_hz": hz_pairs(sb["gamma_m"]),
            "g_ab_hz": hz_pairs(sb["g_ab"]),
            "g_ac_hz": hz_pairs([sb["g_ac"]])[0],
            "c_offset": list(sb["c_offset"]),
            "omega_a_hz": hz_pairs(pb["omega_a"]),
            "kappa_ai_hz": hz_pairs(pb["kappa_ai"]),
        },
        "ga": dict(vars(problem.ga)),
    }


def format_table(params_per_cut, cut_ids, prov: Provenance | None = None) -> str:
    """Fit report laid out like the reference parameter table (MHz, kHz)."""
    shared = params_per_cut[0]
    cav = shared.cavity
    out = [_header(prov)]

    def row(label, values, fmt):
        out.append(f"{label:<16}" + "".join(f"{fmt(v):>12}" for v in values) + "\n")

    ghz = lambda w: f"{_hz(w) / 1e9:.4f}"  # noqa: E731
    khz = lambda w: f"{_hz(w) / 1e3:.1f}"  # noqa: E731
    mhz = lambda w: f"{_hz(w) / 1e6:.3f}"  # noqa: E731
    out.append("cavity\n")
    row("w_c/2pi (GHz)", [cav.omega_c], ghz)
    row("k_c/2pi (kHz)", [cav.kappa_c], khz)
    out.append("microwave (per cut)\n")
    row("cut", cut_ids, str)
    row("w_a/2pi (GHz)", [p.microwave.omega for p in params_per_cut], ghz)
    row("k_ai/2pi (kHz)", [p.microwave.linewidth for p in params_per_cut], khz)
    row("g_ac/2pi (MHz)", [shared.g_ac], mhz)
    out.append("mechanics\n")
    row("mode", range(1, shared.n_mech + 1), str)
    row("w_m/2pi (GHz)", [m.omega for m in shared.mechanical], ghz)
    row("gam_b/2pi (kHz)", [m.linewidth for m in shared.mechanical], khz)
    row("g_ab/2pi (MHz)", shared.g_ab, mhz)
    out.append(f"{'c_offset':<16}{shared.c_offset:>12.4f}\n")
    return "".join(out)


