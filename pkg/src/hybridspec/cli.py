"""Command-line front end.

    hybridspec {simulate,sweep,fit,circuit,tune} --config CFG --out DIR [--seed N] [-v]

Exit codes: 0 success, 2 config/schema error, 3 numerical failure, 4 I/O
failure. On failure ``DIR/error.json`` describes the problem (when ``DIR`` is
writable) and a one-line message goes to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, io
from .circuit import (
    CircuitError,
    SingularNetworkError,
    WirebondModelParams,
    build_network,
    coupling_and_shift_vs_length,
    elements_table,
)
from .fit import (
    CutTrace,
    FitError,
    FitProblem,
    GaSettings,
    PrefitError,
    fit,
    prefit_cavity,
    reconstruct_sweep,
)
from .model import CavityParams, InvalidParamsError, require_valid
from .scattering import (
    EigenSolverError,
    NonFiniteResultError,
    SpectrumTrace,
    hybridized_modes,
    s21,
    sweep,
    transmission_peaks,
)
from .schema import SCHEMAS, WIREBOND_UNITS
from .tuning import CalibrationError, TuningModel, calibrate, frequency_at_current, validate_tuning
from .units import TWO_PI, UnitError, parse_quantity

log = logging.getLogger("hybridspec")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


class OutputError(OSError):
    pass


_NUMERIC_ERRORS = (
    NonFiniteResultError,
    EigenSolverError,
    CalibrationError,
    FitError,
    PrefitError,
    SingularNetworkError,
    CircuitError,
    ArithmeticError,
    np.linalg.LinAlgError,
)


# config helpers ----------------------------------------------------------


def _hz(value) -> float:
    return parse_quantity(value, "Hz")


def _rad(value) -> float:
    return TWO_PI * _hz(value)


def _grid(doc) -> np.ndarray:
    start, stop = _hz(doc["start_hz"]), _hz(doc["stop_hz"])
    if not stop > start:
        raise ConfigError(f"grid: stop_hz ({stop}) must exceed start_hz ({start})")
    return np.linspace(start, stop, doc["points"])


def _currents(doc) -> np.ndarray:
    if isinstance(doc, list):
        return np.asarray(doc, dtype=float)
    return np.linspace(doc["start_ma"], doc["stop_ma"], doc["points"])


def _tuning(doc) -> TuningModel:
    m = TuningModel(
        omega_a0=_rad(doc["freq0_hz"]),
        alpha_k=doc["alpha_k"],
        i_star_eff=doc["i_star_eff_ma"],
        coil_cal=doc.get("coil_cal_mt_per_ma", 0.01),
    )
    try:
        validate_tuning(m)
    except ValueError as exc:
        raise ConfigError(f"tuning: {exc}") from exc
    return m


def _system(doc):
    """SystemParams from the Hz document, with SI strings resolved first."""
    resolved = json.loads(json.dumps(doc))
    for part in ("cavity", "microwave"):
        for key, val in resolved[part].items():
            resolved[part][key] = _hz(val)
    for mode in resolved.get("mechanical", []):
        for key, val in mode.items():
            mode[key] = _hz(val)
    if "g_ac_hz" in resolved:
        resolved["g_ac_hz"] = _hz(resolved["g_ac_hz"])
    resolved["g_ab_hz"] = [_hz(g) for g in resolved.get("g_ab_hz", [])]
    params = io.params_from_dict(resolved)
    require_valid(params)
    return params


def _cavity(doc) -> CavityParams:
    return CavityParams(
        _rad(doc["freq_hz"]), _rad(doc["kappa_1_hz"]), _rad(doc["kappa_2_hz"]),
        _rad(doc.get("kappa_i_hz", 0.0)),
    )


def _read_input_trace(base: Path, rel: str) -> SpectrumTrace:
    path = base / rel
    if not path.is_file():
        raise ConfigError(f"trace file not found: {path}")
    try:
        return io.read_trace_csv(path)
    except io.TraceFormatError as exc:
        raise ConfigError(str(exc)) from exc


# commands ----------------------------------------------------------------


def cmd_simulate(cfg, ctx):
    """Closed-form |S21| trace plus the hybrid-mode table."""
    params = _system(cfg["params"])
    freqs = _grid(cfg["grid"])
    values = s21(params, TWO_PI * freqs)
    noise = cfg.get("noise", 0.0)
    if noise:
        rng = np.random.default_rng(ctx.seed)
        values = values * (1.0 + noise * rng.standard_normal(values.size))
    trace = SpectrumTrace(freqs, values)
    modes = hybridized_modes(params)
    summary = {
        "hybrid_modes": [
            {"freq_hz": w / TWO_PI, "decay_hz": k / TWO_PI} for w, k in modes
        ],
        "peaks_hz": transmission_peaks(params, freqs).tolist(),
        "points": int(freqs.size),
    }
    ctx.write("trace.csv", lambda p: io.write_trace_csv(p, trace, ctx.prov))
    ctx.write("summary.json", lambda p: io.write_json(p, summary, ctx.prov))


def cmd_sweep(cfg, ctx):
    """|S21| map over coil current, written as CSV and PGM."""
    params = _system(cfg["params"])
    freqs = _grid(cfg["grid"])
    tuning = _tuning(cfg["tuning"])
    currents = _currents(cfg["currents_ma"])
    grid = sweep(params, tuning, currents, freqs)
    summary = {
        "tuning": _tuning_doc(tuning),
        "currents_ma": currents.tolist(),
        "microwave_hz": (frequency_at_current(tuning, currents) / TWO_PI).tolist(),
    }
    ctx.write("grid.csv", lambda p: io.write_grid_csv(p, grid, ctx.prov))
    ctx.write("heatmap.pgm", lambda p: io.write_pgm(p, grid, ctx.prov))
    ctx.write("summary.json", lambda p: io.write_json(p, summary, ctx.prov))


def _tuning_doc(m: TuningModel) -> dict:
    return {
        "freq0_hz": m.omega_a0 / TWO_PI,
        "alpha_k": m.alpha_k,
        "i_star_eff_ma": m.i_star_eff,
        "coil_cal_mt_per_ma": m.coil_cal,
    }


def _pairs(doc, what, n):
    if len(doc) != n:
        raise ConfigError(f"bounds.{what}: expected {n} pairs, got {len(doc)}")
    out = []
    for lo, hi in doc:
        lo, hi = _rad(lo), _rad(hi)
        if not 0 < lo < hi:
            raise ConfigError(f"bounds.{what}: need 0 < lo < hi, got ({lo}, {hi}) rad/s")
        out.append((lo, hi))
    return out


def cmd_fit(cfg, ctx):
    """Multi-cut GA fit with optional sweep reconstruction."""
    base = ctx.config_dir
    cav_doc = cfg["cavity"]
    if "prefit_csv" in cav_doc:
        wide = _read_input_trace(base, cav_doc["prefit_csv"])
        k_ext = _rad(cav_doc["kappa_ext_hz"]) if "kappa_ext_hz" in cav_doc else None
        cavity = prefit_cavity(wide, k_ext)
    else:
        cavity = _cavity(cav_doc)

    cuts = []
    for c in cfg["cuts"]:
        trace = _read_input_trace(base, c["csv"])
        cuts.append(CutTrace(c["id"], trace, c.get("current_ma")))

    b = cfg["bounds"]
    n_mech, n_cuts = len(b["omega_m_hz"]), len(cuts)
    shared = {
        "omega_m": _pairs(b["omega_m_hz"], "omega_m_hz", n_mech),
        "gamma_m": _pairs(b["gamma_m_hz"], "gamma_m_hz", n_mech),
        "g_ab": _pairs(b["g_ab_hz"], "g_ab_hz", n_mech),
        "g_ac": _pairs([b["g_ac_hz"]], "g_ac_hz", 1)[0],
        "c_offset": tuple(float(x) for x in b["c_offset"]),
    }
    lo, hi = shared["c_offset"]
    if not 0 < lo < hi:
        raise ConfigError("bounds.c_offset: need 0 < lo < hi")
    per_cut = {
        "omega_a": _pairs(b["omega_a_hz"], "omega_a_hz", n_cuts),
        "kappa_ai": _pairs(b["kappa_ai_hz"], "kappa_ai_hz", n_cuts),
    }
    ga = GaSettings(**cfg.get("ga", {}))
    if ctx.seed is not None:
        ga = replace(ga, seed=ctx.seed)
    try:
        ga.validate()
    except ValueError as exc:
        raise ConfigError(f"ga: {exc}") from exc
    problem = FitProblem(tuple(cuts), cavity, shared, per_cut, ga)

    def progress(gen, best):
        if gen % 50 == 0:
            log.info("generation %d: best cost %.6g", gen, best)

    result = fit(problem, progress=progress)
    ids = [c.cut_id for c in cuts]
    doc = {"problem": io.fit_problem_to_dict(problem), "result": io.fit_result_to_dict(result, ids)}
    ctx.prov = replace(ctx.prov, seed=result.seed_used)
    ctx.write("fit_result.json", lambda p: io.write_json(p, doc, ctx.prov))
    table = io.format_table(result.params_per_cut, ids, ctx.prov)
    ctx.write("table.txt", lambda p: p.write_text(table, encoding="utf-8"))

    rec_doc = cfg.get("reconstruct")
    if rec_doc is not None:
        cut_currents = [c.current for c in cuts]
        tuning = _tuning(rec_doc["tuning"]) if "tuning" in rec_doc else None
        if tuning is None and any(i is None for i in cut_currents):
            raise ConfigError("reconstruct: give a tuning model or current_ma for every cut")
        rec = reconstruct_sweep(
            result,
            tuning,
            _currents(rec_doc["currents_ma"]),
            _grid(rec_doc["grid"]),
            cut_currents=None if any(i is None for i in cut_currents) else cut_currents,
        )
        overlays = {"tuning": _tuning_doc(rec.tuning), **rec.overlays()}
        ctx.write("reconstruction_grid.csv", lambda p: io.write_grid_csv(p, rec.grid, ctx.prov))
        ctx.write("reconstruction.pgm", lambda p: io.write_pgm(p, rec.grid, ctx.prov))
        ctx.write("reconstruction.json", lambda p: io.write_json(p, overlays, ctx.prov))


def _wirebond(cfg) -> WirebondModelParams:
    overrides = {}
    for key, val in cfg.get("wirebond", {}).items():
        if key in WIREBOND_UNITS:
            overrides[key] = parse_quantity(val, WIREBOND_UNITS[key])
        else:
            overrides[key] = val
    preset = cfg.get("preset", "band_consistent")
    factory = (
        WirebondModelParams.band_consistent if preset == "band_consistent"
        else WirebondModelParams.as_printed
    )
    try:
        return factory(**overrides)
    except CircuitError as exc:
        raise ConfigError(f"wirebond: {exc}") from exc


def cmd_circuit(cfg, ctx):
    """Wirebond coupling and microwave shift versus bond length."""
    p = _wirebond(cfg)
    lengths_doc = cfg["lengths_mm"]
    if isinstance(lengths_doc, list):
        lengths = [float(x) for x in lengths_doc]
    else:
        lengths = np.linspace(
            lengths_doc["start_mm"], lengths_doc["stop_mm"], lengths_doc["points"]
        ).tolist()
    points = coupling_and_shift_vs_length(
        p, lengths, window=cfg.get("window", 0.25), n_grid=cfg.get("n_grid", 2000)
    )
    failed = [pt for pt in points if pt.error]
    rows = [(pt.length, pt.g, pt.shift) for pt in points if not pt.error]
    ctx.write(
        "lengths.csv",
        lambda path: io.write_rows_csv(path, ["length_mm", "g_hz", "shift_hz"], rows, ctx.prov),
    )
    net = build_network(p)
    params_doc = {f.name: getattr(p, f.name) for f in fields(p)}
    summary = {
        "params": params_doc,
        "microwave_hz": p.microwave_frequency,
        "mechanical_hz": p.mechanical_frequency,
        "elements": elements_table(net),
        "failed": [{"length_mm": pt.length, "error": pt.error} for pt in failed],
    }
    ctx.write("summary.json", lambda path: io.write_json(path, summary, ctx.prov))
    if failed and not rows:
        raise CircuitError(f"no length could be analysed: {failed[0].error}")


def cmd_tune(cfg, ctx):
    """Calibrate the kinetic-inductance tuning law from (I, f) points."""
    pts = [(pt["current_ma"], _rad(pt["freq_hz"])) for pt in cfg["points"]]
    hint = _rad(cfg["freq0_hint_hz"]) if "freq0_hint_hz" in cfg else None
    model = calibrate(
        pts,
        omega_a0_hint=hint,
        alpha_k=cfg.get("alpha_k", 1.0),
        coil_cal=cfg.get("coil_cal_mt_per_ma", 0.01),
    )
    currents = _currents(cfg["currents_ma"])
    freqs = frequency_at_current(model, currents) / TWO_PI
    rows = list(zip(currents, model.field_mT(currents), freqs))
    ctx.write("tuning.json", lambda p: io.write_json(p, {"tuning": _tuning_doc(model)}, ctx.prov))
    ctx.write(
        "frequency_vs_current.csv",
        lambda p: io.write_rows_csv(p, ["current_ma", "field_mt", "freq_hz"], rows, ctx.prov),
    )


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "fit": cmd_fit,
    "circuit": cmd_circuit,
    "tune": cmd_tune,
}


# plumbing ----------------------------------------------------------------


class _Context:
    def __init__(self, out: Path, config_dir: Path, seed, prov: io.Provenance):
        self.out = out
        self.config_dir = config_dir
        self.seed = seed
        self.prov = prov

    def write(self, name, writer):
        path = self.out / name
        try:
            writer(path)
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc}") from exc
        log.info("wrote %s", path)


def load_config(command: str, path: Path) -> tuple[dict, bytes]:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    validator = jsonschema.Draft202012Validator(SCHEMAS[command])
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        first = errors[0]
        where = "/".join(str(p) for p in first.absolute_path) or "<root>"
        raise ConfigError(f"schema error at {where}: {first.message}")
    return doc, raw


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridspec",
        description="Coupled cavity/microwave/mechanics spectroscopy tools.",
    )
    parser.add_argument("--version", action="version", version=f"hybridspec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=(COMMANDS[name].__doc__ or name).strip().split("\n")[0])
        p.add_argument("--config", required=True, type=Path, help="JSON config file")
        p.add_argument("--out", required=True, type=Path, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _effective_seed(command: str, cfg: dict, override):
    if override is not None:
        return override
    if command == "fit":
        return cfg.get("ga", {}).get("seed", GaSettings().seed)
    if command == "simulate":
        return cfg.get("seed", 0)
    return None


def _classify(exc: BaseException) -> int:
    if isinstance(exc, OutputError):
        return EXIT_IO
    if isinstance(exc, (ConfigError, UnitError, InvalidParamsError)):
        return EXIT_CONFIG
    if isinstance(exc, _NUMERIC_ERRORS):
        return EXIT_NUMERIC
    if isinstance(exc, OSError):
        return EXIT_IO
    if isinstance(exc, ValueError):
        return EXIT_CONFIG
    return EXIT_NUMERIC


def run(command: str, config: Path, out: Path, seed=None) -> int:
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"hybridspec: cannot create output directory {out}: {exc}", file=sys.stderr)
        return EXIT_IO
    stale = out / "error.json"
    try:
        cfg, raw = load_config(command, config)
        if seed is not None and not 0 <= seed < 2**64:
            raise ConfigError("--seed must be a 64-bit unsigned integer")
        eff_seed = _effective_seed(command, cfg, seed)
        prov = io.Provenance.from_bytes(raw, eff_seed)
        ctx = _Context(out, config.resolve().parent, eff_seed, prov)
        if stale.exists():
            stale.unlink()
        COMMANDS[command](cfg, ctx)
        return EXIT_OK
    except Exception as exc:  # noqa: BLE001 - every failure maps to an exit code
        code = _classify(exc)
        report = {
            "command": command,
            "exit_code": code,
            "error": type(exc).__name__,
            "message": str(exc),
        }
        print(f"hybridspec {command}: {report['error']}: {report['message']}", file=sys.stderr)
        try:
            stale.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
        except OSError:
            pass
        return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    return run(args.command, args.config, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
