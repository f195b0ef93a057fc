"""JSON Schemas for the command configs (draft 2020-12, unknown keys rejected).

Quantities accept either a number in base SI units or a string with an SI
prefix and unit ("2.923GHz", "444kHz", "20pF"); strings are converted at
load time by :func:`hybridspec.units.parse_quantity`.
"""

from __future__ import annotations

import copy

QUANTITY = {"type": ["number", "string"]}
POSITIVE = {"type": "number", "exclusiveMinimum": 0}


def _obj(properties: dict, required=()) -> dict:
    return {
        "type": "object",
        "additionalProperties": False,
        "properties": properties,
        "required": list(required),
    }


_MODE = _obj({"freq_hz": QUANTITY, "linewidth_hz": QUANTITY}, ["freq_hz"])
_CAVITY = _obj(
    {"freq_hz": QUANTITY, "kappa_1_hz": QUANTITY, "kappa_2_hz": QUANTITY, "kappa_i_hz": QUANTITY},
    ["freq_hz", "kappa_1_hz", "kappa_2_hz"],
)
_SYSTEM = _obj(
    {
        "cavity": _CAVITY,
        "microwave": _MODE,
        "mechanical": {"type": "array", "items": _MODE},
        "g_ac_hz": QUANTITY,
        "g_ab_hz": {"type": "array", "items": QUANTITY},
        "c_offset": {"type": "number"},
    },
    ["cavity", "microwave"],
)
_GRID = _obj(
    {"start_hz": QUANTITY, "stop_hz": QUANTITY, "points": {"type": "integer", "minimum": 2}},
    ["start_hz", "stop_hz", "points"],
)
_CURRENT_RANGE = _obj(
    {"start_ma": {"type": "number"}, "stop_ma": {"type": "number"},
     "points": {"type": "integer", "minimum": 1}},
    ["start_ma", "stop_ma", "points"],
)
_CURRENTS = {
    "oneOf": [
        {"type": "array", "items": {"type": "number"}, "minItems": 1},
        _CURRENT_RANGE,
    ]
}
_TUNING = _obj(
    {
        "freq0_hz": QUANTITY,
        "alpha_k": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "i_star_eff_ma": POSITIVE,
        "coil_cal_mt_per_ma": POSITIVE,
    },
    ["freq0_hz", "alpha_k", "i_star_eff_ma"],
)
_PAIR = {"type": "array", "items": QUANTITY, "minItems": 2, "maxItems": 2}
_PAIRS = {"type": "array", "items": _PAIR}
_GA = _obj(
    {
        "population": {"type": "integer", "minimum": 2},
        "generations": {"type": "integer", "minimum": 1},
        "crossover_rate": {"type": "number", "minimum": 0, "maximum": 1},
        "mutation_rate": {"type": "number", "minimum": 0, "maximum": 1},
        "mutation_scale": POSITIVE,
        "mutation_decay": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "mutation_mode": {"enum": ["adaptive", "annealed"]},
        "elite_count": {"type": "integer", "minimum": 0},
        "tournament_size": {"type": "integer", "minimum": 1},
        "stall_generations": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
    }
)
_WIREBOND_UNITS = {
    "L_m": "H", "C_m": "F", "R_m": "Ohm", "C_o": "F", "C_pm": "F",
    "L_mw": "H", "C_mw": "F", "R_mw": "Ohm", "L_wb_per_mm": "H/mm",
    "C_p": "F", "C_wb": "F", "R_wb": "Ohm", "C_pwb_per_mm": "F/mm",
}
_WIREBOND = _obj(
    {
        **{name: QUANTITY for name in _WIREBOND_UNITS},
        "cp_side": {"enum": ["chip", "far"]},
        "r_m_placement": {"enum": ["series", "shunt"]},
    }
)
_LENGTHS = {
    "oneOf": [
        {"type": "array", "items": POSITIVE, "minItems": 1},
        _obj(
            {"start_mm": POSITIVE, "stop_mm": POSITIVE, "points": {"type": "integer", "minimum": 1}},
            ["start_mm", "stop_mm", "points"],
        ),
    ]
}

SCHEMAS = {
    "simulate": _obj(
        {
            "params": _SYSTEM,
            "grid": _GRID,
            "noise": {"type": "number", "minimum": 0},
            "seed": {"type": "integer", "minimum": 0},
        },
        ["params", "grid"],
    ),
    "sweep": _obj(
        {"params": _SYSTEM, "grid": _GRID, "tuning": _TUNING, "currents_ma": _CURRENTS},
        ["params", "grid", "tuning", "currents_ma"],
    ),
    "fit": _obj(
        {
            "cavity": {
                "oneOf": [
                    _CAVITY,
                    _obj({"prefit_csv": {"type": "string"}, "kappa_ext_hz": QUANTITY},
                         ["prefit_csv"]),
                ]
            },
            "cuts": {
                "type": "array",
                "minItems": 1,
                "items": _obj(
                    {"id": {"type": "string"}, "csv": {"type": "string"},
                     "current_ma": {"type": "number"}},
                    ["id", "csv"],
                ),
            },
            "bounds": _obj(
                {
                    "omega_m_hz": _PAIRS, "gamma_m_hz": _PAIRS, "g_ab_hz": _PAIRS,
                    "g_ac_hz": _PAIR, "c_offset": _PAIR,
                    "omega_a_hz": _PAIRS, "kappa_ai_hz": _PAIRS,
                },
                ["omega_m_hz", "gamma_m_hz", "g_ab_hz", "g_ac_hz", "c_offset",
                 "omega_a_hz", "kappa_ai_hz"],
            ),
            "ga": _GA,
            "reconstruct": _obj(
                {"grid": _GRID, "currents_ma": _CURRENTS, "tuning": _TUNING},
                ["grid", "currents_ma"],
            ),
        },
        ["cavity", "cuts", "bounds"],
    ),
    "circuit": _obj(
        {
            "preset": {"enum": ["band_consistent", "as_printed"]},
            "wirebond": _WIREBOND,
            "lengths_mm": _LENGTHS,
            "window": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "n_grid": {"type": "integer", "minimum": 100},
        },
        ["lengths_mm"],
    ),
    "tune": _obj(
        {
            "points": {
                "type": "array",
                "minItems": 2,
                "items": _obj({"current_ma": {"type": "number"}, "freq_hz": QUANTITY},
                              ["current_ma", "freq_hz"]),
            },
            "alpha_k": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "freq0_hint_hz": QUANTITY,
            "coil_cal_mt_per_ma": POSITIVE,
            "currents_ma": _CURRENTS,
        },
        ["points", "currents_ma"],
    ),
}

WIREBOND_UNITS = dict(_WIREBOND_UNITS)


def schema_for(command: str) -> dict:
    doc = copy.deepcopy(SCHEMAS[command])
    doc["$schema"] = "https://json-schema.org/draft/2020-12/schema"
    doc["title"] = f"hybridspec {command} config"
    return doc
