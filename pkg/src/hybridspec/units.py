"""SI-prefix parsing for config values such as ``"2.923GHz"`` or ``"20pF"``."""

from __future__ import annotations

import math
import re

TWO_PI = 2.0 * math.pi

_PREFIXES = {
    "y": 1e-24, "z": 1e-21, "a": 1e-18, "f": 1e-15, "p": 1e-12, "n": 1e-9,
    "u": 1e-6, "µ": 1e-6, "μ": 1e-6, "m": 1e-3, "": 1.0, "k": 1e3,
    "M": 1e6, "G": 1e9, "T": 1e12,
}

# Longest unit names first so "Ohm" wins over "H"-style ambiguities.
_UNITS = ("Hz", "Ohm", "ohm", "Ω", "H", "F", "A", "T", "m", "s")

_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_QUANTITY = re.compile(rf"^\s*({_NUMBER})\s*([^\d\s]*)\s*$")


class UnitError(ValueError):
    """Raised for a malformed or mismatched quantity string."""


def parse_quantity(value: str | float | int, unit: str | None = None) -> float:
    """Convert ``value`` to a float in base SI units.

    Plain numbers pass through unchanged. Strings are split into a number and
    a suffix; the suffix is an optional SI prefix followed by ``unit`` (when
    given). ``parse_quantity("444kHz", "Hz") == 444e3``.
    """
    if isinstance(value, bool):
        raise UnitError(f"not a quantity: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise UnitError(f"not a quantity: {value!r}")
    match = _QUANTITY.match(value)
    if match is None:
        raise UnitError(f"cannot parse quantity {value!r}")
    number, suffix = float(match.group(1)), match.group(2)
    if not suffix:
        return number

    if unit is not None:
        names = (unit, "ohm", "Ohm", "Ω") if unit in ("Ohm", "ohm", "Ω") else (unit,)
        for name in names:
            if suffix.endswith(name):
                prefix = suffix[: -len(name)]
                break
        else:
            # bare prefix with the unit left implicit, e.g. "2.923G"
            prefix = suffix
        if prefix not in _PREFIXES:
            raise UnitError(f"unknown prefix {prefix!r} in {value!r} (expected unit {unit})")
        return number * _PREFIXES[prefix]

    for name in _UNITS:
        if suffix.endswith(name) and suffix[: -len(name)] in _PREFIXES:
            return number * _PREFIXES[suffix[: -len(name)]]
    if suffix in _PREFIXES:
        return number * _PREFIXES[suffix]
    raise UnitError(f"unknown unit suffix {suffix!r} in {value!r}")


def hz_to_rad(f_hz):
    return TWO_PI * f_hz


def rad_to_hz(omega):
    return omega / TWO_PI
