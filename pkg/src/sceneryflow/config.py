"""IFS configuration files: field block, maps, probabilities.

YAML format (rationals are strings like "3/4" or integers; floats are
rejected -- all coefficients must be exact):

    field:
      minpoly: [-1, 1, 1]          # integer coefficients, low-to-high
      root_interval: ["1/2", "1"]  # isolating interval (degree >= 2)
    dim: 1
    maps:
      - ratio: [0, 1]              # power-basis coefficient vector or scalar
        translation: [["0"]]       # one coefficient vector per coordinate
    probs: ["1/2", "1/2"]

Bundled systems resolve by name: strong-separation, dyadic, golden.
"""

from __future__ import annotations

import importlib.resources
from pathlib import Path

import yaml

from .numfield import QQ, AlgebraicField
from .ifs import IFS, Similarity, normalize_ifs

BUNDLED = {
    "strong-separation": "strong_separation.yaml",
    "dyadic": "dyadic.yaml",
    "golden": "golden.yaml",
}


class ConfigError(ValueError):
    """Invalid configuration, with a path to the offending entry."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where


def _rational(value, where):
    if isinstance(value, bool) or isinstance(value, float):
        raise ConfigError(where, f"expected an exact rational, got {value!r} "
                                 "(floats are not exact; write \"1/2\")")
    try:
        return QQ(value)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise ConfigError(where, f"cannot parse rational {value!r}: {exc}") from exc


def _coeff_vector(field: AlgebraicField, value, where):
    if isinstance(value, (list, tuple)):
        coeffs = [_rational(v, f"{where}[{i}]") for i, v in enumerate(value)]
        if len(coeffs) > field.degree:
            raise ConfigError(where, f"vector longer than the field degree "
                                     f"({len(coeffs)} > {field.degree})")
        return field.element(coeffs)
    return field.element(_rational(value, where))


def resolve_config_path(name_or_path) -> Path:
    if str(name_or_path) in BUNDLED:
        resource = importlib.resources.files("sceneryflow") / "data" / BUNDLED[str(name_or_path)]
        return Path(str(resource))
    path = Path(name_or_path)
    if not path.exists():
        raise ConfigError(str(name_or_path),
                          f"no such config file or bundled system "
                          f"(bundled: {', '.join(sorted(BUNDLED))})")
    return path


def load_system(name_or_path, normalize: bool = True) -> IFS:
    """Parse, validate and (by default) normalize a configured system."""
    path = resolve_config_path(name_or_path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"YAML parse failure: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(str(path), "top level must be a mapping")

    for key in ("field", "dim", "maps", "probs"):
        if key not in raw:
            raise ConfigError(str(path), f"missing required key {key!r}")

    fblock = raw["field"]
    if not isinstance(fblock, dict) or "minpoly" not in fblock:
        raise ConfigError("field", "needs a minpoly coefficient list")
    minpoly = fblock["minpoly"]
    if not isinstance(minpoly, list) or not all(isinstance(c, int) for c in minpoly):
        raise ConfigError("field.minpoly", "must be a list of integers (low-to-high)")
    interval = fblock.get("root_interval")
    try:
        if interval is None:
            field = AlgebraicField(minpoly)
        else:
            lo = _rational(interval[0], "field.root_interval[0]")
            hi = _rational(interval[1], "field.root_interval[1]")
            field = AlgebraicField(minpoly, (lo, hi))
    except ValueError as exc:
        raise ConfigError("field", str(exc)) from exc

    dim = raw["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise ConfigError("dim", "must be a positive integer")

    maps = []
    if not isinstance(raw["maps"], list) or len(raw["maps"]) < 2:
        raise ConfigError("maps", "need a list of at least two maps")
    for i, entry in enumerate(raw["maps"]):
        where = f"maps[{i}]"
        if not isinstance(entry, dict) or "ratio" not in entry or "translation" not in entry:
            raise ConfigError(where, "each map needs ratio and translation")
        ratio = _coeff_vector(field, entry["ratio"], f"{where}.ratio")
        trans_raw = entry["translation"]
        if not isinstance(trans_raw, list) or len(trans_raw) != dim:
            raise ConfigError(f"{where}.translation",
                              f"need exactly {dim} coordinate entries")
        translation = tuple(
            _coeff_vector(field, t, f"{where}.translation[{j}]")
            for j, t in enumerate(trans_raw))
        maps.append(Similarity(ratio, translation))

    probs = [_rational(p, f"probs[{i}]") for i, p in enumerate(raw["probs"])]
    try:
        system = IFS(field, dim, maps, probs)
    except ValueError as exc:
        raise ConfigError(str(path), str(exc)) from exc
    return normalize_ifs(system) if normalize else system
