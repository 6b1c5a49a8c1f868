"""Geometry config files: JSON with lower_snake_case keys, vectors as 3-element arrays.

Unknown keys are rejected with the offending JSON path in the error message.
"""

from __future__ import annotations

import json
import os
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import GeometryConfigError
from .model import LegGeometry, MechanismGeometry, StackedAxis, ToolBody, Variant

CONFIG_DIR_ENV = "PKMKIT_CONFIG_DIR"

_LEG_KEYS = {"rail_origin", "rail_axis", "leg_length", "rho_min", "rho_max"}
_TOOL_KEYS = {"anchor_offsets", "beta_axis", "gamma_axis", "characteristic_length"}
_STACKED_KEYS = {"axis", "rho_min", "rho_max"}
_TOP_KEYS = {"variant", "translation_legs", "orientation_legs", "tool", "platform_offsets", "stacked_z"}


def _require_mapping(obj, path):
    if not isinstance(obj, dict):
        raise GeometryConfigError(f"{path}: expected an object, got {type(obj).__name__}")


def _reject_unknown(obj: dict, allowed: set, path: str):
    for key in obj:
        if key not in allowed:
            raise GeometryConfigError(f"{path}.{key}: unknown key")


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise GeometryConfigError(f"{path}.{key}: missing required field")
    return obj[key]


def _vector(obj, path):
    if not isinstance(obj, (list, tuple)) or len(obj) != 3:
        raise GeometryConfigError(f"{path}: expected a 3-element array")
    for k, v in enumerate(obj):
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise GeometryConfigError(f"{path}[{k}]: expected a number")
    return [float(v) for v in obj]


def _number(obj, path):
    if not isinstance(obj, (int, float)) or isinstance(obj, bool):
        raise GeometryConfigError(f"{path}: expected a number")
    return float(obj)


def _leg(obj, path) -> LegGeometry:
    _require_mapping(obj, path)
    _reject_unknown(obj, _LEG_KEYS, path)
    try:
        return LegGeometry(
            rail_origin=_vector(_require(obj, "rail_origin", path), f"{path}.rail_origin"),
            rail_axis=_vector(_require(obj, "rail_axis", path), f"{path}.rail_axis"),
            leg_length=_number(_require(obj, "leg_length", path), f"{path}.leg_length"),
            rho_min=_number(_require(obj, "rho_min", path), f"{path}.rho_min"),
            rho_max=_number(_require(obj, "rho_max", path), f"{path}.rho_max"),
        )
    except GeometryConfigError as exc:
        if str(exc).startswith(path):
            raise
        raise GeometryConfigError(f"{path}: {exc}") from exc


def parse_geometry(data: dict, source: str = "config") -> MechanismGeometry:
    """Build a MechanismGeometry from already-parsed JSON data."""
    _require_mapping(data, source)
    _reject_unknown(data, _TOP_KEYS, source)

    variant_name = _require(data, "variant", source)
    try:
        variant = Variant(variant_name)
    except ValueError:
        valid = ", ".join(v.value for v in Variant)
        raise GeometryConfigError(f"{source}.variant: unknown variant {variant_name!r} (expected one of {valid})") from None

    tlegs_data = _require(data, "translation_legs", source)
    if not isinstance(tlegs_data, list):
        raise GeometryConfigError(f"{source}.translation_legs: expected an array")
    tlegs = tuple(_leg(leg, f"{source}.translation_legs[{k}]") for k, leg in enumerate(tlegs_data))

    olegs_data = data.get("orientation_legs", [])
    if not isinstance(olegs_data, list):
        raise GeometryConfigError(f"{source}.orientation_legs: expected an array")
    olegs = tuple(_leg(leg, f"{source}.orientation_legs[{k}]") for k, leg in enumerate(olegs_data))

    tool = None
    if "tool" in data and data["tool"] is not None:
        tpath = f"{source}.tool"
        tdata = data["tool"]
        _require_mapping(tdata, tpath)
        _reject_unknown(tdata, _TOOL_KEYS, tpath)
        offsets_data = _require(tdata, "anchor_offsets", tpath)
        if not isinstance(offsets_data, list):
            raise GeometryConfigError(f"{tpath}.anchor_offsets: expected an array")
        offsets = [_vector(r, f"{tpath}.anchor_offsets[{k}]") for k, r in enumerate(offsets_data)]
        char_len = tdata.get("characteristic_length")
        if char_len is not None:
            char_len = _number(char_len, f"{tpath}.characteristic_length")
        try:
            tool = ToolBody(
                anchor_offsets=offsets,
                beta_axis=_vector(_require(tdata, "beta_axis", tpath), f"{tpath}.beta_axis"),
                gamma_axis=_vector(_require(tdata, "gamma_axis", tpath), f"{tpath}.gamma_axis"),
                characteristic_length=char_len,
            )
        except GeometryConfigError as exc:
            raise GeometryConfigError(f"{tpath}: {exc}") from exc

    offsets = None
    if "platform_offsets" in data and data["platform_offsets"] is not None:
        po = data["platform_offsets"]
        if not isinstance(po, list):
            raise GeometryConfigError(f"{source}.platform_offsets: expected an array")
        offsets = tuple(_vector(d, f"{source}.platform_offsets[{k}]") for k, d in enumerate(po))

    stacked = None
    if "stacked_z" in data and data["stacked_z"] is not None:
        spath = f"{source}.stacked_z"
        sdata = data["stacked_z"]
        _require_mapping(sdata, spath)
        _reject_unknown(sdata, _STACKED_KEYS, spath)
        try:
            stacked = StackedAxis(
                axis=_vector(_require(sdata, "axis", spath), f"{spath}.axis"),
                rho_min=_number(_require(sdata, "rho_min", spath), f"{spath}.rho_min"),
                rho_max=_number(_require(sdata, "rho_max", spath), f"{spath}.rho_max"),
            )
        except GeometryConfigError as exc:
            raise GeometryConfigError(f"{spath}: {exc}") from exc

    try:
        return MechanismGeometry(
            variant=variant,
            translation_legs=tlegs,
            orientation_legs=olegs,
            tool=tool,
            platform_offsets=offsets or (),
            stacked_z=stacked,
        )
    except GeometryConfigError as exc:
        raise GeometryConfigError(f"{source}: {exc}") from exc


def load_geometry(path) -> MechanismGeometry:
    """Load and validate a geometry config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise GeometryConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GeometryConfigError(f"{path}: invalid JSON: {exc}") from exc
    return parse_geometry(data, source=path.name)


def packaged_config_dir() -> Path:
    return Path(resources.files("pkmkit") / "configs")


def resolve_config_path(name: str, env: Optional[dict] = None) -> Path:
    """Resolve a config argument: literal path, then $PKMKIT_CONFIG_DIR, then shipped configs."""
    env = os.environ if env is None else env
    candidate = Path(name)
    if candidate.exists():
        return candidate
    searched = [str(candidate)]
    cfg_dir = env.get(CONFIG_DIR_ENV)
    if cfg_dir:
        candidate = Path(cfg_dir) / name
        if candidate.exists():
            return candidate
        searched.append(str(candidate))
    candidate = packaged_config_dir() / name
    if candidate.exists():
        return candidate
    searched.append(str(candidate))
    raise GeometryConfigError(f"config {name!r} not found (searched: {', '.join(searched)})")
