"""Config files, CSV/JSON writers and PGM heatmaps.

Config files are INI-style::

    [lattice]
    theta = [0.125, 0.25, 0.438, 0.438]   # units of pi
    n_sites = 64
    boundary = reflecting                 # or periodic

    [edge]
    c = [1, 0, -1, 1]                     # exact rationals, "1/2" allowed

    [cell 22]
    c = [1, 0, 0, 0]
"""
from __future__ import annotations

import configparser
import json
import re
from fractions import Fraction
from pathlib import Path

import numpy as np

from .core import ConfigError, LatticeConfig, validate_config

MANIFEST_NAME = "manifest.json"


class ConfigFileError(ConfigError):
    def __init__(self, path, message: str, line: int | None = None):
        where = f"{path}:{line}" if line is not None else str(path)
        self.line = line
        super().__init__([f"{where}: {message}"])


def _line_of(text: str, section: str, key: str | None) -> int | None:
    current = None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"\[(.+)\]", line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return i
            continue
        if current == section and key is not None and re.match(rf"{re.escape(key)}\s*[=:]", line):
            return i
    return None


def _parse_list(value: str, kind):
    body = value.strip()
    if not (body.startswith("[") and body.endswith("]")):
        raise ValueError(f"expected a bracketed list, got {value!r}")
    items = [x.strip() for x in body[1:-1].split(",") if x.strip()]
    return [kind(x) for x in items]


def parse_config_text(text: str, path="<config>") -> LatticeConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigFileError(path, exc.message if hasattr(exc, "message") else str(exc),
                              getattr(exc, "lineno", None)) from None
    if not parser.has_section("lattice"):
        raise ConfigFileError(path, "missing [lattice] section")

    def field(section, key, kind, default=None, as_list=False):
        if not parser.has_option(section, key):
            return default
        value = parser.get(section, key)
        try:
            return _parse_list(value, kind) if as_list else kind(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigFileError(path, f"[{section}] {key}: {exc}", _line_of(text, section, key)) from None

    lat = "lattice"
    raw = {"theta_pi": field(lat, "theta", float, as_list=True)}
    if raw["theta_pi"] is None:
        raise ConfigFileError(path, "[lattice] theta is required", _line_of(text, lat, None))
    raw["n_sites"] = field(lat, "n_sites", int, 64)
    boundary = field(lat, "boundary", str, "reflecting")
    raw["left_boundary"] = field(lat, "left_boundary", str, boundary)
    raw["right_boundary"] = field(lat, "right_boundary", str, boundary)
    if parser.has_section("edge"):
        raw["edge_coeffs"] = field("edge", "c", Fraction, as_list=True)
    cells = []
    for section in parser.sections():
        m = re.fullmatch(r"cell\s+(-?\d+)", section)
        if m:
            cells.append((int(m.group(1)), field(section, "c", Fraction, as_list=True)))
        elif section not in ("lattice", "edge"):
            raise ConfigFileError(path, f"unknown section [{section}]", _line_of(text, section, None))
    raw["local_cells"] = cells
    try:
        return validate_config(raw)
    except ConfigError as exc:
        first = exc.violations[0]
        raise ConfigFileError(path, "; ".join(exc.violations), _violation_line(text, first)) from None


def _violation_line(text: str, violation: str) -> int | None:
    """Line of the key a validation message is about, falling back to [lattice]."""
    m = re.match(r"local cells? (-?\d+)", violation)
    if m:
        return _line_of(text, f"cell {m.group(1)}", None)
    for prefix, section, key in (("theta", "lattice", "theta"), ("n_sites", "lattice", "n_sites"),
                                 ("edge_coeffs", "edge", None)):
        if violation.startswith(prefix):
            line = _line_of(text, section, key)
            if line is not None:
                return line
    if "boundar" in violation:
        for key in ("boundary", "left_boundary", "right_boundary"):
            line = _line_of(text, "lattice", key)
            if line is not None:
                return line
    return _line_of(text, "lattice", None)


def read_config(path) -> LatticeConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigFileError(path, f"cannot read: {exc.strerror}") from None
    return parse_config_text(text, path)


def config_to_dict(config: LatticeConfig) -> dict:
    return {
        "theta_pi": [t / np.pi for t in config.thetas],
        "n_sites": config.n_sites,
        "left_boundary": config.left_boundary,
        "right_boundary": config.right_boundary,
        "bulk_phase_signs": list(config.bulk_phase_signs),
        "edge_coeffs": None if config.edge_coeffs is None else [str(c) for c in config.edge_coeffs],
        "local_cells": {str(n): [str(c) for c in coeffs] for n, coeffs in config.local_cells},
    }


def config_to_text(config: LatticeConfig) -> str:
    lines = ["[lattice]", "theta = [" + ", ".join(f"{t / np.pi:.12g}" for t in config.thetas) + "]",
             f"n_sites = {config.n_sites}", f"boundary = {config.left_boundary}"]
    if config.edge_coeffs is not None:
        lines += ["", "[edge]", "c = [" + ", ".join(str(c) for c in config.edge_coeffs) + "]"]
    for n, coeffs in config.local_cells:
        lines += ["", f"[cell {n}]", "c = [" + ", ".join(str(c) for c in coeffs) + "]"]
    return "\n".join(lines) + "\n"


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if np.isnan(x):
        return ""
    return f"{x:.12g}"


def write_csv(path, header, rows, manifest: str = MANIFEST_NAME) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"# manifest: {manifest}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    header = lines[0].split(",")
    data = np.array([[float(x) if x else np.nan for x in ln.split(",")] for ln in lines[1:]])
    return header, data.reshape(-1, len(header))


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def write_pgm(path, image) -> Path:
    """8-bit binary PGM; rows of ``image`` become image rows, scaled to the data range."""
    image = np.asarray(image, dtype=float)
    finite = np.isfinite(image)
    lo = image[finite].min() if finite.any() else 0.0
    hi = image[finite].max() if finite.any() else 1.0
    scaled = np.zeros(image.shape) if hi <= lo else (image - lo) / (hi - lo)
    pixels = np.where(finite, np.round(255 * scaled), 0).astype(np.uint8)
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(f"P5\n{image.shape[1]} {image.shape[0]}\n255\n".encode())
        fh.write(pixels.tobytes())
    return path
