"""Run configuration, deterministic table output and run manifests.

Config files are flat dotted-key text, one ``key = value`` per line, values
in JSON syntax (numbers, strings, booleans, lists).  Unknown keys are
rejected against the scenario schema (strict mode), so typos fail fast
instead of silently running a default.

Tables: CSV with a units metadata line and a header row for dense data;
NDJSON (one object per line) for trajectory streams.  Floats are written
with 17 significant digits; writes go through a temp file and an atomic
rename so a crash cannot leave a partial file at the target path.
"""

from __future__ import annotations

import hashlib
import json
import os
import platform
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigParseError, ConfigValidationError


# ---------------------------------------------------------------------------
# flat dotted-key config
# ---------------------------------------------------------------------------

def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; values use JSON syntax."""
    out: dict = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigParseError(f"line {ln}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if not key:
            raise ConfigParseError(f"line {ln}: empty key")
        if key in out:
            raise ConfigParseError(f"line {ln}: duplicate key {key!r}")
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError as exc:
            raise ConfigParseError(f"line {ln}: bad value for {key!r}: {exc}") from exc
    return out


def emit_config_text(config: dict) -> str:
    lines = [f"{k} = {json.dumps(config[k])}" for k in config]
    return "\n".join(lines) + "\n"


def parse_config_file(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


def apply_overrides(config: dict, overrides: list[str]) -> dict:
    """Apply repeatable --set key=value pairs (JSON values)."""
    out = dict(config)
    for item in overrides:
        if "=" not in item:
            raise ConfigParseError(f"override {item!r} must look like key=value")
        key, _, val = item.partition("=")
        key = key.strip()
        try:
            out[key] = json.loads(val.strip())
        except json.JSONDecodeError as exc:
            raise ConfigParseError(f"override {key!r}: bad value: {exc}") from exc
    return out


@dataclass(frozen=True)
class Option:
    kind: type
    default: object
    doc: str = ""


def validate_config(config: dict, schema: dict[str, Option]) -> dict:
    """Strict validation: unknown keys rejected, types coerced int->float."""
    unknown = sorted(set(config) - set(schema))
    if unknown:
        raise ConfigValidationError(f"unknown config keys: {', '.join(unknown)}")
    out = {}
    for key, opt in schema.items():
        if key in config:
            val = config[key]
            if opt.kind is float and isinstance(val, int) and not isinstance(val, bool):
                val = float(val)
            if opt.kind is list and isinstance(val, list):
                val = [float(v) for v in val]
            elif not isinstance(val, opt.kind) or (
                opt.kind in (int, float) and isinstance(val, bool)
            ):
                raise ConfigValidationError(
                    f"key {key!r}: expected {opt.kind.__name__}, got {val!r}"
                )
            out[key] = val
        else:
            if opt.default is None:
                raise ConfigValidationError(f"missing required key {key!r}")
            out[key] = opt.default
    return out


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Column:
    name: str
    unit: str = ""


@dataclass(frozen=True)
class TableSchema:
    name: str
    columns: tuple
    kind: str = "csv"  # or "ndjson"

    def header_comment(self) -> str:
        units = ",".join(f"{c.name}={c.unit or '1'}" for c in self.columns)
        return f"# units: {units}"


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int,)):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def emit_table(records, schema: TableSchema, path) -> Path:
    """Write records (dicts or sequences) according to the schema."""
    path = Path(path)
    names = [c.name for c in schema.columns]
    lines = []
    if schema.kind == "csv":
        lines.append(schema.header_comment())
        lines.append(",".join(names))
        for rec in records:
            vals = [rec[n] for n in names] if isinstance(rec, dict) else list(rec)
            if len(vals) != len(names):
                raise ValueError(f"record {rec!r} does not match schema {names}")
            lines.append(",".join(_fmt(v) for v in vals))
    elif schema.kind == "ndjson":
        for rec in records:
            vals = [rec[n] for n in names] if isinstance(rec, dict) else list(rec)
            if len(vals) != len(names):
                raise ValueError(f"record {rec!r} does not match schema {names}")
            pairs = ", ".join(
                f"{json.dumps(n)}: {_fmt(v) if isinstance(v, (int, float, bool)) else json.dumps(str(v))}"
                for n, v in zip(names, vals)
            )
            lines.append("{" + pairs + "}")
    else:
        raise ValueError(f"unknown table kind {schema.kind!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")
    return path


def read_table_csv(path):
    """Read back an emitted CSV as (column names, dict of float arrays)."""
    import numpy as np

    rows = []
    names = None
    for line in Path(path).read_text().splitlines():
        if line.startswith("#") or not line.strip():
            continue
        if names is None:
            names = line.split(",")
            continue
        rows.append(line.split(","))
    data = {n: np.array([_maybe_float(r[i]) for r in rows]) for i, n in enumerate(names)}
    return names, data


def _maybe_float(s: str):
    try:
        return float(s)
    except ValueError:
        return s


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    status: str = "ok"
    error: str = ""
    version: str = ""
    platform: dict = field(default_factory=dict)
    wall_time_s: float = 0.0
    outputs: dict = field(default_factory=dict)

    def finalize(self, out_dir, started: float, produced: list, status: str, error: str = ""):
        from . import __version__

        self.version = __version__
        self.platform = {
            "python": sys.version.split()[0],
            "system": platform.system(),
            "machine": platform.machine(),
        }
        self.wall_time_s = time.monotonic() - started
        self.status = status
        self.error = error
        self.outputs = {
            Path(p).name: sha256_file(p) for p in produced if Path(p).exists()
        }
        payload = {
            "subcommand": self.subcommand,
            "config": self.config,
            "version": self.version,
            "platform": self.platform,
            "wall_time_s": self.wall_time_s,
            "status": self.status,
            "error": self.error,
            "outputs": self.outputs,
        }
        atomic_write_text(Path(out_dir) / "manifest.json", json.dumps(payload, indent=2) + "\n")
