"""Flat key=value configuration files, run manifests, and output locking.

Config files are diffable text: one ``dotted.key = value`` per line,
``#`` comments.  Values parse as JSON when possible (numbers, booleans,
lists, quoted strings) and fall back to the raw string.  A list-valued
key marks a sweep: the run expands into one run per list element.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
import time
from contextlib import contextmanager
from pathlib import Path


class ConfigError(ValueError):
    """Malformed configuration input."""


def parse_value(text: str):
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path) -> dict:
    """Read a flat key=value file into a dict; later keys override earlier ones."""
    result: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        result[key.strip()] = parse_value(value)
    return result


def apply_overrides(config: dict, overrides) -> dict:
    """Apply ``key=value`` strings (CLI flags win over file keys)."""
    merged = dict(config)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, value = item.split("=", 1)
        merged[key.strip()] = parse_value(value)
    return merged


def expand_sweeps(config: dict) -> list[dict]:
    """Cartesian expansion of list-valued keys into per-run configs."""
    sweep_keys = sorted(k for k, v in config.items() if isinstance(v, list))
    if not sweep_keys:
        return [dict(config)]
    runs = []
    for combo in itertools.product(*(config[k] for k in sweep_keys)):
        run = dict(config)
        run.update(dict(zip(sweep_keys, combo)))
        runs.append(run)
    return runs


def get(config: dict, key: str, default):
    """Typed config lookup; the default's type is enforced loosely."""
    if key not in config:
        return default
    value = config[key]
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        raise ConfigError(f"config key {key!r} must be true/false, got {value!r}")
    if isinstance(default, float) and isinstance(value, (int, float)):
        return float(value)
    if isinstance(default, int) and isinstance(value, int):
        return value
    if isinstance(default, str) and isinstance(value, str):
        return value
    if default is None:
        return value
    if type(value) is type(default):
        return value
    raise ConfigError(f"config key {key!r} has type {type(value).__name__}, "
                      f"expected {type(default).__name__}")


def hash_artifact(path) -> str:
    """SHA-256 of a file, or of a directory's (relpath, file hash) listing."""
    path = Path(path)
    h = hashlib.sha256()
    if path.is_file():
        h.update(path.read_bytes())
        return h.hexdigest()
    if path.is_dir():
        for sub in sorted(p for p in path.rglob("*") if p.is_file()):
            h.update(str(sub.relative_to(path)).encode())
            h.update(hashlib.sha256(sub.read_bytes()).digest())
        return h.hexdigest()
    raise ConfigError(f"cannot hash missing artifact {path}")


def resolve_output_dir(out, env_var: str = "CFGAN_OUTPUT_ROOT") -> Path:
    """Relative output paths land under the env-var root when it is set."""
    out = Path(out)
    root = os.environ.get(env_var)
    if root and not out.is_absolute():
        return Path(root) / out
    return out


@contextmanager
def output_lock(out_dir: Path):
    """Exclusive lock file; concurrent runs must use distinct output dirs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(
            f"output directory {out_dir} is locked by another run "
            f"(remove {lock} if that run is dead)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield out_dir
    finally:
        lock.unlink(missing_ok=True)


def write_run_manifest(out_dir, command: str, config: dict, inputs: dict,
                       outputs: list, started: float) -> Path:
    """One immutable manifest per run, written at the end of the command."""
    from cfgan import __version__

    out_dir = Path(out_dir)
    manifest = {
        "command": command,
        "config": {k: config[k] for k in sorted(config)},
        "seeds": {k: v for k, v in sorted(config.items()) if k.endswith("seed")},
        "input_hashes": {name: hash_artifact(p) for name, p in sorted(inputs.items())},
        "outputs": [str(p) for p in outputs],
        "started_unix": started,
        "wall_clock_seconds": time.time() - started,
        "toolkit_version": __version__,
    }
    path = out_dir / "run_manifest.json"
    if path.exists():
        # Manifests are append-only: never overwrite an earlier run's record.
        stamp = time.strftime("%Y%m%d-%H%M%S")
        path = out_dir / f"run_manifest-{stamp}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path
