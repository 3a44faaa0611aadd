"""Run configuration: defaults, key-value file parsing, and hashing.

Config files are plain ``key = value`` lines (``#`` comments allowed);
values are parsed as JSON scalars where possible.  The config hash covers
only fields that influence numeric output, so worker counts and paths can
vary without breaking reproducibility checks.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import ValidationError

_NON_SEMANTIC = {"out_dir", "workers"}


@dataclass
class RunConfig:
    first_year: int = 2007
    last_year: int = 2018
    min_len: int = 3
    min_coverage: float = 2.0 / 3.0
    threshold_within: float = 0.5
    threshold_union: float = 0.5
    support_cap: int = 20
    n_folds: int = 10
    grid_size: int = 100
    significance: float = 0.05
    fdr_level: float = 0.05
    basis_size: int = 5
    oos_weeks: int = 26
    seed: int = 0
    workers: int = 1
    out_dir: str = "out"

    def __post_init__(self):
        if self.min_len < 1 or self.last_year < self.first_year + self.min_len - 1:
            raise ValidationError("window bounds admit no windows")
        if not 0 < self.min_coverage <= 1:
            raise ValidationError("min_coverage must be in (0, 1]")
        if self.support_cap < 1:
            raise ValidationError("support_cap must be at least 1")
        if not (0 < self.significance < 1 and 0 < self.fdr_level < 1):
            raise ValidationError("significance levels must be in (0, 1)")

    def semantic_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k not in _NON_SEMANTIC}

    def config_hash(self) -> str:
        payload = json.dumps(self.semantic_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def replace(self, **kwargs) -> "RunConfig":
        data = asdict(self)
        data.update(kwargs)
        return RunConfig(**data)


def parse_keyvalue(path: str | Path) -> dict:
    """Parse a ``key = value`` file into a dict of JSON-decoded values."""
    out: dict = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key:
            raise ValidationError(f"{path}:{lineno}: empty key")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def load_config(path: str | Path, **overrides) -> RunConfig:
    raw = parse_keyvalue(path)
    known = {f.name for f in fields(RunConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValidationError(f"{path}: unknown config keys {sorted(unknown)}")
    raw.update(overrides)
    return RunConfig(**raw)
