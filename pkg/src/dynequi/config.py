"""JSON experiment configuration.

Complex numbers are ``[re, im]`` pairs (a bare real is accepted on input),
polynomials are ascending coefficient arrays.  Unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields

KINDS = (
    "phase-roots",
    "phase-potential",
    "pb-average",
    "brolin",
    "classify",
    "param-roots",
    "param-potential",
    "escape-estimate",
    "cubic-slice",
    "cohomology",
    "power-check",
    "orbit-profile",
)

# experiments that draw random numbers
SAMPLED = {"pb-average", "brolin", "escape-estimate"}


class ConfigError(ValueError):
    pass


_COMPLEX = {"lam", "z_start", "u0", "z0", "u1"}
_COMPLEX_LIST = {"poly", "lam_poly", "base", "direction"}


@dataclass
class ExperimentConfig:
    kind: str
    poly: list | None = None
    n: int | None = None
    n_range: list | None = None
    k: int = 1
    lam: complex | None = None
    lam_poly: list | None = None
    d: int | None = None
    rect: list | None = None
    res: list | None = None
    radius: float | None = None
    count: int | None = None
    depth: int | None = None
    z_start: complex | None = None
    horizon: int | None = None
    u0: complex | None = None
    z0: complex | None = None
    u1: complex | None = None
    base: list | None = None
    direction: list | None = None
    critical_index: int | None = None
    thresholds: dict = field(default_factory=dict)
    image_range: list | None = None
    images: bool = True
    seed: int | None = None
    out: str | None = None

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if f.name in _COMPLEX:
                v = _enc(v)
            elif f.name in _COMPLEX_LIST:
                v = [_enc(x) for x in v]
            elif f.name == "thresholds":
                v = dict(sorted(v.items()))
            out[f.name] = v
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def hash(self) -> str:
        """sha256 of the canonical JSON, without the output directory."""
        d = self.to_dict()
        d.pop("out", None)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _enc(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def _dec(v, name: str) -> complex:
    if isinstance(v, bool):
        raise ConfigError(f"{name}: expected a number or [re, im], got {v!r}")
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        return complex(float(v[0]), float(v[1]))
    raise ConfigError(f"{name}: expected a number or [re, im], got {v!r}")


def _int(v, name: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{name}: expected an integer, got {v!r}")
    return v


def from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if "kind" not in raw:
        raise ConfigError("missing required field: kind")
    if raw["kind"] not in KINDS:
        raise ConfigError(f"kind: unknown experiment {raw['kind']!r}")
    kw = {}
    for name, v in raw.items():
        if v is None:
            continue
        if name in _COMPLEX:
            v = _dec(v, name)
        elif name in _COMPLEX_LIST:
            if not isinstance(v, list) or not v:
                raise ConfigError(f"{name}: expected a non-empty list of coefficients")
            v = [_dec(x, f"{name}[{i}]") for i, x in enumerate(v)]
        elif name in ("n", "k", "d", "count", "depth", "horizon", "critical_index", "seed"):
            v = _int(v, name)
        elif name in ("rect", "image_range"):
            want = 4 if name == "rect" else 2
            if not isinstance(v, list) or len(v) != want:
                raise ConfigError(f"{name}: expected {want} numbers")
            v = [float(x) for x in v]
        elif name in ("res", "n_range"):
            if not isinstance(v, list) or len(v) != 2:
                raise ConfigError(f"{name}: expected two integers")
            v = [_int(x, name) for x in v]
        elif name == "radius":
            v = float(v)
        elif name == "thresholds":
            if not isinstance(v, dict):
                raise ConfigError("thresholds: expected an object")
        elif name == "images" and not isinstance(v, bool):
            raise ConfigError("images: expected true/false")
        kw[name] = v
    cfg = ExperimentConfig(**kw)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    if cfg.kind in SAMPLED and cfg.seed is None:
        raise ConfigError(f"seed: required for the sampled experiment {cfg.kind!r}")
    if cfg.seed is not None and cfg.seed < 0:
        raise ConfigError("seed: must be non-negative")


def loads(text: str) -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e}") from None
    return from_dict(raw)


def load(path: str) -> ExperimentConfig:
    with open(path) as fh:
        return loads(fh.read())
