"""Pipeline configuration: flat ``key = value`` files plus overrides."""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

from .edge_ops import CannyParams
from .errors import InpaintError, ParameterError


class ConfigError(InpaintError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    sigma: float = 2.0
    low_ratio: float = 0.1
    high_ratio: float = 0.2
    mask_ratio: Optional[float] = None
    mask_dir: Optional[str] = None
    mask_placement: str = "center"
    edge_weights: Optional[str] = None
    inpaint_weights: Optional[str] = None
    fid: bool = False
    composite: bool = True
    output_dir: str = "out"
    seed: int = 0
    image_size: int = 256
    preprocess: str = "none"

    def __post_init__(self):
        if self.mask_ratio is not None and self.mask_dir is not None:
            raise ConfigError("set either mask_ratio or mask_dir, not both")
        if self.mask_placement not in ("random", "center"):
            raise ConfigError(f"mask_placement must be random or center, got {self.mask_placement!r}")
        if self.preprocess not in ("none", "celeba", "psv"):
            raise ConfigError(f"preprocess must be none, celeba or psv, got {self.preprocess!r}")
        if self.image_size < 4 or self.image_size % 4:
            raise ConfigError(f"image_size must be a positive multiple of 4, got {self.image_size}")
        try:
            self.canny_params()
        except ParameterError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def effective_mask_ratio(self) -> float:
        return 0.25 if self.mask_ratio is None else self.mask_ratio

    def canny_params(self) -> CannyParams:
        return CannyParams(self.sigma, self.low_ratio, self.high_ratio)


KEYS = {f.name: f for f in fields(PipelineConfig)}
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(key: str, raw: str):
    ftype = str(KEYS[key].type)
    raw = raw.strip()
    if ftype.startswith("Optional") and raw.lower() in ("", "none"):
        return None
    try:
        if "bool" in ftype:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if "float" in ftype:
            return float(raw)
        if "int" in ftype:
            return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {ftype}") from exc
    return raw


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, raw)
    return values


def load_config(path=None, overrides: Optional[dict] = None) -> PipelineConfig:
    """Defaults, then the file at ``path``, then ``overrides`` (raw strings or values)."""
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        values.update(parse_config_text(text))
    for key, val in (overrides or {}).items():
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
        values[key] = _convert(key, val) if isinstance(val, str) else val
    try:
        return PipelineConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def with_overrides(cfg: PipelineConfig, **kw) -> PipelineConfig:
    return replace(cfg, **kw)
