"""One flat config schema for every tunable default, file- and flag-settable.

Config files are plain ``key = value`` lines; ``#`` starts a comment. CLI
flags override file values, which override the built-in defaults.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, Mapping, Optional, Union

from .blend import BlendParams
from .fusion import FusionParams

Number = Union[int, float]


@dataclass(frozen=True)
class ToolConfig:
    alpha: float = 0.8
    eps: float = 1.0
    nms_iou: float = 0.6
    dup_iou: float = 0.5
    score_min: float = 0.4
    keep_frac: float = 0.5
    min_instance_area: int = 16
    min_stuff_area: int = 4096
    n_bases: int = 4
    native_res: int = 14
    mask_res: int = 56
    samples_per_bin: int = 2
    mask_threshold: float = 0.5

    def blend_params(self) -> BlendParams:
        return BlendParams(
            n_bases=self.n_bases,
            native_res=self.native_res,
            mask_res=self.mask_res,
            samples_per_bin=self.samples_per_bin,
            mask_threshold=self.mask_threshold,
        )

    def fusion_params(self) -> FusionParams:
        return FusionParams(
            score_min=self.score_min,
            keep_frac=self.keep_frac,
            min_instance_area=self.min_instance_area,
            min_stuff_area=self.min_stuff_area,
            alpha=self.alpha,
            dup_iou=self.dup_iou,
        )


_FIELD_TYPES = {f.name: f.type for f in fields(ToolConfig)}


def parse_config_file(path: Path) -> Dict[str, Number]:
    """Parse ``key = value`` lines, rejecting unknown keys and bad values."""
    values: Dict[str, Number] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, text = line.partition("=")
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, text.strip())
    return values


def _coerce(key: str, text: str) -> Number:
    want_int = _FIELD_TYPES[key] in ("int", int)
    try:
        return int(text) if want_int else float(text)
    except ValueError:
        raise ValueError(f"config key {key!r} expects a number, got {text!r}") from None


def make_config(
    file: Optional[Path] = None, overrides: Optional[Mapping[str, Number]] = None
) -> ToolConfig:
    values: Dict[str, Number] = {}
    if file is not None:
        values.update(parse_config_file(file))
    for key, v in (overrides or {}).items():
        if v is None:
            continue
        if key not in _FIELD_TYPES:
            raise ValueError(f"unknown config key {key!r}")
        values[key] = v
    return ToolConfig(**values)  # type: ignore[arg-type]
