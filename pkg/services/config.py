# /services/config.py
# Experiment configuration: the pydantic model tree and the flat `key = value` file that feeds it.
from __future__ import annotations

from enum import Enum
from pathlib import Path
from typing import Any, Mapping

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from services.dataset import VoteScale
from services.immune_core import AisParams
from services.matching import DEFAULT_OVERLAP_THRESHOLD
from services.evaluation import DEFAULT_EXACT_CUTOFF
from settings import settings
from utils.errors import io_error, usage_error
from utils.text import is_skippable, parse_key_value


class CandidateOrder(str, Enum):
    DATASET = "dataset"
    SHUFFLE = "shuffle"


AUTO = "auto"
_NONE_WORDS = {"", "none", "null"}


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    ais_params: AisParams = Field(default_factory=AisParams)
    scale: VoteScale = Field(
        default_factory=lambda: VoteScale(min_vote=settings.min_vote, max_vote=settings.max_vote, step=settings.vote_step)
    )
    sp_n: int = Field(default=100, ge=1)
    overlap_threshold: int = Field(default=DEFAULT_OVERLAP_THRESHOLD, ge=1)
    visible_fraction: float = Field(default=0.5, gt=0, le=1)
    default_vote: float | str | None = None  # None: no default votes; "auto": slightly below neutral
    n_trials: int = Field(default=100, ge=1)
    min_target_votes: int = Field(default=20, ge=2)
    candidate_order: CandidateOrder = CandidateOrder.DATASET
    master_seed: int = Field(default=0, ge=0, lt=2**64)
    randomized_control: bool = True
    fixed_steps: int = Field(default=500, ge=0)
    exact_cutoff: int = Field(default=DEFAULT_EXACT_CUTOFF, ge=0)

    @field_validator("default_vote", mode="before")
    @classmethod
    def _parse_default_vote(cls, v: Any) -> Any:
        if isinstance(v, str):
            word = v.strip().lower()
            if word in _NONE_WORDS:
                return None
            if word == AUTO:
                return AUTO
            try:
                return float(word)
            except ValueError:
                raise ValueError("default_vote must be a number, 'auto' or 'none'") from None
        return v

    def resolved_default_vote(self) -> float | None:
        if self.default_vote is None:
            return None
        if self.default_vote == AUTO:
            return self.scale.default_vote()
        vote = float(self.default_vote)
        if not self.scale.contains(vote):
            raise usage_error(f"default_vote {vote} is off the vote scale")
        return vote

    def with_k1(self, k1: float) -> "ExperimentConfig":
        return self.model_copy(update={"ais_params": self.ais_params.model_copy(update={"k1": k1})})


_AIS_KEYS = set(AisParams.model_fields)
_SCALE_KEYS = {"min_vote": "min_vote", "max_vote": "max_vote", "vote_step": "step"}
_TOP_KEYS = set(ExperimentConfig.model_fields) - {"ais_params", "scale"}


def config_from_mapping(values: Mapping[str, Any]) -> ExperimentConfig:
    """Build a config from flat keys; unknown keys and invalid values are usage errors."""
    ais: dict[str, Any] = {}
    scale: dict[str, Any] = {}
    top: dict[str, Any] = {}
    for key, value in values.items():
        if key in _AIS_KEYS:
            ais[key] = value
        elif key in _SCALE_KEYS:
            scale[_SCALE_KEYS[key]] = value
        elif key in _TOP_KEYS:
            top[key] = value
        else:
            raise usage_error(f"unknown config key: {key}")

    try:
        if ais:
            top["ais_params"] = AisParams(**ais)
        if scale:
            base = ExperimentConfig.model_fields["scale"].default_factory()
            top["scale"] = VoteScale(**{**base.model_dump(), **scale})
        return ExperimentConfig(**top)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first.get("loc", ())) or "config"
        raise usage_error(f"invalid config value for {where}: {first.get('msg')}") from e


def parse_config_text(text: str) -> ExperimentConfig:
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if is_skippable(line):
            continue
        kv = parse_key_value(line)
        if kv is None:
            raise usage_error(f"config line {lineno}: expected 'key = value'")
        key, value = kv
        if key in values:
            raise usage_error(f"config line {lineno}: duplicate key {key}")
        values[key] = value
    return config_from_mapping(values)


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise io_error(f"cannot read config file {path}: {e}") from e
    return parse_config_text(text)
