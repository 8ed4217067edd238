"""
Configuration documents.

A document is a flat TOML subset: one ``key = value`` per line, typed lists
in brackets and ``#`` comments. Unspecified keys take the reference defaults.
"""

import re
import tomllib
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.logger.logger import Logger
from src.model.errors import ConfigError
from src.model.types import Constraints, SystemParams

logger = Logger(__name__)

SweepMode = Literal["adaptive", "fixed", "conventional"]

DEFAULT_LAMBDA_GRID: List[float] = [round(0.05 * i, 2) for i in range(19)]
DEFAULT_GAMMA1 = 2e-10
DEFAULT_GAMMA2 = 1e-10


class SweepSpec(BaseModel):
    """
    Experiment grid: every (lambda_p, M_s, e_th_su, mode) combination is solved.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    lambda_grid: List[float] = Field(default_factory=lambda: list(DEFAULT_LAMBDA_GRID))
    ms_list: List[int] = Field(default_factory=lambda: [3])
    e_th_su_list: List[float] = Field(default_factory=lambda: [5e-5])
    modes: List[SweepMode] = Field(default_factory=lambda: ["adaptive", "fixed", "conventional"])
    n_starts: int = Field(1000, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    sim_validate: bool = False
    sim_slots: int = Field(1_000_000, ge=2)
    gamma1_fixed: float = Field(DEFAULT_GAMMA1, ge=0.0)
    gamma2_fixed: float = Field(DEFAULT_GAMMA2, ge=0.0)
    start_tolerance: float = Field(1e-4, ge=0.0)
    workers: int = Field(1, ge=1)

    @field_validator("lambda_grid", "ms_list", "e_th_su_list", "modes")
    @classmethod
    def _non_empty(cls, value: List[Any]) -> List[Any]:
        if not value:
            raise ValueError("list must not be empty")
        return value

    @field_validator("lambda_grid")
    @classmethod
    def _lambda_in_unit_interval(cls, value: List[float]) -> List[float]:
        if any(not 0.0 <= v <= 1.0 for v in value):
            raise ValueError("lambda_grid values must lie in [0, 1]")
        return value

    @field_validator("ms_list")
    @classmethod
    def _positive_users(cls, value: List[int]) -> List[int]:
        if any(v < 1 for v in value):
            raise ValueError("ms_list entries must be at least 1")
        return value

    @field_validator("e_th_su_list")
    @classmethod
    def _nonnegative_caps(cls, value: List[float]) -> List[float]:
        if any(v < 0.0 for v in value):
            raise ValueError("e_th_su_list entries must be nonnegative")
        return value

    @model_validator(mode="after")
    def _distinct_modes(self) -> "SweepSpec":
        if len(set(self.modes)) != len(self.modes):
            raise ValueError("modes must not repeat")
        return self


PARAM_KEYS = set(SystemParams.model_fields)
CONSTRAINT_KEYS = set(Constraints.model_fields)
SWEEP_KEYS = set(SweepSpec.model_fields)
KNOWN_KEYS = PARAM_KEYS | CONSTRAINT_KEYS | SWEEP_KEYS


def _key_lines(text: str) -> Dict[str, int]:
    lines: Dict[str, int] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        match = re.match(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*=", line)
        if match:
            lines.setdefault(match.group(1), number)
    return lines


def _offending_key(error: Dict[str, Any], present: Dict[str, int]) -> Optional[str]:
    if error.get("loc"):
        return str(error["loc"][0])
    # Model-level checks name their keys in the message; take the first one.
    message = error.get("msg", "")
    mentioned = [(message.find(key), key) for key in KNOWN_KEYS if re.search(rf"\b{key}\b", message)]
    return min(mentioned)[1] if mentioned else None


def _build(model: type, values: Dict[str, Any], lines: Dict[str, int]) -> Any:
    try:
        return model(**values)
    except ValidationError as e:
        first = e.errors()[0]
        key = _offending_key(first, lines)
        raise ConfigError(first["msg"], key=key, line=lines.get(key) if key else None) from e


def parse_config(text: str) -> Tuple[SystemParams, Constraints, SweepSpec]:
    """
    Parse a configuration document.

    Args:
        text (str): Document contents.

    Returns:
        Tuple[SystemParams, Constraints, SweepSpec]: Validated inputs.

    Raises:
        ConfigError: Unknown key, type mismatch or invariant violation, naming
            the key and its line.
    """
    try:
        document = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"malformed document: {e}") from e

    lines = _key_lines(text)
    for key, value in document.items():
        if key not in KNOWN_KEYS:
            raise ConfigError("unknown key", key=key, line=lines.get(key))
        if isinstance(value, dict):
            raise ConfigError("tables are not supported", key=key, line=lines.get(key))

    params = _build(SystemParams, {k: v for k, v in document.items() if k in PARAM_KEYS}, lines)
    constraints = _build(
        Constraints, {k: v for k, v in document.items() if k in CONSTRAINT_KEYS}, lines
    )
    sweep_values = {k: v for k, v in document.items() if k in SWEEP_KEYS}
    sweep_values.setdefault("ms_list", [params.num_su_Ms])
    sweep_values.setdefault("e_th_su_list", [constraints.e_th_su])
    sweep = _build(SweepSpec, sweep_values, lines)

    logger.debug(
        "Parsed configuration",
        keys=len(document),
        grid_points=len(sweep.lambda_grid)
        * len(sweep.ms_list)
        * len(sweep.e_th_su_list)
        * len(sweep.modes),
    )
    return params, constraints, sweep
