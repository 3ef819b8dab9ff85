"""
Strict JSON configuration: a ``system`` section describing the particle system and a
``campaign`` section with Monte Carlo parameters. Unknown keys are errors; omitted
defaults are filled in and echoed to the resolved config written beside the outputs.
"""

import json
import os
import re
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from particles.simulate import default_n_steps
from particles.types import SystemConfig
from utils.artifacts import content_digest, dump_json
from utils.errors import ConfigError
from utils.seeding import MASK64

RESOLVED_CONFIG_NAME = "resolved_config.json"


class SystemSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_particles: int
    dim: int
    theta: List[List[float]]
    sigma: float
    t_final: float
    init_variances: Optional[List[float]] = None
    n_steps: Optional[int] = None
    seed: int = Field(default=0, ge=0, le=MASK64)


class CampaignSection(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_replicates: int = Field(default=50, ge=1)
    eps: float = Field(default=0.05, gt=0.0, lt=1.0)
    grid: Optional[List[Tuple[int, float]]] = None
    threads: Optional[int] = Field(default=None, ge=1)
    store_noise: bool = False
    replicate: int = Field(default=0, ge=0)


class CampaignConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    system: SystemSection
    campaign: CampaignSection = CampaignSection()


def _line_of(text: str, key: Optional[str]) -> Optional[int]:
    if not key:
        return None
    match = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return text.count("\n", 0, match.start()) + 1 if match else None


def _config_error(err: ValidationError, text: str, prefix: Tuple[str, ...] = ()) -> ConfigError:
    first = err.errors()[0]
    loc = prefix + tuple(str(part) for part in first["loc"])
    key_path = ".".join(loc)
    last_key = next((part for part in reversed(loc) if not part.isdigit()), None)
    return ConfigError(first["msg"], key_path or None, _line_of(text, last_key))


def _resolve_system(section: SystemSection) -> SystemConfig:
    data = section.model_dump()
    theta = np.asarray(section.theta, dtype=np.float64)
    if data["init_variances"] is None:
        diag = np.diag(theta) if theta.ndim == 2 and theta.shape[0] == theta.shape[1] else np.ones(section.dim)
        data["init_variances"] = [section.sigma**2 / (2.0 * th) if th > 0.0 else 0.0 for th in diag]
    if data["n_steps"] is None:
        try:
            theta_max = float(np.max(np.linalg.eigvalsh(0.5 * (theta + theta.T))))
        except (np.linalg.LinAlgError, ValueError):
            theta_max = 0.0
        data["n_steps"] = default_n_steps(theta_max, section.t_final) if theta_max > 0.0 and section.t_final > 0.0 else 1
    return SystemConfig.model_validate(data)


def parse_config_text(text: str) -> Tuple[SystemConfig, CampaignSection]:
    """
    Parse and validate a configuration document.

    Returns:
        (system config with defaults filled, campaign parameters)

    Raises:
        ConfigError: on malformed JSON, unknown keys or invalid values, with key path and line
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg}", line=e.lineno) from e
    try:
        parsed = CampaignConfig.model_validate(raw)
    except ValidationError as e:
        raise _config_error(e, text) from e
    try:
        system = _resolve_system(parsed.system)
    except ValidationError as e:
        raise _config_error(e, text, ("system",)) from e
    return system, parsed.campaign


def parse_config(path: str) -> Tuple[SystemConfig, CampaignSection]:
    """Read and validate the configuration file at ``path``."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        return parse_config_text(f.read())


def resolved_config_text(
    system: Optional[SystemConfig],
    campaign: Optional[CampaignSection],
    theory_inputs: Optional[Dict[str, Any]] = None,
) -> str:
    data: Dict[str, Any] = {}
    if system is not None:
        data["system"] = system.model_dump(mode="json")
    if campaign is not None:
        data["campaign"] = campaign.model_dump(mode="json")
    if theory_inputs is not None:
        data["theory"] = theory_inputs
    return dump_json(data)


def write_resolved_config(
    out_dir: str,
    system: Optional[SystemConfig],
    campaign: Optional[CampaignSection],
    theory_inputs: Optional[Dict[str, Any]] = None,
) -> str:
    """
    Write the resolved config and return its content digest.

    ``theory_inputs`` records the parameters a theory evaluation actually used; without a
    config file it is the whole document.
    """
    text = resolved_config_text(system, campaign, theory_inputs)
    with open(os.path.join(out_dir, RESOLVED_CONFIG_NAME), "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    return content_digest(text)
