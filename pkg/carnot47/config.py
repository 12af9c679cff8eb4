"""
Configuration - tolerances, grids and seeds for computations and the CLI
"""

import copy
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Optional

import yaml
from pydantic import BaseModel, Field, ValidationError

from .errors import PreconditionError

logger = logging.getLogger(__name__)


class Tolerances(BaseModel):
    collinearity: float = Field(1e-9, gt=0)
    newton: float = Field(1e-12, gt=0)
    oracle: float = Field(1e-8, gt=0)
    connect: float = Field(1e-7, gt=0)
    level: float = Field(1e-10, gt=0)


class IntegratorSettings(BaseModel):
    step: float = Field(1e-3, gt=0)


class TauGridSettings(BaseModel):
    tau_max: float = Field(50.0, gt=0)
    step: float = Field(1e-3, gt=0)


class SeedGridSettings(BaseModel):
    n_beta: int = Field(181, ge=3)
    n_starts: int = Field(12, gt=0)
    max_iter: int = Field(50, gt=0)
    max_halvings: int = Field(20, ge=0)
    scan_max: float = Field(12.566370614359172, gt=0)
    scan_step: float = Field(0.02, gt=0)


class VerifySettings(BaseModel):
    draws: int = Field(100, gt=0)
    round_trips: int = Field(200, gt=0)
    equivariance_draws: int = Field(50, gt=0)
    discriminant_points: int = Field(100000, gt=0)
    discriminant_tau_max: float = Field(100.0, gt=0)
    oracle_t_max: float = Field(10.0, gt=0)


class OutputSettings(BaseModel):
    directory: str = "."


class CarnotSettings(BaseModel):
    """Validated view of the merged configuration."""
    version: str = "1.0.0"
    seed: int = 20260101
    tolerances: Tolerances = Tolerances()
    integrator: IntegratorSettings = IntegratorSettings()
    tau_grid: TauGridSettings = TauGridSettings()
    seed_grid: SeedGridSettings = SeedGridSettings()
    verify: VerifySettings = VerifySettings()
    output: OutputSettings = OutputSettings()

    def digest(self) -> str:
        """sha256 of the canonical JSON form; recorded in every output header."""
        payload = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def seed_grid_spec(self):
        from .expmap import SeedGrid
        return SeedGrid(**self.seed_grid.model_dump())


class CarnotConfig:
    """Manages computation settings: defaults merged with an optional YAML file"""

    DEFAULT_CONFIG = CarnotSettings().model_dump(mode="json")

    def __init__(self, config_file: Optional[Path] = None):
        self.config_file = Path(config_file) if config_file else None
        self.config = self.load_config()

    def load_config(self) -> dict:
        """Load configuration from file"""
        if self.config_file is None:
            return copy.deepcopy(self.DEFAULT_CONFIG)
        if not self.config_file.exists():
            raise PreconditionError(f"Config file not found: {self.config_file}")
        try:
            with open(self.config_file, "r", encoding="utf-8") as f:
                loaded = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise PreconditionError(f"Failed to parse {self.config_file}: {e}") from None
        if not isinstance(loaded, dict):
            raise PreconditionError(f"{self.config_file} must contain a mapping")
        logger.debug("Loaded config overrides from %s", self.config_file)
        # Merge with defaults (in case keys are missing)
        return self._merge_configs(self.DEFAULT_CONFIG, loaded)

    def save_config(self, path: Path):
        """Write the current configuration as YAML"""
        with open(path, "w", encoding="utf-8") as f:
            yaml.safe_dump(self.config, f, sort_keys=True)

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get config value using dot notation
        Example: get('tolerances.newton')
        """
        value = self.config
        for k in key.split("."):
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default
        return value

    def set(self, key: str, value: Any):
        """
        Set config value using dot notation; flags from the command line win over the file
        Example: set('tolerances.connect', 1e-8)
        """
        keys = key.split(".")
        config = self.config
        for k in keys[:-1]:
            config = config.setdefault(k, {})
        config[keys[-1]] = value

    def settings(self) -> CarnotSettings:
        try:
            return CarnotSettings.model_validate(self.config)
        except ValidationError as e:
            raise PreconditionError(f"Invalid configuration: {e}") from None

    def _merge_configs(self, default: dict, loaded: dict) -> dict:
        """Recursively merge loaded config with defaults"""
        result = copy.deepcopy(default)
        for key, value in loaded.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = self._merge_configs(result[key], value)
            else:
                result[key] = value
        return result
