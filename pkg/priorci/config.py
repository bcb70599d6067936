from __future__ import annotations

import math
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray
from pydantic import Field, model_validator
from pydantic.fields import FieldInfo
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

from priorci.artifacts import SplineArtifact, load_spline_artifact
from priorci.errors import ConfigMismatchError
from priorci.special_fns import normal_quantile, t_quantile

ADOPTED_ARTIFACT_FIELDS = ("n", "alpha", "w", "q", "knot_step")


class SplineArtifactSource(PydanticBaseSettingsSource):
    """Late settings source that adopts problem fields from a persisted spline artifact.

    Only fields that no earlier source (init kwargs, environment, .env) provided are filled.
    """

    def get_field_value(self, field: FieldInfo, field_name: str) -> tuple[Any, str, bool]:
        return None, field_name, False

    def __call__(self) -> dict[str, Any]:
        spline_path = self.current_state.get("spline_path")
        if spline_path is None:
            return {}

        artifact, _ = load_spline_artifact(Path(spline_path))
        adopted = {
            "n": artifact.n,
            "alpha": artifact.alpha,
            "w": artifact.w,
            "q": artifact.q,
            "knot_step": artifact.knot_step,
        }
        current_keys = set(self.current_state.keys())
        return {key: value for key, value in adopted.items() if key not in current_keys}


class ProblemConfig(BaseSettings):
    """Problem definition and numerical settings shared by every solver."""

    model_config = SettingsConfigDict(env_prefix="PRIORCI_", extra="ignore", frozen=True)

    n: int = Field(default=24, ge=1)
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    w: float = Field(default=0.1, ge=0.0)
    q: float = Field(default=8.0, gt=0.0)
    knot_step: float = Field(default=1.0, gt=0.0)

    theta_grid_max: float = Field(default=15.0, gt=0.0)
    theta_grid_step: float = Field(default=0.01, gt=0.0)
    quadrature_order: int = Field(default=10, ge=2)
    quadrature_panels: int = Field(default=40, ge=1)
    tol_root: float = Field(default=1e-10, gt=0.0)
    tol_coverage: float = Field(default=1e-8, gt=0.0)

    constraint_theta_max: float = Field(default=12.0, gt=0.0)
    constraint_theta_step: float = Field(default=0.25, gt=0.0)
    coverage_slack: float = Field(default=1e-4, gt=0.0)
    max_iterations: int = Field(default=200, ge=1)

    spline_path: Path | None = None

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        return (
            init_settings,
            env_settings,
            dotenv_settings,
            file_secret_settings,
            SplineArtifactSource(settings_cls),
        )

    @model_validator(mode="after")
    def _check_consistency(self) -> ProblemConfig:
        z_half = normal_quantile(self.alpha / 2)
        if self.theta_grid_max < self.q + z_half:
            raise ValueError(
                f"theta_grid_max={self.theta_grid_max} must be at least q + z_(alpha/2) = "
                f"{self.q + z_half:.6g} so that reversion to the standard interval is visible."
            )
        knot_intervals = 2.0 * self.q / self.knot_step
        if abs(knot_intervals - round(knot_intervals)) > 1e-9:
            raise ValueError(f"knot_step={self.knot_step} must divide 2q={2.0 * self.q}.")
        return self

    @cached_property
    def z_half(self) -> float:
        return normal_quantile(self.alpha / 2)

    @cached_property
    def t_half(self) -> float:
        return t_quantile(self.alpha / 2, self.n - 1)

    def knots(self) -> NDArray[np.float64]:
        count = round(2.0 * self.q / self.knot_step)
        return np.linspace(-self.q, self.q, count + 1)

    def theta_grid(self) -> NDArray[np.float64]:
        """Grid on [-theta_grid_max, theta_grid_max], exactly symmetric about 0."""
        half = math.ceil(self.theta_grid_max / self.theta_grid_step - 1e-9)
        return np.arange(-half, half + 1) * self.theta_grid_step

    def constraint_thetas(self) -> NDArray[np.float64]:
        count = round(self.constraint_theta_max / self.constraint_theta_step)
        return np.arange(count + 1) * self.constraint_theta_step

    def verification_thetas(self) -> NDArray[np.float64]:
        count = 4 * round(self.constraint_theta_max / self.constraint_theta_step)
        return np.arange(count + 1) * (self.constraint_theta_step / 4)

    def snapshot(self) -> dict[str, Any]:
        return self.model_dump(mode="json", exclude={"spline_path"})


def check_artifact_agreement(config: ProblemConfig, artifact: SplineArtifact) -> None:
    """Raise when explicit settings contradict the spline artifact they are used with."""
    if config.n != artifact.n:
        raise ConfigMismatchError(
            f"Configured n={config.n} does not match the spline artifact's n={artifact.n}."
        )
    if not math.isclose(config.alpha, artifact.alpha, rel_tol=0.0, abs_tol=1e-12):
        raise ConfigMismatchError(
            f"Configured alpha={config.alpha} does not match the spline artifact's "
            f"alpha={artifact.alpha}."
        )
