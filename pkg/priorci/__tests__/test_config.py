from __future__ import annotations

from pathlib import Path

import pytest
from pydantic import ValidationError

from priorci.artifacts import write_json_artifact
from priorci.config import ProblemConfig, check_artifact_agreement
from priorci.errors import ArtifactError, ConfigMismatchError, DomainError
from priorci.special_fns import t_quantile
from priorci.spline_b import MonotoneCubicB


def test_defaults_are_the_flagship_problem() -> None:
    config = ProblemConfig()

    assert (config.n, config.alpha, config.w, config.q, config.knot_step) == (24, 0.05, 0.1, 8.0, 1.0)
    assert config.z_half == pytest.approx(1.959963985, abs=1e-9)
    assert config.t_half == pytest.approx(2.068658, abs=1e-6)
    assert config.knots().tolist() == [float(k) for k in range(-8, 9)]


def test_environment_overrides_defaults_but_not_init_values(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("PRIORCI_N", "30")
    monkeypatch.setenv("PRIORCI_W", "0.25")

    assert ProblemConfig().n == 30
    assert ProblemConfig().w == 0.25
    assert ProblemConfig(n=12).n == 12


def test_env_file_is_read_when_given(tmp_path: Path) -> None:
    env_file = tmp_path / ".env"
    env_file.write_text("PRIORCI_W=0.5\nPRIORCI_ALPHA=0.1\n", encoding="utf-8")

    config = ProblemConfig(_env_file=env_file)  # type: ignore[call-arg]

    assert config.w == 0.5
    assert config.alpha == 0.1


def test_spline_artifact_fills_unset_problem_fields(tmp_path: Path) -> None:
    spline_path = _write_artifact(tmp_path, n=10, alpha=0.1, w=0.2, q=4.0, knot_step=2.0)

    adopted = ProblemConfig(spline_path=spline_path)
    assert (adopted.n, adopted.alpha, adopted.w, adopted.q, adopted.knot_step) == (
        10,
        0.1,
        0.2,
        4.0,
        2.0,
    )

    overridden = ProblemConfig(spline_path=spline_path, w=0.7)
    assert overridden.w == 0.7
    assert overridden.n == 10


def test_explicit_settings_that_contradict_the_artifact_are_rejected(tmp_path: Path) -> None:
    spline_path = _write_artifact(tmp_path, n=10, alpha=0.1, w=0.2, q=4.0, knot_step=2.0)
    artifact = MonotoneCubicB.standard(4.0, t_quantile(0.05, 9), 2.0).to_artifact(10, 0.1, 0.2)

    check_artifact_agreement(ProblemConfig(spline_path=spline_path), artifact)
    with pytest.raises(ConfigMismatchError):
        check_artifact_agreement(ProblemConfig(spline_path=spline_path, n=11), artifact)
    with pytest.raises(ConfigMismatchError):
        check_artifact_agreement(ProblemConfig(spline_path=spline_path, alpha=0.05), artifact)


def test_unreadable_spline_artifact_fails_configuration(tmp_path: Path) -> None:
    with pytest.raises(ArtifactError):
        ProblemConfig(spline_path=tmp_path / "missing.json")


def test_grid_must_reach_past_the_spline_region() -> None:
    with pytest.raises(ValidationError):
        ProblemConfig(theta_grid_max=5.0)


def test_knot_step_must_divide_the_spline_region() -> None:
    with pytest.raises(ValidationError):
        ProblemConfig(knot_step=3.0)


def test_single_observation_is_allowed_until_a_t_quantile_is_needed() -> None:
    config = ProblemConfig(n=1)

    assert config.n == 1
    with pytest.raises(DomainError):
        _ = config.t_half
    with pytest.raises(ValidationError):
        ProblemConfig(n=0)


def test_config_is_frozen() -> None:
    config = ProblemConfig()
    with pytest.raises(ValidationError):
        config.n = 30  # type: ignore[misc]


def test_theta_grids() -> None:
    config = ProblemConfig()
    grid = config.theta_grid()

    assert grid.size == 3001
    assert grid[1500] == 0.0
    assert grid[0] == -grid[-1] == -15.0
    assert config.constraint_thetas()[-1] == 12.0
    assert config.verification_thetas().size == 4 * (config.constraint_thetas().size - 1) + 1


def test_snapshot_is_json_ready_and_omits_the_spline_path(tmp_path: Path) -> None:
    spline_path = _write_artifact(tmp_path, n=24, alpha=0.05, w=0.1, q=8.0, knot_step=1.0)
    snapshot = ProblemConfig(spline_path=spline_path).snapshot()

    assert "spline_path" not in snapshot
    assert snapshot["n"] == 24


def _write_artifact(
    root: Path, n: int, alpha: float, w: float, q: float, knot_step: float
) -> Path:
    b = MonotoneCubicB.standard(q, t_quantile(alpha / 2, n - 1), knot_step)
    path = root / "spline.json"
    write_json_artifact(b.to_artifact(n, alpha, w), path)
    return path
