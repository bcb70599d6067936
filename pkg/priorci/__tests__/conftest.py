from __future__ import annotations

from pathlib import Path

import pytest

from priorci.config import ProblemConfig
from priorci.known_variance import AcceptanceFamily, build_family
from priorci.spline_b import MonotoneCubicB
from priorci.unknown_variance import OptimizationResult, optimize_b


@pytest.fixture(autouse=True)
def _isolate_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    for name in ("N", "ALPHA", "W", "Q", "KNOT_STEP", "THETA_GRID_STEP", "SPLINE_PATH"):
        monkeypatch.delenv(f"PRIORCI_{name}", raising=False)


@pytest.fixture(scope="session")
def flagship_config() -> ProblemConfig:
    return ProblemConfig(n=24, alpha=0.05, w=0.1, q=8.0, knot_step=1.0)


@pytest.fixture(scope="session")
def mixed_family(flagship_config: ProblemConfig) -> AcceptanceFamily:
    return build_family(flagship_config)


@pytest.fixture(scope="session")
def flagship_result(flagship_config: ProblemConfig) -> OptimizationResult:
    return optimize_b(flagship_config)


@pytest.fixture(scope="session")
def standard_b(flagship_config: ProblemConfig) -> MonotoneCubicB:
    return MonotoneCubicB.standard(flagship_config.q, flagship_config.t_half)


@pytest.fixture
def standard_spline_file(tmp_path: Path, standard_b: MonotoneCubicB) -> Path:
    path = tmp_path / "standard_b.json"
    path.write_text(standard_b.to_artifact(24, 0.05, 0.1).model_dump_json(indent=2), encoding="utf-8")
    return path
