"""
Tests for settings and per-run analysis configuration.
"""
import pytest
from pydantic import ValidationError

import app.core.config as config_module
from app.core.config import AnalysisConfig, Settings, get_analysis_config


def test_settings_read_prefixed_environment(monkeypatch):
    monkeypatch.setenv("REGKIT_SEED", "7")
    monkeypatch.setenv("REGKIT_RADII", "[0.5, 0.05]")
    fresh = Settings()
    assert fresh.SEED == 7
    assert fresh.RADII == (0.5, 0.05)


def test_analysis_config_snapshots_current_settings(monkeypatch):
    monkeypatch.setattr(config_module, "settings", Settings(SAMPLES_PER_RADIUS=33, SEED=5))
    cfg = get_analysis_config()
    assert cfg.samples_per_radius == 33
    assert cfg.seed == 5


def test_overrides_win_and_none_is_ignored():
    cfg = get_analysis_config(seed=11, samples_per_radius=None, radii=(0.2, 0.02))
    assert cfg.seed == 11
    assert cfg.samples_per_radius == config_module.settings.SAMPLES_PER_RADIUS
    assert cfg.radii == (0.2, 0.02)


@pytest.mark.parametrize("radii", [(), (0.1, 0.1), (0.01, 0.1), (0.1, -0.01)])
def test_radii_must_descend(radii):
    with pytest.raises(ValidationError):
        AnalysisConfig(radii=radii)


def test_kappa_grid_is_sorted_and_positive():
    assert AnalysisConfig(kappa_grid=(100.0, 1.0, 10.0)).kappa_grid == (1.0, 10.0, 100.0)
    with pytest.raises(ValidationError):
        AnalysisConfig(kappa_grid=(0.0, 1.0))


def test_workers_are_at_least_one():
    assert AnalysisConfig(workers=0).workers == 1


def test_config_is_frozen():
    cfg = AnalysisConfig()
    with pytest.raises(ValidationError):
        cfg.seed = 3


def test_tolerance_block_echoes_every_knob():
    block = AnalysisConfig().tolerance_block()
    assert block["tol_rank"] == 1e-8
    assert block["radii"] == (1e-1, 1e-2, 1e-3)
    assert set(block) == set(AnalysisConfig.model_fields)
