"""Test dataset presets."""

import pytest

from ftseg.data import generate_synthetic
from ftseg.enums import Preset
from ftseg.exceptions import ValidationError
from ftseg.presets import DatasetPresets, presets


class TestDatasetPresets:
    """Test preset lookup functionality."""

    def test_presets_loaded(self):
        """Test that both presets are available."""
        mappings = DatasetPresets()

        assert set(mappings.PRESETS) == {Preset.BUS_LIKE, Preset.ISIC_LIKE}
        assert mappings.get_description("bus-like") == "64x64 grayscale, lesion area 2-10%"

    def test_bus_like_config(self):
        """Test the grayscale small-lesion preset."""
        cfg = presets.get_config(Preset.BUS_LIKE)

        assert (cfg.height, cfg.width, cfg.channels) == (64, 64, 1)
        assert cfg.lesion_area_range == (0.02, 0.10)

    def test_isic_like_config(self):
        """Test the color large-lesion preset."""
        cfg = presets.get_config("isic-like")

        assert (cfg.height, cfg.width, cfg.channels) == (96, 128, 3)
        assert cfg.lesion_area_range == (0.10, 0.40)

    def test_overrides(self):
        """Test that overrides replace preset fields."""
        cfg = presets.get_config("bus-like", count=5, seed=9)
        assert (cfg.count, cfg.seed, cfg.height) == (5, 9, 64)

    def test_unknown_preset(self):
        """Test handling of unknown presets."""
        assert presets.get_description("retina") == "Unknown preset (retina)"
        with pytest.raises(ValidationError, match="bus-like"):
            presets.get_config("retina")

    def test_choices_return_copies(self):
        """Test that the choice view is a copy."""
        choices = presets.get_preset_choices()
        choices.clear()

        assert presets.get_preset_choices() == {
            "bus-like": "64x64 grayscale, lesion area 2-10%",
            "isic-like": "96x128 RGB, lesion area 10-40%",
        }

    def test_preset_generates(self):
        """Test that a shrunken preset generates within its area range."""
        cfg = presets.get_config("isic-like", count=2, height=32, width=32)
        lo, hi = cfg.lesion_area_range
        for sample in generate_synthetic(cfg):
            assert sample.channels == 3
            assert lo <= sample.foreground_fraction <= hi
