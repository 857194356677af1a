"""Synthetic dataset presets."""

from typing import Any

from .enums import Preset
from .exceptions import ValidationError
from .models import SyntheticConfig


class DatasetPresets:
    """Preset generator settings as static data structures."""

    PRESETS: dict[Preset, dict[str, Any]] = {
        # small breast-ultrasound-like lesions on grayscale
        Preset.BUS_LIKE: {
            "count": 200,
            "height": 64,
            "width": 64,
            "channels": 1,
            "lesion_area_range": (0.02, 0.10),
            "contrast": 0.25,
            "noise_sigma": 0.05,
        },
        # larger skin-lesion-like regions on color images
        Preset.ISIC_LIKE: {
            "count": 200,
            "height": 96,
            "width": 128,
            "channels": 3,
            "lesion_area_range": (0.10, 0.40),
            "contrast": 0.3,
            "noise_sigma": 0.04,
        },
    }

    DESCRIPTIONS: dict[Preset, str] = {
        Preset.BUS_LIKE: "64x64 grayscale, lesion area 2-10%",
        Preset.ISIC_LIKE: "96x128 RGB, lesion area 10-40%",
    }

    def get_description(self, preset: Preset | str) -> str:
        try:
            return self.DESCRIPTIONS[Preset(preset)]
        except ValueError:
            return f"Unknown preset ({preset})"

    def get_config(self, preset: Preset | str, **overrides: Any) -> SyntheticConfig:
        """Generator settings of a preset with field overrides applied."""
        values = {**self.PRESETS[self._resolve(preset)], **overrides}
        return SyntheticConfig(**values)

    def get_preset_choices(self) -> dict[str, str]:
        return {p.value: self.DESCRIPTIONS[p] for p in self.PRESETS}

    @staticmethod
    def _resolve(preset: Preset | str) -> Preset:
        try:
            return Preset(preset)
        except ValueError as exc:
            choices = ", ".join(p.value for p in Preset)
            raise ValidationError(f"unknown preset {preset!r}; choose one of {choices}") from exc


# Global instance
presets = DatasetPresets()
