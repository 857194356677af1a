"""Synthetic imbalanced-lesion datasets, image-directory ingestion, splits."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .exceptions import DataError, ValidationError
from .models import DatasetManifest, ForegroundStats, SplitSpec, SyntheticConfig
from .rng import CounterRNG

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".bmp", ".jpg", ".jpeg", ".tif", ".tiff", ".pgm", ".ppm"}
MAX_ATTEMPTS = 8


@dataclass(frozen=True, eq=False)
class Sample:
    """One image (C×H×W in [0, 1]) with its binary 1×H×W mask."""

    image: np.ndarray
    mask: np.ndarray
    id: str

    def __post_init__(self) -> None:
        if self.image.ndim != 3 or self.mask.ndim != 3 or self.mask.shape[0] != 1:
            raise ValidationError(
                f"{self.id}: expected C×H×W image and 1×H×W mask, got "
                f"{self.image.shape} and {self.mask.shape}"
            )
        if self.image.shape[1:] != self.mask.shape[1:]:
            raise ValidationError(f"{self.id}: image and mask are not aligned")
        if not np.isin(self.mask, (0.0, 1.0)).all():
            raise ValidationError(f"{self.id}: mask is not binary")

    @property
    def channels(self) -> int:
        return self.image.shape[0]

    @property
    def size(self) -> tuple[int, int]:
        return self.image.shape[1], self.image.shape[2]

    @property
    def foreground_fraction(self) -> float:
        return float(self.mask.mean())


def stack_batch(samples: Sequence[Sample]) -> tuple[np.ndarray, np.ndarray]:
    """Images N×C×H×W and masks N×1×H×W."""
    return (
        np.stack([s.image for s in samples]),
        np.stack([s.mask for s in samples]),
    )


# synthetic generation


def _check_attainable(cfg: SyntheticConfig) -> None:
    pixels = cfg.height * cfg.width
    lo, hi = cfg.lesion_area_range
    if math.ceil(lo * pixels) > math.floor(hi * pixels) or math.floor(hi * pixels) < 1:
        raise DataError(
            f"lesion_area_range {cfg.lesion_area_range} is unattainable on a "
            f"{cfg.height}×{cfg.width} image"
        )


def _lesion_mask(rng: CounterRNG, h: int, w: int, lo: float, hi: float) -> np.ndarray | None:
    """Union of 1–3 clustered ellipses scaled so its area lands in [lo, hi]."""
    target = rng.uniform(lo, hi)
    count = rng.integers(1, 4)
    cy, cx = rng.uniform(0.25, 0.75) * h, rng.uniform(0.25, 0.75) * w
    ellipses = []
    for j in range(count):
        oy, ox = (0.0, 0.0) if j == 0 else tuple(rng.uniform(-0.12, 0.12, 2) * (h, w))
        ellipses.append(
            (
                cy + oy,
                cx + ox,
                rng.uniform(0.6, 1.4),
                rng.uniform(0.6, 1.4),
                rng.uniform(0.0, np.pi),
            )
        )
    yy, xx = np.mgrid[0:h, 0:w] + 0.5
    extent = min(h, w)

    def union(scale: float) -> np.ndarray:
        inside = np.zeros((h, w), dtype=bool)
        if scale <= 0:
            return inside
        for ey, ex, a, b, theta in ellipses:
            dy, dx = yy - ey, xx - ex
            u = (dx * np.cos(theta) + dy * np.sin(theta)) / (scale * a * extent)
            v = (-dx * np.sin(theta) + dy * np.cos(theta)) / (scale * b * extent)
            inside |= u * u + v * v <= 1.0
        return inside

    low, high = 0.0, 1.0
    for _ in range(40):
        mid = 0.5 * (low + high)
        if union(mid).mean() < target:
            low = mid
        else:
            high = mid
    best: np.ndarray | None = None
    for candidate in (union(low), union(high)):
        fraction = candidate.mean()
        if lo <= fraction <= hi and (
            best is None or abs(fraction - target) < abs(best.mean() - target)
        ):
            best = candidate
    return best


def _background(rng: CounterRNG, h: int, w: int) -> np.ndarray:
    """Smooth low-frequency intensity field around mid-gray."""
    yy, xx = np.mgrid[0:h, 0:w]
    field = np.full((h, w), 0.5)
    for _ in range(3):
        amp = rng.uniform(0.03, 0.08)
        fy, fx = rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        field += amp * np.cos(2.0 * np.pi * (fy * yy / h + fx * xx / w) + phase)
    return field


def synthesize(cfg: SyntheticConfig, index: int) -> Sample:
    """Sample `index` of a synthetic set; depends only on (seed, index)."""
    lo, hi = cfg.lesion_area_range
    mask = None
    for attempt in range(MAX_ATTEMPTS):
        rng = CounterRNG(cfg.seed, index, attempt)
        mask = _lesion_mask(rng.child("mask"), cfg.height, cfg.width, lo, hi)
        if mask is not None:
            break
    if mask is None:
        raise DataError(
            f"could not realise a lesion area in {cfg.lesion_area_range} for sample {index}"
        )

    base = _background(rng.child("background"), cfg.height, cfg.width)
    shading = rng.child("shading")
    sign = -1.0 if shading.random() < 0.75 else 1.0
    lesion = base + sign * cfg.contrast * mask
    noise = rng.child("noise")
    channels = []
    for c in range(cfg.channels):
        tint = 1.0 if c == 0 else shading.uniform(0.85, 1.15)
        layer = tint * lesion + noise.normal((cfg.height, cfg.width)) * cfg.noise_sigma
        channels.append(np.clip(layer, 0.0, 1.0))
    return Sample(
        image=np.stack(channels),
        mask=mask[None].astype(np.float64),
        id=f"synth_{index:05d}",
    )


def generate_synthetic(cfg: SyntheticConfig) -> list[Sample]:
    """Seed-controlled imbalanced-lesion dataset, merged in index order."""
    _check_attainable(cfg)
    samples = [synthesize(cfg, i) for i in range(cfg.count)]
    logger.debug(
        "generated %d samples %dx%d, mean foreground %.4f",
        len(samples),
        cfg.height,
        cfg.width,
        foreground_stats(samples).mean,
    )
    return samples


def foreground_stats(samples: Sequence[Sample]) -> ForegroundStats:
    fractions = np.array([s.foreground_fraction for s in samples]) if samples else np.zeros(1)
    return ForegroundStats(
        mean=float(fractions.mean()),
        std=float(fractions.std()),
        min=float(fractions.min()),
        max=float(fractions.max()),
    )


# directory ingestion


def _index_dir(path: Path) -> dict[str, Path]:
    if not path.is_dir():
        raise DataError(f"{path} is not a directory")
    return {
        p.stem: p
        for p in sorted(path.iterdir())
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    }


def _open(path: Path) -> Image.Image:
    try:
        with Image.open(path) as img:
            img.load()
            return img.copy()
    except (OSError, UnidentifiedImageError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def _read_image(path: Path, size: tuple[int, int]) -> np.ndarray:
    img = _open(path)
    img = img.convert("L") if img.mode in ("1", "L", "LA", "I", "I;16", "F") else img.convert("RGB")
    data = np.asarray(img, dtype=np.float32) / 255.0
    if data.ndim == 2:
        data = data[..., None]
    height, width = size
    channels = []
    for c in range(data.shape[-1]):
        layer = Image.fromarray(np.ascontiguousarray(data[..., c]), mode="F")
        if layer.size != (width, height):
            layer = layer.resize((width, height), Image.Resampling.BILINEAR)
        channels.append(np.asarray(layer, dtype=np.float64))
    return np.clip(np.stack(channels), 0.0, 1.0)


def _read_mask(path: Path, size: tuple[int, int]) -> np.ndarray:
    img = _open(path).convert("L")
    height, width = size
    if img.size != (width, height):
        img = img.resize((width, height), Image.Resampling.NEAREST)
    data = np.asarray(img, dtype=np.float64) / 255.0
    return (data >= 0.5).astype(np.float64)[None]


def load_image_dir(
    images_path: str | Path,
    masks_path: str | Path,
    target_size: tuple[int, int] | None = None,
) -> list[Sample]:
    """Pair `<id>.<ext>` files by basename and resample them to `target_size`.

    Images are rescaled to [0, 1] and resampled bilinearly; masks are resampled
    nearest-neighbour and thresholded at 0.5. Without `target_size` every pair
    is brought to the size of the first image.
    """
    images = _index_dir(Path(images_path))
    masks = _index_dir(Path(masks_path))
    orphans = sorted(set(images) ^ set(masks))
    if orphans:
        listed = ", ".join(
            str(images.get(name) or masks.get(name)) for name in orphans
        )
        raise DataError(f"unpaired files: {listed}")
    if not images:
        return []

    ids = sorted(images)
    if target_size is None:
        width, height = _open(images[ids[0]]).size
        target_size = (height, width)
    samples = [
        Sample(
            image=_read_image(images[i], target_size),
            mask=_read_mask(masks[i], target_size),
            id=i,
        )
        for i in ids
    ]
    logger.debug("loaded %d samples from %s", len(samples), images_path)
    return samples


def load_dataset(root: str | Path, target_size: tuple[int, int] | None = None) -> list[Sample]:
    """Load the `<root>/images` + `<root>/masks` layout."""
    root = Path(root)
    return load_image_dir(root / "images", root / "masks", target_size)


def export_dataset(
    samples: Sequence[Sample],
    root: str | Path,
    manifest: DatasetManifest | None = None,
) -> Path:
    """Write 8-bit PNG images and masks plus an optional manifest."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    for sample in samples:
        pixels = np.round(np.clip(sample.image, 0.0, 1.0) * 255.0).astype(np.uint8)
        if sample.channels == 1:
            image = Image.fromarray(pixels[0], mode="L")
        else:
            image = Image.fromarray(np.moveaxis(pixels[:3], 0, -1), mode="RGB")
        image.save(root / "images" / f"{sample.id}.png")
        mask = (sample.mask[0] * 255).astype(np.uint8)
        Image.fromarray(mask, mode="L").save(root / "masks" / f"{sample.id}.png")
    if manifest is not None:
        (root / "manifest.json").write_text(
            manifest.model_dump_json(indent=2) + "\n", encoding="utf-8"
        )
    return root


# splits


def split(samples: Sequence[Sample], spec: SplitSpec) -> tuple[list[Sample], list[Sample]]:
    """Seeded shuffle; the first ⌈f·n⌉ go to train, at least one stays for test."""
    n = len(samples)
    if n < 2:
        raise ValidationError(f"split needs at least 2 samples, got {n}")
    order = CounterRNG(spec.seed, "split").permutation(n)
    n_train = min(math.ceil(spec.train_fraction * n), n - 1)
    return (
        [samples[i] for i in order[:n_train]],
        [samples[i] for i in order[n_train:]],
    )


def kfold(
    samples: Sequence[Sample], folds: int, seed: int
) -> list[tuple[list[Sample], list[Sample]]]:
    """Disjoint validation folds whose sizes differ by at most one."""
    n = len(samples)
    if folds < 2:
        raise ValidationError(f"folds must be at least 2, got {folds}")
    if n < folds:
        raise ValidationError(f"{folds}-fold split needs at least {folds} samples, got {n}")
    order = CounterRNG(seed, "kfold").permutation(n)
    base, remainder = divmod(n, folds)
    result = []
    start = 0
    for k in range(folds):
        stop = start + base + (1 if k < remainder else 0)
        held_out = set(order[start:stop].tolist())
        result.append(
            (
                [samples[i] for i in order if i not in held_out],
                [samples[i] for i in order[start:stop]],
            )
        )
        start = stop
    return result
