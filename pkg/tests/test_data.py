"""Test synthetic generation, directory loading and splits."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image
from pydantic import ValidationError as PydanticValidationError

from ftseg.data import (
    Sample,
    export_dataset,
    foreground_stats,
    generate_synthetic,
    kfold,
    load_dataset,
    load_image_dir,
    split,
    synthesize,
)
from ftseg.exceptions import DataError, ValidationError
from ftseg.models import DatasetManifest, SplitSpec, SyntheticConfig


def blank_samples(n: int) -> list[Sample]:
    return [Sample(np.zeros((1, 2, 2)), np.zeros((1, 2, 2)), id=f"s{i:03d}") for i in range(n)]


def write_png(path, array: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(array.astype(np.uint8)).save(path)


class TestSample:
    """Test sample validation."""

    def test_misaligned_rejected(self):
        """Test that image and mask must share H×W."""
        with pytest.raises(ValidationError):
            Sample(np.zeros((1, 4, 4)), np.zeros((1, 4, 2)), id="x")

    def test_soft_mask_rejected(self):
        """Test that masks must be binary."""
        with pytest.raises(ValidationError):
            Sample(np.zeros((1, 2, 2)), np.full((1, 2, 2), 0.3), id="x")


class TestSynthetic:
    """Test the synthetic lesion generator."""

    def test_same_seed_identical(self, tiny_synthetic_config):
        """Test bit-identical output for one seed."""
        a = generate_synthetic(tiny_synthetic_config)
        b = generate_synthetic(tiny_synthetic_config)
        for x, y in zip(a, b):
            assert x.id == y.id
            assert x.image.tobytes() == y.image.tobytes()
            assert x.mask.tobytes() == y.mask.tobytes()

    def test_sample_independent_of_count(self, tiny_synthetic_config):
        """Test that sample i depends only on (seed, i)."""
        samples = generate_synthetic(tiny_synthetic_config)
        alone = synthesize(tiny_synthetic_config, 5)
        np.testing.assert_array_equal(samples[5].image, alone.image)

    def test_other_seed_differs(self, tiny_synthetic_config):
        """Test that the seed changes the data."""
        other = tiny_synthetic_config.model_copy(update={"seed": 4})
        a = generate_synthetic(tiny_synthetic_config)[0]
        b = generate_synthetic(other)[0]
        assert not np.array_equal(a.image, b.image)

    def test_lesion_area_in_range(self):
        """Test every foreground fraction against the configured range."""
        cfg = SyntheticConfig(count=20, height=32, width=32, lesion_area_range=(0.02, 0.1), seed=1)
        for sample in generate_synthetic(cfg):
            assert 0.02 <= sample.foreground_fraction <= 0.1

    def test_shapes_and_range(self):
        """Test C×H×W images in [0, 1] with binary masks."""
        cfg = SyntheticConfig(count=3, height=16, width=24, channels=3, seed=2, lesion_area_range=(0.05, 0.2))
        for sample in generate_synthetic(cfg):
            assert sample.image.shape == (3, 16, 24)
            assert sample.mask.shape == (1, 16, 24)
            assert sample.image.min() >= 0.0 and sample.image.max() <= 1.0
            assert set(np.unique(sample.mask)) <= {0.0, 1.0}

    def test_unattainable_range_rejected(self):
        """Test that a range no pixel count can hit raises."""
        cfg = SyntheticConfig(count=1, height=2, width=2, lesion_area_range=(0.01, 0.1))
        with pytest.raises(DataError, match="unattainable"):
            generate_synthetic(cfg)

    def test_invalid_range_rejected(self):
        """Test the configuration bounds on the area range."""
        with pytest.raises(PydanticValidationError, match="lesion_area_range"):
            SyntheticConfig(lesion_area_range=(0.3, 0.2))

    def test_zero_contrast_hides_lesion(self, tiny_synthetic_config):
        """Test that contrast 0 leaves the lesion out of the image."""
        hidden = tiny_synthetic_config.model_copy(update={"contrast": 0.0})
        for index in range(3):
            visible = synthesize(tiny_synthetic_config, index)
            blank = synthesize(hidden, index)
            background = np.broadcast_to(visible.mask == 0, visible.image.shape)

            np.testing.assert_array_equal(blank.mask, visible.mask)
            np.testing.assert_array_equal(blank.image[background], visible.image[background])
            assert not np.array_equal(blank.image, visible.image)

    def test_foreground_stats(self, tiny_dataset):
        """Test summary statistics of foreground fractions."""
        stats = foreground_stats(tiny_dataset)
        fractions = [s.foreground_fraction for s in tiny_dataset]

        assert stats.mean == pytest.approx(np.mean(fractions))
        assert stats.min == min(fractions)
        assert stats.max == max(fractions)


class TestImageDirectory:
    """Test loading paired image/mask directories."""

    def test_export_then_load(self, tmp_path, tiny_dataset, tiny_synthetic_config):
        """Test that exported PNGs load back within quantization."""
        manifest = DatasetManifest(
            seed=3, count=8, config=tiny_synthetic_config, foreground=foreground_stats(tiny_dataset)
        )
        export_dataset(tiny_dataset, tmp_path / "ds", manifest)
        loaded = load_dataset(tmp_path / "ds")

        assert (tmp_path / "ds" / "manifest.json").exists()
        assert [s.id for s in loaded] == [s.id for s in tiny_dataset]
        for original, restored in zip(tiny_dataset, loaded):
            np.testing.assert_array_equal(restored.mask, original.mask)
            np.testing.assert_allclose(restored.image, original.image, atol=0.5 / 255 + 1e-6)

    def test_orphan_named(self, tmp_path):
        """Test that an image without a mask is reported by path."""
        write_png(tmp_path / "images" / "a.png", np.zeros((4, 4)))
        write_png(tmp_path / "images" / "b.png", np.zeros((4, 4)))
        write_png(tmp_path / "masks" / "a.png", np.zeros((4, 4)))

        with pytest.raises(DataError, match="b.png"):
            load_dataset(tmp_path)

    def test_unreadable_file(self, tmp_path):
        """Test that a corrupt image raises DataError."""
        (tmp_path / "images").mkdir()
        (tmp_path / "images" / "a.png").write_bytes(b"definitely not a png")
        write_png(tmp_path / "masks" / "a.png", np.zeros((4, 4)))

        with pytest.raises(DataError, match="cannot read"):
            load_dataset(tmp_path)

    def test_empty_directories(self, tmp_path):
        """Test that empty directories load as an empty list."""
        (tmp_path / "images").mkdir()
        (tmp_path / "masks").mkdir()
        assert load_dataset(tmp_path) == []

    def test_missing_directory(self, tmp_path):
        """Test that a missing masks directory raises DataError."""
        write_png(tmp_path / "images" / "a.png", np.zeros((4, 4)))
        with pytest.raises(DataError):
            load_image_dir(tmp_path / "images", tmp_path / "nope")

    def test_mask_resize_stays_binary(self, tmp_path):
        """Test nearest-neighbour resampling of a 2×2-block checkerboard."""
        blocks = np.indices((4, 4)).sum(axis=0) % 2
        mask = np.kron(blocks, np.ones((2, 2))) * 255
        write_png(tmp_path / "images" / "c.png", np.full((8, 8), 128))
        write_png(tmp_path / "masks" / "c.png", mask)

        [sample] = load_dataset(tmp_path, target_size=(4, 4))
        np.testing.assert_array_equal(sample.mask[0], blocks)
        np.testing.assert_allclose(sample.image, 128 / 255, atol=1e-6)

    def test_gray_mask_thresholded(self, tmp_path):
        """Test that mask values at or above half intensity count as foreground."""
        write_png(tmp_path / "images" / "d.png", np.zeros((2, 2)))
        write_png(tmp_path / "masks" / "d.png", np.array([[0, 127], [128, 255]]))

        [sample] = load_dataset(tmp_path)
        np.testing.assert_array_equal(sample.mask[0], [[0.0, 0.0], [1.0, 1.0]])


class TestSplits:
    """Test train/test splits and k-fold partitions."""

    def test_split_sizes(self):
        """Test 163 samples at f = 0.75 give 123/40."""
        train, test = split(blank_samples(163), SplitSpec(train_fraction=0.75, seed=0))
        assert (len(train), len(test)) == (123, 40)
        assert {s.id for s in train}.isdisjoint(s.id for s in test)

    def test_split_keeps_one_for_test(self):
        """Test that rounding up never empties the test part."""
        train, test = split(blank_samples(3), SplitSpec(train_fraction=0.9))
        assert (len(train), len(test)) == (2, 1)

    def test_split_deterministic(self):
        """Test that one seed gives one split."""
        samples = blank_samples(20)
        a, _ = split(samples, SplitSpec(seed=5))
        b, _ = split(samples, SplitSpec(seed=5))
        assert [s.id for s in a] == [s.id for s in b]

    def test_split_too_small(self):
        """Test that a single sample cannot be split."""
        with pytest.raises(ValidationError):
            split(blank_samples(1), SplitSpec())

    @settings(max_examples=50, deadline=None)
    @given(st.integers(min_value=2, max_value=40), st.integers(min_value=2, max_value=10), st.integers(0, 2**31))
    def test_kfold_partition(self, n, folds, seed):
        """Test disjoint validation folds covering every sample once."""
        folds = min(folds, n)
        samples = blank_samples(n)
        result = kfold(samples, folds, seed)

        held = [[s.id for s in val] for _, val in result]
        assert sorted(i for fold in held for i in fold) == [s.id for s in samples]
        assert max(map(len, held)) - min(map(len, held)) <= 1
        for (train, val), ids in zip(result, held):
            assert len(train) + len(val) == n
            assert {s.id for s in train}.isdisjoint(ids)

    def test_kfold_too_few_samples(self):
        """Test that folds cannot exceed samples."""
        with pytest.raises(ValidationError):
            kfold(blank_samples(3), 5, 0)
