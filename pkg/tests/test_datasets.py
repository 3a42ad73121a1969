"""IDX round-trips, corruption handling, and the synthetic digit set."""

import struct

import numpy as np
import pytest

from ticnn.datasets import (
    Dataset,
    IDX_IMAGE_MAGIC,
    IDX_LABEL_MAGIC,
    IdxFormatError,
    load_dataset,
    load_idx_images,
    load_idx_labels,
    save_idx_images,
    save_idx_labels,
    synthetic_digits,
)


class TestIdxImages:
    def test_hand_packed_file_loads_exactly(self, tmp_path):
        pixel_bytes = bytes([0, 128, 255, 64, 32, 16, 200, 100])
        path = tmp_path / "two.idx"
        path.write_bytes(struct.pack(">IIII", IDX_IMAGE_MAGIC, 2, 2, 2) + pixel_bytes)
        images = load_idx_images(path)
        assert images.shape == (2, 1, 2, 2)
        expected = np.array(list(pixel_bytes), dtype=np.float64).reshape(2, 1, 2, 2) / 255.0
        np.testing.assert_array_equal(images, expected)

    def test_round_trip_preserves_quantized_pixels(self, tmp_path, rng):
        images = rng.uniform(size=(5, 1, 9, 9))
        path = tmp_path / "imgs.idx"
        save_idx_images(path, images)
        loaded = load_idx_images(path)
        np.testing.assert_array_equal(save_and_reload(tmp_path, loaded), loaded)
        assert np.max(np.abs(loaded - images)) <= 0.5 / 255.0 + 1e-12

    def test_gzip_transparent(self, tmp_path, rng):
        import gzip

        images = rng.uniform(size=(3, 1, 4, 4))
        plain = tmp_path / "x.idx"
        save_idx_images(plain, images)
        zipped = tmp_path / "x.idx.gz"
        zipped.write_bytes(gzip.compress(plain.read_bytes()))
        np.testing.assert_array_equal(load_idx_images(zipped), load_idx_images(plain))

    def test_bad_magic_names_expected_and_found(self, tmp_path):
        path = tmp_path / "bad.idx"
        path.write_bytes(struct.pack(">IIII", 0x00000107, 1, 1, 1) + b"\x00")
        with pytest.raises(IdxFormatError, match="0x00000107.*0x00000803"):
            load_idx_images(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "short.idx"
        path.write_bytes(struct.pack(">IIII", IDX_IMAGE_MAGIC, 2, 2, 2) + b"\x00" * 3)
        with pytest.raises(IdxFormatError, match="payload"):
            load_idx_images(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "stub.idx"
        path.write_bytes(b"\x00\x00")
        with pytest.raises(IdxFormatError, match="header"):
            load_idx_images(path)

    def test_multichannel_save_rejected(self, tmp_path, rng):
        with pytest.raises(IdxFormatError, match="single-channel"):
            save_idx_images(tmp_path / "x.idx", rng.uniform(size=(2, 3, 4, 4)))


class TestIdxLabels:
    def test_round_trip(self, tmp_path):
        labels = np.array([0, 9, 3, 255, 1], dtype=np.int64)
        path = tmp_path / "y.idx"
        save_idx_labels(path, labels)
        loaded = load_idx_labels(path)
        assert loaded.dtype == np.int64
        np.testing.assert_array_equal(loaded, labels)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.idx"
        path.write_bytes(struct.pack(">II", IDX_IMAGE_MAGIC, 0))
        with pytest.raises(IdxFormatError, match="0x00000801"):
            load_idx_labels(path)

    def test_out_of_byte_range_rejected(self, tmp_path):
        with pytest.raises(IdxFormatError, match="byte"):
            save_idx_labels(tmp_path / "y.idx", np.array([0, 256]))


class TestDataset:
    def test_load_dataset_pairs_files(self, tmp_path, rng):
        images = rng.uniform(size=(4, 1, 6, 6))
        labels = np.array([0, 2, 1, 2])
        save_idx_images(tmp_path / "x.idx", images)
        save_idx_labels(tmp_path / "y.idx", labels)
        ds = load_dataset(tmp_path / "x.idx", tmp_path / "y.idx")
        assert len(ds) == 4
        assert ds.num_classes == 3
        np.testing.assert_array_equal(ds.labels, labels)

    def test_count_mismatch_rejected(self):
        with pytest.raises(IdxFormatError, match="2 images but 3 labels"):
            Dataset(np.zeros((2, 1, 4, 4)), np.zeros(3, dtype=np.int64), 1)


class TestSyntheticDigits:
    def test_shapes_range_and_classes(self):
        ds = synthetic_digits(n_per_class=3, size=24, seed=0)
        assert ds.images.shape == (30, 1, 24, 24)
        assert ds.labels.shape == (30,)
        assert ds.num_classes == 10
        assert ds.images.min() >= 0.0 and ds.images.max() <= 1.0
        assert np.all(np.bincount(ds.labels, minlength=10) == 3)

    def test_seed_determinism(self):
        a = synthetic_digits(n_per_class=2, seed=7)
        b = synthetic_digits(n_per_class=2, seed=7)
        np.testing.assert_array_equal(a.images, b.images)
        np.testing.assert_array_equal(a.labels, b.labels)
        c = synthetic_digits(n_per_class=2, seed=8)
        assert np.any(a.images != c.images)

    def test_class_subset_relabels_from_zero(self):
        ds = synthetic_digits(n_per_class=2, classes=(3, 7))
        assert ds.num_classes == 2
        assert set(np.unique(ds.labels)) == {0, 1}

    def test_too_small_canvas_rejected(self):
        with pytest.raises(ValueError, match="21"):
            synthetic_digits(size=20)


def save_and_reload(tmp_path, images):
    path = tmp_path / "again.idx"
    save_idx_images(path, images)
    return load_idx_images(path)
