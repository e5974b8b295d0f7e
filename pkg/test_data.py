"""Dataset container, synthetic generators and sequence import."""

import dataclasses
import json

import numpy as np
import pytest
import torch

from core.errors import CorruptDatasetError
from data.dataset import DatasetMeta, check_known_attributes, load_dataset, save_dataset, validate_dataset
from data.sequence_import import remap_labels, sequences_to_dataset
from data.synthetic import blob_centers, cluster_frequency, make_synthetic_blob_images, make_synthetic_sequences
from networks.taps import SequenceBatch


class TestDatasetDirectory:
    def test_image_round_trip(self, tiny_blobs, tmp_path):
        loaded = load_dataset(save_dataset(tiny_blobs, tmp_path / "blobs"))
        assert loaded.meta == tiny_blobs.meta
        assert loaded.data.dtype == np.float32
        assert np.array_equal(loaded.data, tiny_blobs.data)
        assert np.array_equal(loaded.labels, tiny_blobs.labels)

    def test_sequence_round_trip(self, tiny_sequences, tmp_path):
        loaded = load_dataset(save_dataset(tiny_sequences, tmp_path / "seqs"))
        assert np.array_equal(loaded.data, tiny_sequences.data)
        assert np.array_equal(loaded.lengths, tiny_sequences.lengths)

    def test_payload_one_element_short(self, tiny_blobs, tmp_path):
        path = save_dataset(tiny_blobs, tmp_path / "blobs")
        payload = path / "data.f32"
        payload.write_bytes(payload.read_bytes()[:-4])
        with pytest.raises(CorruptDatasetError):
            load_dataset(path)

    def test_missing_labels_file(self, tiny_blobs, tmp_path):
        path = save_dataset(tiny_blobs, tmp_path / "blobs")
        (path / "labels.i32").unlink()
        with pytest.raises(CorruptDatasetError):
            load_dataset(path)

    def test_invalid_meta(self, tiny_blobs, tmp_path):
        path = save_dataset(tiny_blobs, tmp_path / "blobs")
        meta = json.loads((path / "meta.json").read_text())
        meta["kind"] = "audio"
        (path / "meta.json").write_text(json.dumps(meta))
        with pytest.raises(CorruptDatasetError):
            load_dataset(path)
        with pytest.raises(CorruptDatasetError):
            load_dataset(tmp_path / "nowhere")

    def test_nonzero_padding(self, tiny_sequences):
        data = tiny_sequences.data.copy()
        short = int(np.argmin(tiny_sequences.lengths))
        data[short, -1, 0] = 1.0
        with pytest.raises(CorruptDatasetError):
            validate_dataset(dataclasses.replace(tiny_sequences, data=data))

    def test_label_out_of_range(self, tiny_blobs):
        labels = tiny_blobs.labels.copy()
        labels[0] = tiny_blobs.meta.k
        with pytest.raises(CorruptDatasetError):
            validate_dataset(dataclasses.replace(tiny_blobs, labels=labels))

    def test_non_finite_data(self, tiny_blobs):
        data = tiny_blobs.data.copy()
        data[0, 0, 0, 0] = np.nan
        with pytest.raises(CorruptDatasetError):
            validate_dataset(dataclasses.replace(tiny_blobs, data=data))

    def test_inputs(self, tiny_blobs, tiny_sequences):
        images = tiny_blobs.inputs(np.array([0, 2]))
        assert isinstance(images, torch.Tensor) and tuple(images.shape) == (2, 1, 12, 12)
        assert tiny_blobs.inputs(dtype=torch.float64).dtype == torch.float64
        seqs = tiny_sequences.inputs(np.array([1, 3, 5]))
        assert isinstance(seqs, SequenceBatch) and seqs.n == 3
        assert seqs.lengths.tolist() == tiny_sequences.lengths[[1, 3, 5]].tolist()


class TestBlobImages:
    def test_balanced_and_reproducible(self):
        ds = make_synthetic_blob_images(k=4, per_cluster=10, side=16, seed=3)
        assert ds.data.shape == (40, 1, 16, 16)
        assert np.bincount(ds.labels).tolist() == [10, 10, 10, 10]
        again = make_synthetic_blob_images(k=4, per_cluster=10, side=16, seed=3)
        assert np.array_equal(ds.data, again.data) and np.array_equal(ds.labels, again.labels)
        other = make_synthetic_blob_images(k=4, per_cluster=10, side=16, seed=4)
        assert not np.array_equal(ds.data, other.data)

    def test_nearest_centroid_separates_clusters(self):
        ds = make_synthetic_blob_images(k=3, per_cluster=30, side=16, seed=0)
        flat = ds.data.reshape(ds.n, -1).astype(np.float64)
        centroids = np.stack([flat[ds.labels == c].mean(axis=0) for c in range(3)])
        nearest = np.linalg.norm(flat[:, None, :] - centroids[None], axis=2).argmin(axis=1)
        assert np.mean(nearest == ds.labels) >= 0.99

    def test_centers_are_far_apart(self):
        centers = blob_centers(3, 16)
        gaps = [np.linalg.norm(centers[i] - centers[j]) for i in range(3) for j in range(i + 1, 3)]
        assert min(gaps) >= 16 / 3

    def test_argument_checks(self):
        with pytest.raises(ValueError):
            make_synthetic_blob_images(k=1, per_cluster=5, side=16, seed=0)
        with pytest.raises(ValueError):
            make_synthetic_blob_images(k=3, per_cluster=5, side=4, seed=0)


class TestSyntheticSequences:
    def test_lengths_and_padding(self):
        ds = make_synthetic_sequences(k=3, per_cluster=20, dim=2, length_range=(10, 20), seed=1)
        assert ds.data.shape == (60, 20, 2)
        assert ds.lengths.min() >= 10 and ds.lengths.max() <= 20
        assert np.bincount(ds.labels).tolist() == [20, 20, 20]
        for i in range(ds.n):
            assert not ds.data[i, ds.lengths[i]:].any()

    def test_dominant_frequency(self):
        ds = make_synthetic_sequences(k=3, per_cluster=10, dim=1, length_range=(16, 24), seed=2)
        for i in range(ds.n):
            signal = ds.data[i, : ds.lengths[i], 0]
            spectrum = np.abs(np.fft.rfft(signal - signal.mean()))
            assert int(spectrum.argmax()) == cluster_frequency(int(ds.labels[i]))

    def test_argument_checks(self):
        with pytest.raises(ValueError):
            make_synthetic_sequences(k=2, per_cluster=3, dim=1, length_range=(8, 4), seed=0)


class TestSequenceImport:
    def test_padding_and_label_remap(self):
        ds = sequences_to_dataset("toy", [np.ones(3), np.ones(5), np.ones(2)], labels=[10, 30, 10])
        assert ds.data.shape == (3, 5, 1)
        assert ds.lengths.tolist() == [3, 5, 2]
        assert ds.labels.tolist() == [0, 1, 0]
        assert (ds.meta.k, ds.meta.min_length, ds.meta.max_length) == (2, 2, 5)
        assert not ds.data[2, 2:].any()

    def test_unlabeled(self):
        ds = sequences_to_dataset("toy", [np.ones((2, 3)), np.ones((4, 3))], k=4)
        assert ds.labels is None and not ds.meta.has_labels and ds.meta.k == 4

    def test_rejects_bad_input(self):
        with pytest.raises(CorruptDatasetError):
            sequences_to_dataset("toy", [])
        with pytest.raises(CorruptDatasetError):
            sequences_to_dataset("toy", [np.ones((2, 3)), np.ones((2, 4))])
        with pytest.raises(CorruptDatasetError):
            sequences_to_dataset("toy", [np.ones((2, 3)), np.ones((0, 3))])

    def test_remap_labels(self):
        assert remap_labels([7, 3, 7, 9]).tolist() == [1, 0, 1, 2]


class TestKnownAttributes:
    def meta(self, **overrides):
        fields = dict(name="ct", kind="sequence", n=1491, k=10, dim=3, min_length=109, max_length=198)
        fields.update(overrides)
        return DatasetMeta(**fields)

    def test_matching(self):
        assert all(check_known_attributes(self.meta(), "character_trajectories").values())

    def test_mismatch(self):
        with pytest.raises(CorruptDatasetError):
            check_known_attributes(self.meta(dim=2), "character_trajectories")
        with pytest.raises(CorruptDatasetError):
            check_known_attributes(self.meta(n=8800, k=10, dim=13, min_length=4, max_length=93), "character_trajectories")

    def test_unknown_name(self):
        with pytest.raises(CorruptDatasetError):
            check_known_attributes(self.meta(), "nonexistent")
