"""Dataset generators, normalization, and the IDX binary loader."""
import struct

import numpy as np
import pytest

from ardlab.data import (Dataset, Normalization, gen_blobs, gen_two_moons,
                         load_mnist_idx, write_idx_images, write_idx_labels)
from ardlab.distill import OptimizerConfig
from ardlab.errors import ContractError, FormatError
from ardlab.experiments import accuracy_pct, train_supervised
from ardlab.models import MlpModel


def test_two_moons_noiseless_points_on_arcs():
    ds = gen_two_moons(400, 0.0, seed=3)
    pts0 = ds.features[ds.labels == 0]
    pts1 = ds.features[ds.labels == 1]
    r0 = (pts0 ** 2).sum(axis=1)
    r1 = ((pts1[:, 0] - 1.0) ** 2 + (pts1[:, 1] - 0.5) ** 2)
    np.testing.assert_allclose(r0, 1.0, atol=1e-12)
    np.testing.assert_allclose(r1, 1.0, atol=1e-12)


def test_two_moons_balanced_and_seeded():
    a = gen_two_moons(100, 0.1, seed=5)
    b = gen_two_moons(100, 0.1, seed=5)
    c = gen_two_moons(100, 0.1, seed=6)
    assert np.array_equal(a.features, b.features)
    assert not np.array_equal(a.features, c.features)
    assert (a.labels == 0).sum() == (a.labels == 1).sum() == 50


def test_two_moons_rejects_odd_n():
    with pytest.raises(ContractError):
        gen_two_moons(101, 0.1, seed=0)


def test_two_moons_linear_vs_mlp_gap():
    # the task exists to be non-linearly-separable: a linear head stalls
    # under 90% while a small MLP clears 97%
    train = gen_two_moons(1000, 0.1, seed=21)
    test = gen_two_moons(1000, 0.1, seed=22)
    opt = OptimizerConfig(lr=0.1, momentum=0.9, epochs=40, batch_size=64)
    linear = train_supervised(MlpModel([2, 2], seed=0), train, opt)
    mlp = train_supervised(MlpModel([2, 32, 2], seed=0), train, opt)
    assert accuracy_pct(linear, test.features, test.labels) <= 90.0
    assert accuracy_pct(mlp, test.features, test.labels) >= 97.0


def test_blobs_far_centers_near_perfect():
    centers = [[0.0, 0.0], [12.0, 0.0], [0.0, 12.0]]
    train = gen_blobs(600, centers, 1.0, seed=1)
    test = gen_blobs(600, centers, 1.0, seed=2)
    opt = OptimizerConfig(lr=0.1, momentum=0.9, epochs=30, batch_size=64)
    mlp = train_supervised(MlpModel([2, 16, 3], seed=0), train, opt)
    assert accuracy_pct(mlp, test.features, test.labels) >= 99.9


def test_blobs_single_center_rejected():
    with pytest.raises(ContractError):
        gen_blobs(100, [[0.0, 0.0]], 1.0, seed=0)


def test_blobs_seeded():
    centers = [[0.0, 0.0], [4.0, 4.0]]
    a = gen_blobs(50, centers, 0.5, seed=3)
    b = gen_blobs(50, centers, 0.5, seed=3)
    c = gen_blobs(50, centers, 0.5, seed=4)
    assert np.array_equal(a.features, b.features)
    assert not np.array_equal(a.features, c.features)


def test_blobs_cluster_means_near_centers():
    centers = np.array([[0.0, 0.0], [5.0, -3.0]])
    sigma, n = 0.7, 2000
    ds = gen_blobs(n, centers, sigma, seed=9)
    tol = 5.0 * sigma / np.sqrt(n / 2)
    for k in range(2):
        mean_k = ds.features[ds.labels == k].mean(axis=0)
        assert np.all(np.abs(mean_k - centers[k]) <= tol)


def test_normalization_roundtrip(rng):
    x = rng.integers(0, 256, size=(20, 10)).astype(float)
    pixel = Normalization("pixel", 255.0)
    np.testing.assert_allclose(pixel.denormalize(pixel.normalize(x)), x,
                               atol=1e-12)
    std = Normalization("standard", mean=x.mean(axis=0),
                        std=x.std(axis=0) + 1.0)
    np.testing.assert_allclose(std.denormalize(std.normalize(x)), x,
                               atol=1e-12)


def _write_corpus(tmp_path, images, labels):
    ip, lp = tmp_path / "imgs", tmp_path / "lbls"
    write_idx_images(ip, images)
    write_idx_labels(lp, labels)
    return ip, lp


def test_idx_roundtrip(tmp_path, rng):
    images = rng.integers(0, 256, size=(12, 4, 5)).astype(np.uint8)
    labels = rng.integers(0, 3, size=12).astype(np.uint8)
    labels[0] = 2  # ensure n_classes >= 2 regardless of draw
    ip, lp = _write_corpus(tmp_path, images, labels)
    ds = load_mnist_idx(ip, lp, 100)
    assert ds.features.shape == (12, 20)
    np.testing.assert_allclose(ds.features,
                               images.reshape(12, 20) / 255.0, atol=0)
    assert np.array_equal(ds.labels, labels.astype(np.int64))


def test_idx_header_parsed_big_endian(tmp_path):
    # hand-built header: magic 0x00000803, 1 image of 2x3
    payload = bytes(range(6))
    (tmp_path / "imgs").write_bytes(
        struct.pack(">IIII", 0x00000803, 1, 2, 3) + payload)
    (tmp_path / "lbls").write_bytes(struct.pack(">II", 0x00000801, 1) + b"\x01")
    ds = load_mnist_idx(tmp_path / "imgs", tmp_path / "lbls", 10)
    assert ds.features.shape == (1, 6)
    assert ds.features[0, 5] == pytest.approx(5 / 255.0)


def test_idx_pixel_255_maps_to_one(tmp_path):
    images = np.full((2, 2, 2), 255, dtype=np.uint8)
    ip, lp = _write_corpus(tmp_path, images, np.array([0, 1], dtype=np.uint8))
    ds = load_mnist_idx(ip, lp, 10)
    assert ds.features.max() == 1.0


def test_idx_bad_magic(tmp_path, rng):
    images = rng.integers(0, 256, size=(2, 2, 2)).astype(np.uint8)
    ip, lp = _write_corpus(tmp_path, images, np.array([0, 1], dtype=np.uint8))
    raw = bytearray(ip.read_bytes())
    raw[:4] = struct.pack(">I", 0x00000B01)
    ip.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="magic"):
        load_mnist_idx(ip, lp, 10)


def test_idx_truncated_payload(tmp_path, rng):
    images = rng.integers(0, 256, size=(4, 3, 3)).astype(np.uint8)
    ip, lp = _write_corpus(tmp_path, images, np.array([0, 1, 0, 1],
                                                      dtype=np.uint8))
    ip.write_bytes(ip.read_bytes()[:-5])
    with pytest.raises(FormatError, match="truncated"):
        load_mnist_idx(ip, lp, 10)


def test_idx_count_mismatch(tmp_path, rng):
    images = rng.integers(0, 256, size=(3, 2, 2)).astype(np.uint8)
    ip, _ = _write_corpus(tmp_path, images, np.array([0, 1, 0],
                                                     dtype=np.uint8))
    lp = tmp_path / "short"
    write_idx_labels(lp, np.array([0, 1], dtype=np.uint8))
    with pytest.raises(FormatError, match="mismatch"):
        load_mnist_idx(ip, lp, 10)


def test_idx_zero_limit_rejected(tmp_path, rng):
    images = rng.integers(0, 256, size=(2, 2, 2)).astype(np.uint8)
    ip, lp = _write_corpus(tmp_path, images, np.array([0, 1], dtype=np.uint8))
    with pytest.raises(ContractError):
        load_mnist_idx(ip, lp, 0)


def test_idx_limit_truncates(tmp_path, rng):
    images = rng.integers(0, 256, size=(10, 2, 2)).astype(np.uint8)
    labels = np.array([0, 1] * 5, dtype=np.uint8)
    ip, lp = _write_corpus(tmp_path, images, labels)
    assert len(load_mnist_idx(ip, lp, 4)) == 4
    assert len(load_mnist_idx(ip, lp, 100)) == 10


def test_dataset_contracts():
    with pytest.raises(ContractError):
        Dataset(np.zeros((0, 2)), np.zeros(0), 2)
    with pytest.raises(ContractError):
        Dataset(np.zeros((3, 2)), np.array([0, 1, 5]), 2)
    with pytest.raises(ContractError):
        Dataset(np.full((2, 2), np.nan), np.array([0, 1]), 2)
