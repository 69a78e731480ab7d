"""Snapshot generation: seeded streams, SNR calibration, covariance, dumps."""

import numpy as np
import pytest

from nfmusic.channels import ModelKind, build_channel
from nfmusic.geometry import SPEED_OF_LIGHT, Direction, Source, SourceScene, build_upa
from nfmusic.signals import (
    SimConfig,
    SnapshotBlock,
    generate,
    load_snapshots,
    sample_covariance,
    save_snapshots,
)

FC = SPEED_OF_LIGHT / 0.1
DIR_A = Direction.from_degrees(35.0, 63.0)
DIR_B = Direction.from_degrees(39.0, 14.0)


def small_setup(n_elements=16, two_sources=True, d=0.8):
    geom = build_upa(n_elements, FC)
    srcs = (Source(DIR_A, d), Source(DIR_B, d)) if two_sources else (Source(DIR_A, d),)
    return geom, SourceScene(srcs)


def test_generate_shapes_and_noise_power():
    geom, scene = small_setup()
    cfg = SimConfig(n_snapshots=100, snr_db=30.0, seed=3)
    block = generate(geom, scene, ModelKind.NEAR_FIELD, cfg)
    assert block.y.shape == (16, 100)
    assert block.clean.shape == (16, 100)
    assert block.y.dtype == np.complex128
    assert block.noise_power == pytest.approx(1e-3, rel=1e-12)
    assert block.model is ModelKind.NEAR_FIELD


def test_generate_is_deterministic_per_seed():
    geom, scene = small_setup()
    cfg = SimConfig(n_snapshots=64, snr_db=10.0, seed=42)
    b1 = generate(geom, scene, ModelKind.NEAR_FIELD, cfg)
    b2 = generate(geom, scene, ModelKind.NEAR_FIELD, cfg)
    np.testing.assert_array_equal(b1.y, b2.y)
    b3 = generate(geom, scene, ModelKind.NEAR_FIELD, SimConfig(n_snapshots=64, snr_db=10.0, seed=43))
    assert not np.array_equal(b1.y, b3.y)


def test_symbol_stream_independent_of_noise_stream():
    # same seed: the clean part must not change when noise is switched off
    geom, scene = small_setup()
    noisy = generate(geom, scene, ModelKind.NEAR_FIELD, SimConfig(n_snapshots=64, snr_db=0.0, seed=7))
    quiet = generate(
        geom, scene, ModelKind.NEAR_FIELD, SimConfig(n_snapshots=64, snr_db=0.0, seed=7, noiseless=True)
    )
    np.testing.assert_array_equal(noisy.clean, quiet.clean)
    np.testing.assert_array_equal(quiet.y, quiet.clean)
    assert quiet.noise_power == 0.0
    assert not np.array_equal(noisy.y, noisy.clean)


def test_received_power_budget():
    # single source, unit symbol power, unit-modulus channel: E||y_t||^2 / N_U = 1 + N0
    geom, scene = small_setup(two_sources=False)
    cfg = SimConfig(n_snapshots=10_000, snr_db=0.0, seed=11)
    block = generate(geom, scene, ModelKind.NEAR_FIELD, cfg)
    per_element = np.mean(np.abs(block.y) ** 2)
    assert per_element == pytest.approx(2.0, rel=0.05)
    clean_power = np.mean(np.abs(block.clean) ** 2)
    assert clean_power == pytest.approx(1.0, rel=0.05)


def test_symbols_are_circular():
    geom, scene = small_setup(two_sources=False)
    block = generate(geom, scene, ModelKind.NEAR_FIELD, SimConfig(n_snapshots=10_000, snr_db=0.0, seed=5))
    # non-conjugate second moment vanishes for circular signals
    pseudo = np.mean(block.y**2)
    assert abs(pseudo) < 0.05


def test_warns_when_snapshots_fewer_than_elements():
    geom, scene = small_setup()
    with pytest.warns(UserWarning):
        generate(geom, scene, ModelKind.NEAR_FIELD, SimConfig(n_snapshots=8, snr_db=30.0, seed=1))


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(n_snapshots=0, snr_db=30.0, seed=1)
    with pytest.raises(ValueError):
        SimConfig(n_snapshots=10, snr_db=30.0, seed=-1)


def test_sample_covariance_hermitian_psd():
    geom, scene = small_setup()
    block = generate(geom, scene, ModelKind.NEAR_FIELD, SimConfig(n_snapshots=200, snr_db=20.0, seed=2))
    r = sample_covariance(block)
    assert r.shape == (16, 16)
    np.testing.assert_array_equal(r, r.conj().T)
    eigs = np.linalg.eigvalsh(r)
    assert eigs.min() >= -1e-12


def test_sample_covariance_converges_to_ensemble():
    geom, scene = small_setup()
    t = 10_000
    block = generate(geom, scene, ModelKind.NEAR_FIELD, SimConfig(n_snapshots=t, snr_db=0.0, seed=9))
    r_hat = sample_covariance(block)
    h = build_channel(geom, scene, ModelKind.NEAR_FIELD).entries
    r_theory = h @ h.conj().T + block.noise_power * np.eye(16)
    rel = np.linalg.norm(r_hat - r_theory) / np.linalg.norm(r_theory)
    tol = 3.0 * np.trace(r_theory).real / (np.sqrt(t) * np.linalg.norm(r_theory))
    assert rel <= tol


def test_snapshot_dump_round_trip(tmp_path):
    geom, scene = small_setup()
    cfg = SimConfig(n_snapshots=50, snr_db=15.0, seed=123)
    block = generate(geom, scene, ModelKind.APPROX_NEAR_FIELD, cfg)
    path = tmp_path / "block.bin"
    save_snapshots(block, path)
    y, meta = load_snapshots(path)
    np.testing.assert_array_equal(y, block.y.astype(np.complex64))
    assert meta["n_elements"] == 16
    assert meta["n_snapshots"] == 50
    assert meta["model"] is ModelKind.APPROX_NEAR_FIELD
    assert meta["seed"] == 123
    assert meta["snr_db"] == 15.0
    assert meta["noiseless"] is False


def test_snapshot_dump_rejects_foreign_files(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"not a snapshot file at all")
    with pytest.raises(ValueError):
        load_snapshots(path)
