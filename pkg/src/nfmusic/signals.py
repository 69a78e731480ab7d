"""Snapshot simulation: y_t = H x_t + n_t with seeded, split random streams.

Symbols are iid circular complex Gaussian with unit power; noise is iid
circular complex Gaussian with power N0 = 10**(-snr_db / 10) per element.
One seed feeds a SeedSequence that is split into two independent PCG64
substreams, one for symbols and one for noise, so the symbol stream is
reproducible regardless of whether noise is drawn.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channels import ChannelMatrix, ModelKind, build_channel
from .geometry import ArrayGeometry, SourceScene

_MAGIC = b"SNAPBLK1"
_HEADER = struct.Struct("<8sIIBBHQd")  # magic, n_elements, n_snapshots, kind, noiseless, pad, seed, snr_db
_KIND_CODE = {ModelKind.NEAR_FIELD: 0, ModelKind.APPROX_NEAR_FIELD: 1, ModelKind.FAR_FIELD: 2}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}


@dataclass(frozen=True)
class SimConfig:
    """Simulation knobs for one snapshot block."""

    n_snapshots: int = 1280
    snr_db: float = 30.0
    seed: int = 0
    noiseless: bool = False

    def __post_init__(self):
        if self.n_snapshots < 1:
            raise ValueError(f"need at least one snapshot, got {self.n_snapshots}")
        if not (0 <= self.seed < 2**64):
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if not math.isfinite(self.snr_db):
            raise ValueError(f"snr_db must be finite, got {self.snr_db}")

    @property
    def noise_power(self) -> float:
        return 0.0 if self.noiseless else 10.0 ** (-self.snr_db / 10.0)


@dataclass(frozen=True, eq=False)
class SnapshotBlock:
    """Received snapshots plus the noiseless part and generation metadata."""

    y: np.ndarray
    clean: np.ndarray
    noise_power: float
    model: ModelKind
    seed: int
    snr_db: float
    noiseless: bool


def generate(
    geom: ArrayGeometry,
    scene: SourceScene,
    kind: ModelKind,
    config: SimConfig,
    channel: ChannelMatrix | None = None,
) -> SnapshotBlock:
    """Draw one block of snapshots y = H x + n under the given model kind.

    Pass a prebuilt `channel` to skip rebuilding H when sweeping seeds.
    """
    if channel is None:
        channel = build_channel(geom, scene, kind)
    h = channel.entries
    n_u, n_k = h.shape
    t = config.n_snapshots
    if t < n_u:
        warnings.warn(
            f"{t} snapshots with {n_u} elements: sample covariance will be rank deficient",
            stacklevel=2,
        )
    symbol_ss, noise_ss = np.random.SeedSequence(config.seed).spawn(2)
    rng_x = np.random.Generator(np.random.PCG64(symbol_ss))
    x = (rng_x.standard_normal((n_k, t)) + 1j * rng_x.standard_normal((n_k, t))) / np.sqrt(2.0)
    clean = h @ x
    n0 = config.noise_power
    if config.noiseless:
        y = clean
    else:
        rng_n = np.random.Generator(np.random.PCG64(noise_ss))
        noise = np.sqrt(n0 / 2.0) * (
            rng_n.standard_normal((n_u, t)) + 1j * rng_n.standard_normal((n_u, t))
        )
        y = clean + noise
    return SnapshotBlock(
        y=y,
        clean=clean,
        noise_power=n0,
        model=kind,
        seed=config.seed,
        snr_db=config.snr_db,
        noiseless=config.noiseless,
    )


def sample_covariance(block: SnapshotBlock) -> np.ndarray:
    """(1/T) Y Y^H, symmetrized so the result is exactly Hermitian."""
    y = block.y
    r = (y @ y.conj().T) / y.shape[1]
    return (r + r.conj().T) / 2.0


def save_snapshots(block: SnapshotBlock, path) -> None:
    """Write snapshots as little-endian complex64 with a fixed 36-byte header.

    Layout: magic "SNAPBLK1", u32 n_elements, u32 n_snapshots, u8 model kind
    (0 nf / 1 anm / 2 ff), u8 noiseless, u16 pad, u64 seed, f64 snr_db, then
    the y matrix in C (element-major) order.
    """
    n_u, t = block.y.shape
    header = _HEADER.pack(
        _MAGIC, n_u, t, _KIND_CODE[block.model], int(block.noiseless), 0, block.seed, block.snr_db
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(block.y.astype("<c8")).tobytes())


def load_snapshots(path) -> tuple[np.ndarray, dict]:
    """Read a snapshot dump; returns (y as complex64, header metadata dict)."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path} is too short to be a snapshot dump")
    magic, n_u, t, kind_code, noiseless, _pad, seed, snr_db = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path} does not carry the snapshot magic")
    body = np.frombuffer(raw, dtype="<c8", offset=_HEADER.size)
    if body.size != n_u * t:
        raise ValueError(f"expected {n_u * t} samples, found {body.size}")
    meta = {
        "n_elements": int(n_u),
        "n_snapshots": int(t),
        "model": _CODE_KIND[kind_code],
        "noiseless": bool(noiseless),
        "seed": int(seed),
        "snr_db": float(snr_db),
    }
    return body.reshape(n_u, t).copy(), meta
