"""Steering vector models and channel matrix assembly.

Three wavefront models share one phase reference (the array centroid) and one
convention: the source sits at ``centroid + range * u`` with ``u`` the unit
vector of its direction.  Writing ``s_u`` for an element offset and ``proj =
dot(u, s_u)``, the one-way path lengths are

* spherical (exact):   ||range * u - s_u||
* parabolic (Fresnel): range - proj + (||s_u||^2 - proj^2) / (2 * range)
* planar:              range - proj

Each steering entry is ``exp(-j * 2 * pi * length / lambda)``; entries are
unit modulus (no per-element attenuation, gains fixed to 1).  The far-field
builder returns only the offset-dependent factor ``exp(+j * 2 * pi * proj /
lambda)``; multiplying by ``bulk_phase(geom, range)`` restores the common
reference, and the spherical/parabolic vectors converge entrywise to that
product as range grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import ArrayGeometry, Direction, SourceScene, unit_vector

RANGE_GUARD_FRACTION = 0.25
"""Sources closer than this fraction of the max element offset norm are
rejected: the point-source wavefront model degenerates inside the array body."""


class RangeTooSmall(ValueError):
    """Raised when a requested range sits inside the array's guard radius."""


class ModelKind(Enum):
    """Which wavefront approximation a steering vector or channel uses."""

    NEAR_FIELD = "nf"
    APPROX_NEAR_FIELD = "anm"
    FAR_FIELD = "ff"


@dataclass(frozen=True, eq=False)
class SteeringVector:
    """One model response: unit-modulus entries, one per array element."""

    entries: np.ndarray
    model: ModelKind
    direction: Direction
    range_m: float | None

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=complex)
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)
        if self.model is ModelKind.FAR_FIELD:
            if self.range_m is not None:
                raise ValueError("far-field steering carries no range")
        elif self.range_m is None:
            raise ValueError(f"{self.model} steering requires a range")


@dataclass(frozen=True, eq=False)
class ChannelMatrix:
    """Stacked steering columns, one per source, shape (n_elements, n_sources)."""

    entries: np.ndarray
    kinds: tuple[ModelKind, ...]

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=complex)
        if e.ndim != 2:
            raise ValueError(f"channel must be 2-D, got shape {e.shape}")
        if e.shape[1] != len(self.kinds):
            raise ValueError("one model kind per column required")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)


def _check_range(geom: ArrayGeometry, range_m: float) -> None:
    if not (math.isfinite(range_m) and range_m > 0.0):
        raise ValueError(f"range must be positive and finite, got {range_m}")
    guard = RANGE_GUARD_FRACTION * geom.max_offset_norm
    if range_m <= guard:
        raise RangeTooSmall(
            f"range {range_m} m is inside the array guard radius {guard:.4g} m"
        )


def spherical_path_lengths(geom: ArrayGeometry, direction: Direction, range_m: float) -> np.ndarray:
    """Exact per-element path length ||range * u - s_u||, meters."""
    _check_range(geom, range_m)
    u = unit_vector(direction)
    return np.linalg.norm(range_m * u - geom.offsets, axis=1)


def parabolic_path_lengths(geom: ArrayGeometry, direction: Direction, range_m: float) -> np.ndarray:
    """Fresnel (second-order) per-element path length, meters."""
    _check_range(geom, range_m)
    u = unit_vector(direction)
    proj = geom.offsets @ u
    sq = np.einsum("ij,ij->i", geom.offsets, geom.offsets)
    return range_m - proj + (sq - proj**2) / (2.0 * range_m)


def planar_path_lengths(geom: ArrayGeometry, direction: Direction, range_m: float) -> np.ndarray:
    """Planar per-element path length range - proj, meters (bulk included)."""
    u = unit_vector(direction)
    return range_m - geom.offsets @ u


def bulk_phase(geom: ArrayGeometry, range_m: float) -> complex:
    """Common phase factor exp(-j 2 pi range / lambda) of a source at `range_m`."""
    return complex(np.exp(-2j * np.pi * range_m / geom.wavelength))


def steering_near_field(geom: ArrayGeometry, direction: Direction, range_m: float) -> SteeringVector:
    """Spherical-wavefront steering vector (exact geometry)."""
    lengths = spherical_path_lengths(geom, direction, range_m)
    entries = np.exp(-2j * np.pi / geom.wavelength * lengths)
    return SteeringVector(entries, ModelKind.NEAR_FIELD, direction, range_m)


def steering_anm(geom: ArrayGeometry, direction: Direction, range_m: float) -> SteeringVector:
    """Approximate near-field (parabolic / Fresnel) steering vector."""
    lengths = parabolic_path_lengths(geom, direction, range_m)
    entries = np.exp(-2j * np.pi / geom.wavelength * lengths)
    return SteeringVector(entries, ModelKind.APPROX_NEAR_FIELD, direction, range_m)


def steering_far_field(geom: ArrayGeometry, direction: Direction) -> SteeringVector:
    """Planar-wavefront steering vector, phase-referenced to the centroid.

    Entry u is exp(+j 2 pi proj_u / lambda): the relative delay of element u
    toward a source along +u is -proj_u / c.  No bulk term; see bulk_phase.
    """
    u = unit_vector(direction)
    entries = np.exp(2j * np.pi / geom.wavelength * (geom.offsets @ u))
    return SteeringVector(entries, ModelKind.FAR_FIELD, direction, None)


def build_channel(geom: ArrayGeometry, scene: SourceScene, kind: ModelKind) -> ChannelMatrix:
    """Assemble the (n_elements, n_sources) channel under one wavefront model.

    Far-field columns are multiplied by the bulk phase of each source's range
    so all model kinds share the same absolute phase reference.
    """
    if scene.n_sources >= geom.n_elements:
        raise ValueError(
            f"{scene.n_sources} sources with {geom.n_elements} elements leaves no noise subspace"
        )
    cols = []
    for src in scene.sources:
        if kind is ModelKind.NEAR_FIELD:
            cols.append(steering_near_field(geom, src.direction, src.range_m).entries)
        elif kind is ModelKind.APPROX_NEAR_FIELD:
            cols.append(steering_anm(geom, src.direction, src.range_m).entries)
        elif kind is ModelKind.FAR_FIELD:
            cols.append(bulk_phase(geom, src.range_m) * steering_far_field(geom, src.direction).entries)
        else:
            raise ValueError(f"unknown model kind {kind!r}")
    return ChannelMatrix(np.column_stack(cols), (kind,) * scene.n_sources)
