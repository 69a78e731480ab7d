"""Array geometry, source placement, and propagation delay primitives.

Conventions used throughout the package:

* Azimuth is measured in the x-y plane from the +x axis, counter-clockwise,
  in [0, 2*pi).  Elevation is the polar angle from the +z axis in [0, pi].
* A source described by (direction, range) sits at ``centroid + range * u``
  where ``u = unit_vector(direction)``, i.e. the direction points from the
  array centroid toward the source.
* Element positions are stored as offsets from the array centroid, so all
  steering/delay math is translation invariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

SPEED_OF_LIGHT = 299792458.0
"""Propagation speed in m/s (exact SI value)."""


class NotPerfectSquare(ValueError):
    """Raised when a UPA element count has no integer square root."""


@dataclass(frozen=True)
class Position3:
    """A point in 3-D space, meters."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        for v in (self.x, self.y, self.z):
            if not math.isfinite(v):
                raise ValueError(f"coordinates must be finite, got {(self.x, self.y, self.z)}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


@dataclass(frozen=True)
class Direction:
    """A pointing direction in spherical coordinates, radians.

    azimuth_rad in [0, 2*pi), elevation_rad in [0, pi] measured from +z.
    """

    azimuth_rad: float
    elevation_rad: float

    def __post_init__(self):
        if not 0.0 <= self.azimuth_rad < 2.0 * math.pi:
            raise ValueError(f"azimuth must lie in [0, 2*pi), got {self.azimuth_rad}")
        if not 0.0 <= self.elevation_rad <= math.pi:
            raise ValueError(f"elevation must lie in [0, pi], got {self.elevation_rad}")

    @classmethod
    def from_degrees(cls, azimuth_deg: float, elevation_deg: float) -> "Direction":
        return cls(math.radians(azimuth_deg), math.radians(elevation_deg))

    @property
    def azimuth_deg(self) -> float:
        return math.degrees(self.azimuth_rad)

    @property
    def elevation_deg(self) -> float:
        return math.degrees(self.elevation_rad)


def unit_vector(direction: Direction) -> np.ndarray:
    """Cartesian unit vector for a direction.

    Returns [cos(az) sin(el), sin(az) sin(el), cos(el)]; unit norm within 1e-12.
    """
    az, el = direction.azimuth_rad, direction.elevation_rad
    se = math.sin(el)
    return np.array([math.cos(az) * se, math.sin(az) * se, math.cos(el)])


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """A receive array: centroid position plus per-element local offsets.

    offsets has shape (n_elements, 3), meters, and must be centroid-referenced
    (column means zero).  The wavelength is always derived from the carrier.
    """

    centroid: Position3
    offsets: np.ndarray
    carrier_frequency: float

    def __post_init__(self):
        offs = np.asarray(self.offsets, dtype=float)
        if offs.ndim != 2 or offs.shape[1] != 3:
            raise ValueError(f"offsets must have shape (n, 3), got {offs.shape}")
        if offs.shape[0] < 2:
            raise ValueError("an array needs at least 2 elements")
        if not np.all(np.isfinite(offs)):
            raise ValueError("offsets must be finite")
        scale = max(1.0, float(np.abs(offs).max()))
        if np.abs(offs.mean(axis=0)).max() > 1e-12 * scale:
            raise ValueError("offsets must be centroid-referenced (zero mean)")
        if not (self.carrier_frequency > 0.0 and math.isfinite(self.carrier_frequency)):
            raise ValueError(f"carrier frequency must be positive, got {self.carrier_frequency}")
        offs = offs.copy()
        offs.setflags(write=False)
        object.__setattr__(self, "offsets", offs)

    @property
    def n_elements(self) -> int:
        return self.offsets.shape[0]

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def max_offset_norm(self) -> float:
        return float(np.linalg.norm(self.offsets, axis=1).max())

    @property
    def aperture_diameter(self) -> float:
        """Largest pairwise element distance."""
        diffs = self.offsets[:, None, :] - self.offsets[None, :, :]
        return float(np.sqrt((diffs**2).sum(axis=2)).max())


@dataclass(frozen=True)
class Source:
    """One emitter: a direction seen from the array centroid plus its range."""

    direction: Direction
    range_m: float

    def __post_init__(self):
        if not (self.range_m > 0.0 and math.isfinite(self.range_m)):
            raise ValueError(f"source range must be positive, got {self.range_m}")


@dataclass(frozen=True)
class SourceScene:
    """An ordered collection of sources sharing one array viewpoint."""

    sources: tuple[Source, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        if len(self.sources) < 1:
            raise ValueError("a scene needs at least one source")

    @property
    def n_sources(self) -> int:
        return len(self.sources)


def build_upa(
    n_elements: int,
    carrier_frequency: float,
    centroid: Position3 = Position3(0.0, 0.0, 0.0),
    spacing: float | None = None,
) -> ArrayGeometry:
    """Build a square uniform planar array in the local x-y plane.

    Parameters
    ----------
    n_elements : int
        Must be a perfect square; the array is sqrt(n) x sqrt(n).
    carrier_frequency : float
        Carrier in Hz; fixes the wavelength.
    centroid : Position3
        Array phase center in global coordinates.
    spacing : float, optional
        Inter-element pitch in meters; defaults to half the wavelength.
    """
    if n_elements < 1 or int(math.isqrt(n_elements)) ** 2 != n_elements:
        raise NotPerfectSquare(f"element count {n_elements} is not a perfect square")
    if spacing is None:
        spacing = 0.5 * SPEED_OF_LIGHT / carrier_frequency
    side = math.isqrt(n_elements)
    axis = (np.arange(side) - (side - 1) / 2.0) * spacing
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    offsets = np.column_stack([xx.ravel(), yy.ravel(), np.zeros(n_elements)])
    return ArrayGeometry(centroid=centroid, offsets=offsets, carrier_frequency=carrier_frequency)


def exact_delay(source_position, element_position) -> float:
    """One-way propagation delay between two points, seconds.

    Positions may be Position3 or length-3 array-likes in a shared frame.
    """
    a = source_position.as_array() if isinstance(source_position, Position3) else np.asarray(source_position, dtype=float)
    b = element_position.as_array() if isinstance(element_position, Position3) else np.asarray(element_position, dtype=float)
    return float(np.linalg.norm(a - b)) / SPEED_OF_LIGHT


class FraunhoferConvention(Enum):
    """Which textbook far-field boundary to quote."""

    TWO_D2_OVER_LAMBDA = "2d2_over_lambda"
    N_TIMES_LAMBDA = "n_times_lambda"


def fraunhofer_distance(
    geometry: ArrayGeometry,
    convention: FraunhoferConvention = FraunhoferConvention.N_TIMES_LAMBDA,
) -> float:
    """Far-field boundary for an array under the chosen convention.

    TWO_D2_OVER_LAMBDA uses 2 D^2 / lambda with D the largest pairwise element
    distance; N_TIMES_LAMBDA uses n_elements * lambda (the convention the
    bundled study sweeps annotate their distance axes with).
    """
    lam = geometry.wavelength
    if convention is FraunhoferConvention.TWO_D2_OVER_LAMBDA:
        d = geometry.aperture_diameter
        return 2.0 * d * d / lam
    if convention is FraunhoferConvention.N_TIMES_LAMBDA:
        return geometry.n_elements * lam
    raise ValueError(f"unknown convention {convention!r}")
