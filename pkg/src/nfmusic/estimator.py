"""MUSIC pseudospectrum evaluation and coarse-to-fine peak search.

The spectrum value for a candidate steering vector h against a noise
subspace basis E is ``|h|^2 / |E^H h|^2``, capped at 1e18 when the
denominator underflows relative to the numerator.  The search scans a
coarse azimuth/elevation grid (plus a range axis for range-capable
beamformers), picks the k best non-adjacent local maxima, then refines
each one on shrinking local grids, halving the angular step per level.

Monte Carlo loops re-evaluate one fixed grid against many noise
subspaces, so the steering vectors for the whole coarse grid can be
cached once in a SearchWorkspace.  The cache holds single-precision
entries; correlations against it are still accumulated in double
precision, since the cap contrast at high SNR lives far below
single-precision resolution.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .channels import (
    RANGE_GUARD_FRACTION,
    ModelKind,
    SteeringVector,
    steering_anm,
    steering_far_field,
    steering_near_field,
)
from .geometry import (
    ArrayGeometry,
    Direction,
    FraunhoferConvention,
    SourceScene,
    fraunhofer_distance,
    unit_vector,
)
from .subspace import NoiseSubspace, orthogonal_complement

SPECTRUM_CAP = 1e18

# denominator below this fraction of the numerator counts as exact orthogonality
_CAP_RATIO = 1e-18

_REFINE_OFFSETS = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])


class InsufficientPeaks(RuntimeError):
    """The coarse grid produced fewer acceptable local maxima than requested."""


@dataclass(frozen=True)
class SearchGrid:
    """Axes of the parameter search.

    Angle axes are (lo, hi, coarse_step) in degrees.  The range axis is
    (lo, hi, n_points) in meters, log-spaced by default, and must be
    present exactly when the beamformer kind is range-capable.  Each
    refinement level halves the angular step, so the coarsest angle
    step divided by 2**refine_levels must equal final_angle_step_deg.
    """

    azimuth_deg: tuple[float, float, float]
    elevation_deg: tuple[float, float, float]
    range_m: tuple[float, float, int] | None = None
    range_log_spaced: bool = True
    refine_levels: int = 4
    final_angle_step_deg: float = 0.0625

    def __post_init__(self):
        for name, axis, hi_cap in (
            ("azimuth", self.azimuth_deg, 360.0),
            ("elevation", self.elevation_deg, 180.0),
        ):
            lo, hi, step = axis
            if not (math.isfinite(lo) and math.isfinite(hi) and math.isfinite(step)):
                raise ValueError(f"{name} axis must be finite")
            if not 0.0 <= lo < hi <= hi_cap:
                raise ValueError(f"{name} axis needs 0 <= lo < hi <= {hi_cap}")
            if step <= 0.0:
                raise ValueError(f"{name} step must be positive")
        if self.range_m is not None:
            lo, hi, n = self.range_m
            if not 0.0 < lo < hi:
                raise ValueError("range axis needs 0 < lo < hi")
            if int(n) != n or n < 2:
                raise ValueError("range axis needs at least 2 points")
        if int(self.refine_levels) != self.refine_levels or self.refine_levels < 0:
            raise ValueError("refine_levels must be a non-negative integer")
        coarsest = max(self.azimuth_deg[2], self.elevation_deg[2])
        implied = coarsest / 2**self.refine_levels
        if not math.isclose(implied, self.final_angle_step_deg, rel_tol=1e-9):
            raise ValueError(
                f"refine_levels={self.refine_levels} takes the {coarsest} deg step to "
                f"{implied} deg, not the promised {self.final_angle_step_deg} deg"
            )


@dataclass(frozen=True)
class PeakEstimate:
    """One located spectrum peak; range_m is None for planar beamformers."""

    azimuth_deg: float
    elevation_deg: float
    range_m: float | None
    spectrum_value: float

    def __post_init__(self):
        if not (math.isfinite(self.spectrum_value) and self.spectrum_value > 0.0):
            raise ValueError("spectrum_value must be finite and positive")
        if self.range_m is not None and not self.range_m > 0.0:
            raise ValueError("range_m must be positive when present")


@dataclass(frozen=True)
class SourceErrors:
    """Absolute estimation errors for one source after assignment."""

    azimuth_deg: float
    elevation_deg: float
    range_m: float | None


@dataclass(frozen=True, eq=False)
class SpectrumGrid:
    """Spectrum values over the coarse grid, axes in lexicographic layout."""

    azimuth_deg: np.ndarray
    elevation_deg: np.ndarray
    range_m: np.ndarray | None
    values: np.ndarray


def default_search_grid(geometry: ArrayGeometry, kind: ModelKind) -> SearchGrid:
    """The study grid: 1 degree coarse angles over the first quadrant octant,
    64 log-spaced ranges up to 4x the n*lambda Fraunhofer distance."""
    if kind is ModelKind.FAR_FIELD:
        range_axis = None
    else:
        hi = 4.0 * fraunhofer_distance(geometry, FraunhoferConvention.N_TIMES_LAMBDA)
        range_axis = (0.05, hi, 64)
    return SearchGrid((0.0, 90.0, 1.0), (0.0, 90.0, 1.0), range_axis)


def pseudospectrum(ns: NoiseSubspace, h) -> float:
    """Spectrum value |h|^2 / |E^H h|^2, capped at SPECTRUM_CAP near orthogonality."""
    entries = h.entries if isinstance(h, SteeringVector) else np.asarray(h, dtype=complex)
    if entries.shape != (ns.basis.shape[0],):
        raise ValueError(
            f"steering length {entries.shape} does not match subspace rows {ns.basis.shape[0]}"
        )
    num = float(np.vdot(entries, entries).real)
    if num == 0.0:
        raise ValueError("steering vector must be nonzero")
    proj = ns.basis.conj().T @ entries
    denom = float(np.vdot(proj, proj).real)
    if denom < _CAP_RATIO * num:
        return SPECTRUM_CAP
    return num / denom


def _check_kind_grid(kind: ModelKind, grid: SearchGrid) -> None:
    # range axis present iff the beamformer can resolve range
    if kind is ModelKind.FAR_FIELD and grid.range_m is not None:
        raise ValueError("far-field search must not carry a range axis")
    if kind is not ModelKind.FAR_FIELD and grid.range_m is None:
        raise ValueError(f"{kind.value} search needs a range axis")


def _angle_axis(lo: float, hi: float, step: float) -> np.ndarray:
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def _range_axis(grid: SearchGrid) -> np.ndarray:
    lo, hi, n = grid.range_m
    if grid.range_log_spaced:
        return np.geomspace(lo, hi, int(n))
    return np.linspace(lo, hi, int(n))


class SearchWorkspace:
    """Precomputed grid geometry, reusable across searches on one setup.

    Holds the angle axes, the guarded range axis, the per-cell array
    projections, and optionally the full coarse steering matrix in
    single precision when it fits the byte budget.
    """

    def __init__(
        self,
        geometry: ArrayGeometry,
        kind: ModelKind,
        grid: SearchGrid,
        max_cache_bytes: int = 1_500_000_000,
    ):
        _check_kind_grid(kind, grid)
        self.geometry = geometry
        self.kind = kind
        self.grid = grid
        self.azimuth_deg = _angle_axis(*grid.azimuth_deg)
        self.elevation_deg = _angle_axis(*grid.elevation_deg)
        if kind is ModelKind.FAR_FIELD:
            self.range_m = None
        else:
            axis = _range_axis(grid)
            axis = axis[axis >= RANGE_GUARD_FRACTION * geometry.max_offset_norm]
            if axis.size == 0:
                raise ValueError("every range grid point sits below the minimum usable range")
            self.range_m = axis

        phi = np.radians(self.azimuth_deg)
        theta = np.radians(self.elevation_deg)
        pp, tt = np.meshgrid(phi, theta, indexing="ij")
        st = np.sin(tt.ravel())
        self._unit = np.stack(
            [np.cos(pp.ravel()) * st, np.sin(pp.ravel()) * st, np.cos(tt.ravel())], axis=1
        )
        self._proj = self._unit @ geometry.offsets.T
        self._sqn = np.einsum("ij,ij->i", geometry.offsets, geometry.offsets)
        self._steering: list[np.ndarray] | None = None

        n_slices = 1 if self.range_m is None else self.range_m.size
        needed = self._proj.size * n_slices * 8  # complex64
        if needed <= max_cache_bytes:
            if self.range_m is None:
                slices = [self._build_slice(None).astype(np.complex64)]
            else:
                slices = [self._build_slice(r).astype(np.complex64) for r in self.range_m]
            self._steering = slices

    def matches(self, geometry: ArrayGeometry, kind: ModelKind, grid: SearchGrid) -> bool:
        return (
            kind is self.kind
            and grid == self.grid
            and geometry.carrier_frequency == self.geometry.carrier_frequency
            and np.array_equal(geometry.offsets, self.geometry.offsets)
        )

    def _build_slice(self, range_m: float | None) -> np.ndarray:
        wl = self.geometry.wavelength
        if self.kind is ModelKind.FAR_FIELD:
            return np.exp((2j * np.pi / wl) * self._proj)
        r = float(range_m)
        if self.kind is ModelKind.NEAR_FIELD:
            lengths = np.sqrt(r * r - 2.0 * r * self._proj + self._sqn[None, :])
        else:
            lengths = r - self._proj + (self._sqn[None, :] - self._proj**2) / (2.0 * r)
        return np.exp((-2j * np.pi / wl) * lengths)

    def _slice(self, index: int) -> np.ndarray:
        if self._steering is not None:
            return self._steering[index]
        r = None if self.range_m is None else self.range_m[index]
        return self._build_slice(r)


def _slice_values(steering: np.ndarray, signal_basis_conj: np.ndarray, n_elements: int) -> np.ndarray:
    # |E_n^H h|^2 = |h|^2 - |E_s^H h|^2 with |h|^2 = n for unit-modulus entries;
    # callers hand over conj(E_s) so the row product is the Hermitian inner product;
    # accumulate in double precision even when the cache is single precision
    corr = steering.astype(np.complex128, copy=False) @ signal_basis_conj
    captured = np.einsum("ij,ij->i", corr.real, corr.real)
    captured += np.einsum("ij,ij->i", corr.imag, corr.imag)
    residual = np.maximum(n_elements - captured, 0.0)
    capped = residual < _CAP_RATIO * n_elements
    values = np.divide(n_elements, residual, out=np.full_like(residual, SPECTRUM_CAP), where=~capped)
    return values


def _coarse_values(ws: SearchWorkspace, signal_basis: np.ndarray) -> np.ndarray:
    n = ws.geometry.n_elements
    n_az, n_el = ws.azimuth_deg.size, ws.elevation_deg.size
    if ws.range_m is None:
        return _slice_values(ws._slice(0), signal_basis, n).reshape(n_az, n_el)
    out = np.empty((n_az * n_el, ws.range_m.size))
    for ri in range(ws.range_m.size):
        out[:, ri] = _slice_values(ws._slice(ri), signal_basis, n)
    return out.reshape(n_az, n_el, ws.range_m.size)


def spectrum_grid(
    ns: NoiseSubspace,
    geometry: ArrayGeometry,
    kind: ModelKind,
    grid: SearchGrid,
    workspace: SearchWorkspace | None = None,
) -> SpectrumGrid:
    """Evaluate the spectrum over the whole coarse grid."""
    ws = _resolve_workspace(ns, geometry, kind, grid, workspace)
    signal_basis = orthogonal_complement(ns.basis).conj()
    values = _coarse_values(ws, signal_basis)
    rng = None if ws.range_m is None else ws.range_m.copy()
    return SpectrumGrid(ws.azimuth_deg.copy(), ws.elevation_deg.copy(), rng, values)


def write_spectrum_csv(sg: SpectrumGrid, path) -> None:
    """Dump a coarse spectrum as CSV rows (phi_deg, theta_deg, range_m, value)."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["phi_deg", "theta_deg", "range_m", "value"])
        for i, az in enumerate(sg.azimuth_deg):
            for j, el in enumerate(sg.elevation_deg):
                if sg.range_m is None:
                    writer.writerow([repr(float(az)), repr(float(el)), "", repr(float(sg.values[i, j]))])
                else:
                    for k, r in enumerate(sg.range_m):
                        writer.writerow(
                            [repr(float(az)), repr(float(el)), repr(float(r)), repr(float(sg.values[i, j, k]))]
                        )


def _resolve_workspace(ns, geometry, kind, grid, workspace) -> SearchWorkspace:
    _check_kind_grid(kind, grid)
    if ns.basis.shape[0] != geometry.n_elements:
        raise ValueError(
            f"noise subspace has {ns.basis.shape[0]} rows for {geometry.n_elements} elements"
        )
    if workspace is None:
        return SearchWorkspace(geometry, kind, grid, max_cache_bytes=0)
    if not workspace.matches(geometry, kind, grid):
        raise ValueError("workspace was built for a different geometry, kind, or grid")
    return workspace


def _local_max_mask(values: np.ndarray) -> np.ndarray:
    padded = np.pad(values, 1, mode="constant", constant_values=-np.inf)
    core = tuple(slice(1, -1) for _ in range(values.ndim))
    mask = np.ones(values.shape, dtype=bool)
    for ax in range(values.ndim):
        for shift in (1, -1):
            sl = list(core)
            sl[ax] = slice(1 + shift, padded.shape[ax] - 1 + shift)
            mask &= values >= padded[tuple(sl)]
    return mask


def _points_values(
    ws: SearchWorkspace,
    signal_basis: np.ndarray,
    az_deg: np.ndarray,
    el_deg: np.ndarray,
    range_m: np.ndarray | None,
) -> np.ndarray:
    """Spectrum at arbitrary points, always in double precision."""
    geom = ws.geometry
    phi = np.radians(az_deg)
    theta = np.radians(el_deg)
    st = np.sin(theta)
    unit = np.stack([np.cos(phi) * st, np.sin(phi) * st, np.cos(theta)], axis=1)
    proj = unit @ geom.offsets.T
    wl = geom.wavelength
    if ws.kind is ModelKind.FAR_FIELD:
        steering = np.exp((2j * np.pi / wl) * proj)
    else:
        r = range_m[:, None]
        if ws.kind is ModelKind.NEAR_FIELD:
            lengths = np.sqrt(r * r - 2.0 * r * proj + ws._sqn[None, :])
        else:
            lengths = r - proj + (ws._sqn[None, :] - proj**2) / (2.0 * r)
        steering = np.exp((-2j * np.pi / wl) * lengths)
    return _slice_values(steering, signal_basis, geom.n_elements)


def _lexi_best(vals, az, el, rng=None):
    keys = (az, el, -vals) if rng is None else (rng, el, az, -vals)
    return int(np.lexsort(keys)[0])


def _refine_peak(
    ws: SearchWorkspace,
    signal_basis: np.ndarray,
    az0: float,
    el0: float,
    r0: float | None,
) -> tuple[float, float, float | None]:
    grid = ws.grid
    az_lo, az_hi, az_step = grid.azimuth_deg
    el_lo, el_hi, el_step = grid.elevation_deg
    if r0 is not None:
        r_lo = float(ws.range_m[0])
        r_hi = float(ws.range_m[-1])
        if grid.range_log_spaced:
            lo, hi, n = grid.range_m
            log_step = math.log(hi / lo) / (int(n) - 1)
        else:
            lin_step = (grid.range_m[1] - grid.range_m[0]) / (int(grid.range_m[2]) - 1)
    az_c, el_c, r_c = az0, el0, r0
    for level in range(1, grid.refine_levels + 1):
        scale = 2.0**level
        az_pts = np.clip(az_c + _REFINE_OFFSETS * (az_step / scale), az_lo, az_hi)
        el_pts = np.clip(el_c + _REFINE_OFFSETS * (el_step / scale), el_lo, el_hi)
        if r0 is None:
            aa, ee = np.meshgrid(az_pts, el_pts, indexing="ij")
            az_flat, el_flat = aa.ravel(), ee.ravel()
            vals = _points_values(ws, signal_basis, az_flat, el_flat, None)
            best = _lexi_best(vals, az_flat, el_flat)
            az_c, el_c = float(az_flat[best]), float(el_flat[best])
        else:
            if grid.range_log_spaced:
                r_pts = np.clip(r_c * np.exp(_REFINE_OFFSETS * (log_step / scale)), r_lo, r_hi)
            else:
                r_pts = np.clip(r_c + _REFINE_OFFSETS * (lin_step / scale), r_lo, r_hi)
            aa, ee, rr = np.meshgrid(az_pts, el_pts, r_pts, indexing="ij")
            az_flat, el_flat, r_flat = aa.ravel(), ee.ravel(), rr.ravel()
            vals = _points_values(ws, signal_basis, az_flat, el_flat, r_flat)
            best = _lexi_best(vals, az_flat, el_flat, r_flat)
            az_c, el_c, r_c = float(az_flat[best]), float(el_flat[best]), float(r_flat[best])
    return az_c, el_c, r_c


def _steering_at(geometry, kind, az_deg, el_deg, range_m) -> SteeringVector:
    direction = Direction.from_degrees(az_deg, el_deg)
    if kind is ModelKind.FAR_FIELD:
        return steering_far_field(geometry, direction)
    if kind is ModelKind.NEAR_FIELD:
        return steering_near_field(geometry, direction, range_m)
    return steering_anm(geometry, direction, range_m)


def search(
    ns: NoiseSubspace,
    geometry: ArrayGeometry,
    kind: ModelKind,
    grid: SearchGrid,
    k: int,
    workspace: SearchWorkspace | None = None,
) -> list[PeakEstimate]:
    """Locate the k strongest spectrum peaks, sorted by descending value.

    Peaks accepted on the coarse pass must differ by at least two coarse
    cells on an angular axis, so one broad lobe cannot fill two slots.
    Raises InsufficientPeaks when the coarse grid cannot supply k of them.
    """
    if int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    ws = _resolve_workspace(ns, geometry, kind, grid, workspace)
    signal_basis = orthogonal_complement(ns.basis).conj()
    values = _coarse_values(ws, signal_basis)

    mask = _local_max_mask(values)
    cells = np.argwhere(mask)
    cand_vals = values[mask]
    if values.ndim == 2:
        order = np.lexsort((cells[:, 1], cells[:, 0], -cand_vals))
    else:
        order = np.lexsort((cells[:, 2], cells[:, 1], cells[:, 0], -cand_vals))

    accepted: list[np.ndarray] = []
    for oi in order:
        cell = cells[oi]
        if all(abs(cell[0] - a[0]) >= 2 or abs(cell[1] - a[1]) >= 2 for a in accepted):
            accepted.append(cell)
            if len(accepted) == int(k):
                break
    if len(accepted) < int(k):
        raise InsufficientPeaks(
            f"coarse grid yields {len(accepted)} usable local maxima, {k} requested"
        )

    peaks = []
    for cell in accepted:
        az0 = float(ws.azimuth_deg[cell[0]])
        el0 = float(ws.elevation_deg[cell[1]])
        r0 = None if ws.range_m is None else float(ws.range_m[cell[2]])
        az, el, r = _refine_peak(ws, signal_basis, az0, el0, r0)
        value = pseudospectrum(ns, _steering_at(geometry, kind, az, el, r))
        peaks.append(PeakEstimate(az, el, r, value))
    peaks.sort(
        key=lambda p: (-p.spectrum_value, p.azimuth_deg, p.elevation_deg, p.range_m or 0.0)
    )
    return peaks


def match_and_score(estimates: list[PeakEstimate], scene: SourceScene) -> list[SourceErrors]:
    """Assign estimates to true sources and report per-source absolute errors.

    The assignment minimizes the summed great-circle angle between the
    estimated and true directions, exhaustively over permutations; ties
    keep the first minimizing permutation in iteration order.
    """
    n = scene.n_sources
    if len(estimates) != n:
        raise ValueError(f"{len(estimates)} estimates for {n} sources")
    if n > 4:
        raise ValueError("exhaustive matching supports at most 4 sources")
    true_units = [unit_vector(s.direction) for s in scene.sources]
    est_units = [
        unit_vector(Direction.from_degrees(e.azimuth_deg, e.elevation_deg)) for e in estimates
    ]
    angle = np.empty((n, n))
    for i, tu in enumerate(true_units):
        for j, eu in enumerate(est_units):
            angle[i, j] = math.acos(min(1.0, max(-1.0, float(np.dot(tu, eu)))))
    best_perm = min(itertools.permutations(range(n)), key=lambda p: sum(angle[i, p[i]] for i in range(n)))

    errors = []
    for i, src in enumerate(scene.sources):
        est = estimates[best_perm[i]]
        d_az = abs(est.azimuth_deg - src.direction.azimuth_deg) % 360.0
        az_err = min(d_az, 360.0 - d_az)
        el_err = abs(est.elevation_deg - src.direction.elevation_deg)
        rng_err = None if est.range_m is None else abs(est.range_m - src.range_m)
        errors.append(SourceErrors(az_err, el_err, rng_err))
    return errors
