"""Monte Carlo sweeps over the four signal/beamformer scenario pairs.

A case is one (scenario, carrier, array size, SNR, distance) tuple.  Each
case runs n_trials independently seeded simulations; per trial the pipeline
is generate -> sample covariance -> eigendecomposition -> noise subspace ->
grid search -> assignment to truth.  The reported statistic per axis is the
RMS over trials of the per-trial mean absolute error over sources.

Trials that cannot produce enough spectrum peaks count as failed; a case
whose failures exceed 20% of its trials reports NaN aggregates so the
condition stays visible downstream instead of biasing the curve.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from hashlib import blake2b
from pathlib import Path

import yaml

from .channels import ModelKind, build_channel
from .estimator import (
    InsufficientPeaks,
    SearchGrid,
    SearchWorkspace,
    match_and_score,
    search,
)
from .geometry import (
    Direction,
    FraunhoferConvention,
    Source,
    SourceScene,
    build_upa,
    fraunhofer_distance,
)
from .signals import SimConfig, generate, sample_covariance
from .subspace import ConvergenceFailure, eig_hermitian, noise_subspace

# fixed steering-cache budget; workers each hold one, see README memory notes
CACHE_BYTES_PER_CASE = 1_500_000_000

CSV_COLUMNS = (
    "scenario",
    "fc_hz",
    "n_u",
    "snr_db",
    "distance_m",
    "fraunhofer_m",
    "az_rms_deg",
    "el_rms_deg",
    "range_rms_m",
    "range_rel_rms",
    "n_trials",
    "n_failed",
)


class Scenario(Enum):
    """Signal-model / beamformer-model pairings under study."""

    NF_NF = ("NF/NF", ModelKind.NEAR_FIELD, ModelKind.NEAR_FIELD)
    ANM_ON_NF = ("ANM-on-NF", ModelKind.NEAR_FIELD, ModelKind.APPROX_NEAR_FIELD)
    FF_ON_NF = ("FF-on-NF", ModelKind.NEAR_FIELD, ModelKind.FAR_FIELD)
    FF_FF = ("FF/FF", ModelKind.FAR_FIELD, ModelKind.FAR_FIELD)

    @property
    def label(self) -> str:
        return self.value[0]

    @property
    def signal_kind(self) -> ModelKind:
        return self.value[1]

    @property
    def beamformer_kind(self) -> ModelKind:
        return self.value[2]

    @classmethod
    def from_label(cls, label: str) -> "Scenario":
        for member in cls:
            if member.label == label:
                return member
        raise ValueError(f"unknown scenario label {label!r}, expected one of "
                         f"{[m.label for m in cls]}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Full sweep description; every axis is a nonempty list."""

    carrier_frequencies_hz: tuple[float, ...]
    n_elements: tuple[int, ...]
    snr_db: tuple[float, ...]
    distances_m: tuple[float, ...]
    scene_angles_deg: tuple[tuple[float, float], ...] = ((35.0, 63.0), (39.0, 14.0))
    scenarios: tuple[Scenario, ...] = (
        Scenario.NF_NF,
        Scenario.ANM_ON_NF,
        Scenario.FF_ON_NF,
        Scenario.FF_FF,
    )
    n_trials: int = 25
    n_snapshots: int = 1280
    seed_base: int = 0
    array_centroid_m: tuple[float, float, float] = (6.0, 8.0, 5.0)
    azimuth_window_deg: tuple[float, float] = (0.0, 90.0)
    elevation_window_deg: tuple[float, float] = (0.0, 90.0)
    coarse_angle_step_deg: float = 1.0
    range_points: int = 64
    range_lo_m: float = 0.05
    refine_levels: int = 4
    output_dir: str = "results"

    def __post_init__(self):
        coerce = object.__setattr__
        coerce(self, "carrier_frequencies_hz", tuple(float(x) for x in self.carrier_frequencies_hz))
        coerce(self, "n_elements", tuple(int(x) for x in self.n_elements))
        coerce(self, "snr_db", tuple(float(x) for x in self.snr_db))
        coerce(self, "distances_m", tuple(float(x) for x in self.distances_m))
        coerce(self, "scene_angles_deg", tuple((float(a), float(e)) for a, e in self.scene_angles_deg))
        coerce(self, "scenarios", tuple(self.scenarios))
        coerce(self, "array_centroid_m", tuple(float(x) for x in self.array_centroid_m))
        coerce(self, "azimuth_window_deg", tuple(float(x) for x in self.azimuth_window_deg))
        coerce(self, "elevation_window_deg", tuple(float(x) for x in self.elevation_window_deg))

        for name in ("carrier_frequencies_hz", "n_elements", "snr_db", "distances_m",
                     "scene_angles_deg", "scenarios"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be nonempty")
        if any(d <= 0 for d in self.distances_m):
            raise ValueError("distances must be positive")
        if list(self.distances_m) != sorted(self.distances_m) or len(set(self.distances_m)) != len(self.distances_m):
            raise ValueError("distances must be strictly ascending")
        if not all(isinstance(s, Scenario) for s in self.scenarios):
            raise ValueError("scenarios must be Scenario members")
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")
        if self.n_snapshots < 1:
            raise ValueError("n_snapshots must be at least 1")
        if not 0 <= self.seed_base < 2**64:
            raise ValueError("seed_base must fit an unsigned 64-bit integer")
        for win, cap in ((self.azimuth_window_deg, 360.0), (self.elevation_window_deg, 180.0)):
            if not (0.0 <= win[0] < win[1] <= cap):
                raise ValueError(f"window {win} must satisfy 0 <= lo < hi <= {cap}")

    @classmethod
    def paper_default(cls) -> "ExperimentConfig":
        return cls(
            carrier_frequencies_hz=(3e9, 80e9),
            n_elements=(64, 100, 144, 256),
            snr_db=(30.0,),
            distances_m=(0.2, 0.25, 0.3, 0.8, 1.5, 3.0, 8.0, 10.0, 30.0),
        )

    def cases(self) -> list[tuple]:
        """Cartesian product of scenarios and sweep axes, deterministic order."""
        return [
            (scenario, fc, nu, snr, d)
            for scenario in self.scenarios
            for fc in self.carrier_frequencies_hz
            for nu in self.n_elements
            for snr in self.snr_db
            for d in self.distances_m
        ]

    def to_yaml(self, path) -> None:
        doc = {
            "carrier_frequencies_hz": list(self.carrier_frequencies_hz),
            "n_elements": list(self.n_elements),
            "snr_db": list(self.snr_db),
            "distances_m": list(self.distances_m),
            "scene_azimuths_deg": [a for a, _ in self.scene_angles_deg],
            "scene_elevations_deg": [e for _, e in self.scene_angles_deg],
            "scenarios": [s.label for s in self.scenarios],
            "n_trials": self.n_trials,
            "n_snapshots": self.n_snapshots,
            "seed_base": self.seed_base,
            "array_centroid_m": list(self.array_centroid_m),
            "azimuth_window_deg": list(self.azimuth_window_deg),
            "elevation_window_deg": list(self.elevation_window_deg),
            "coarse_angle_step_deg": self.coarse_angle_step_deg,
            "range_points": self.range_points,
            "range_lo_m": self.range_lo_m,
            "refine_levels": self.refine_levels,
            "output_dir": self.output_dir,
        }
        with open(path, "w") as f:
            yaml.safe_dump(doc, f, sort_keys=False)

    @classmethod
    def from_yaml(cls, path) -> "ExperimentConfig":
        with open(path) as f:
            doc = yaml.safe_load(f)
        if not isinstance(doc, dict):
            raise ValueError(f"config file {path} does not hold a mapping")
        known = {
            "carrier_frequencies_hz", "n_elements", "snr_db", "distances_m",
            "scene_azimuths_deg", "scene_elevations_deg", "scenarios",
            "n_trials", "n_snapshots", "seed_base", "array_centroid_m",
            "azimuth_window_deg", "elevation_window_deg", "coarse_angle_step_deg",
            "range_points", "range_lo_m", "refine_levels", "output_dir",
        }
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {k: v for k, v in doc.items()
                  if k not in ("scene_azimuths_deg", "scene_elevations_deg", "scenarios")}
        azs = doc.get("scene_azimuths_deg")
        els = doc.get("scene_elevations_deg")
        if (azs is None) != (els is None):
            raise ValueError("scene_azimuths_deg and scene_elevations_deg go together")
        if azs is not None:
            if len(azs) != len(els):
                raise ValueError("scene azimuth and elevation lists differ in length")
            kwargs["scene_angles_deg"] = tuple(zip(azs, els))
        if "scenarios" in doc:
            kwargs["scenarios"] = tuple(Scenario.from_label(s) for s in doc["scenarios"])
        return cls(**kwargs)


@dataclass(frozen=True)
class MismatchResult:
    """Aggregated errors for one case; range fields are None for planar beamformers."""

    scenario_label: str
    fc_hz: float
    n_u: int
    snr_db: float
    distance_m: float
    fraunhofer_m: float
    az_rms_deg: float
    el_rms_deg: float
    range_rms_m: float | None
    range_rel_rms: float | None
    n_trials: int
    n_failed: int

    def __post_init__(self):
        if (self.range_rms_m is None) != (self.range_rel_rms is None):
            raise ValueError("range columns must be present or absent together")


def trial_seed(seed_base, label, fc_hz, n_u, snr_db, distance_m, trial) -> int:
    """Stable per-trial seed: seed_base XOR an 8-byte hash of the case key."""
    key = f"{label}|{float(fc_hz)!r}|{int(n_u)}|{float(snr_db)!r}|{float(distance_m)!r}|{int(trial)}"
    digest = blake2b(key.encode(), digest_size=8).digest()
    return (int(seed_base) ^ int.from_bytes(digest, "big")) & (2**64 - 1)


def _grid_for(cfg: ExperimentConfig, geometry, beamformer_kind) -> SearchGrid:
    az = (*cfg.azimuth_window_deg, cfg.coarse_angle_step_deg)
    el = (*cfg.elevation_window_deg, cfg.coarse_angle_step_deg)
    if beamformer_kind is ModelKind.FAR_FIELD:
        range_axis = None
    else:
        hi = 4.0 * fraunhofer_distance(geometry, FraunhoferConvention.N_TIMES_LAMBDA)
        range_axis = (cfg.range_lo_m, hi, cfg.range_points)
    final = cfg.coarse_angle_step_deg / 2**cfg.refine_levels
    return SearchGrid(az, el, range_axis, True, cfg.refine_levels, final)


def _rms(values) -> float:
    return math.sqrt(sum(v * v for v in values) / len(values))


def run_case(
    scenario: Scenario,
    fc_hz: float,
    n_u: int,
    snr_db: float,
    distance_m: float,
    cfg: ExperimentConfig,
    max_cache_bytes: int = CACHE_BYTES_PER_CASE,
) -> MismatchResult:
    """Run all trials of one case and aggregate."""
    geom = build_upa(n_u, fc_hz)
    scene = SourceScene(
        tuple(Source(Direction.from_degrees(a, e), distance_m) for a, e in cfg.scene_angles_deg)
    )
    k = scene.n_sources
    grid = _grid_for(cfg, geom, scenario.beamformer_kind)
    ws = SearchWorkspace(geom, scenario.beamformer_kind, grid, max_cache_bytes=max_cache_bytes)
    channel = build_channel(geom, scene, scenario.signal_kind)
    wants_range = scenario.beamformer_kind is not ModelKind.FAR_FIELD

    az_means, el_means, rng_means, rel_means = [], [], [], []
    failed = 0
    for trial in range(cfg.n_trials):
        seed = trial_seed(cfg.seed_base, scenario.label, fc_hz, n_u, snr_db, distance_m, trial)
        sim = SimConfig(n_snapshots=cfg.n_snapshots, snr_db=snr_db, seed=seed)
        block = generate(geom, scene, scenario.signal_kind, sim, channel=channel)
        try:
            ns = noise_subspace(eig_hermitian(sample_covariance(block)), k)
            peaks = search(ns, geom, scenario.beamformer_kind, grid, k, workspace=ws)
        except (InsufficientPeaks, ConvergenceFailure):
            failed += 1
            continue
        errors = match_and_score(peaks, scene)
        az_means.append(sum(e.azimuth_deg for e in errors) / k)
        el_means.append(sum(e.elevation_deg for e in errors) / k)
        if wants_range:
            mean_range = sum(e.range_m for e in errors) / k
            rng_means.append(mean_range)
            rel_means.append(mean_range / distance_m)

    case_failed = failed > 0.2 * cfg.n_trials or failed == cfg.n_trials
    if case_failed:
        az = el = float("nan")
        rng = rel = float("nan") if wants_range else None
    else:
        az, el = _rms(az_means), _rms(el_means)
        rng = _rms(rng_means) if wants_range else None
        rel = _rms(rel_means) if wants_range else None
    return MismatchResult(
        scenario_label=scenario.label,
        fc_hz=float(fc_hz),
        n_u=int(n_u),
        snr_db=float(snr_db),
        distance_m=float(distance_m),
        fraunhofer_m=fraunhofer_distance(geom, FraunhoferConvention.N_TIMES_LAMBDA),
        az_rms_deg=az,
        el_rms_deg=el,
        range_rms_m=rng,
        range_rel_rms=rel,
        n_trials=cfg.n_trials,
        n_failed=failed,
    )


def _case_job(args):
    scenario, fc, nu, snr, d, cfg = args
    return run_case(scenario, fc, nu, snr, d, cfg)


def _result_key(r: MismatchResult):
    return (r.scenario_label, r.fc_hz, r.n_u, r.snr_db, r.distance_m)


def run_sweep(cfg: ExperimentConfig, workers: int = 1) -> list[MismatchResult]:
    """Run every case in the config; write partial JSONL and the final CSV.

    Completed cases are appended to partial_results.jsonl as they finish, so
    an interrupted sweep keeps its progress on disk.  The returned list and
    results.csv are sorted by (scenario, carrier, size, snr, distance).
    """
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cases = cfg.cases()
    results: list[MismatchResult] = []
    with open(out_dir / "partial_results.jsonl", "w") as partial:
        if workers <= 1:
            for case in cases:
                res = run_case(*case, cfg)
                results.append(res)
                partial.write(json.dumps(asdict(res), sort_keys=True) + "\n")
                partial.flush()
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for res in pool.map(_case_job, [(*case, cfg) for case in cases]):
                    results.append(res)
                    partial.write(json.dumps(asdict(res), sort_keys=True) + "\n")
                    partial.flush()
    results.sort(key=_result_key)
    emit_csv(results, out_dir / "results.csv")
    return results


def _cell(value) -> str:
    return "" if value is None else repr(float(value))


def emit_csv(results: list[MismatchResult], path) -> None:
    """Write results with the fixed column order; floats keep full precision."""
    if not results:
        raise ValueError("no results to write")
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(CSV_COLUMNS)
            for r in results:
                writer.writerow([
                    r.scenario_label,
                    repr(r.fc_hz),
                    r.n_u,
                    repr(r.snr_db),
                    repr(r.distance_m),
                    repr(r.fraunhofer_m),
                    repr(r.az_rms_deg),
                    repr(r.el_rms_deg),
                    _cell(r.range_rms_m),
                    _cell(r.range_rel_rms),
                    r.n_trials,
                    r.n_failed,
                ])
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise OSError(f"cannot write results CSV at {path}: {exc}") from exc


def read_results_csv(path) -> list[MismatchResult]:
    try:
        with open(path, newline="") as f:
            reader = csv.DictReader(f)
            if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
                raise ValueError(f"{path} does not look like a results CSV")
            out = []
            for row in reader:
                out.append(MismatchResult(
                    scenario_label=row["scenario"],
                    fc_hz=float(row["fc_hz"]),
                    n_u=int(row["n_u"]),
                    snr_db=float(row["snr_db"]),
                    distance_m=float(row["distance_m"]),
                    fraunhofer_m=float(row["fraunhofer_m"]),
                    az_rms_deg=float(row["az_rms_deg"]),
                    el_rms_deg=float(row["el_rms_deg"]),
                    range_rms_m=float(row["range_rms_m"]) if row["range_rms_m"] else None,
                    range_rel_rms=float(row["range_rel_rms"]) if row["range_rel_rms"] else None,
                    n_trials=int(row["n_trials"]),
                    n_failed=int(row["n_failed"]),
                ))
        return out
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise OSError(f"cannot read results CSV at {path}: {exc}") from exc


_Y_COLUMNS = {
    "azimuth_rms": ("az_rms_deg", "azimuth RMS error (deg)"),
    "elevation_rms": ("el_rms_deg", "elevation RMS error (deg)"),
    "range_rms": ("range_rms_m", "range RMS error (m)"),
    "range_rel_rms": ("range_rel_rms", "relative range RMS error"),
}


def emit_plot(results: list[MismatchResult], x_axis: str, y_axis: str, path) -> None:
    """Render error-vs-distance curves, one series per scenario, to SVG.

    Log-scaled x, dashed vertical line at each Fraunhofer distance present.
    """
    if not results:
        raise ValueError("no results to plot")
    if x_axis != "distance":
        raise ValueError(f"unsupported x axis {x_axis!r}, only 'distance'")
    if y_axis not in _Y_COLUMNS:
        raise ValueError(f"unsupported y axis {y_axis!r}, pick one of {sorted(_Y_COLUMNS)}")
    attr, y_label = _Y_COLUMNS[y_axis]
    usable = [r for r in results if getattr(r, attr) is not None]
    if not usable:
        raise ValueError(f"no rows carry {y_axis} values")

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.fonttype"] = "none"
    plt.rcParams["svg.hashsalt"] = "nfmusic"
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    labels = sorted({r.scenario_label for r in usable})
    for label in labels:
        rows = sorted((r for r in usable if r.scenario_label == label), key=lambda r: r.distance_m)
        ax.plot([r.distance_m for r in rows], [getattr(r, attr) for r in rows],
                marker="o", label=label)
    first = True
    for fr in sorted({r.fraunhofer_m for r in usable}):
        ax.axvline(fr, linestyle="--", color="gray",
                   label=f"Fraunhofer {fr:g} m" if first else None)
        first = False
    ax.set_xscale("log")
    finite = [getattr(r, attr) for r in usable if math.isfinite(getattr(r, attr))]
    if finite and all(v > 0 for v in finite):
        ax.set_yscale("log")
    ax.set_xlabel("distance (m)")
    ax.set_ylabel(y_label)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    try:
        fig.savefig(path, format="svg")
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise OSError(f"cannot write plot at {path}: {exc}") from exc
    finally:
        plt.close(fig)


def assert_thresholds(results: list[MismatchResult]) -> list[str]:
    """Check the headline claims on whatever cases are present.

    Matched scenarios must stay within 2x the final grid step; the planar
    beamformer must pay >= 10x deep inside the near field and converge at
    distances beyond twice the Fraunhofer limit; matched range accuracy
    must collapse past the Fraunhofer limit; the parabolic beamformer must
    be no better than matched up close and comparable far out.  Returns
    human-readable violation strings, empty when everything holds.
    """
    violations = []
    index = {(r.scenario_label, r.fc_hz, r.n_u, r.snr_db, r.distance_m): r for r in results}

    def describe(r):
        return f"{r.scenario_label} (fc={r.fc_hz:g}, N={r.n_u}, {r.snr_db:g} dB, d={r.distance_m:g} m)"

    matched_bound = 0.125
    for r in results:
        if r.scenario_label in ("NF/NF", "FF/FF"):
            if not (r.az_rms_deg <= matched_bound and r.el_rms_deg <= matched_bound):
                violations.append(
                    f"{describe(r)}: matched angular RMS ({r.az_rms_deg:.4g}, {r.el_rms_deg:.4g}) "
                    f"exceeds {matched_bound}"
                )

    groups = sorted({(r.fc_hz, r.n_u, r.snr_db) for r in results})
    for fc, nu, snr in groups:
        def rows(label):
            return sorted(
                (r for r in results if (r.scenario_label, r.fc_hz, r.n_u, r.snr_db) == (label, fc, nu, snr)),
                key=lambda r: r.distance_m,
            )

        nf_rows = rows("NF/NF")
        nf_by_d = {r.distance_m: r for r in nf_rows}
        fraunhofer = nf_rows[0].fraunhofer_m if nf_rows else None

        for label in ("FF-on-NF", "ANM-on-NF"):
            mm_rows = rows(label)
            shared = [r for r in mm_rows if r.distance_m in nf_by_d]
            if not shared or fraunhofer is None:
                continue
            near = shared[0]
            far = shared[-1]
            nf_near = nf_by_d[near.distance_m]
            nf_far = nf_by_d[far.distance_m]
            if far.distance_m > 2.0 * fraunhofer:
                bound = max(2.0 * max(nf_far.az_rms_deg, nf_far.el_rms_deg), matched_bound)
                if not (far.az_rms_deg <= bound and far.el_rms_deg <= bound):
                    violations.append(
                        f"{describe(far)}: no convergence, angular RMS "
                        f"({far.az_rms_deg:.4g}, {far.el_rms_deg:.4g}) above {bound:.4g}"
                    )
            if near.distance_m < 0.1 * fraunhofer:
                if label == "FF-on-NF":
                    if not (near.az_rms_deg >= 10.0 * nf_near.az_rms_deg
                            and near.el_rms_deg >= 10.0 * nf_near.el_rms_deg):
                        violations.append(
                            f"{describe(near)}: planar mismatch error not >= 10x matched "
                            f"({near.az_rms_deg:.4g} vs {nf_near.az_rms_deg:.4g})"
                        )
                else:
                    slack = 1.0 + 1e-9
                    if not (near.az_rms_deg * slack >= nf_near.az_rms_deg
                            and near.el_rms_deg * slack >= nf_near.el_rms_deg):
                        violations.append(
                            f"{describe(near)}: parabolic beamformer beats matched in the near field"
                        )

        if nf_rows and fraunhofer is not None:
            sub = [r for r in nf_rows if r.distance_m < fraunhofer and r.range_rel_rms is not None]
            far_rows = [r for r in nf_rows if r.distance_m > 2.0 * fraunhofer and r.range_rel_rms is not None]
            for r in sub:
                if not r.range_rel_rms <= 0.05:
                    violations.append(
                        f"{describe(r)}: sub-Fraunhofer relative range RMS {r.range_rel_rms:.4g} > 5%"
                    )
            if sub and far_rows:
                worst_sub = max(r.range_rel_rms for r in sub)
                for r in far_rows:
                    if not r.range_rel_rms >= 5.0 * worst_sub:
                        violations.append(
                            f"{describe(r)}: far-field range RMS {r.range_rel_rms:.4g} "
                            f"not >= 5x sub-Fraunhofer worst {worst_sub:.4g}"
                        )
    return violations
