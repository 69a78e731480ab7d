"""Tests for scenario sweeps, aggregation, persistence, and plotting."""

import json
import math
from hashlib import blake2b

import pytest

from nfmusic.channels import ModelKind
from nfmusic.harness import (
    ExperimentConfig,
    MismatchResult,
    Scenario,
    assert_thresholds,
    emit_csv,
    emit_plot,
    read_results_csv,
    run_case,
    run_sweep,
    trial_seed,
)

CSV_HEADER = (
    "scenario,fc_hz,n_u,snr_db,distance_m,fraunhofer_m,"
    "az_rms_deg,el_rms_deg,range_rms_m,range_rel_rms,n_trials,n_failed"
)


def small_config(**overrides) -> ExperimentConfig:
    base = dict(
        carrier_frequencies_hz=(3e9,),
        n_elements=(16,),
        snr_db=(30.0,),
        distances_m=(3.0,),
        scene_angles_deg=((35.0, 63.0), (39.0, 14.0)),
        scenarios=(Scenario.FF_FF,),
        n_trials=3,
        n_snapshots=256,
        seed_base=0,
        azimuth_window_deg=(20.0, 50.0),
        elevation_window_deg=(5.0, 75.0),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def test_scenario_labels_and_kinds():
    assert Scenario.NF_NF.label == "NF/NF"
    assert Scenario.NF_NF.signal_kind is ModelKind.NEAR_FIELD
    assert Scenario.NF_NF.beamformer_kind is ModelKind.NEAR_FIELD
    assert Scenario.ANM_ON_NF.label == "ANM-on-NF"
    assert Scenario.ANM_ON_NF.signal_kind is ModelKind.NEAR_FIELD
    assert Scenario.ANM_ON_NF.beamformer_kind is ModelKind.APPROX_NEAR_FIELD
    assert Scenario.FF_ON_NF.label == "FF-on-NF"
    assert Scenario.FF_ON_NF.beamformer_kind is ModelKind.FAR_FIELD
    assert Scenario.FF_FF.signal_kind is ModelKind.FAR_FIELD
    assert Scenario.from_label("FF-on-NF") is Scenario.FF_ON_NF
    with pytest.raises(ValueError):
        Scenario.from_label("NF-on-FF")


def test_paper_default_config_matrix():
    cfg = ExperimentConfig.paper_default()
    assert cfg.carrier_frequencies_hz == (3e9, 80e9)
    assert cfg.n_elements == (64, 100, 144, 256)
    assert cfg.snr_db == (30.0,)
    assert cfg.distances_m == (0.2, 0.25, 0.3, 0.8, 1.5, 3.0, 8.0, 10.0, 30.0)
    assert cfg.scene_angles_deg == ((35.0, 63.0), (39.0, 14.0))
    assert cfg.n_trials == 25 and cfg.n_snapshots == 1280
    assert cfg.array_centroid_m == (6.0, 8.0, 5.0)
    assert len(cfg.scenarios) == 4
    # 4 scenarios x 2 carriers x 4 array sizes x 1 snr x 9 distances
    assert len(cfg.cases()) == 288


def test_config_validation():
    with pytest.raises(ValueError):
        small_config(distances_m=())
    with pytest.raises(ValueError):
        small_config(distances_m=(3.0, 1.0))
    with pytest.raises(ValueError):
        small_config(distances_m=(-1.0, 3.0))
    with pytest.raises(ValueError):
        small_config(n_trials=0)
    with pytest.raises(ValueError):
        small_config(scene_angles_deg=())
    with pytest.raises(ValueError):
        small_config(carrier_frequencies_hz=())


def test_config_yaml_roundtrip(tmp_path):
    cfg = ExperimentConfig.paper_default()
    path = tmp_path / "cfg.yaml"
    cfg.to_yaml(path)
    assert ExperimentConfig.from_yaml(path) == cfg
    small = small_config(seed_base=42)
    small.to_yaml(path)
    assert ExperimentConfig.from_yaml(path) == small


def test_trial_seed_frozen_and_distinct():
    # seed = seed_base XOR blake2b-8("label|fc|nu|snr|d|trial")
    expected = int.from_bytes(
        blake2b(b"NF/NF|3000000000.0|64|30.0|3.0|0", digest_size=8).digest(), "big"
    )
    assert expected == 5235835314969379653
    got = trial_seed(7, "NF/NF", 3e9, 64, 30.0, 3.0, 0)
    assert got == 5235835314969379650
    seeds = {trial_seed(0, "NF/NF", 3e9, 64, 30.0, 3.0, t) for t in range(50)}
    assert len(seeds) == 50
    assert trial_seed(0, "FF/FF", 3e9, 64, 30.0, 3.0, 0) != trial_seed(
        0, "NF/NF", 3e9, 64, 30.0, 3.0, 0
    )


def test_run_case_far_field_matched():
    cfg = small_config()
    res = run_case(Scenario.FF_FF, 3e9, 16, 30.0, 3.0, cfg)
    assert res.scenario_label == "FF/FF"
    assert res.n_u == 16 and res.n_trials == 3 and res.n_failed == 0
    assert res.az_rms_deg <= 0.125 and res.el_rms_deg <= 0.125
    assert res.range_rms_m is None and res.range_rel_rms is None
    # n * lambda at 3 GHz
    assert res.fraunhofer_m == pytest.approx(16 * 299792458.0 / 3e9, rel=1e-12)


def test_run_case_near_field_reports_range():
    cfg = small_config(scenarios=(Scenario.NF_NF,))
    res = run_case(Scenario.NF_NF, 3e9, 16, 30.0, 0.8, cfg)
    assert res.n_failed == 0
    assert res.az_rms_deg <= 0.125 and res.el_rms_deg <= 0.125
    assert res.range_rms_m is not None and res.range_rel_rms is not None
    assert res.range_rel_rms <= 0.15
    assert res.range_rel_rms == pytest.approx(res.range_rms_m / 0.8, rel=1e-9)


def test_run_case_is_deterministic():
    cfg = small_config()
    a = run_case(Scenario.FF_FF, 3e9, 16, 30.0, 3.0, cfg)
    b = run_case(Scenario.FF_FF, 3e9, 16, 30.0, 3.0, cfg)
    assert a == b


def test_run_case_counts_failed_trials():
    # a 2x2 window cannot yield two non-adjacent peaks, so every trial fails
    cfg = small_config(
        azimuth_window_deg=(34.0, 35.0), elevation_window_deg=(62.0, 63.0)
    )
    res = run_case(Scenario.FF_FF, 3e9, 16, 30.0, 3.0, cfg)
    assert res.n_failed == 3
    assert math.isnan(res.az_rms_deg) and math.isnan(res.el_rms_deg)


def _fake_result(label, distance, az=0.05, el=0.05, rng=None, rel=None, fr=6.4):
    return MismatchResult(
        scenario_label=label,
        fc_hz=3e9,
        n_u=64,
        snr_db=30.0,
        distance_m=distance,
        fraunhofer_m=fr,
        az_rms_deg=az,
        el_rms_deg=el,
        range_rms_m=rng,
        range_rel_rms=rel,
        n_trials=25,
        n_failed=0,
    )


def test_emit_csv_schema_and_roundtrip(tmp_path):
    path = tmp_path / "out.csv"
    one = [_fake_result("FF/FF", 3.0)]
    emit_csv(one, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    assert lines[0] == CSV_HEADER
    assert lines[1].startswith("FF/FF,3000000000.0,64,30.0,3.0,")
    assert ",,," not in lines[0]
    both = [
        _fake_result("NF/NF", 0.2, rng=0.01, rel=0.05),
        _fake_result("FF/FF", 3.0),
    ]
    emit_csv(both, path)
    back = read_results_csv(path)
    assert back == both
    # far-field rows leave the range columns empty
    ff_line = path.read_text().splitlines()[2]
    assert ",,," in ff_line


def test_run_sweep_writes_partial_and_csv(tmp_path):
    cfg = small_config(distances_m=(0.8, 3.0), output_dir=str(tmp_path))
    results = run_sweep(cfg)
    assert len(results) == 2
    csv_path = tmp_path / "results.csv"
    jsonl_path = tmp_path / "partial_results.jsonl"
    assert csv_path.exists() and jsonl_path.exists()
    rows = [json.loads(line) for line in jsonl_path.read_text().splitlines()]
    assert len(rows) == 2
    assert {r["distance_m"] for r in rows} == {0.8, 3.0}
    assert read_results_csv(csv_path) == results


def test_run_sweep_parallel_matches_serial(tmp_path):
    cfg_a = small_config(distances_m=(0.8, 3.0), output_dir=str(tmp_path / "a"))
    cfg_b = small_config(distances_m=(0.8, 3.0), output_dir=str(tmp_path / "b"))
    serial = run_sweep(cfg_a, workers=1)
    parallel = run_sweep(cfg_b, workers=2)
    assert serial == parallel
    assert (tmp_path / "a" / "results.csv").read_bytes() == (
        tmp_path / "b" / "results.csv"
    ).read_bytes()


def test_emit_plot_svg(tmp_path):
    results = []
    for label in ("NF/NF", "ANM-on-NF", "FF-on-NF", "FF/FF"):
        for d in (0.2, 3.0, 30.0):
            results.append(_fake_result(label, d, az=0.1 if label == "NF/NF" else 1.0))
    path = tmp_path / "plot.svg"
    emit_plot(results, "distance", "azimuth_rms", path)
    svg = path.read_text()
    assert svg.lstrip().startswith("<?xml")
    for label in ("NF/NF", "ANM-on-NF", "FF-on-NF", "FF/FF"):
        assert label in svg
    # Fraunhofer marker present (dashed vertical line annotation)
    assert "fraunhofer" in svg.lower()


def test_emit_plot_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        emit_plot([], "distance", "azimuth_rms", tmp_path / "x.svg")
    with pytest.raises(ValueError):
        emit_plot([_fake_result("FF/FF", 3.0)], "distance", "range_rel_rms", tmp_path / "y.svg")


def test_assert_thresholds_flags_violations():
    good = [
        _fake_result("NF/NF", 0.2, az=0.01, el=0.01, rng=0.002, rel=0.01),
        _fake_result("NF/NF", 30.0, az=0.02, el=0.02, rng=9.0, rel=0.30),
        _fake_result("FF-on-NF", 0.2, az=4.0, el=4.0),
        _fake_result("FF-on-NF", 30.0, az=0.03, el=0.03),
        _fake_result("ANM-on-NF", 0.2, az=0.5, el=0.5, rng=0.05, rel=0.25),
        _fake_result("ANM-on-NF", 30.0, az=0.03, el=0.03, rng=9.5, rel=0.32),
        _fake_result("FF/FF", 0.2, az=0.01, el=0.01),
        _fake_result("FF/FF", 30.0, az=0.01, el=0.01),
    ]
    assert assert_thresholds(good) == []

    bad_matched = [_fake_result("NF/NF", 3.0, az=0.5, el=0.01, rng=0.01, rel=0.003)]
    violations = assert_thresholds(bad_matched)
    assert len(violations) == 1 and "NF/NF" in violations[0]

    # mismatch penalty gone: FF-on-NF barely worse than NF/NF at 0.2 m
    bad_penalty = [
        _fake_result("NF/NF", 0.2, az=0.01, el=0.01, rng=0.002, rel=0.01),
        _fake_result("FF-on-NF", 0.2, az=0.05, el=0.05),
    ]
    assert any("10x" in v for v in assert_thresholds(bad_penalty))

    nan_case = [_fake_result("FF/FF", 3.0, az=float("nan"), el=float("nan"))]
    assert assert_thresholds(nan_case)
