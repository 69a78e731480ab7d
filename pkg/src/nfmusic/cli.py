"""Command-line front end.

Subcommands: run (sweep a config file), sweep (built-in default study),
spectrum-dump (write one case's full pseudospectrum), plot (curves from a
results CSV).  Exit codes: 0 success, 1 bad usage or config, 2 runtime
failure, 3 threshold violation when --assert is set.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import yaml

from .estimator import spectrum_grid, write_spectrum_csv
from .geometry import Direction, Source, SourceScene, build_upa
from .harness import (
    ExperimentConfig,
    Scenario,
    _grid_for,
    assert_thresholds,
    emit_plot,
    read_results_csv,
    run_sweep,
    trial_seed,
)
from .signals import SimConfig, generate, sample_covariance
from .subspace import eig_hermitian, noise_subspace


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; the contract reserves 2 for runtime."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _add_common_run_flags(p: _Parser) -> None:
    p.add_argument("--scenario", action="append", metavar="LABEL",
                   help="restrict to this scenario label; repeatable")
    p.add_argument("--out", metavar="DIR", help="output directory override")
    p.add_argument("--seed", type=int, metavar="U64", help="seed base override")
    p.add_argument("--trials", type=int, metavar="N", help="trials per case override")
    p.add_argument("--workers", type=int, default=1, metavar="N",
                   help="parallel case workers (default 1)")
    p.add_argument("--assert", dest="check_thresholds", action="store_true",
                   help="verify headline accuracy claims; exit 3 on violation")


def _build_parser() -> _Parser:
    parser = _Parser(prog="nfmusic", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the sweep described by a config file")
    run_p.add_argument("--config", required=True, metavar="FILE")
    _add_common_run_flags(run_p)

    sweep_p = sub.add_parser("sweep", help="run the built-in default study")
    src = sweep_p.add_mutually_exclusive_group(required=True)
    src.add_argument("--paper-default", action="store_true",
                     help="use the built-in full study configuration")
    src.add_argument("--config", metavar="FILE")
    _add_common_run_flags(sweep_p)
    sweep_p.add_argument("--fc", metavar="LIST",
                         help="comma list replacing the carrier frequency axis")
    sweep_p.add_argument("--nu", metavar="LIST",
                         help="comma list replacing the array size axis")
    sweep_p.add_argument("--snr", metavar="LIST",
                         help="comma list replacing the SNR axis")
    sweep_p.add_argument("--distances", metavar="LIST",
                         help="comma list replacing the distance axis")

    dump_p = sub.add_parser("spectrum-dump",
                            help="write one case's pseudospectrum as CSV")
    dump_p.add_argument("--config", required=True, metavar="FILE")
    dump_p.add_argument("--case", required=True, metavar="KEY",
                        help="case key label:fc:nu:snr:distance, e.g. NF/NF:3e9:64:30:3.0")
    dump_p.add_argument("--out", default="spectrum.csv", metavar="FILE")

    plot_p = sub.add_parser("plot", help="render curves from a results CSV")
    plot_p.add_argument("--in", dest="in_path", required=True, metavar="CSV")
    plot_p.add_argument("--x", choices=["distance"], default="distance")
    plot_p.add_argument("--y", required=True,
                        choices=["azimuth_rms", "elevation_rms", "range_rms", "range_rel_rms"])
    plot_p.add_argument("--out", required=True, metavar="SVG")
    return parser


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    fields = {}
    if getattr(args, "fc", None):
        fields["carrier_frequencies_hz"] = tuple(float(x) for x in args.fc.split(","))
    if getattr(args, "nu", None):
        fields["n_elements"] = tuple(int(x) for x in args.nu.split(","))
    if getattr(args, "snr", None):
        fields["snr_db"] = tuple(float(x) for x in args.snr.split(","))
    if getattr(args, "distances", None):
        fields["distances_m"] = tuple(float(x) for x in args.distances.split(","))
    if args.scenario:
        fields["scenarios"] = tuple(Scenario.from_label(s) for s in args.scenario)
    if args.out:
        fields["output_dir"] = args.out
    if args.seed is not None:
        fields["seed_base"] = args.seed
    if args.trials is not None:
        fields["n_trials"] = args.trials
    return replace(cfg, **fields) if fields else cfg


def _cmd_sweep(args) -> int:
    if getattr(args, "paper_default", False):
        cfg = ExperimentConfig.paper_default()
    else:
        cfg = ExperimentConfig.from_yaml(args.config)
    cfg = _apply_overrides(cfg, args)
    results = run_sweep(cfg, workers=args.workers)
    if args.check_thresholds:
        violations = assert_thresholds(results)
        if violations:
            for line in violations:
                print(line, file=sys.stderr)
            return 3
    return 0


def _parse_case_key(key: str):
    parts = key.split(":")
    if len(parts) != 5:
        raise ValueError(f"case key {key!r} must be label:fc:nu:snr:distance")
    scenario = Scenario.from_label(parts[0])
    try:
        fc, nu, snr, d = float(parts[1]), int(parts[2]), float(parts[3]), float(parts[4])
    except ValueError:
        raise ValueError(f"case key {key!r} holds a non-numeric field") from None
    return scenario, fc, nu, snr, d


def _cmd_spectrum_dump(args) -> int:
    cfg = ExperimentConfig.from_yaml(args.config)
    scenario, fc, nu, snr, d = _parse_case_key(args.case)
    geom = build_upa(nu, fc)
    scene = SourceScene(
        tuple(Source(Direction.from_degrees(a, e), d) for a, e in cfg.scene_angles_deg)
    )
    sim = SimConfig(
        n_snapshots=cfg.n_snapshots,
        snr_db=snr,
        seed=trial_seed(cfg.seed_base, scenario.label, fc, nu, snr, d, 0),
    )
    block = generate(geom, scene, scenario.signal_kind, sim)
    ns = noise_subspace(eig_hermitian(sample_covariance(block)), scene.n_sources)
    grid = _grid_for(cfg, geom, scenario.beamformer_kind)
    values = spectrum_grid(ns, geom, scenario.beamformer_kind, grid)
    write_spectrum_csv(values, args.out)
    return 0


def _cmd_plot(args) -> int:
    results = read_results_csv(args.in_path)
    emit_plot(results, args.x, args.y, args.out)
    return 0


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "run": _cmd_sweep,
        "sweep": _cmd_sweep,
        "spectrum-dump": _cmd_spectrum_dump,
        "plot": _cmd_plot,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, FileNotFoundError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, RuntimeError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
