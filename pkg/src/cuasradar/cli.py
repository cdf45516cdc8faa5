"""Command line: ``run`` a scenario, ``sweep`` dwell times, ``size`` a radar.

Exit codes: 0 success, 2 usage error or missing input path, 3 invalid
scenario, 4 output directory not writable.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

from . import tradestudy as ts
from .detector import write_detections_csv
from .dsp import range_doppler, spectrogram, write_map_csv, write_pgm, write_spectrogram_csv
from .echo_synth import synth_cell_series, synth_cpi
from .scattering import ka_sweep, sphere_rcs
from .scenario import LinkBudget, Scenario, ScenarioError, load_scenario
from .tracker import FrameConfig, run_frames, write_classifications, write_frame_stream, write_track_log

log = logging.getLogger("cuasradar")

CONFIG_DIR_ENV = "CUASRADAR_CONFIG_DIR"
DATA_DIR = Path(__file__).with_name("data")
EMIT_CHOICES = ("detections", "tracks", "frames", "rd_maps", "spectrograms", "plots")
DEFAULT_EMIT = ("detections", "tracks", "frames")

EXIT_USAGE = 2
EXIT_SCENARIO = 3
EXIT_OUTPUT = 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class RunConfig:
    scenario_path: Path
    frames: int = 10
    output_dir: Path = Path("out")
    emit: frozenset = frozenset(DEFAULT_EMIT)
    seed_override: Optional[int] = None
    detector: str = "cfar"
    frame_interval: float = 1.0

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        unknown = set(self.emit) - set(EMIT_CHOICES)
        if unknown:
            raise ValueError(f"unknown emit kinds: {sorted(unknown)}")


def g6(v: float) -> str:
    return f"{v:.6g}"


def resolve_scenario(name: str) -> Path:
    """Find a scenario file: as given, under $CUASRADAR_CONFIG_DIR, then among the bundled ones."""
    candidates = [Path(name)]
    cfg = os.environ.get(CONFIG_DIR_ENV)
    if cfg:
        candidates += [Path(cfg) / name, Path(cfg) / f"{name}.json"]
    candidates += [DATA_DIR / name, DATA_DIR / f"{name}.json"]
    for c in candidates:
        if c.is_file():
            return c
    raise CliError(f"scenario not found: {name}", EXIT_USAGE)


def read_scenario(name: str, seed: Optional[int] = None) -> Scenario:
    path = resolve_scenario(name)
    try:
        s = load_scenario(path.read_text())
    except ScenarioError as exc:
        raise CliError(f"{path}: {exc}", EXIT_SCENARIO) from exc
    if seed is not None:
        if seed < 0:
            raise CliError("--seed must be >= 0", EXIT_USAGE)
        s = replace(s, noise_seed=seed)
    return s


def _output_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {path}: {exc}", EXIT_OUTPUT) from exc
    if not os.access(path, os.W_OK):
        raise CliError(f"output directory not writable: {path}", EXIT_OUTPUT)
    return path


# --------------------------------------------------------------------------
# run


def cmd_run(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    scenario = read_scenario(str(cfg.scenario_path), cfg.seed_override)
    outdir = _output_dir(Path(cfg.output_dir))
    frame_cfg = FrameConfig(detector=cfg.detector, frame_interval=cfg.frame_interval)
    pictures, tracker = run_frames(scenario, cfg.frames, frame_cfg)
    emit = set(cfg.emit)
    written = []

    if "detections" in emit:
        dets = [cd.detection for p in pictures for cd in p.detections]
        write_detections_csv(dets, outdir / "detections.csv")
        write_classifications(pictures, outdir / "classifications.csv")
        written += ["detections.csv", "classifications.csv"]
    if "tracks" in emit:
        write_track_log(pictures, outdir / "tracks.csv")
        written.append("tracks.csv")
    if "frames" in emit:
        write_frame_stream(pictures, outdir / "frames.jsonl")
        written.append("frames.jsonl")
    if emit & {"rd_maps", "spectrograms", "plots"}:
        written += _emit_maps(scenario, pictures, frame_cfg, outdir, emit)
    if "plots" in emit:
        from .plotting import plot_tracks

        plot_tracks(pictures, outdir / "tracks.png")
        written.append("tracks.png")

    n_det = sum(len(p.detections) for p in pictures)
    tracks = {tr.id: tr for tr in tracker.retired + tracker.tracks}
    mean_drt = sum(p.drt for p in pictures) / len(pictures)
    mean_proc = sum(p.processing_ms for p in pictures) / len(pictures)
    print(f"frames            {len(pictures)}", file=out)
    print(f"detections        {n_det}", file=out)
    print(f"tracks            {len(tracks)}", file=out)
    for tid in sorted(tracks):
        lab = tracks[tid].fused_label
        print(f"  track {tid:<4d} {lab.category.value:<16s} {g6(lab.confidence)}", file=out)
    print(f"mean DRT (ms)     {g6(mean_drt)}", file=out)
    print(f"mean proc (ms)    {g6(mean_proc)}", file=out)
    print(f"wrote             {len(written)} files -> {outdir}", file=out)
    return 0


def _emit_maps(scenario, pictures, frame_cfg, outdir: Path, emit: set) -> list[str]:
    plots = "plots" in emit
    if plots:
        from .plotting import plot_range_doppler, plot_spectrogram
    names = []
    for p in pictures:
        if "rd_maps" in emit or plots:
            rd = range_doppler(synth_cpi(scenario, p.t0), frame_cfg.window)
            stem = f"rd_{p.index:03d}"
            if "rd_maps" in emit:
                write_map_csv(rd, outdir / f"{stem}.csv")
                write_pgm(rd.magnitude_db, outdir / f"{stem}.pgm", floor_db=rd.noise_floor_estimate)
                names += [f"{stem}.csv", f"{stem}.pgm"]
            if plots:
                plot_range_doppler(rd, outdir / f"{stem}.png", [cd.detection for cd in p.detections])
                names.append(f"{stem}.png")
        if "spectrograms" in emit or plots:
            window, hop = frame_cfg.atr_params(scenario.radar.pulses_per_cpi)
            for cd in p.detections:
                rb = cd.detection.range_bin
                series = synth_cell_series(scenario, p.t0, rb, frame_cfg.recognition_pulses)
                spec = spectrogram(series, scenario.radar.prf, window, hop, "blackmanharris", 4, rb)
                stem = f"spec_{p.index:03d}_{rb:04d}"
                if "spectrograms" in emit:
                    write_spectrogram_csv(spec, outdir / f"{stem}.csv")
                    names.append(f"{stem}.csv")
                if plots:
                    title = f"track {cd.track_id}: {cd.category.category.value}"
                    plot_spectrogram(spec, outdir / f"{stem}.png", title)
                    names.append(f"{stem}.png")
    return names


# --------------------------------------------------------------------------
# sweep


def parse_cpis(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise CliError(f"--cpis: {exc}", EXIT_USAGE) from exc
    if not vals:
        raise CliError("--cpis: empty CPI list", EXIT_USAGE)
    if min(vals) <= 0:
        raise CliError("--cpis: CPIs must be positive", EXIT_USAGE)
    return vals


def cmd_sweep(scenario_name: str, cpis_ms: Sequence[float], output_dir: Path, seed=None, plots=False, out=None) -> int:
    out = out or sys.stdout
    scenario = read_scenario(scenario_name, seed)
    outdir = _output_dir(Path(output_dir))
    pulses = [ts.pulses_for(c, scenario.radar.prf) for c in cpis_ms]
    try:
        rows = ts.dwell_sweep(scenario, pulses)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_SCENARIO) from exc
    lines = [",".join(ts.SWEEP_FIELDS)]
    lines += [f"{g6(r.cpi_ms)},{g6(r.ratio)},{str(r.detectable).lower()}" for r in rows]
    (outdir / "sweep.csv").write_text("\n".join(lines) + "\n")
    if plots:
        from .plotting import plot_dwell_sweep

        plot_dwell_sweep(rows, outdir / "sweep.png")
    print("\n".join(lines), file=out)
    return 0


# --------------------------------------------------------------------------
# size


def _report(rows: list[tuple[str, float, str]], as_csv: bool, out) -> None:
    if as_csv:
        print("quantity,value,unit", file=out)
        for name, v, unit in rows:
            print(f"{name},{g6(v)},{unit}", file=out)
        return
    width = max(len(r[0]) for r in rows)
    for name, v, unit in rows:
        print(f"{name:<{width}}  {g6(v):>12s} {unit}", file=out)


def _positive(args, *names):
    for n in names:
        v = getattr(args, n)
        if v is None:
            raise CliError(f"--{n.replace('_', '-')} is required", EXIT_USAGE)
        if v <= 0:
            raise CliError(f"--{n.replace('_', '-')} must be positive", EXIT_USAGE)


def cmd_size(args, out=None) -> int:
    out = out or sys.stdout
    what = args.what
    if what == "range":
        _positive(args, "rcs")
        if args.ref_range is not None or args.ref_rcs is not None:
            _positive(args, "ref_range", "ref_rcs")
            r = ts.scale_range(args.ref_range, args.ref_rcs, args.ref_snr, args.rcs, args.snr)
        else:
            _positive(args, "power", "gain", "frequency", "noise_bandwidth", "temp")
            budget = LinkBudget(args.power, args.gain, args.gain_rx or args.gain, args.temp, args.noise_bandwidth, args.losses)
            r = ts.detection_range(budget, 3e8 / args.frequency, args.rcs, args.snr)
        rows = [("range", r, "m"), ("range_km", r / 1e3, "km")]
    elif what == "latency":
        vals = (args.drl, args.srl, args.rrl, args.com)
        if min(vals) < 0:
            raise CliError("latency components must be >= 0", EXIT_USAGE)
        b = ts.latency_budget(*vals)
        rows = [("drl", b.drl_radar, "ms"), ("srl", b.srl_eo, "ms"), ("rrl", b.rrl_eo, "ms"),
                ("t_com", b.t_com, "ms"), ("total", b.total, "ms")]
    elif what == "angular":
        _positive(args, "wavelength", "aperture")
        rows = [("angular_resolution", ts.angular_resolution(args.wavelength, args.aperture), "rad")]
    elif what == "alert":
        _positive(args, "range")
        if (args.speed is None) == (args.speed_kmh is None):
            raise CliError("give exactly one of --speed / --speed-kmh", EXIT_USAGE)
        v = args.speed if args.speed is not None else ts.kmh(args.speed_kmh)
        if v <= 0:
            raise CliError("speed must be positive", EXIT_USAGE)
        rows = [("speed", v, "m/s"), ("alert_time", ts.alert_time(args.range, v), "s")]
    elif what == "sphere-rcs":
        _positive(args, "radius", "wavelength")
        rows = [("rcs", sphere_rcs(args.radius, args.wavelength), "m^2")]
    elif what == "resolution":
        _positive(args, "bandwidth", "frequency", "cpi_ms")
        rows = [
            ("range_resolution", ts.range_resolution(args.bandwidth), "m"),
            ("velocity_resolution", ts.velocity_resolution(args.frequency, args.cpi_ms * 1e-3), "m/s"),
        ]
    elif what == "ka-sweep":
        lo, hi, n = args.ka_min, args.ka_max, args.points
        if not (0 < lo < hi) or n < 2:
            raise CliError("need 0 < --ka-min < --ka-max and --points >= 2", EXIT_USAGE)
        import numpy as np

        points = ka_sweep(np.geomspace(lo, hi, n))
        print("ka,sigma_norm", file=out)
        for ka, v in points:
            print(f"{g6(ka)},{g6(v)}", file=out)
        if args.plot:
            from .plotting import plot_ka_sweep

            plot_ka_sweep(points, _output_dir(Path(args.output_dir)) / "ka_sweep.png")
        return 0
    else:  # pragma: no cover - argparse restricts choices
        raise CliError(f"unknown size calculation {what!r}", EXIT_USAGE)
    _report(rows, args.csv, out)
    return 0


# --------------------------------------------------------------------------
# argument parsing


def _globals(defaults: bool) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    p.add_argument("--output-dir", type=Path, default=d(Path("out")), help="artifact directory (default ./out)")
    p.add_argument("--seed", type=int, default=d(None), help="override the scenario noise seed")
    p.add_argument("--csv", action="store_true", default=d(False), help="machine-readable output")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cuasradar",
        description="Pulse-Doppler drone radar simulator, ATR pipeline and design calculators.",
        parents=[_globals(True)],
        epilog=f"Scenario names are looked up as paths, then in ${CONFIG_DIR_ENV}, then among bundled scenarios.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    g = _globals(False)

    run = sub.add_parser("run", parents=[g], help="simulate frames and write detections/tracks")
    run.add_argument("scenario")
    run.add_argument("--frames", type=int, default=10)
    run.add_argument("--emit", default=",".join(DEFAULT_EMIT), help=f"comma list of {', '.join(EMIT_CHOICES)}")
    run.add_argument("--detector", choices=("cfar", "dscr", "pd50", "pd95"), default="cfar")
    run.add_argument("--frame-interval", type=float, default=1.0, help="seconds between frames")

    sweep = sub.add_parser("sweep", parents=[g], help="micro-Doppler visibility versus CPI length")
    sweep.add_argument("scenario")
    sweep.add_argument("--cpis", required=True, help="comma-separated CPI lengths in ms")
    sweep.add_argument("--plot", action="store_true", help="also write sweep.png")

    size = sub.add_parser("size", parents=[g], help="radar design calculators")
    size.add_argument("what", choices=("range", "latency", "angular", "alert", "sphere-rcs", "ka-sweep", "resolution"))
    size.add_argument("--rcs", type=float)
    size.add_argument("--snr", type=float, default=13.1, help="required SNR, dB")
    size.add_argument("--ref-range", type=float, help="reference detection range, m")
    size.add_argument("--ref-rcs", type=float, help="reference RCS, m^2")
    size.add_argument("--ref-snr", type=float, default=13.1, help="reference SNR, dB")
    size.add_argument("--power", type=float, help="transmit power, W")
    size.add_argument("--gain", type=float, help="transmit gain (linear)")
    size.add_argument("--gain-rx", type=float, help="receive gain (linear, default = --gain)")
    size.add_argument("--frequency", type=float, help="carrier frequency, Hz")
    size.add_argument("--temp", type=float, default=290.0, help="system noise temperature, K")
    size.add_argument("--noise-bandwidth", type=float, help="noise bandwidth, Hz")
    size.add_argument("--losses", type=float, default=1.0, help="system losses (linear)")
    size.add_argument("--drl", type=float, default=0.0)
    size.add_argument("--srl", type=float, default=0.0)
    size.add_argument("--rrl", type=float, default=0.0)
    size.add_argument("--com", type=float, default=0.0)
    size.add_argument("--wavelength", type=float)
    size.add_argument("--aperture", type=float)
    size.add_argument("--range", type=float)
    size.add_argument("--speed", type=float, help="m/s")
    size.add_argument("--speed-kmh", type=float)
    size.add_argument("--radius", type=float)
    size.add_argument("--bandwidth", type=float)
    size.add_argument("--cpi-ms", type=float)
    size.add_argument("--ka-min", type=float, default=0.05)
    size.add_argument("--ka-max", type=float, default=50.0)
    size.add_argument("--points", type=int, default=200)
    size.add_argument("--plot", action="store_true", help="ka-sweep: also write ka_sweep.png")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            emit = frozenset(e.strip() for e in args.emit.split(",") if e.strip())
            try:
                cfg = RunConfig(Path(args.scenario), args.frames, args.output_dir, emit, args.seed, args.detector, args.frame_interval)
            except ValueError as exc:
                raise CliError(str(exc), EXIT_USAGE) from exc
            return cmd_run(cfg)
        if args.command == "sweep":
            return cmd_sweep(args.scenario, parse_cpis(args.cpis), args.output_dir, args.seed, args.plot)
        return cmd_size(args)
    except CliError as exc:
        print(f"cuasradar: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
