"""Command line entry point: synth, detect, extract, and bench subcommands.

Configuration precedence: explicit flags override config-file values, which
override built-in defaults.  Config files are flat ``key=value`` text (same
keys as the long flags, dashes or underscores); the effective configuration
is echoed into the run summary for provenance.  Exit codes: 0 success,
1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Callable

from .errors import AirgunkitError
from .pulse_detect import DetectorConfig, detect_pulses, format_event_row, write_events_csv
from .runner import RunConfig, bench, report_text, run, weighted_chunks
from .signal_io import open_manifest
from .synth import SurveySpec, generate
from .weighting import CANONICAL_ORDER, WeightingSpec, coefficients_text, design_filter, parse_kind


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; this toolkit reserves 2 for runtime errors
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# defaults and config-file merging

_SYNTH_DEFAULTS: dict[str, object] = {
    "out": None,
    "channels": 1,
    "duration_s": 60.0,
    "sample_rate": 16_000,
    "ipi_s": 10.0,
    "first_pulse_s": 2.0,
    "pulse_count": None,
    "peak_upa": 1.0e6,
    "attack_s": 0.002,
    "decay_s": 0.03,
    "carrier_hz": 2000.0,
    "reverb_upa": 0.0,
    "reverb_decay_s": 2.0,
    "noise_rms_upa": 0.0,
    "counts_full_scale": 2048,
    "sensitivity_db": 126.0,
    "seed": 0,
}

_DETECT_DEFAULTS: dict[str, object] = {
    "manifest": None,
    "out": None,
    "weighting": "linear",
    "threshold_db": 100.0,
    "min_ipi_s": 5.0,
    "channels": None,
    "chunk_s": 60.0,
    "dump_filters": False,
}

_EXTRACT_DEFAULTS: dict[str, object] = {
    "manifest": None,
    "out": None,
    "mode": "serial",
    "workers": None,
    "weightings": "all",
    "threshold_db": 100.0,
    "min_ipi_s": 5.0,
    "channels": None,
    "chunk_s": 60.0,
    "run_id": "run",
    "summary": None,
    "dump_filters": False,
}

_BENCH_DEFAULTS: dict[str, object] = {
    "manifest": None,
    "out_dir": None,
    "workers": 4,
    "weightings": "all",
    "threshold_db": 100.0,
    "min_ipi_s": 5.0,
    "chunk_s": 60.0,
}

_CONVERTERS: dict[str, Callable[[str], object]] = {
    "channels": str,       # synth reuses the name as a count; handled per subcommand
    "dump_filters": lambda s: s.strip().lower() in ("1", "true", "yes"),
}


def _convert(key: str, raw: str, default: object) -> object:
    if key in _CONVERTERS and not isinstance(default, (int, float)):
        return _CONVERTERS[key](raw)
    if isinstance(default, bool):
        return raw.strip().lower() in ("1", "true", "yes")
    if isinstance(default, int) and not isinstance(default, bool):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def _read_config(path: str, defaults: dict[str, object]) -> dict[str, object]:
    p = Path(path)
    if not p.is_file():
        raise _UsageError(f"config file not found: {path}")
    out: dict[str, object] = {}
    for lineno, line in enumerate(p.read_text().splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise _UsageError(f"{path}:{lineno}: expected key=value")
        key, raw = (s.strip() for s in text.split("=", 1))
        key = key.replace("-", "_")
        if key not in defaults:
            raise _UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _convert(key, raw, defaults[key])
        except ValueError as exc:
            raise _UsageError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return out


def _effective(ns: argparse.Namespace, defaults: dict[str, object]) -> dict[str, object]:
    """defaults <- config file <- explicit flags."""
    eff = dict(defaults)
    if getattr(ns, "config", None):
        eff.update(_read_config(ns.config, defaults))
    for key in defaults:
        val = getattr(ns, key, None)
        if val is not None and val is not False:
            eff[key] = val
    return eff


def _require(eff: dict[str, object], key: str, flag: str) -> str:
    val = eff.get(key)
    if not val:
        raise _UsageError(f"missing required {flag}")
    return str(val)


def _parse_channel_list(raw: object) -> tuple[int, ...] | None:
    if raw in (None, "", "all"):
        return None
    try:
        return tuple(int(tok) for tok in str(raw).split(","))
    except ValueError:
        raise _UsageError(f"bad channel list {raw!r} (expected comma-separated integers)") from None


def _parse_weightings(raw: object) -> tuple:
    if raw in (None, "", "all"):
        return CANONICAL_ORDER
    try:
        kinds = tuple(parse_kind(tok) for tok in str(raw).split(","))
    except AirgunkitError:
        raise _UsageError(f"bad weighting list {raw!r} (linear, lfc, mfc, or all)") from None
    return kinds


def _dump_filters(manifests) -> None:
    states = []
    for rate in sorted({cm.sample_rate_hz for cm in manifests.values()}):
        for kind in CANONICAL_ORDER:
            states.append(design_filter(WeightingSpec(kind), rate))
    print(coefficients_text(states), end="")


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_synth(ns: argparse.Namespace) -> int:
    eff = _effective(ns, _SYNTH_DEFAULTS)
    out_dir = _require(eff, "out", "--out")
    spec = SurveySpec(
        channel_count=int(eff["channels"]),
        duration_s=float(eff["duration_s"]),
        sample_rate_hz=int(eff["sample_rate"]),
        ipi_s=float(eff["ipi_s"]),
        first_pulse_s=float(eff["first_pulse_s"]),
        pulse_count=None if eff["pulse_count"] is None else int(eff["pulse_count"]),
        peak_pressure_upa=float(eff["peak_upa"]),
        attack_s=float(eff["attack_s"]),
        decay_s=float(eff["decay_s"]),
        carrier_hz=float(eff["carrier_hz"]),
        reverb_level_upa=float(eff["reverb_upa"]),
        reverb_decay_s=float(eff["reverb_decay_s"]),
        noise_rms_upa=float(eff["noise_rms_upa"]),
        counts_full_scale=int(eff["counts_full_scale"]),
        sensitivity_db=float(eff["sensitivity_db"]),
        seed=int(eff["seed"]),
    )
    result = generate(spec, out_dir)
    for ch, wav in enumerate(result.wav_paths):
        _log(f"channel {ch}: {spec.n_pulses} pulses -> {wav}")
    print(f"manifest: {result.manifest_path}")
    print(f"ground truth: {result.ground_truth_path}")
    return 0


def _cmd_detect(ns: argparse.Namespace) -> int:
    eff = _effective(ns, _DETECT_DEFAULTS)
    kinds = _parse_weightings(eff["weighting"])
    manifests = open_manifest(_require(eff, "manifest", "--manifest"))
    out = _require(eff, "out", "--out")
    if eff["dump_filters"]:
        _dump_filters(manifests)
    selected = _parse_channel_list(eff["channels"])
    channels = sorted(manifests) if selected is None else list(selected)
    detector = DetectorConfig(float(eff["threshold_db"]), float(eff["min_ipi_s"]))
    chunk_s = float(eff["chunk_s"])

    rows: list[str] = []
    for ch in channels:
        if ch not in manifests:
            raise AirgunkitError(f"manifest does not cover channel {ch}")
        for kind in kinds:
            events = detect_pulses(weighted_chunks(manifests[ch], kind, chunk_s), detector)
            rows.extend(format_event_row(ev, kind.value, i) for i, ev in enumerate(events))
            _log(f"channel {ch} {kind.value}: {len(events)} pulses")
    write_events_csv(out, rows)
    print(f"events: {out}")
    return 0


def _cmd_extract(ns: argparse.Namespace) -> int:
    eff = _effective(ns, _EXTRACT_DEFAULTS)
    manifest_path = _require(eff, "manifest", "--manifest")
    manifests = open_manifest(manifest_path)
    out = _require(eff, "out", "--out")
    if eff["dump_filters"]:
        _dump_filters(manifests)
    mode = str(eff["mode"])
    workers = eff["workers"]
    if workers is None:
        workers = 1 if mode == "serial" else 4
    try:
        config = RunConfig(
            out_path=out,
            detector=DetectorConfig(float(eff["threshold_db"]), float(eff["min_ipi_s"])),
            mode=mode,
            worker_count=int(workers),
            channels=_parse_channel_list(eff["channels"]),
            weightings=_parse_weightings(eff["weightings"]),
            run_id=str(eff["run_id"]),
            chunk_s=float(eff["chunk_s"]),
        )
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc

    catalog_path, report = run(config, manifests, log=_log)

    summary_path = Path(str(eff["summary"])) if eff["summary"] else Path(out + ".summary.txt")
    echo = "\n".join(f"{k}={eff[k]}" for k in sorted(eff))
    summary_path.write_text(
        f"# effective configuration\n{echo}\n# manifest\nmanifest={manifest_path}\n"
        "# cumulative exposure accumulates over the whole run, never resetting\n"
        "csel_scope=run\n"
        f"# runtime\n{report_text(report)}"
    )
    print(f"catalog: {catalog_path}")
    print(f"summary: {summary_path}")
    print(f"records={report.n_records} points={report.n_points} pulses={report.n_pulses}")
    return 0


def _cmd_bench(ns: argparse.Namespace) -> int:
    eff = _effective(ns, _BENCH_DEFAULTS)
    manifest_path = _require(eff, "manifest", "--manifest")
    manifests = open_manifest(manifest_path)
    out_dir = Path(str(eff["out_dir"])) if eff["out_dir"] else Path(manifest_path).parent / "bench_out"
    result = bench(
        manifests,
        DetectorConfig(float(eff["threshold_db"]), float(eff["min_ipi_s"])),
        out_dir,
        worker_count=int(eff["workers"]),
        weightings=_parse_weightings(eff["weightings"]),
        log=_log,
    )
    print("bench comparison (same input, identical extraction code)")
    print(f"  serial   : {result.serial_seconds:.3f} s")
    print(f"  parallel : {result.parallel_seconds:.3f} s with {result.worker_count} workers")
    print(f"  speedup  : {result.speedup:.2f}x")
    print(f"  catalogs : {'identical [OK]' if result.identical else 'DIFFER [FAIL]'}")
    print(f"serial_seconds={result.serial_seconds:.3f}")
    print(f"parallel_seconds={result.parallel_seconds:.3f}")
    print(f"speedup={result.speedup:.3f}")
    print(f"identical={'true' if result.identical else 'false'}")
    return 0


# ---------------------------------------------------------------------------
# parser assembly


def _add_common_detector_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threshold-db", type=float, dest="threshold_db",
                   help="detection threshold, dB re 1 uPa (default 100.0)")
    p.add_argument("--min-ipi-s", type=float, dest="min_ipi_s",
                   help="minimum spacing between detected pulses, s (default 5.0)")
    p.add_argument("--chunk-s", type=float, dest="chunk_s",
                   help="streaming chunk length, s (default 60.0)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="airgunkit",
                     description="Airgun pulse detection and acoustic feature extraction")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[], help="generate a synthetic survey",
                       description="Generate synthetic survey WAVs, manifest, and ground truth")
    p.add_argument("--out", help="output directory (required)")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--channels", type=int, help="channel count (default 1)")
    p.add_argument("--duration-s", type=float, dest="duration_s", help="survey length, s (default 60)")
    p.add_argument("--sample-rate", type=int, dest="sample_rate", help="sample rate, Hz (default 16000)")
    p.add_argument("--ipi-s", type=float, dest="ipi_s", help="inter-pulse interval, s (default 10)")
    p.add_argument("--first-pulse-s", type=float, dest="first_pulse_s", help="first pulse onset, s (default 2)")
    p.add_argument("--pulse-count", type=int, dest="pulse_count", help="pulses per channel (default: fit to duration)")
    p.add_argument("--peak-upa", type=float, dest="peak_upa", help="pulse peak pressure, uPa (default 1e6)")
    p.add_argument("--attack-s", type=float, dest="attack_s", help="attack time constant, s (default 0.002)")
    p.add_argument("--decay-s", type=float, dest="decay_s", help="decay time constant, s (default 0.03)")
    p.add_argument("--carrier-hz", type=float, dest="carrier_hz", help="pulse carrier, Hz (default 2000)")
    p.add_argument("--reverb-upa", type=float, dest="reverb_upa", help="reverberation level, uPa (default 0)")
    p.add_argument("--reverb-decay-s", type=float, dest="reverb_decay_s", help="reverberation decay, s (default 2)")
    p.add_argument("--noise-rms-upa", type=float, dest="noise_rms_upa", help="white noise rms, uPa (default 0)")
    p.add_argument("--counts-full-scale", type=int, dest="counts_full_scale", help="full-scale counts (default 2048)")
    p.add_argument("--sensitivity-db", type=float, dest="sensitivity_db", help="full-scale level, dB re 1 uPa (default 126)")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("detect", help="detect pulses, write events CSV",
                       description="Run threshold detection and write the pulse event list")
    p.add_argument("--manifest", help="survey manifest (required)")
    p.add_argument("--out", help="output events CSV (required)")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--weighting", choices=["linear", "lfc", "mfc", "all"],
                   help="weighting stream to detect on (default linear)")
    p.add_argument("--channels", help="comma-separated channel ids (default all)")
    p.add_argument("--dump-filters", action="store_true", dest="dump_filters",
                   help="print weighting filter coefficients")
    _add_common_detector_flags(p)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("extract", help="run the full extraction pipeline",
                       description="Detect pulses and extract the feature catalog")
    p.add_argument("--manifest", help="survey manifest (required)")
    p.add_argument("--out", help="output catalog CSV (required)")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--mode", choices=["serial", "parallel"], help="execution mode (default serial)")
    p.add_argument("--workers", type=int, help="worker processes (default: 1 serial, 4 parallel)")
    p.add_argument("--weightings", help="comma-separated weightings or 'all' (default all)")
    p.add_argument("--channels", help="comma-separated channel ids (default all)")
    p.add_argument("--run-id", dest="run_id", help="run identifier stamped into the catalog (default 'run')")
    p.add_argument("--summary", help="summary path (default <out>.summary.txt)")
    p.add_argument("--dump-filters", action="store_true", dest="dump_filters",
                   help="print weighting filter coefficients")
    _add_common_detector_flags(p)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("bench", help="compare serial vs parallel wall time",
                       description="Run serial then parallel on the same input and report the speedup")
    p.add_argument("--manifest", help="survey manifest (required)")
    p.add_argument("--out-dir", dest="out_dir", help="where to write the two catalogs (default <manifest dir>/bench_out)")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--workers", type=int, help="parallel worker count (default 4)")
    p.add_argument("--weightings", help="comma-separated weightings or 'all' (default all)")
    _add_common_detector_flags(p)
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return int(ns.func(ns))
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except AirgunkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
