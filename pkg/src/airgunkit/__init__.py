"""Batch detection and acoustic feature extraction for seismic airgun surveys."""

from .errors import (
    AirgunkitError,
    AudioFormatError,
    DetectionError,
    FilterDesignError,
    GapError,
    ManifestError,
    MeasureError,
    RunError,
)
from .measures import (
    CselAccumulator,
    PeakMeasures,
    csel_of_levels,
    csel_update,
    leq,
    measure_peaks,
    sel,
    spl,
    window_energy,
)
from .pipeline import (
    FEATURE_COLUMNS,
    FeatureRecord,
    RunLedger,
    extract_record,
    extract_stream,
    ledger_total,
    read_catalog,
    sort_records,
    write_catalog,
)
from .pulse_detect import DetectorConfig, PulseEvent, detect_buffer, detect_pulses
from .runner import RunConfig, RuntimeReport, bench, estimate_serial, run
from .signal_io import (
    CalibrationSpec,
    ChannelManifest,
    SampleBuffer,
    iter_chunks,
    open_manifest,
    read_chunk,
    read_span,
    write_wav,
)
from .synth import GroundTruthRecord, SurveySpec, generate, pulse_energy_upa2s, read_ground_truth
from .weighting import (
    CANONICAL_ORDER,
    FilterState,
    WeightingKind,
    WeightingSpec,
    apply_filter,
    design_filter,
    frequency_response_db,
)
from .windows import EnergyBounds, WindowLayout, energy_bounds, layout_windows

__version__ = "0.1.0"

__all__ = [
    "AirgunkitError",
    "AudioFormatError",
    "CANONICAL_ORDER",
    "CalibrationSpec",
    "ChannelManifest",
    "CselAccumulator",
    "DetectionError",
    "DetectorConfig",
    "EnergyBounds",
    "FEATURE_COLUMNS",
    "FeatureRecord",
    "FilterDesignError",
    "FilterState",
    "GapError",
    "GroundTruthRecord",
    "ManifestError",
    "MeasureError",
    "PeakMeasures",
    "PulseEvent",
    "RunConfig",
    "RunError",
    "RunLedger",
    "RuntimeReport",
    "SampleBuffer",
    "SurveySpec",
    "WeightingKind",
    "WeightingSpec",
    "WindowLayout",
    "apply_filter",
    "bench",
    "csel_of_levels",
    "csel_update",
    "design_filter",
    "detect_buffer",
    "detect_pulses",
    "energy_bounds",
    "estimate_serial",
    "extract_record",
    "extract_stream",
    "frequency_response_db",
    "generate",
    "iter_chunks",
    "layout_windows",
    "ledger_total",
    "leq",
    "measure_peaks",
    "open_manifest",
    "pulse_energy_upa2s",
    "read_catalog",
    "read_chunk",
    "read_ground_truth",
    "read_span",
    "run",
    "sel",
    "sort_records",
    "spl",
    "window_energy",
    "write_catalog",
    "write_wav",
]
