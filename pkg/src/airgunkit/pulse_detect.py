"""Threshold pulse detection over chunked sample streams.

An excursion is a maximal run of samples with |p| at or above the detection
threshold.  Each excursion nominates its largest-|p| sample (earliest on
ties) as an anchor; anchors closer than min_ipi_s to the last accepted pulse
are discarded.  Around each accepted anchor a fixed search window, 0.5 s
before to 1.0 s after, is measured for the positive and negative pressure
extremes; the positive extreme defines the pulse time t_A.

The detector is streaming: chunks are processed with a carried tail so every
anchor is decided exactly once with its full search window in view, and the
chunked result matches detection over one long buffer event for event.  An
excursion still above threshold at the end of a view is carried whole into
the next view (capped at MAX_CARRY_S, so invariance holds for excursions
shorter than that; airgun pulses are milliseconds long).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import DetectionError
from .measures import measure_peaks
from .signal_io import SampleBuffer

SEARCH_BEFORE_S = 0.5
SEARCH_AFTER_S = 1.0
MAX_CARRY_S = 15.0


@dataclass(frozen=True)
class DetectorConfig:
    """Detection tuning: threshold in dB re 1 uPa, refractory spacing in s.

    The search window defaults to 1.5 s, split one third before the anchor
    and two thirds after (0.5 s / 1.0 s); overriding the length keeps that
    split.  The refractory spacing must exceed the window so consecutive
    search windows cannot interleave.
    """

    threshold_db: float
    min_ipi_s: float = 5.0
    search_window_s: float = SEARCH_BEFORE_S + SEARCH_AFTER_S

    def __post_init__(self) -> None:
        if self.search_window_s <= 0:
            raise ValueError("search_window_s must be positive")
        if self.min_ipi_s <= self.search_window_s:
            raise ValueError("min_ipi_s must exceed search_window_s")

    @property
    def before_s(self) -> float:
        return self.search_window_s / 3.0

    @property
    def after_s(self) -> float:
        return 2.0 * self.search_window_s / 3.0

    @property
    def threshold_upa(self) -> float:
        return 10.0 ** (self.threshold_db / 20.0)


@dataclass(frozen=True)
class PulseEvent:
    """One detected pulse.

    Times are absolute stream times; *_index fields are global sample indices
    on the stream grid (exact integers for downstream slicing).  ipi_s is the
    spacing to the next event on the same stream, None for the last one.
    """

    channel_id: int
    t_pos_s: float
    p_pos_upa: float
    p_pos_db: float
    t_neg_s: float
    p_neg_upa: float
    p_neg_db: float
    p_pp_db: float
    search_start_index: int
    search_end_index: int
    anchor_index: int
    ipi_s: float | None = None


class _StreamState:
    """Mutable per-stream detector state across chunks."""

    __slots__ = (
        "fs", "t0", "channel_id", "pre", "post", "min_gap", "carry_cap",
        "carry", "carry_start", "next_start", "processed_upto", "last_anchor",
        "events",
    )

    def __init__(self, first: SampleBuffer, cfg: DetectorConfig) -> None:
        self.fs = first.sample_rate_hz
        self.t0 = first.start_time_s
        self.channel_id = first.channel_id
        self.pre = round(cfg.before_s * self.fs)
        self.post = round(cfg.after_s * self.fs)
        self.min_gap = round(cfg.min_ipi_s * self.fs)
        self.carry_cap = round(MAX_CARRY_S * self.fs)
        self.carry = np.empty(0)
        self.carry_start = 0
        self.next_start = 0
        self.processed_upto = -1
        self.last_anchor: int | None = None
        self.events: list[PulseEvent] = []


def _excursion_spans(mask: np.ndarray) -> list[tuple[int, int]]:
    """[start, end) index pairs of the True runs in a boolean mask."""
    if not mask.any():
        return []
    d = np.diff(np.concatenate(([0], mask.view(np.int8), [0])))
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1)
    return list(zip(starts.tolist(), ends.tolist()))


def _emit(state: _StreamState, view: np.ndarray, view_start: int, anchor: int) -> None:
    """Accept one anchor: measure its search window and append the event."""
    lo = max(anchor - state.pre, 0)
    hi = anchor + state.post
    a, b = lo - view_start, min(hi, view_start + len(view)) - view_start
    assert a >= 0, "search window fell before the carried view"
    window = SampleBuffer(
        samples=view[a:b],
        sample_rate_hz=state.fs,
        start_time_s=state.t0 + lo / state.fs,
        channel_id=state.channel_id,
    )
    pk = measure_peaks(window)
    state.events.append(
        PulseEvent(
            channel_id=state.channel_id,
            t_pos_s=pk.t_pos_s,
            p_pos_upa=pk.p_pos_upa,
            p_pos_db=pk.p_pos_db,
            t_neg_s=pk.t_neg_s,
            p_neg_upa=pk.p_neg_upa,
            p_neg_db=pk.p_neg_db,
            p_pp_db=pk.p_pp_db,
            search_start_index=lo,
            search_end_index=hi,
            anchor_index=anchor,
        )
    )
    state.last_anchor = anchor


def _scan_view(state: _StreamState, view: np.ndarray, view_start: int,
               threshold: float, final: bool) -> None:
    """Decide every anchor in the view whose outcome can no longer change.

    An excursion is decidable once it is complete and its anchor's search
    window fits in the view.  The first undecidable excursion (and everything
    after it) is deferred: the carry keeps it whole, with 0.5 s of context
    before it, and the decided-boundary does not advance past its start.
    """
    view_end = view_start + len(view)
    mask = np.abs(view) >= threshold

    # anchors need their full search window in view before they are decided
    decide_upto = view_end if final else view_end - state.post
    keep_from = view_end - (state.pre + state.post)

    for s, e in _excursion_spans(mask):
        gs, ge = view_start + s, view_start + e
        if not final and ge > decide_upto:
            decide_upto = min(decide_upto, gs)
            keep_from = min(keep_from, gs - state.pre)
            break
        anchor = gs + int(np.argmax(np.abs(view[s:e])))
        if anchor <= state.processed_upto:
            continue  # already decided in an earlier view
        if state.last_anchor is None or anchor - state.last_anchor >= state.min_gap:
            _emit(state, view, view_start, anchor)

    state.processed_upto = max(state.processed_upto, decide_upto - 1)
    if final:
        state.carry = np.empty(0)
        return
    keep_from = max(keep_from, view_start, view_end - state.carry_cap)
    state.carry = view[keep_from - view_start :].copy()
    state.carry_start = keep_from


def detect_pulses(chunks: Iterable[SampleBuffer], config: DetectorConfig) -> list[PulseEvent]:
    """Run threshold detection over an in-order chunk stream.

    Chunks must be contiguous (each starting where the previous ended) and
    share one sample rate; violations raise DetectionError.  Returns events
    ordered by time with ipi_s filled between consecutive events.
    """
    threshold = config.threshold_upa
    state: _StreamState | None = None

    for chunk in chunks:
        if state is None:
            state = _StreamState(chunk, config)
        else:
            if chunk.sample_rate_hz != state.fs:
                raise DetectionError("sample rate changed mid-stream")
            got = round((chunk.start_time_s - state.t0) * state.fs)
            if got != state.next_start:
                raise DetectionError(
                    f"chunk starts at sample {got}, expected {state.next_start} (stream must be contiguous)"
                )
        view = np.concatenate((state.carry, chunk.samples)) if len(state.carry) else chunk.samples
        _scan_view(state, view, state.next_start - len(state.carry), threshold, final=False)
        state.next_start += len(chunk)

    if state is None:
        return []
    if len(state.carry):
        _scan_view(state, state.carry, state.carry_start, threshold, final=True)

    return _finalize_events(state.events, config)


def _finalize_events(events: list[PulseEvent], config: DetectorConfig) -> list[PulseEvent]:
    """Order by peak time, enforce min spacing on t_A, fill ipi_s."""
    events = sorted(events, key=lambda e: e.t_pos_s)
    kept: list[PulseEvent] = []
    for ev in events:
        if kept and ev.t_pos_s - kept[-1].t_pos_s < config.min_ipi_s:
            continue
        kept.append(ev)
    out: list[PulseEvent] = []
    for i, ev in enumerate(kept):
        nxt = kept[i + 1].t_pos_s - ev.t_pos_s if i + 1 < len(kept) else None
        out.append(replace(ev, ipi_s=nxt))
    return out


def detect_buffer(buffer: SampleBuffer, config: DetectorConfig) -> list[PulseEvent]:
    """Detect over one in-memory buffer (single-chunk stream)."""
    return detect_pulses([buffer], config)


EVENTS_HEADER = (
    "channel_id,weighting,pulse_index,t_a_s,p_a_upa,p_a_db,t_b_s,p_b_upa,p_b_db,p_pp_db,ipi_s"
)


def format_event_row(ev: PulseEvent, weighting: str, pulse_index: int) -> str:
    """One events-CSV row; times at ns precision, levels at micro-dB."""
    ipi = f"{ev.ipi_s:.9f}" if ev.ipi_s is not None else "NA"
    return (
        f"{ev.channel_id},{weighting},{pulse_index},"
        f"{ev.t_pos_s:.9f},{ev.p_pos_upa:.6f},{ev.p_pos_db:.6f},"
        f"{ev.t_neg_s:.9f},{ev.p_neg_upa:.6f},{ev.p_neg_db:.6f},"
        f"{ev.p_pp_db:.6f},{ipi}"
    )


def write_events_csv(path, rows: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(EVENTS_HEADER + "\n")
        for row in rows:
            fh.write(row + "\n")
