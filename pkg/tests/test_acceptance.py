"""Acceptance gate: one test per shipped guarantee.

Each test prints a single ``ACCEPTANCE <n> <label>: PASS|FAIL|SKIP`` line
(visible under ``pytest -s``), so a run of this module doubles as the
sign-off checklist.  The heavyweight survey and its serial extraction run
are module-scoped fixtures shared by the tests that need them.
"""

from __future__ import annotations

import collections
import contextlib
import math
import time
import timeit

import numpy as np
import pytest

from airgunkit.measures import CselAccumulator, csel_update, leq, sel
from airgunkit.pipeline import CATALOG_HEADER, ledger_total, read_catalog
from airgunkit.pulse_detect import DetectorConfig
from airgunkit.runner import RunConfig, cpu_count, run
from airgunkit.signal_io import SampleBuffer, open_manifest
from airgunkit.synth import SurveySpec, generate
from airgunkit.weighting import (
    NYQUIST_GUARD,
    WeightingKind,
    WeightingSpec,
    apply_filter,
    design_filter,
)
from airgunkit.windows import energy_bounds

FS = 16_000.0
DETECTOR = DetectorConfig(threshold_db=100.0, min_ipi_s=5.0)
HALF_POWER_DB = -10.0 * math.log10(2.0)


@contextlib.contextmanager
def criterion(number: int, label: str):
    try:
        yield
    except BaseException as exc:
        status = "SKIP" if isinstance(exc, pytest.skip.Exception) else "FAIL"
        print(f"ACCEPTANCE {number} {label}: {status}")
        raise
    print(f"ACCEPTANCE {number} {label}: PASS")


@pytest.fixture(scope="module")
def survey(tmp_path_factory):
    spec = SurveySpec(
        channel_count=5,
        duration_s=465.0,
        pulse_count=46,
        noise_rms_upa=0.0,
        seed=0,
    )
    result = generate(spec, tmp_path_factory.mktemp("acceptance_survey"))
    return spec, result


@pytest.fixture(scope="module")
def serial_run(survey, tmp_path_factory):
    _, result = survey
    manifests = open_manifest(result.manifest_path)
    out = tmp_path_factory.mktemp("acceptance_serial") / "catalog.csv"
    started = time.perf_counter()
    path, report = run(RunConfig(out_path=out, detector=DETECTOR), manifests)
    wall_s = time.perf_counter() - started
    return path, report, wall_s


def test_01_feature_ledger_arithmetic():
    with criterion(1, "feature ledger arithmetic"):
        assert ledger_total(3, 11, 50, 5, 160_122) == 146_511_630
        per_call = min(
            timeit.repeat(
                lambda: ledger_total(3, 11, 50, 5, 160_122), number=1000, repeat=5
            )
        ) / 1000
        assert per_call < 1e-3


def test_02_catalog_record_and_point_counts(serial_run):
    path, report, _ = serial_run
    with criterion(2, "catalog record and point counts"):
        assert report.n_records == 5 * 46 * 3 == 690
        assert report.n_points == ledger_total(3, 11, 50, 5, 46) == 42_090
        assert report.n_points == 61 * report.n_records
        lines = path.read_text().splitlines()
        assert lines[0] == CATALOG_HEADER
        assert len(lines[0].split(",")) == 65
        assert len(lines) - 1 == report.n_records


def test_03_sel_equals_leq_on_unit_windows():
    rng = np.random.default_rng(42)
    with criterion(3, "sel equals leq for one-second windows"):
        started = time.perf_counter()
        worst = 0.0
        for _ in range(1000):
            scale = 10.0 ** rng.uniform(-3.0, 6.0)
            buf = SampleBuffer(rng.normal(0.0, scale, int(FS)), FS, 0.0, 0)
            worst = max(worst, abs(sel(buf) - leq(buf)))
        elapsed = time.perf_counter() - started
        assert worst < 1e-12
        assert elapsed < 10.0


def test_04_csel_matches_energy_sum_identity():
    rng = np.random.default_rng(7)
    with criterion(4, "cumulative sel equals summed-energy identity"):
        worst = 0.0
        for _ in range(100):
            n_windows = int(rng.integers(1, 24))
            acc = CselAccumulator()
            levels = []
            running = None
            for _ in range(n_windows):
                count = int(rng.integers(50, 6000))
                scale = 10.0 ** rng.uniform(0.0, 5.0)
                buf = SampleBuffer(rng.normal(0.0, scale, count), 4000.0, 0.0, 0)
                levels.append(sel(buf))
                acc, running = csel_update(acc, buf)
            manual = 10.0 * math.log10(
                np.sum(10.0 ** (np.asarray(levels) / 10.0))
            )
            worst = max(worst, abs(running - manual))
        assert worst < 1e-9


def test_05_energy_bounds_within_one_sample_of_dense_oracle():
    rng = np.random.default_rng(2025)
    over = 10
    with criterion(5, "5%/95% bounds within one sample of a 10x oracle"):
        worst_err_s = 0.0
        for trial in range(200):
            if trial % 2 == 0:
                attack = rng.uniform(0.0005, 0.01)
                decay = rng.uniform(0.01, 0.08)
                onset = rng.uniform(0.1, 0.4)

                def envelope(t, a=attack, d=decay, t0=onset):
                    t_rel = np.clip(t - t0, 0.0, None)
                    return (1.0 - np.exp(-t_rel / a)) * np.exp(-t_rel / d)

            else:
                sigma = rng.uniform(0.005, 0.08)
                centre = rng.uniform(0.3, 0.6)

                def envelope(t, s=sigma, t0=centre):
                    return np.exp(-0.5 * ((t - t0) / s) ** 2)

            n = int(FS)
            x = envelope(np.arange(n) / FS)
            got = energy_bounds(SampleBuffer(x * 1.0e5, FS, 0.0, 0))

            t_fine = np.arange(n * over) / (FS * over)
            x_fine = envelope(t_fine)
            cum = np.cumsum(x_fine * x_fine)
            t5 = t_fine[np.searchsorted(cum, 0.05 * cum[-1], side="left")]
            t95 = t_fine[np.searchsorted(cum, 0.95 * cum[-1], side="left")]
            worst_err_s = max(
                worst_err_s, abs(got.t_5th_s - t5), abs(got.t_95th_s - t95)
            )

            # The native window must cover >= 90% of the energy, and no more
            # than the two boundary samples' worth beyond it.
            e = x * x
            total = e.sum()
            i5 = int(round(got.t_5th_s * FS))
            i95 = int(round(got.t_95th_s * FS))
            covered = e[i5 : i95 + 1].sum() / total
            slack = (e[i5] + e[i95]) / total
            assert covered >= 0.90 - 1e-12
            assert covered <= 0.90 + slack + 1e-12
        assert worst_err_s <= 1.0 / FS + 1e-9


def test_06_weighting_hits_half_power_at_band_edges():
    with criterion(6, "weighting curves -3 dB at realized band edges"):
        rng = np.random.default_rng(3)
        probe = rng.normal(0.0, 100.0, 50_000)
        state = design_filter(WeightingSpec(WeightingKind.LINEAR), FS)
        _, out = apply_filter(state, SampleBuffer(probe, FS, 0.0, 0))
        assert state.sos is None
        assert np.array_equal(out.samples, probe)

        for fs in (512_000.0, 16_000.0):
            n = int(fs) * 16  # rfft bin spacing of 1/16 Hz: edges land on bins
            impulse = np.zeros(n)
            impulse[0] = 1.0
            for kind in (WeightingKind.LFC, WeightingKind.MFC):
                spec = WeightingSpec(kind)
                st = design_filter(spec, fs)
                _, resp = apply_filter(st, SampleBuffer(impulse, fs, 0.0, 0))
                mag = np.abs(np.fft.rfft(resp.samples))
                f_lo, f_hi = spec.band_hz
                edges = [f_lo]
                if f_hi < NYQUIST_GUARD * (fs / 2.0):
                    edges.append(f_hi)
                for f_edge in edges:
                    level_db = 20.0 * math.log10(mag[int(round(f_edge * 16))])
                    assert abs(level_db - HALF_POWER_DB) <= 0.5, (
                        f"{kind.value} at {f_edge} Hz, fs {fs}: {level_db:.3f} dB"
                    )


def test_07_end_to_end_recovery_of_timing_and_energy(survey, serial_run):
    spec, result = survey
    path, _, wall_s = serial_run
    with criterion(7, "end-to-end timing and energy recovery"):
        assert wall_s < 60.0
        truth = {(g.channel_id, g.pulse_index): g for g in result.truths}
        rows = read_catalog(path)
        per_stream = collections.Counter(
            (r["channel_id"], r["weighting"]) for r in rows
        )
        assert set(per_stream) == {
            (ch, w)
            for ch in range(spec.channel_count)
            for w in ("linear", "lfc", "mfc")
        }
        assert set(per_stream.values()) == {spec.pulse_count}

        worst_t = worst_sel = 0.0
        for r in rows:
            g = truth[(r["channel_id"], r["pulse_index"])]
            worst_t = max(worst_t, abs(r["t_a_s"] - g.t_true_s))
            worst_sel = max(worst_sel, abs(r["early_sel_db"] - g.sel_analytic_db))
        assert worst_t <= 1.0 / FS + 1e-9
        assert worst_sel <= 0.5


def test_08_parallel_catalogs_byte_identical(survey, serial_run, tmp_path):
    _, result = survey
    path, _, _ = serial_run
    manifests = open_manifest(result.manifest_path)
    with criterion(8, "parallel catalogs byte-identical to serial"):
        want = path.read_bytes()
        for workers in (2, 4, 8):
            out = tmp_path / f"catalog_w{workers}.csv"
            got_path, _ = run(
                RunConfig(
                    out_path=out,
                    detector=DETECTOR,
                    mode="parallel",
                    worker_count=workers,
                ),
                manifests,
            )
            assert got_path.read_bytes() == want, f"worker_count={workers}"


def test_09_four_way_parallel_halves_wall_time(tmp_path):
    with criterion(9, "4-way parallel at most half the serial wall time"):
        cpus = cpu_count()
        if cpus < 4:
            pytest.skip(f"parallel speedup needs at least 4 cpus, host has {cpus}")
        spec = SurveySpec(
            channel_count=4,
            duration_s=630.0,
            pulse_count=62,
            noise_rms_upa=0.0,
            seed=5,
        )
        result = generate(spec, tmp_path / "survey")
        manifests = open_manifest(result.manifest_path)

        serial_out = tmp_path / "serial.csv"
        started = time.perf_counter()
        run(RunConfig(out_path=serial_out, detector=DETECTOR), manifests)
        t_serial = time.perf_counter() - started

        parallel_out = tmp_path / "parallel.csv"
        started = time.perf_counter()
        run(
            RunConfig(
                out_path=parallel_out,
                detector=DETECTOR,
                mode="parallel",
                worker_count=4,
            ),
            manifests,
        )
        t_parallel = time.perf_counter() - started

        print(
            f"serial {t_serial:.2f} s, parallel(4) {t_parallel:.2f} s, "
            f"ratio {t_parallel / t_serial:.2f}"
        )
        assert parallel_out.read_bytes() == serial_out.read_bytes()
        assert t_parallel <= 0.5 * t_serial
