import numpy as np
import pytest

from airgunkit.signal_io import SampleBuffer
from airgunkit.synth import SurveySpec, generate


def make_buffer(samples, fs=16000.0, start=0.0, channel=0) -> SampleBuffer:
    return SampleBuffer(np.asarray(samples, dtype=np.float64), fs, start, channel)


@pytest.fixture(scope="session")
def small_survey(tmp_path_factory):
    """Two short channels with reverb so late windows carry real energy."""
    spec = SurveySpec(
        channel_count=2,
        duration_s=66.0,
        pulse_count=6,
        reverb_level_upa=2.0e4,
        noise_rms_upa=0.0,
        seed=11,
    )
    out = tmp_path_factory.mktemp("small_survey")
    result = generate(spec, out)
    return spec, result
