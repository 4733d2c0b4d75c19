"""Python access to the voice_ehr signal, transcript and rating utilities."""

from ._core import (
    CANONICAL_SAMPLE_RATE,
    RAINBOW_PASSAGE,
    VoiceEhrError,
    aggregate,
    clipping_fraction,
    deep_breath_count,
    find_consistent_histogram,
    max_phonation_time,
    next_page,
    required_pages,
    respiratory_rate,
    rms_dbfs,
    should_transcribe,
    word_error_rate,
)

__all__ = [
    "CANONICAL_SAMPLE_RATE",
    "RAINBOW_PASSAGE",
    "VoiceEhrError",
    "aggregate",
    "clipping_fraction",
    "deep_breath_count",
    "find_consistent_histogram",
    "max_phonation_time",
    "next_page",
    "required_pages",
    "respiratory_rate",
    "rms_dbfs",
    "should_transcribe",
    "word_error_rate",
]
