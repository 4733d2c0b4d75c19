import math

import numpy as np
import pytest

import voice_ehr as ve

RATE = ve.CANONICAL_SAMPLE_RATE


def breathing(bpm, seconds, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(int(seconds * RATE)) / RATE
    env = 0.5 - 0.5 * np.cos(2 * np.pi * bpm / 60.0 * t)
    return (0.2 * env**2 * rng.standard_normal(t.size)).astype(np.float32)


def test_rms_of_full_scale_sine():
    t = np.arange(RATE) / RATE
    assert ve.rms_dbfs(np.sin(2 * np.pi * 440 * t)) == pytest.approx(-3.0103, abs=1e-3)


def test_clipping_fraction_of_square_wave():
    assert ve.clipping_fraction(np.sign(np.sin(np.linspace(0, 20 * math.pi, 8000)))) > 0.99


@pytest.mark.parametrize("bpm", [6, 12, 20])
def test_respiratory_rate(bpm):
    est = ve.respiratory_rate(breathing(bpm, 30.0, seed=bpm))
    assert est["bpm"] == pytest.approx(bpm, abs=1.0)


def test_phonation_time_of_tone_between_silences():
    t = np.arange(int(3.0 * RATE)) / RATE
    tone = 0.3 * np.sin(2 * np.pi * 150 * t) + 0.15 * np.sin(2 * np.pi * 300 * t)
    clip = np.concatenate([np.zeros(RATE // 2), tone, np.zeros(RATE // 2)])
    assert ve.max_phonation_time(clip) == pytest.approx(3.0, abs=0.1)


def test_short_clip_raises():
    with pytest.raises(ve.VoiceEhrError, match="TooShort"):
        ve.respiratory_rate(np.zeros(RATE, dtype=np.float32))


def test_word_error_rate():
    assert ve.word_error_rate(ve.RAINBOW_PASSAGE, ve.RAINBOW_PASSAGE)["wer"] == 0.0
    assert ve.word_error_rate("a b c d", "")["wer"] == 1.0
    assert ve.word_error_rate("the cat sat down", "the bat sat down")["substitutions"] == 1


def test_aggregate_and_oracle_agree():
    match = ve.find_consistent_histogram(41, mean=4.10, median=5, std=1.36, pct_gt2=83, pct_eq5=59)
    assert match["histogram"] == [4, 3, 2, 8, 24]
    ratings = [k + 1 for k, c in enumerate(match["histogram"]) for _ in range(c)]
    agg = ve.aggregate(ratings)
    assert agg["n"] == 41
    assert round(agg["mean"], 2) == 4.10
    assert round(agg["sample_std_dev"], 2) == 1.36
    assert ve.find_consistent_histogram(3, mean=4.9, median=1) is None


def test_protocol_branching():
    assert ve.should_transcribe("P4.1") == "Never"
    assert ve.should_transcribe("P4.2") == "RainbowCheckOnly"
    assert ve.should_transcribe("P1.1") == "Always"
    assert ve.next_page("Control", 7) == 9
    assert ve.next_page("Patient", 7) == 8
    assert ve.next_page("Control", 13) is None
    assert 8 not in ve.required_pages("Control")
    assert len(ve.required_pages("Patient")) == 17
