import struct
from fractions import Fraction

import numpy as np
import pytest

from sicl.audio import (
    Waveform,
    concat_audio,
    duration_seconds,
    load_wav,
    standardize,
    write_wav,
)
from sicl.errors import MalformedWav, RateMismatch, UnsupportedEncoding

from wav_oracles import (
    write_float32_oracle,
    write_pcm16_oracle,
    write_pcm24_oracle,
)


class TestLoadWav:
    def test_silence_identity(self, tmp_path):
        path = tmp_path / "silence.wav"
        write_pcm16_oracle(path, np.zeros(16000), 16000)
        w = load_wav(path)
        assert len(w) == 16000
        assert w.sample_rate == 16000
        assert np.all(w.samples == 0.0)

    def test_stereo_averages_to_mono(self, tmp_path):
        path = tmp_path / "stereo.wav"
        # +0.5 / -0.5 are exact in PCM16, so the average is exactly zero
        interleaved = np.tile([0.5, -0.5], 1000)
        write_pcm16_oracle(path, interleaved, 16000, channels=2)
        w = load_wav(path)
        assert len(w) == 1000
        assert np.all(w.samples == 0.0)

    def test_preserves_original_rate(self, tmp_path):
        path = tmp_path / "8k.wav"
        rng = np.random.RandomState(0)
        samples = (rng.randint(-32768, 32768, size=4000).astype(np.float64)) / 32768.0
        write_pcm16_oracle(path, samples, 8000)
        w = load_wav(path)
        assert len(w) == 4000
        assert w.sample_rate == 8000
        # bit-exact against the fixture the oracle wrote
        np.testing.assert_array_equal(w.samples, samples.astype(np.float32))

    def test_pcm24_roundtrip(self, tmp_path):
        path = tmp_path / "p24.wav"
        ints = [0, 1, -1, (1 << 23) - 1, -(1 << 23), 12345, -54321]
        write_pcm24_oracle(path, ints, 16000)
        w = load_wav(path)
        expected = np.array(ints, dtype=np.float64) / float(1 << 23)
        np.testing.assert_allclose(w.samples, expected, atol=1e-7)

    def test_float32_roundtrip_and_clamp(self, tmp_path):
        path = tmp_path / "f32.wav"
        write_float32_oracle(path, [0.25, -0.75, 1.5, -2.0], 16000)
        w = load_wav(path)
        np.testing.assert_array_equal(
            w.samples, np.array([0.25, -0.75, 1.0, -1.0], dtype=np.float32)
        )

    def test_rejects_non_riff(self, tmp_path):
        path = tmp_path / "bad.wav"
        path.write_bytes(b"not a wav file at all")
        with pytest.raises(MalformedWav):
            load_wav(path)

    def test_rejects_truncated_data(self, tmp_path):
        path = tmp_path / "trunc.wav"
        write_pcm16_oracle(path, np.zeros(1000), 16000)
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) - 500])
        with pytest.raises(MalformedWav):
            load_wav(path)

    def test_rejects_compressed_format(self, tmp_path):
        path = tmp_path / "ulaw.wav"
        fmt = struct.pack("<HHIIHH", 7, 1, 8000, 8000, 1, 8)  # mu-law
        body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
        body += b"data" + struct.pack("<I", 4) + b"\x00" * 4
        path.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
        with pytest.raises(UnsupportedEncoding):
            load_wav(path)

    def test_rejects_empty_data(self, tmp_path):
        path = tmp_path / "empty.wav"
        write_pcm16_oracle(path, np.zeros(0), 16000)
        with pytest.raises(MalformedWav):
            load_wav(path)

    def test_package_writer_roundtrip(self, tmp_path):
        rng = np.random.RandomState(7)
        samples = np.clip(rng.randn(5000) * 0.3, -1, 1).astype(np.float32)
        w = Waveform(samples, 22050)
        p16, pf = tmp_path / "w16.wav", tmp_path / "wf.wav"
        write_wav(p16, w, encoding="pcm16")
        write_wav(pf, w, encoding="float32")
        # write scales by 32767, read by 32768: worst error (|x| + 0.5) / 32768
        np.testing.assert_allclose(load_wav(p16).samples, samples, atol=1.5 / 32768)
        np.testing.assert_array_equal(load_wav(pf).samples, samples)


class TestStandardize:
    def test_identity_at_16k(self):
        w = Waveform(np.linspace(-0.5, 0.5, 1000, dtype=np.float32), 16000)
        assert standardize(w) is w

    def test_upsample_length(self):
        w = Waveform(np.zeros(8000, dtype=np.float32), 8000)
        assert len(standardize(w)) == 16000

    def test_48k_sine_keeps_frequency(self):
        # FFT oracle: the dominant bin of the resampled tone stays at 440 Hz
        t = np.arange(48000) / 48000.0
        w = Waveform((0.5 * np.sin(2 * np.pi * 440 * t)).astype(np.float32), 48000)
        out = standardize(w)
        assert out.sample_rate == 16000
        assert len(out) == 16000
        spectrum = np.abs(np.fft.rfft(out.samples.astype(np.float64)))
        assert abs(int(np.argmax(spectrum)) - 440) <= 1

    def test_44100_length_rounding(self):
        w = Waveform(np.zeros(44100, dtype=np.float32), 44100)
        assert len(standardize(w)) == 16000
        w2 = Waveform(np.zeros(44101, dtype=np.float32), 44100)
        assert len(standardize(w2)) == round(44101 * 16000 / 44100)

    def test_output_in_range_and_finite(self):
        rng = np.random.RandomState(3)
        w = Waveform(np.clip(rng.randn(22050), -1, 1).astype(np.float32), 22050)
        out = standardize(w)
        assert np.all(np.isfinite(out.samples))
        assert out.samples.min() >= -1.0 and out.samples.max() <= 1.0


class TestConcat:
    def test_single_part_identity(self):
        w = Waveform(np.ones(100, dtype=np.float32) * 0.5, 16000)
        assert concat_audio([w], gap_seconds=1.0) is w

    def test_two_parts_no_gap(self):
        a = Waveform(np.full(16000, 0.1, dtype=np.float32), 16000)
        b = Waveform(np.full(16000, 0.2, dtype=np.float32), 16000)
        out = concat_audio([a, b], gap_seconds=0.0)
        assert len(out) == 32000

    def test_three_parts_gap_layout(self):
        # index-arithmetic oracle: lengths 100/200/300, gap 160 samples
        parts = [
            Waveform(np.full(n, 0.5, dtype=np.float32), 16000) for n in (100, 200, 300)
        ]
        out = concat_audio(parts, gap_seconds=0.01)
        assert len(out) == 600 + 2 * 160
        assert np.all(out.samples[100:260] == 0.0)
        assert np.all(out.samples[460:620] == 0.0)
        assert np.all(out.samples[0:100] == 0.5)
        assert np.all(out.samples[260:460] == 0.5)
        assert np.all(out.samples[620:920] == 0.5)

    def test_rate_mismatch(self):
        a = Waveform(np.zeros(100, dtype=np.float32) + 0.1, 16000)
        b = Waveform(np.zeros(100, dtype=np.float32) + 0.1, 8000)
        with pytest.raises(RateMismatch):
            concat_audio([a, b])

    def test_associative_with_zero_gap(self):
        rng = np.random.RandomState(11)
        a, b, c = (
            Waveform(np.clip(rng.randn(n), -1, 1).astype(np.float32), 16000)
            for n in (100, 50, 75)
        )
        left = concat_audio([concat_audio([a, b]), c])
        flat = concat_audio([a, b, c])
        np.testing.assert_array_equal(left.samples, flat.samples)


class TestDuration:
    def test_one_second(self):
        w = Waveform(np.full(16000, 0.1, dtype=np.float32), 16000)
        assert duration_seconds(w) == 1.0

    def test_rational_value(self):
        w = Waveform(np.full(47999, 0.1, dtype=np.float32), 16000)
        expected = float(Fraction(47999, 16000))
        assert abs(duration_seconds(w) - expected) < 1e-9

    def test_zero_length_rejected(self):
        with pytest.raises(MalformedWav):
            Waveform(np.zeros(0, dtype=np.float32), 16000)


class TestPipelineInvariants:
    def test_load_standardize_concat_stays_bounded(self, tmp_path):
        rng = np.random.RandomState(5)
        paths = []
        for i, rate in enumerate((8000, 22050, 48000)):
            p = tmp_path / f"in{i}.wav"
            write_pcm16_oracle(p, np.clip(rng.randn(rate // 2), -1, 1), rate)
            paths.append(p)
        parts = [standardize(load_wav(p)) for p in paths]
        out = concat_audio(parts, gap_seconds=0.05)
        assert np.all(np.isfinite(out.samples))
        assert out.samples.min() >= -1.0 and out.samples.max() <= 1.0

    def test_standardize_idempotent(self):
        w = Waveform(np.clip(np.random.RandomState(9).randn(8000), -1, 1).astype(np.float32), 8000)
        once = standardize(w)
        twice = standardize(once)
        np.testing.assert_array_equal(once.samples, twice.samples)
