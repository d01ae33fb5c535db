import math
import struct
import wave

import numpy as np
import pytest

from blendaug.audio import (
    AudioBuffer,
    AudioFormatError,
    SampleSpan,
    SilentDonorError,
    normalize_energy,
    read_wav,
    rms,
    splice,
    write_wav,
)


def write_raw_wav(path, int16_values, rate=16000, channels=1, sampwidth=2):
    with wave.open(str(path), "wb") as handle:
        handle.setnchannels(channels)
        handle.setsampwidth(sampwidth)
        handle.setframerate(rate)
        handle.writeframes(np.asarray(int16_values, dtype="<i2").tobytes())


def read_raw_int16(path):
    with wave.open(str(path), "rb") as handle:
        raw = handle.readframes(handle.getnframes())
    return np.frombuffer(raw, dtype="<i2")


class TestAudioBuffer:
    def test_rejects_non_mono(self):
        with pytest.raises(ValueError, match="1-D"):
            AudioBuffer(np.zeros((4, 2)), 16000)

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError, match="sample_rate"):
            AudioBuffer(np.zeros(4), 0)

    def test_samples_are_read_only(self):
        buf = AudioBuffer(np.zeros(4), 16000)
        with pytest.raises(ValueError):
            buf.samples[0] = 1.0

    def test_duration(self):
        assert AudioBuffer(np.zeros(8000), 16000).duration == 0.5


class TestReadWav:
    def test_zero_signal(self, tmp_path):
        path = tmp_path / "zeros.wav"
        write_raw_wav(path, np.zeros(160, dtype="<i2"))
        buf = read_wav(path)
        assert len(buf) == 160
        assert buf.sample_rate == 16000
        assert np.all(buf.samples == 0.0)

    def test_int16_scaling_exact(self, tmp_path):
        path = tmp_path / "half.wav"
        write_raw_wav(path, [16384])
        buf = read_wav(path)
        assert buf.samples[0] == 0.5  # 16384/32768 is exactly representable

    def test_rejects_stereo(self, tmp_path):
        path = tmp_path / "stereo.wav"
        write_raw_wav(path, np.zeros(64, dtype="<i2"), channels=2)
        with pytest.raises(AudioFormatError, match="channel count"):
            read_wav(path)

    def test_rejects_8bit(self, tmp_path):
        path = tmp_path / "8bit.wav"
        write_raw_wav(path, np.zeros(16, dtype="<i2"), sampwidth=1)
        with pytest.raises(AudioFormatError, match="sample width"):
            read_wav(path)

    def test_rejects_non_pcm(self, tmp_path):
        # hand-built RIFF header with format tag 3 (IEEE float)
        path = tmp_path / "float.wav"
        header = struct.pack(
            "<4sI4s4sIHHIIHH4sI",
            b"RIFF", 36, b"WAVE", b"fmt ", 16, 3, 1, 16000, 64000, 4, 32, b"data", 0,
        )
        path.write_bytes(header)
        with pytest.raises(AudioFormatError, match="PCM"):
            read_wav(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_wav(tmp_path / "nope.wav")


class TestWriteWav:
    def test_clamps_out_of_range(self, tmp_path):
        path = tmp_path / "clip.wav"
        write_wav(AudioBuffer(np.array([1.5, -1.5]), 16000), path)
        stored = read_raw_int16(path)
        assert stored[0] == 32767
        assert stored[1] == -32768

    def test_roundtrip_zeros_identity(self, tmp_path):
        path = tmp_path / "rt.wav"
        buf = AudioBuffer(np.zeros(64), 16000)
        write_wav(buf, path)
        assert np.array_equal(read_wav(path).samples, buf.samples)

    def test_roundtrip_half_exact(self, tmp_path):
        path = tmp_path / "rt.wav"
        write_wav(AudioBuffer(np.full(8, 0.5), 16000), path)
        assert np.all(read_wav(path).samples == 0.5)

    def test_roundtrip_within_one_step(self, tmp_path):
        rng = np.random.default_rng(11)
        for trial in range(50):
            samples = rng.uniform(-1.0, 1.0, size=200)
            path = tmp_path / f"rt{trial}.wav"
            write_wav(AudioBuffer(samples, 16000), path)
            back = read_wav(path)
            assert np.max(np.abs(back.samples - samples)) <= 1.0 / 32768.0

    def test_refuses_empty(self, tmp_path):
        with pytest.raises(ValueError, match="empty"):
            write_wav(AudioBuffer(np.zeros(0), 16000), tmp_path / "e.wav")

    def test_container_layout_bit_exact(self, tmp_path):
        # independent oracle: parse the RIFF container by hand with struct
        path = tmp_path / "layout.wav"
        samples = np.array([0.0, 0.5, -0.5, 0.25])
        write_wav(AudioBuffer(samples, 16000), path)
        blob = path.read_bytes()
        assert blob[0:4] == b"RIFF"
        assert struct.unpack("<I", blob[4:8])[0] == len(blob) - 8
        assert blob[8:12] == b"WAVE"
        assert blob[12:16] == b"fmt "
        fmt_size, tag, channels, rate, byte_rate, block_align, bits = struct.unpack(
            "<IHHIIHH", blob[16:36]
        )
        assert (fmt_size, tag, channels, rate) == (16, 1, 1, 16000)
        assert bits == 16
        assert byte_rate == 16000 * 2
        assert block_align == 2
        assert blob[36:40] == b"data"
        data_size = struct.unpack("<I", blob[40:44])[0]
        payload = np.frombuffer(blob[44 : 44 + data_size], dtype="<i2")
        assert payload.tolist() == [0, 16384, -16384, 8192]


class TestRms:
    def test_zeros(self):
        assert rms(AudioBuffer(np.zeros(10), 16000)) == 0.0

    def test_constant(self):
        assert rms(np.full(100, 0.5)) == pytest.approx(0.5, abs=1e-12)

    def test_full_scale_sine_whole_periods(self):
        # 10 whole periods of 100 Hz at 16 kHz; closed form 1/sqrt(2)
        n = 1600
        t = np.arange(n) / 16000.0
        signal = np.sin(2.0 * math.pi * 100.0 * t)
        value = rms(signal)
        assert value == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-4)
        # independent sample-loop oracle
        loop = math.sqrt(sum(x * x for x in signal) / n)
        assert value == pytest.approx(loop, abs=1e-12)

    def test_scaling_homogeneity(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            signal = rng.uniform(-1, 1, size=64)
            gain = rng.uniform(-2.0, 2.0)
            assert rms(gain * signal) == pytest.approx(abs(gain) * rms(signal), rel=1e-9)

    def test_empty_error(self):
        with pytest.raises(ValueError, match="empty"):
            rms(np.zeros(0))


class TestNormalizeEnergy:
    def test_halves(self):
        donor = AudioBuffer(np.full(50, 0.2), 16000)
        out = normalize_energy(donor, 0.1)
        assert np.allclose(out.samples, donor.samples * 0.5, atol=0, rtol=0)

    def test_identity_when_matching(self):
        donor = AudioBuffer(np.linspace(-0.5, 0.5, 40), 16000)
        out = normalize_energy(donor, rms(donor))
        assert np.array_equal(out.samples, donor.samples)

    def test_constant_to_target(self):
        donor = AudioBuffer(np.full(30, 0.25), 16000)
        out = normalize_energy(donor, 0.6)
        # gain 2.4, verified samplewise against the scalar product
        assert np.array_equal(out.samples, donor.samples * (0.6 / 0.25))
        assert np.allclose(out.samples, 0.6, atol=1e-12)
        assert rms(out) == pytest.approx(0.6, rel=1e-6)

    def test_silent_donor(self):
        with pytest.raises(SilentDonorError, match="silent donor"):
            normalize_energy(AudioBuffer(np.zeros(10), 16000), 0.5)

    def test_idempotent(self):
        rng = np.random.default_rng(17)
        donor = AudioBuffer(rng.uniform(-0.8, 0.8, size=128), 16000)
        once = normalize_energy(donor, 0.37)
        twice = normalize_energy(once, 0.37)
        assert np.allclose(twice.samples, once.samples, rtol=1e-9, atol=0)

    def test_negative_target(self):
        with pytest.raises(ValueError, match="non-negative"):
            normalize_energy(AudioBuffer(np.full(4, 0.1), 16000), -0.1)


class TestSplice:
    def test_identity_replacement(self):
        rng = np.random.default_rng(3)
        utt = AudioBuffer(rng.uniform(-1, 1, size=500), 16000)
        span = SampleSpan(100, 200)
        out, shift = splice(utt, span, AudioBuffer(utt.samples[100:200], 16000))
        assert shift == 0
        assert np.array_equal(out.samples, utt.samples)

    def test_shrinking_replacement(self):
        utt = AudioBuffer(np.zeros(500), 16000)
        out, shift = splice(utt, SampleSpan(100, 200), AudioBuffer(np.ones(80), 16000))
        assert shift == -20
        assert len(out) == 480

    def test_splice_then_reextract(self):
        rng = np.random.default_rng(9)
        utt = AudioBuffer(rng.uniform(-1, 1, size=400), 16000)
        replacement = AudioBuffer(rng.uniform(-1, 1, size=73), 16000)
        out, shift = splice(utt, SampleSpan(50, 150), replacement)
        again = out.samples[50 : 50 + 73]
        assert np.array_equal(again, replacement.samples)
        assert shift == -27

    def test_length_bookkeeping(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            n = int(rng.integers(20, 200))
            start = int(rng.integers(0, n - 2))
            end = int(rng.integers(start + 1, n))
            m = int(rng.integers(1, 100))
            utt = AudioBuffer(rng.uniform(-1, 1, size=n), 8000)
            out, shift = splice(utt, SampleSpan(start, end), AudioBuffer(np.zeros(m), 8000))
            assert len(out) - len(utt) == shift

    def test_out_of_bounds(self):
        utt = AudioBuffer(np.zeros(100), 16000)
        with pytest.raises(ValueError, match="exceeds"):
            splice(utt, SampleSpan(50, 150), AudioBuffer(np.zeros(10), 16000))

    def test_rate_mismatch(self):
        utt = AudioBuffer(np.zeros(100), 16000)
        with pytest.raises(ValueError, match="sample-rate mismatch"):
            splice(utt, SampleSpan(0, 10), AudioBuffer(np.zeros(10), 8000))


class TestSampleSpan:
    def test_valid(self):
        span = SampleSpan(3, 10)
        assert len(span) == 7

    @pytest.mark.parametrize("start,end", [(-1, 5), (5, 5), (6, 5)])
    def test_invalid(self, start, end):
        with pytest.raises(ValueError):
            SampleSpan(start, end)
