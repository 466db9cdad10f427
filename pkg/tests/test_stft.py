import numpy as np
import pytest

from eeg import (
    Recording,
    Spectrogram,
    default_wsize,
    dft,
    fft,
    load_binary_recording,
    load_recording,
    load_text_recording,
    magnitude,
    save_binary_recording,
    save_text_recording,
    stft,
)
from eeg.stft import frame_count
from errors import FormatError, ValidationError


def recording(data, rate=256.0):
    return Recording(np.atleast_2d(np.asarray(data, dtype=np.float64)), sample_rate_hz=rate)


def one_sided_energy(coeffs: np.ndarray, n: int) -> float:
    power = np.abs(coeffs) ** 2
    weights = np.full(power.shape[-1], 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0
    return float((power * weights).sum() / n)


# ----------------------------------------------------------------------
# DFT / FFT
# ----------------------------------------------------------------------

def test_fft_matches_direct_dft_on_random_signals():
    r = np.random.default_rng(0)
    for _ in range(50):
        n = 2 ** int(r.integers(1, 11))
        x = r.standard_normal(n) + 1j * r.standard_normal(n)
        np.testing.assert_allclose(fft(x), dft(x), rtol=0, atol=1e-9)


def test_fft_matches_numpy_along_last_axis(rng):
    x = rng.standard_normal((3, 5, 64))
    np.testing.assert_allclose(fft(x), np.fft.fft(x, axis=-1), atol=1e-10)


def test_fft_rejects_non_power_of_two():
    with pytest.raises(ValidationError):
        fft(np.ones(12))


# ----------------------------------------------------------------------
# stft
# ----------------------------------------------------------------------

def test_zero_recording_gives_zero_spectrogram():
    spec = stft(recording(np.zeros((2, 64))), wsize=16)
    assert spec.values.shape == (4, 9, 2)
    assert np.all(spec.values == 0)


def test_dc_signal_concentrates_in_bin_zero():
    spec = stft(recording(np.ones((1, 64))), wsize=16, window="rectangular")
    mags = magnitude(spec)
    assert np.allclose(mags[:, 0, 0], 16.0)
    assert np.all(mags[:, 1:, 0] < 1e-10 * mags[:, :1, 0])


@pytest.mark.parametrize("k", [1, 3, 8, 16])
def test_bin_aligned_sinusoid_matches_direct_dft(k):
    wsize, rate = 32, 128.0
    t = np.arange(4 * wsize) / rate
    rec = recording(np.sin(2 * np.pi * (k * rate / wsize) * t), rate)
    spec = stft(rec, wsize, window="rectangular")
    for f in range(spec.n_frames):
        segment = rec.data[0, f * wsize:(f + 1) * wsize]
        expected = dft(segment)[: wsize // 2 + 1]
        np.testing.assert_allclose(spec.values[f, :, 0], expected, rtol=0, atol=1e-9)
    if k < wsize // 2:
        assert np.argmax(magnitude(spec)[0, :, 0]) == k


def test_hann_window_matches_direct_dft_of_tapered_segments(rng):
    wsize, hop = 16, 8
    rec = recording(rng.standard_normal((2, 70)))
    spec = stft(rec, wsize, hop=hop)
    taper = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(wsize) / wsize)
    padded = np.pad(rec.data, ((0, 0), (0, (spec.n_frames - 1) * hop + wsize - 70)))
    for f in range(spec.n_frames):
        segment = padded[:, f * hop:f * hop + wsize] * taper
        np.testing.assert_allclose(spec.values[f].T, dft(segment)[:, : wsize // 2 + 1], atol=1e-9)


def test_parseval_energy_with_rectangular_window(rng):
    wsize = 64
    x = rng.standard_normal((3, wsize * 5))
    spec = stft(recording(x), wsize, window="rectangular")
    energy = sum(one_sided_energy(spec.values[:, :, c], wsize) for c in range(3))
    assert energy == pytest.approx(float((x ** 2).sum()), rel=1e-6)


def test_stft_is_linear(rng):
    x, y = rng.standard_normal((2, 100)), rng.standard_normal((2, 100))
    a, b = 1.7, -0.4
    combined = stft(recording(a * x + b * y), 16, hop=6).values
    separate = a * stft(recording(x), 16, hop=6).values + b * stft(recording(y), 16, hop=6).values
    np.testing.assert_allclose(combined, separate, atol=1e-9)


@pytest.mark.parametrize("n,wsize,hop,frames", [(96, 16, 16, 6), (100, 16, 10, 10), (100, 16, 12, 8), (16, 16, 4, 1)])
def test_frame_count(n, wsize, hop, frames):
    assert frame_count(n, wsize, hop) == frames
    spec = stft(recording(np.ones((1, n))), wsize, hop=hop)
    assert spec.n_frames == frames


def test_spectrogram_geometry():
    spec = stft(recording(np.ones((4, 512)), rate=250.0), wsize=64)
    assert spec.n_bins == 33
    assert spec.freq_resolution_hz == pytest.approx(250.0 / 64)
    assert spec.values.shape == (8, 33, 4)
    assert spec.nyquist_hz == 125.0


@pytest.mark.parametrize("kwargs", [dict(wsize=15), dict(wsize=2), dict(wsize=16, hop=0), dict(wsize=16, hop=17),
                                    dict(wsize=16, window="kaiser"), dict(wsize=128)])
def test_stft_rejects_bad_arguments(kwargs):
    with pytest.raises(ValidationError):
        stft(recording(np.ones((1, 64))), **kwargs)


def test_magnitude():
    spec = Spectrogram(np.array([[[3 + 4j, 0j]]]), freq_resolution_hz=1.0, hop=4, wsize=4, sample_rate_hz=4.0)
    np.testing.assert_array_equal(magnitude(spec), [[[5.0, 0.0]]])


def test_magnitude_matches_scalar_oracle(rng):
    values = rng.standard_normal((3, 5, 2)) + 1j * rng.standard_normal((3, 5, 2))
    spec = Spectrogram(values, freq_resolution_hz=1.0, hop=8, wsize=8, sample_rate_hz=8.0)
    expected = np.vectorize(lambda z: (z.real ** 2 + z.imag ** 2) ** 0.5)(values)
    np.testing.assert_allclose(magnitude(spec), expected, atol=1e-12)


@pytest.mark.parametrize("rate,size,expected", [(250.0, 32, 64), (250.0, 128, 256), (1000.0, 128, 1024)])
def test_default_wsize_fits_cut_into_image(rate, size, expected):
    assert default_wsize(rate, 100.0, size) == expected


def test_default_wsize_respects_recording_length():
    assert default_wsize(250.0, 100.0, 128, n_samples=100) == 64


# ----------------------------------------------------------------------
# Recording formats
# ----------------------------------------------------------------------

def test_recording_rejects_nan():
    with pytest.raises(ValidationError):
        recording([[0.0, np.nan]])


def test_binary_recording_round_trip(tmp_path, rng):
    data = rng.standard_normal((3, 40)).astype(np.float32)
    rec = Recording(data, sample_rate_hz=250.0, label="happy")
    path = save_binary_recording(rec, tmp_path / "happy_0.eegr")
    assert path.stat().st_size == 16 + 3 * 40 * 4

    loaded = load_binary_recording(path)
    np.testing.assert_array_equal(loaded.data, data.astype(np.float64))
    assert loaded.sample_rate_hz == 250.0
    assert load_recording(path).n_channels == 3


def test_text_recording_uses_channels_as_columns(tmp_path):
    path = tmp_path / "rec.csv"
    path.write_text("Fp1,Fp2\n1.0,2.0\n3.0,4.0\n5.0,6.0\n")
    rec = load_text_recording(path, sample_rate_hz=200.0, label="sad")
    assert rec.channel_names == ["Fp1", "Fp2"]
    np.testing.assert_array_equal(rec.data, [[1.0, 3.0, 5.0], [2.0, 4.0, 6.0]])
    assert rec.label == "sad"


def test_text_recording_round_trip(tmp_path):
    rec = Recording(np.arange(12.0).reshape(2, 6) / 4, sample_rate_hz=100.0, channel_names=["a", "b"])
    path = save_text_recording(rec, tmp_path / "rec.csv")
    loaded = load_recording(path, sample_rate_hz=100.0)
    np.testing.assert_array_equal(loaded.data, rec.data)
    assert loaded.channel_names == ["a", "b"]


def test_text_recording_needs_sample_rate(tmp_path):
    path = tmp_path / "rec.csv"
    path.write_text("a\n1\n2\n")
    with pytest.raises(ValidationError):
        load_recording(path)


def test_binary_recording_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_binary_recording(tmp_path / "missing.eegr")

    bad_magic = tmp_path / "bad.eegr"
    bad_magic.write_bytes(b"XXXX" + bytes(12))
    with pytest.raises(FormatError):
        load_binary_recording(bad_magic)

    rec = Recording(np.ones((2, 8)), sample_rate_hz=100.0)
    truncated = tmp_path / "short.eegr"
    truncated.write_bytes(save_binary_recording(rec, tmp_path / "full.eegr").read_bytes()[:-4])
    with pytest.raises(FormatError):
        load_binary_recording(truncated)
