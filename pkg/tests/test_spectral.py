import numpy as np
import pytest

from dopplerveil import spectral as sp
from dopplerveil.receiver import CfrSeries
from dopplerveil.waveform import BasebandSignal


def _tone(freq, rate, duration, amp=1.0):
    t = np.arange(int(duration * rate)) / rate
    return amp * np.exp(2j * np.pi * freq * t), t


def _series(h_hat, rate=1000.0):
    k = np.arange(h_hat.shape[0]) + 1
    t = np.arange(h_hat.shape[1]) / rate
    return CfrSeries(subcarriers=k, h_hat=h_hat,
                     power=np.abs(h_hat) ** 2, t_s=t, csi_rate_hz=rate)


def test_next_pow2():
    assert sp.next_pow2(1) == 1
    assert sp.next_pow2(5) == 8
    assert sp.next_pow2(1024) == 1024


def test_stft_constant_series_is_dc_only():
    # rect window with n_fft == window_len keeps the constant in the DC bin
    s = sp.stft(np.ones(1000), 1000.0, window_len=500, hop=50, n_fft=500,
                window_kind="rect")
    dc = np.argmin(np.abs(s.freqs_hz))
    off_dc = np.delete(s.power, dc, axis=0)
    assert np.max(off_dc) < 1e-18 * np.max(s.power)


def test_stft_tone_ridge_every_frame():
    x, _ = _tone(100.0, 1000.0, 2.0)
    s = sp.stft(x, 1000.0, window_len=500, hop=50)
    track = sp.peak_doppler_track(s)
    bin_width = s.freqs_hz[1] - s.freqs_hz[0]
    assert np.all(np.abs(track - 100.0) <= bin_width)


def test_stft_frame_parseval():
    rng = np.random.default_rng(14)
    x = rng.standard_normal(700) + 1j * rng.standard_normal(700)
    window_len, hop = 256, 100
    s = sp.stft(x, 1000.0, window_len=window_len, hop=hop)
    win = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(window_len) / window_len)
    for j in range(s.power.shape[1]):
        seg = x[j * hop:j * hop + window_len] * win
        assert np.sum(s.power[:, j]) == pytest.approx(
            np.sum(np.abs(seg) ** 2), rel=1e-9)


def test_stft_conjugate_mirrors_spectrum():
    rng = np.random.default_rng(15)
    x = rng.standard_normal(600) + 1j * rng.standard_normal(600)
    a = sp.stft(x, 1000.0, window_len=256, hop=64)
    b = sp.stft(np.conj(x), 1000.0, window_len=256, hop=64)
    # bin 0 is -Nyquist (no positive counterpart); the rest mirror around DC
    np.testing.assert_allclose(b.power[1:], a.power[1:][::-1], rtol=1e-9,
                               atol=1e-12)


def test_stft_input_validation():
    with pytest.raises(ValueError, match="shorter than one window"):
        sp.stft(np.ones(10), 1000.0, window_len=50, hop=10)
    with pytest.raises(ValueError, match="hop"):
        sp.stft(np.ones(100), 1000.0, window_len=50, hop=0)
    with pytest.raises(ValueError, match="window_len"):
        sp.stft(np.ones(100), 1000.0, window_len=64, hop=10, n_fft=32)
    with pytest.raises(ValueError, match="window kind"):
        sp.stft(np.ones(100), 1000.0, window_len=50, hop=10,
                window_kind="kaiser")


def test_decimate_mean():
    x = np.arange(10, dtype=float)
    np.testing.assert_allclose(sp.decimate_mean(x, 3), [1.0, 4.0, 7.0])


def test_method1_view_static_is_dc_only():
    rng = np.random.default_rng(16)
    x = rng.standard_normal(200_000) + 1j * rng.standard_normal(200_000)
    sig = BasebandSignal(x, 200_000.0)
    s = sp.method1_view(sig, sig, decimate_to_hz=2000.0)
    near_dc = np.abs(s.freqs_hz) <= 5.0  # window mainlobe around DC
    assert np.sum(s.power[near_dc]) / np.sum(s.power) > 0.99


def test_method1_view_validates_inputs():
    a = BasebandSignal(np.ones(100, dtype=complex), 1000.0)
    b = BasebandSignal(np.ones(100, dtype=complex), 2000.0)
    with pytest.raises(ValueError, match="sample rates"):
        sp.method1_view(a, b)
    c = BasebandSignal(np.ones(90, dtype=complex), 1000.0)
    with pytest.raises(ValueError, match="lengths"):
        sp.method1_view(a, c)


def _mover_series(f_d, duration=2.0, rate=1000.0, gain=0.3, n_k=4,
                  los=1.0):
    """Synthetic CFR: static LoS plus one constant-Doppler mover."""
    t = np.arange(int(duration * rate)) / rate
    h = los + gain * np.exp(2j * np.pi * f_d * t)
    return _series(np.tile(h[None, :], (n_k, 1)), rate)


def test_method2_static_channel_is_empty_after_mean_removal():
    series = _series(np.full((4, 2000), 0.7 + 0.2j))
    for component in ("complex", "power"):
        s = sp.method2_view(series, component=component)
        assert np.max(s.power) < 1e-18


def test_method2_single_mover_ridge_at_doppler():
    f_d = 5.8e9 * 0.8 / 299_792_458.0  # 15.48 Hz
    series = _mover_series(f_d)
    bin_width = None
    for component in ("complex", "power"):
        s = sp.method2_view(series, component=component)
        bin_width = s.freqs_hz[1] - s.freqs_hz[0]
        track = sp.peak_doppler_track(s)
        # power mode sees the beat against the LoS at +-f_d
        assert np.all(np.abs(np.abs(track) - f_d) <= bin_width)


def test_method2_power_view_blind_to_unit_modulus_spoofing():
    # |H|^2 cancels any per-(k, t) transmit phase exactly, so the power-mode
    # spectrogram of a spoofed run is identical to the clean one
    series = _mover_series(15.5)
    ramp = np.exp(2j * np.pi * 300.0 * series.t_s)
    spoofed = _series(series.h_hat * ramp[None, :])
    a = sp.method2_view(series, component="power")
    b = sp.method2_view(spoofed, component="power")
    np.testing.assert_allclose(a.power, b.power, atol=1e-12)


def test_method2_complex_view_shifts_under_spoofing():
    series = _mover_series(15.5, los=0.0)
    ramp = np.exp(-2j * np.pi * 300.0 * series.t_s)
    spoofed = _series(series.h_hat * ramp[None, :])
    s = sp.method2_view(spoofed)
    track = sp.peak_doppler_track(s)
    bin_width = s.freqs_hz[1] - s.freqs_hz[0]
    assert np.all(np.abs(track - (15.5 - 300.0)) <= bin_width)


def test_method2_subcarrier_selection_and_errors():
    series = _mover_series(15.5)
    s = sp.method2_view(series, subcarriers=[1, 2])
    assert s.power.shape[1] > 0
    with pytest.raises(ValueError, match="empty subcarrier"):
        sp.method2_view(series, subcarriers=[99])
    with pytest.raises(ValueError, match="component"):
        sp.method2_view(series, component="magnitude")


def test_correlation_properties():
    rng = np.random.default_rng(17)
    x = rng.standard_normal(2000) + 1j * rng.standard_normal(2000)
    a = sp.stft(x, 1000.0, window_len=256, hop=64)
    assert sp.spectrogram_correlation(a, a) == pytest.approx(1.0)
    scaled = sp.Spectrogram(power=3.0 * a.power, freqs_hz=a.freqs_hz,
                            times_s=a.times_s, window_len=a.window_len,
                            hop=a.hop, n_fft=a.n_fft, window_kind=a.window_kind)
    assert sp.spectrogram_correlation(a, scaled) == pytest.approx(1.0)
    y = rng.standard_normal(2000) + 1j * rng.standard_normal(2000)
    b = sp.stft(y, 1000.0, window_len=256, hop=64)
    assert a.power.size >= 1e4
    assert sp.spectrogram_correlation(a, b) < 0.1
    assert sp.spectrogram_correlation(a, b) == pytest.approx(
        sp.spectrogram_correlation(b, a))


def test_correlation_validates_inputs():
    x = np.ones(600)
    a = sp.stft(x, 1000.0, window_len=256, hop=64)
    b = sp.stft(x[:500], 1000.0, window_len=256, hop=64)
    with pytest.raises(ValueError, match="dimensions"):
        sp.spectrogram_correlation(a, b)
    zero = sp.Spectrogram(power=np.ones_like(a.power), freqs_hz=a.freqs_hz,
                          times_s=a.times_s, window_len=a.window_len,
                          hop=a.hop, n_fft=a.n_fft, window_kind=a.window_kind)
    with pytest.raises(ValueError, match="zero-energy"):
        sp.spectrogram_correlation(zero, zero)


def test_occupied_bandwidth_dc_is_one_bin():
    s = sp.stft(np.ones(1000), 1000.0, window_len=500, hop=100, n_fft=500,
                window_kind="rect")
    bin_width = s.freqs_hz[1] - s.freqs_hz[0]
    assert sp.occupied_bandwidth(s) == pytest.approx(bin_width)


def test_occupied_bandwidth_fm_phasor_carson():
    from dopplerveil.obfuscator import SmearParams, smear_phasor
    rate = 2000.0
    t = np.arange(int(2.0 * rate)) / rate
    x = smear_phasor(t, SmearParams(200.0, 10.0))
    s = sp.stft(x, rate, window_len=1000, hop=100)
    assert sp.occupied_bandwidth(s) == pytest.approx(420.0, rel=0.2)


def test_peak_track_constant_tone():
    x, _ = _tone(-42.0, 1000.0, 2.0)
    s = sp.stft(x, 1000.0, window_len=500, hop=100)
    track = sp.peak_doppler_track(s)
    bin_width = s.freqs_hz[1] - s.freqs_hz[0]
    assert np.all(np.abs(track + 42.0) <= bin_width)


def test_peak_track_speed_ratio():
    f0 = 5.8e9 / 299_792_458.0
    slow = sp.method2_view(_mover_series(f0 * 0.8, los=0.0))
    fast = sp.method2_view(_mover_series(f0 * 1.5, los=0.0))
    r = np.max(np.abs(sp.peak_doppler_track(fast))) \
        / np.max(np.abs(sp.peak_doppler_track(slow)))
    assert r == pytest.approx(1.875, rel=0.3)


def test_spectrogram_csv_roundtrip(tmp_path):
    x, _ = _tone(100.0, 1000.0, 1.0)
    s = sp.stft(x, 1000.0, window_len=500, hop=100)
    path = tmp_path / "spec.csv"
    sp.save_spectrogram_csv(s, path)
    back = sp.load_spectrogram_csv(path)
    np.testing.assert_allclose(back.power, s.power, rtol=1e-8)
    np.testing.assert_allclose(back.freqs_hz, s.freqs_hz, rtol=1e-8)
    np.testing.assert_allclose(back.times_s, s.times_s, rtol=1e-8)


def test_spectrogram_pgm_format(tmp_path):
    x, _ = _tone(100.0, 1000.0, 1.0)
    s = sp.stft(x, 1000.0, window_len=500, hop=100)
    path = tmp_path / "spec.pgm"
    sp.save_spectrogram_pgm(s, path)
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n")
    dims = raw.split(b"\n", 3)
    w, h = (int(v) for v in dims[1].split())
    assert (h, w) == s.power.shape
    pixels = np.frombuffer(dims[3], dtype=np.uint8).reshape(h, w)
    assert pixels.max() == 255
    # row 0 holds the highest frequency: the tone row is near the top half
    peak_row, _ = np.unravel_index(np.argmax(pixels), pixels.shape)
    freq_of_row = s.freqs_hz[::-1][peak_row]
    assert freq_of_row == pytest.approx(100.0, abs=s.freqs_hz[1] - s.freqs_hz[0])
