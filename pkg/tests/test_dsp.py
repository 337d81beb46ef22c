import math

import numpy as np
import pytest

from gatefuse.dsp import (
    dct_ii_matrix,
    fft_radix2,
    hamming,
    hz_to_mel,
    mel_filterbank,
    mel_to_hz,
    power_spectrum_frames,
)
from gatefuse.errors import BadFilterSpec, BadNfft


def naive_dft(x, nfft):
    """O(n^2) DFT straight from the definition; the oracle side of the check."""
    padded = np.zeros(nfft, dtype=complex)
    padded[: len(x)] = x
    k = np.arange(nfft)
    out = np.empty(nfft, dtype=complex)
    for bin_k in range(nfft):
        out[bin_k] = np.sum(padded * np.exp(-2j * np.pi * bin_k * k / nfft))
    return out


def naive_dct_ii(x):
    """Direct orthonormal DCT-II summation."""
    n = len(x)
    out = np.empty(n)
    for k in range(n):
        acc = 0.0
        for i in range(n):
            acc += x[i] * math.cos(math.pi * (2 * i + 1) * k / (2 * n))
        scale = math.sqrt(1.0 / n) if k == 0 else math.sqrt(2.0 / n)
        out[k] = scale * acc
    return out


class TestFft:
    def test_matches_naive_dft(self):
        rng = np.random.default_rng(42)
        frames = rng.uniform(-1, 1, size=(16, 200))
        got = fft_radix2(frames, 256)
        for i in range(16):
            want = naive_dft(frames[i], 256)
            np.testing.assert_allclose(got[i], want, atol=1e-9)

    def test_impulse_is_flat(self):
        x = np.zeros(64)
        x[0] = 1.0
        np.testing.assert_allclose(fft_radix2(x, 64)[0], np.ones(64), atol=1e-12)

    def test_rejects_non_power_of_two(self):
        with pytest.raises(BadNfft):
            fft_radix2(np.zeros((1, 4)), 48)

    def test_rejects_short_nfft(self):
        with pytest.raises(BadNfft):
            fft_radix2(np.zeros((1, 100)), 64)

    def test_parseval(self):
        # sum over all bins of |X|^2 / nfft equals the frame's total energy
        rng = np.random.default_rng(0)
        for nfft in (64, 256, 512):
            frame = rng.normal(size=nfft // 2) * hamming(nfft // 2)
            spectrum = fft_radix2(frame, nfft)[0]
            total_power = np.sum(np.abs(spectrum) ** 2) / nfft
            np.testing.assert_allclose(
                total_power, np.sum(frame**2), rtol=1e-6
            )


class TestPowerSpectrum:
    def test_sine_at_bin_frequency_concentrates(self):
        nfft = 256
        k = 19
        t = np.arange(nfft)
        frame = np.sin(2 * np.pi * k * t / nfft)
        spec = power_spectrum_frames(frame, nfft)[0]
        assert np.argmax(spec) == k
        others = np.delete(spec, k)
        assert spec[k] > 1e6 * np.max(others)

    def test_zero_frame_gives_zero_row(self):
        spec = power_spectrum_frames(np.zeros((3, 128)), 128)
        assert spec.shape == (3, 65)
        assert np.all(spec == 0)

    def test_matches_naive_dft_oracle(self):
        rng = np.random.default_rng(7)
        frames = rng.uniform(-1, 1, size=(64, 400))
        nfft = 512
        got = power_spectrum_frames(frames, nfft)
        for i in range(64):
            full = naive_dft(frames[i], nfft)
            want = np.abs(full[: nfft // 2 + 1]) ** 2 / nfft
            np.testing.assert_allclose(got[i], want, atol=1e-9)


class TestDct:
    def test_matches_direct_summation(self):
        rng = np.random.default_rng(5)
        for n in (4, 13, 26):
            x = rng.normal(size=n)
            got = dct_ii_matrix(n) @ x
            np.testing.assert_allclose(got, naive_dct_ii(x), atol=1e-10)

    def test_orthonormal_round_trip(self):
        rng = np.random.default_rng(6)
        basis = dct_ii_matrix(26)
        x = rng.normal(size=26)
        np.testing.assert_allclose(basis.T @ (basis @ x), x, atol=1e-10)

    def test_constant_input(self):
        n = 26
        v = 3.25
        coeffs = dct_ii_matrix(n) @ np.full(n, v)
        np.testing.assert_allclose(coeffs[0], v * np.sqrt(n), atol=1e-10)
        np.testing.assert_allclose(coeffs[1:], 0.0, atol=1e-10)


class TestHamming:
    def test_formula(self):
        length = 400
        window = hamming(length)
        for k in (0, 1, 57, 199, 399):
            want = 0.54 - 0.46 * math.cos(2 * math.pi * k / (length - 1))
            assert abs(window[k] - want) < 1e-12


class TestMelFilterbank:
    def test_each_row_peaks_at_one(self):
        bank = mel_filterbank(26, 512, 16000.0)
        assert bank.shape == (26, 257)
        for row in bank:
            assert np.max(row) == 1.0
            assert np.count_nonzero(row == 1.0) == 1

    def test_coverage_between_first_and_last_peak(self):
        bank = mel_filterbank(26, 512, 16000.0)
        peaks = [int(np.argmax(row)) for row in bank]
        weight = bank.sum(axis=0)
        assert np.all(weight[peaks[0] : peaks[-1] + 1] > 0)

    def test_center_bins_match_hand_computed_mel_points(self):
        nfilt, nfft, rate = 26, 512, 16000.0
        bank = mel_filterbank(nfilt, nfft, rate)
        # independent evaluation of the mel / inverse-mel formulas
        low_mel = 2595.0 * math.log10(1.0 + 0.0 / 700.0)
        high_mel = 2595.0 * math.log10(1.0 + (rate / 2) / 700.0)
        for j in range(nfilt):
            mel = low_mel + (high_mel - low_mel) * (j + 1) / (nfilt + 1)
            hz = 700.0 * (10.0 ** (mel / 2595.0) - 1.0)
            want_bin = math.floor((nfft + 1) * hz / rate)
            assert int(np.argmax(bank[j])) == want_bin

    def test_mel_round_trip(self):
        freqs = np.array([0.0, 300.0, 1000.0, 4000.0, 8000.0])
        np.testing.assert_allclose(mel_to_hz(hz_to_mel(freqs)), freqs, atol=1e-9)

    def test_bad_specs(self):
        with pytest.raises(BadFilterSpec):
            mel_filterbank(1, 512, 16000.0)
        with pytest.raises(BadFilterSpec):
            mel_filterbank(26, 512, 16000.0, f_low=9000.0, f_high=8000.0)
        with pytest.raises(BadFilterSpec):
            mel_filterbank(26, 512, 16000.0, f_low=0.0, f_high=9000.0)
        with pytest.raises(BadFilterSpec):
            # 64-point FFT cannot host 26 distinct triangle centers
            mel_filterbank(26, 64, 16000.0)
