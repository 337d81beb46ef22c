"""Spectral primitives: radix-2 FFT, power spectra, orthonormal DCT-II,
and the mel filterbank.

Everything here operates on plain float64/complex128 arrays and is a pure
function of its inputs. Frame-shaped inputs are row-major: one frame per row.
"""

from __future__ import annotations

import numpy as np

from .errors import BadFilterSpec, BadNfft


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def fft_radix2(frames: np.ndarray, nfft: int) -> np.ndarray:
    """Iterative radix-2 decimation-in-time FFT of each row.

    :param frames: real or complex array of shape (num_frames, frame_len)
        with frame_len <= nfft; rows are zero-padded to nfft.
    :param nfft: transform size, a power of two.
    :returns: complex128 array of shape (num_frames, nfft).
    """
    if not is_power_of_two(nfft):
        raise BadNfft(f"nfft must be a power of two, got {nfft}")
    frames = np.atleast_2d(frames)
    if frames.shape[1] > nfft:
        raise BadNfft(
            f"nfft {nfft} is smaller than the frame length {frames.shape[1]}"
        )
    n_rows = frames.shape[0]
    data = np.zeros((n_rows, nfft), dtype=np.complex128)
    data[:, : frames.shape[1]] = frames

    # bit-reversal permutation of the columns
    levels = nfft.bit_length() - 1
    idx = np.arange(nfft)
    rev = np.zeros(nfft, dtype=int)
    for _ in range(levels):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    data = data[:, rev]

    size = 2
    while size <= nfft:
        half = size // 2
        twiddle = np.exp(-2j * np.pi * np.arange(half) / size)
        blocks = data.reshape(n_rows, nfft // size, size)
        even = blocks[:, :, :half].copy()
        odd = blocks[:, :, half:] * twiddle
        blocks[:, :, :half] = even + odd
        blocks[:, :, half:] = even - odd
        size *= 2
    return data


def power_spectrum_frames(frames: np.ndarray, nfft: int) -> np.ndarray:
    """Per-frame periodogram: |FFT(frame zero-padded to nfft)|^2 / nfft
    over the nfft/2 + 1 non-redundant bins.
    """
    spectrum = fft_radix2(frames, nfft)[:, : nfft // 2 + 1]
    return (spectrum.real**2 + spectrum.imag**2) / nfft


def hamming(length: int) -> np.ndarray:
    """Hamming window, 0.54 - 0.46 cos(2 pi n / (N - 1))."""
    if length == 1:
        return np.ones(1)
    n = np.arange(length)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / (length - 1))


def dct_ii_matrix(size: int) -> np.ndarray:
    """Orthonormal DCT-II basis; row k dotted with a signal gives coefficient k.

    Orthonormality means the transpose is the inverse, so
    ``dct_ii_matrix(n).T @ (dct_ii_matrix(n) @ x)`` recovers ``x``.
    """
    k = np.arange(size)[:, None]
    n = np.arange(size)[None, :]
    basis = np.cos(np.pi * (2 * n + 1) * k / (2 * size))
    basis *= np.sqrt(2.0 / size)
    basis[0] *= np.sqrt(0.5)
    return basis


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=float) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=float) / 2595.0) - 1.0)


def mel_filterbank(
    nfilt: int, nfft: int, rate: float, f_low: float = 0.0, f_high: float | None = None
) -> np.ndarray:
    """Triangular mel filterbank of shape (nfilt, nfft/2 + 1).

    Filter peaks are equally spaced on the mel scale; each row rises linearly
    to exactly 1 at its center bin and falls back to 0, so adjacent filters
    overlap. Raises BadFilterSpec when parameters are out of range or when
    bin quantization collapses two adjacent mel points onto one bin.
    """
    if f_high is None:
        f_high = rate / 2.0
    if nfilt < 2:
        raise BadFilterSpec(f"need at least 2 filters, got {nfilt}")
    if not (0 <= f_low < f_high <= rate / 2.0):
        raise BadFilterSpec(
            f"need 0 <= f_low < f_high <= rate/2, got ({f_low}, {f_high}) at {rate} Hz"
        )
    if not is_power_of_two(nfft):
        raise BadNfft(f"nfft must be a power of two, got {nfft}")

    mel_points = np.linspace(hz_to_mel(f_low), hz_to_mel(f_high), nfilt + 2)
    bins = np.floor((nfft + 1) * mel_to_hz(mel_points) / rate).astype(int)
    if np.any(np.diff(bins) < 1):
        raise BadFilterSpec(
            f"mel points collapse under bin quantization (nfft={nfft}, rate={rate})"
        )

    bank = np.zeros((nfilt, nfft // 2 + 1))
    for j in range(nfilt):
        left, center, right = bins[j], bins[j + 1], bins[j + 2]
        for i in range(left, center):
            bank[j, i] = (i - left) / (center - left)
        for i in range(center, right):
            bank[j, i] = (right - i) / (right - center)
    return bank
