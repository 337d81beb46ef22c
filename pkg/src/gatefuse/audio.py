"""Audio front end: clip loading and the five voice representations
(waveform raster, spectrogram, MFCC, delta-MFCC, log mel filterbank).

The canonical front end is 16 kHz, 4-second clips, 25 ms Hamming windows at
a 10 ms hop, nfft 512, 26 mel filters, 13 cepstral coefficients, pre-emphasis
0.97. Under those settings every clip yields exactly 400 frames, hence
feature vectors of 13 x 400 = 5,200 (MFCC, DMFCC) and 26 x 400 = 10,400
(filterbank) values, and 257 x 400 spectrogram images.

All extractors are pure functions: the same clip gives bit-identical output.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dsp
from .errors import ParseError, UnsupportedCodec


@dataclass(frozen=True)
class FrontEnd:
    """Audio front-end settings; defaults are the canonical configuration."""

    sample_rate: int = 16000
    duration_s: float = 4.0
    win_len_s: float = 0.025
    hop_s: float = 0.010
    preemphasis: float = 0.97
    nfft: int = 512
    n_filters: int = 26
    n_coeffs: int = 13
    f_low: float = 0.0
    f_high: float | None = None
    log_floor: float = 1e-10
    delta_window: int = 2
    raster_width: int = 120
    raster_height: int = 80


CANONICAL = FrontEnd()


@dataclass(frozen=True)
class AudioClip:
    """A fixed-length mono clip with samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        object.__setattr__(
            self, "samples", np.ascontiguousarray(self.samples, dtype=np.float64)
        )
        if self.samples.ndim != 1:
            raise ValueError("AudioClip samples must be one-dimensional")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("AudioClip samples must be finite")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class FrameGrid:
    """Windowed analysis frames, one per row."""

    frames: np.ndarray
    frame_len: int
    hop: int

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]


@dataclass(frozen=True)
class SpectroImage:
    """Min-max normalized log-power image, freq_bins x num_frames."""

    values: np.ndarray


# -- WAV loading --------------------------------------------------------------

_PCM = 1
_IEEE_FLOAT = 3


def _read_wav_file(path: Path) -> tuple[np.ndarray, int]:
    raw = path.read_bytes()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise ParseError(f"{path}: not a RIFF/WAVE file")
    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise ParseError(f"{path}: truncated fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            if len(body) < chunk_size:
                raise ParseError(f"{path}: truncated data chunk")
            data = body
        pos += 8 + chunk_size + (chunk_size & 1)
    if fmt is None or data is None:
        raise ParseError(f"{path}: missing fmt or data chunk")

    audio_format, channels, rate, _, _, bits = fmt
    if channels < 1:
        raise ParseError(f"{path}: bad channel count {channels}")
    if audio_format == _PCM and bits == 16:
        samples = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    elif audio_format == _IEEE_FLOAT and bits == 32:
        samples = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedCodec(
            f"{path}: format {audio_format} at {bits} bits; "
            "only 16-bit PCM and 32-bit float are supported"
        )
    if channels > 1:
        samples = samples[: len(samples) - len(samples) % channels]
        samples = samples.reshape(-1, channels).mean(axis=1)
    return samples, rate


def load_wav(
    path: str | Path, target_rate: int = CANONICAL.sample_rate,
    duration_s: float = CANONICAL.duration_s,
) -> AudioClip:
    """Decode a PCM WAV into a mono clip of exactly `duration_s` seconds.

    Stereo is averaged to mono, the signal is linearly interpolated to
    `target_rate`, zero-padded or truncated to the target length, and clipped
    to [-1, 1]. Raises UnsupportedCodec for non-PCM/non-float32 codecs and
    ParseError for unreadable headers.
    """
    samples, rate = _read_wav_file(Path(path))
    if rate != target_rate and len(samples) > 0:
        src_t = np.arange(len(samples)) / rate
        dst_n = int(round(len(samples) * target_rate / rate))
        dst_t = np.arange(dst_n) / target_rate
        samples = np.interp(dst_t, src_t, samples)
    target_len = int(round(duration_s * target_rate))
    if len(samples) >= target_len:
        samples = samples[:target_len]
    else:
        samples = np.concatenate([samples, np.zeros(target_len - len(samples))])
    return AudioClip(np.clip(samples, -1.0, 1.0), target_rate)


# -- framing ------------------------------------------------------------------

def preemphasize(clip: AudioClip, alpha: float) -> AudioClip:
    """First-difference emphasis: y[0] = x[0], y[t] = x[t] - alpha * x[t-1]."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must be in [0, 1), got {alpha}")
    x = clip.samples
    y = np.empty_like(x)
    y[0] = x[0]
    y[1:] = x[1:] - alpha * x[:-1]
    return AudioClip(y, clip.sample_rate)


def frame_signal(clip: AudioClip, win_len_s: float, hop_s: float) -> FrameGrid:
    """Slice into Hamming-windowed frames starting at multiples of the hop.

    The tail is zero-padded so that num_frames == ceil(duration / hop_s)
    exactly; the canonical clip gives 4.0 / 0.01 = 400 frames.
    """
    if not win_len_s >= hop_s > 0:
        raise ValueError(f"need win_len_s >= hop_s > 0, got ({win_len_s}, {hop_s})")
    frame_len = int(round(win_len_s * clip.sample_rate))
    hop = int(round(hop_s * clip.sample_rate))
    n = len(clip.samples)
    num_frames = max(1, -(-n // hop))
    padded = np.zeros((num_frames - 1) * hop + frame_len)
    padded[:n] = clip.samples
    starts = np.arange(num_frames) * hop
    frames = padded[starts[:, None] + np.arange(frame_len)[None, :]]
    return FrameGrid(frames * dsp.hamming(frame_len), frame_len, hop)


def power_spectrum(grid: FrameGrid, nfft: int) -> np.ndarray:
    """Periodogram of every frame; shape (num_frames, nfft/2 + 1)."""
    return dsp.power_spectrum_frames(grid.frames, nfft)


# -- feature extractors --------------------------------------------------------

def _log_filter_energies(clip: AudioClip, fe: FrontEnd) -> np.ndarray:
    emphasized = preemphasize(clip, fe.preemphasis)
    grid = frame_signal(emphasized, fe.win_len_s, fe.hop_s)
    spectra = power_spectrum(grid, fe.nfft)
    bank = dsp.mel_filterbank(
        fe.n_filters, fe.nfft, clip.sample_rate, fe.f_low, fe.f_high
    )
    return np.log(spectra @ bank.T + fe.log_floor)


def fbank_features(clip: AudioClip, fe: FrontEnd = CANONICAL) -> np.ndarray:
    """Log mel filterbank energies, flattened frame-major (canonical: 10,400)."""
    return _log_filter_energies(clip, fe).ravel()


def mfcc_frames(clip: AudioClip, fe: FrontEnd = CANONICAL) -> np.ndarray:
    """Per-frame cepstra, shape (num_frames, n_coeffs)."""
    log_energies = _log_filter_energies(clip, fe)
    basis = dsp.dct_ii_matrix(fe.n_filters)[: fe.n_coeffs]
    return log_energies @ basis.T


def mfcc_features(clip: AudioClip, fe: FrontEnd = CANONICAL) -> np.ndarray:
    """Cepstral coefficients 0..n_coeffs-1, flattened frame-major (canonical: 5,200)."""
    return mfcc_frames(clip, fe).ravel()


def delta(sequence: np.ndarray, window: int = 2) -> np.ndarray:
    """Regression delta over the frame axis with clamped edges.

    d[t] = sum_{n=1..window} n * (c[t+n] - c[t-n]) / (2 * sum n^2), where
    indices outside the sequence repeat the first/last frame.
    """
    if window < 1:
        raise ValueError("delta window must be >= 1")
    frames = np.asarray(sequence, dtype=np.float64)
    denom = 2.0 * sum(n * n for n in range(1, window + 1))
    t = np.arange(frames.shape[0])
    out = np.zeros_like(frames)
    for n in range(1, window + 1):
        ahead = frames[np.minimum(t + n, len(t) - 1)]
        behind = frames[np.maximum(t - n, 0)]
        out += n * (ahead - behind)
    return out / denom


def dmfcc_features(clip: AudioClip, fe: FrontEnd = CANONICAL) -> np.ndarray:
    """Delta of the MFCC frame sequence, flattened (canonical: 5,200)."""
    return delta(mfcc_frames(clip, fe), fe.delta_window).ravel()


def spectrogram_image(clip: AudioClip, fe: FrontEnd = CANONICAL) -> SpectroImage:
    """Normalized log-power image, (nfft/2 + 1) x num_frames (canonical: 257 x 400).

    Constant input (e.g. silence) maps to an all-zero image.
    """
    emphasized = preemphasize(clip, fe.preemphasis)
    grid = frame_signal(emphasized, fe.win_len_s, fe.hop_s)
    log_power = np.log(power_spectrum(grid, fe.nfft) + fe.log_floor).T
    low, high = log_power.min(), log_power.max()
    if high == low:
        return SpectroImage(np.zeros_like(log_power))
    return SpectroImage((log_power - low) / (high - low))


def waveform_raster(clip: AudioClip, width: int, height: int) -> np.ndarray:
    """Binary amplitude-vs-time plot on a fixed y-range of [-1, 1].

    Every clip shares the same axes regardless of its peak amplitude. Each
    column marks the vertical span the polyline crosses there; spans of
    adjacent columns are bridged so the trace is connected.
    """
    if width < 2 or height < 2:
        raise ValueError("raster needs width, height >= 2")
    samples = np.clip(clip.samples, -1.0, 1.0)
    rows = np.rint((1.0 - samples) / 2.0 * (height - 1)).astype(int)
    cols = np.minimum((np.arange(len(samples)) * width) // len(samples), width - 1)
    image = np.zeros((height, width), dtype=np.uint8)
    prev_last = None
    for c in range(width):
        in_col = rows[cols == c]
        if in_col.size == 0:
            continue
        lo, hi = int(in_col.min()), int(in_col.max())
        if prev_last is not None:
            lo, hi = min(lo, prev_last), max(hi, prev_last)
        image[lo : hi + 1, c] = 1
        prev_last = int(in_col[-1])
    return image


# -- PGM inspection output -----------------------------------------------------

def write_pgm(values: np.ndarray, path: str | Path) -> None:
    """Write a matrix as 8-bit binary PGM (P5); values outside [0,1] are clipped."""
    values = np.asarray(values, dtype=np.float64)
    gray = np.rint(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)
    height, width = gray.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(gray.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a binary PGM back into floats in [0, 1]."""
    raw = Path(path).read_bytes()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4 and pos < len(raw):
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    if len(fields) < 4 or fields[0] != b"P5":
        raise ParseError(f"{path}: not a binary PGM")
    width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    pos += 1
    pixels = np.frombuffer(raw, dtype=np.uint8, count=width * height, offset=pos)
    return pixels.reshape(height, width).astype(np.float64) / maxval
