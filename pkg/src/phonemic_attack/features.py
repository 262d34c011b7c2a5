"""Log-mel front-end with a hand-written adjoint, plus PGM spectrogram export.

Forward, per frame: Hann window, 512-point real DFT, magnitude,
triangular mel filterbank, ``log(x + LOG_FLOOR)``. The backward pass is
the explicit adjoint of each of those stages (no autodiff).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .audio import SAMPLE_RATE, Waveform

FRAME_LEN = 400
FRAME_HOP = 160
N_FFT = 512
N_BANDS = 40
LOG_FLOOR = 1e-10
MAG_EPS = 1e-12
N_BINS = N_FFT // 2 + 1


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    values: np.ndarray  # (frames, bands)
    frame_hop: int = FRAME_HOP
    frame_len: int = FRAME_LEN

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_bands(self) -> int:
        return self.values.shape[1]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


@lru_cache(maxsize=None)
def mel_filterbank(n_bands: int = N_BANDS, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Triangular filters (peak 1) on the rfft bin grid, shape (n_bands, N_BINS)."""
    edges = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(sample_rate / 2), n_bands + 2))
    freqs = np.arange(N_BINS) * sample_rate / N_FFT
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rise = (freqs - lo) / (mid - lo)
    fall = (hi - freqs) / (hi - mid)
    fb = np.maximum(0.0, np.minimum(rise, fall))
    fb.setflags(write=False)
    return fb


def band_centers(n_bands: int = N_BANDS, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    edges = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(sample_rate / 2), n_bands + 2))
    return edges[1:-1]


@lru_cache(maxsize=None)
def _window() -> np.ndarray:
    win = np.hanning(FRAME_LEN)
    win.setflags(write=False)
    return win


@lru_cache(maxsize=None)
def _rdft_adjoint_weights() -> np.ndarray:
    # irfft counts interior bins twice and DC/Nyquist once; undo that and the 1/N
    wts = np.full(N_BINS, N_FFT / 2.0)
    wts[0] = wts[-1] = N_FFT
    wts.setflags(write=False)
    return wts


def n_frames(n_samples: int) -> int:
    if n_samples < FRAME_LEN:
        return 0
    return (n_samples - FRAME_LEN) // FRAME_HOP + 1


def _frames(samples: np.ndarray) -> np.ndarray:
    if samples.shape[0] < FRAME_LEN:
        raise ValueError(f"waveform of {samples.shape[0]} samples is shorter than one frame ({FRAME_LEN})")
    view = np.lib.stride_tricks.sliding_window_view(samples, FRAME_LEN)
    return view[::FRAME_HOP]


def _spectrum(samples: np.ndarray):
    spec = np.fft.rfft(_frames(samples) * _window(), N_FFT, axis=1)
    re, im = spec.real, spec.imag
    return re, im, np.sqrt(re * re + im * im)


def magnitude_spectrogram(w: Waveform) -> np.ndarray:
    return _spectrum(w.samples)[2]


def log_mel_forward(w: Waveform) -> FeatureMatrix:
    _, _, mag = _spectrum(w.samples)
    mel = mag @ mel_filterbank().T
    return FeatureMatrix(np.log(mel + LOG_FLOOR))


def log_mel_with_pullback(w: Waveform):
    """Features plus a function mapping a feature gradient to a sample gradient.

    Shares the spectrum between the two passes; ``log_mel_backward`` is the
    one-shot form.
    """
    re, im, mag = _spectrum(w.samples)
    fb = mel_filterbank()
    mel = mag @ fb.T + LOG_FLOOR
    n = len(w)

    def pullback(grad) -> np.ndarray:
        g = grad.values if isinstance(grad, FeatureMatrix) else np.asarray(grad, dtype=np.float64)
        if g.shape != mel.shape:
            raise ValueError(f"gradient shape {g.shape} does not match features {mel.shape}")
        g_mag = (g / mel) @ fb
        ok = mag >= MAG_EPS
        scale = np.where(ok, g_mag / np.where(ok, mag, 1.0), 0.0)
        # adjoint of the real DFT: d/dx_n = sum_k Re(G_k exp(+2 pi i k n / N))
        g_spec = (scale * re + 1j * (scale * im)) * _rdft_adjoint_weights()
        g_frames = np.fft.irfft(g_spec, N_FFT, axis=1)[:, :FRAME_LEN] * _window()
        # overlap-add
        starts = np.arange(g_frames.shape[0]) * FRAME_HOP
        idx = starts[:, None] + np.arange(FRAME_LEN)[None, :]
        return np.bincount(idx.ravel(), weights=g_frames.ravel(), minlength=n)

    return FeatureMatrix(np.log(mel)), pullback


def log_mel_backward(w: Waveform, grad) -> np.ndarray:
    """Pull a gradient on the log-mel features back to the waveform samples."""
    return log_mel_with_pullback(w)[1](grad)


def export_spectrogram(w: Waveform, path) -> tuple[int, int]:
    """Write a binary PGM (P5) of the log-magnitude STFT.

    Time runs left to right, frequency bottom to top. Returns (width, height)
    = (frames, N_BINS).
    """
    logmag = np.log(magnitude_spectrogram(w) + LOG_FLOOR)
    lo, hi = float(logmag.min()), float(logmag.max())
    if hi - lo > 0:
        img = np.round((logmag - lo) / (hi - lo) * 255.0)
    else:
        img = np.zeros_like(logmag)
    img = img.astype(np.uint8).T[::-1]  # rows = frequency, top row = Nyquist
    height, width = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())
    return width, height


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    header = blob.split(b"\n", 3)
    if header[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    width, height = map(int, header[1].split())
    return np.frombuffer(header[3], dtype=np.uint8).reshape(height, width)
