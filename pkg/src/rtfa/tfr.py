"""Discrete STFT, spectrogram and related matrices with explicit axis metadata.

The transform of a length-``N`` signal ``f`` with an odd window ``h`` of
length ``2K+1`` and ``M+1`` frequency bins is, in 0-based indices,

    V[r, j] = sum_{k=0}^{2K} f[j + k - K] * h[k] * exp(-2j*pi*k*r / (2M))

for ``r = 0..M`` and frame centers ``j``, with ``f`` zero outside
``0..N-1``.  Row ``r`` sits at ``r * fs / (2M)`` Hz.
"""

from dataclasses import dataclass, field, replace

import numpy as np

_CHUNK_CELLS = 1 << 22  # frames * fft length per FFT call


@dataclass(frozen=True)
class TFRMatrix:
    """A time-frequency (or time-period, or time-quefrency) matrix.

    ``values[r, j]`` sits on the vertical coordinate ``(r + row_offset) *
    bin_width_hz`` and at time ``j * hop * sample_interval``.
    """

    values: np.ndarray
    kind: str
    bin_width_hz: float
    m_bins: int
    sample_interval: float
    hop: int = 1
    row_offset: int = 0
    params: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.values.shape

    @property
    def freqs(self) -> np.ndarray:
        return (np.arange(self.values.shape[0]) + self.row_offset) * self.bin_width_hz

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.shape[1]) * self.hop * self.sample_interval

    def with_values(self, values, kind=None, **params):
        return replace(self, values=values, kind=kind or self.kind, params={**self.params, **params})


@dataclass(frozen=True)
class Window:
    samples: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.samples, dtype=float)
        if h.ndim != 1 or h.size % 2 == 0:
            raise ValueError("window length must be odd")
        if not np.all(np.isfinite(h)):
            raise ValueError("window contains non-finite values")
        h.flags.writeable = False
        object.__setattr__(self, "samples", h)

    @property
    def half_width(self) -> int:
        return (self.samples.size - 1) // 2

    @property
    def center_index(self) -> int:
        """0-based index of the center sample."""
        return self.half_width


def gaussian_window(fs: float, duration: float = 4.0, sigma_fraction: float = 1.0 / 3.0) -> Window:
    """Sampled Gaussian spanning ``duration`` seconds; std is ``sigma_fraction*K`` samples."""
    if fs <= 0 or duration <= 0 or sigma_fraction <= 0:
        raise ValueError("fs, duration and sigma_fraction must be positive")
    K = max(int(round(duration * fs / 2.0)), 1)
    k = np.arange(-K, K + 1)
    return Window(np.exp(-0.5 * (k / (sigma_fraction * K)) ** 2))


def bins_for_width(fs: float, bin_width_hz: float) -> int:
    """M such that fs/(2M) equals ``bin_width_hz`` (rounded to the nearest integer)."""
    return max(int(round(fs / (2.0 * bin_width_hz))), 1)


def stft(f, window: Window, m_bins: int, fs: float = 1.0, hop: int = 1) -> TFRMatrix:
    """Complex STFT, one column per ``hop`` samples starting at sample 0."""
    f = np.asarray(f, dtype=float)
    if f.ndim != 1 or f.size < 1:
        raise ValueError("signal must be a non-empty vector")
    if m_bins < 1 or hop < 1:
        raise ValueError("m_bins and hop must be >= 1")
    h = window.samples
    K = window.half_width
    L = h.size
    n_fft = 2 * m_bins
    n_fold = -(-L // n_fft)
    centers = np.arange(0, f.size, hop)
    padded = np.concatenate([np.zeros(K), f, np.zeros(K)])
    frames_all = np.lib.stride_tricks.sliding_window_view(padded, L)
    out = np.empty((m_bins + 1, centers.size), dtype=complex)
    chunk = max(1, _CHUNK_CELLS // (n_fft * n_fold))
    for a in range(0, centers.size, chunk):
        c = centers[a : a + chunk]
        g = frames_all[c] * h
        if n_fold > 1 or L != n_fft:
            buf = np.zeros((c.size, n_fold * n_fft))
            buf[:, :L] = g
            g = buf.reshape(c.size, n_fold, n_fft).sum(axis=1)
        out[:, a : a + chunk] = np.fft.rfft(g, n=n_fft, axis=1).T
    return TFRMatrix(out, "stft", fs / n_fft, m_bins, 1.0 / fs, hop, 0, {"window_len": L})


def stft_direct(f, window: Window, m_bins: int, hop: int = 1) -> np.ndarray:
    """Term-by-term evaluation of the STFT sum (slow; for checking)."""
    f = np.asarray(f, dtype=float)
    h = window.samples
    K = window.half_width
    N = f.size
    centers = np.arange(0, N, hop)
    V = np.zeros((m_bins + 1, centers.size), dtype=complex)
    r = np.arange(m_bins + 1)
    for jj, j in enumerate(centers):
        for k in range(h.size):
            idx = j + k - K
            if 0 <= idx < N:
                V[:, jj] += f[idx] * h[k] * np.exp(-2j * np.pi * k * r / (2 * m_bins))
    return V


def _require(v: TFRMatrix, kind: str):
    if v.kind != kind:
        raise ValueError(f"expected a {kind} matrix, got {v.kind}")


def spectrogram(v: TFRMatrix) -> TFRMatrix:
    _require(v, "stft")
    return v.with_values(np.abs(v.values) ** 2, "spectrogram")


def power_gamma(v: TFRMatrix, gamma: float) -> TFRMatrix:
    """Entrywise ``|V|**gamma``; a small gamma flattens the dynamic range."""
    _require(v, "stft")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return v.with_values(np.abs(v.values) ** gamma, "power", gamma=gamma)


def rows_below(f_max_hz: float, bin_width_hz: float, m_bins: int) -> int:
    """Number of rows whose frequency does not exceed ``f_max_hz``."""
    if not f_max_hz > 0:
        raise ValueError("f_max must be positive")
    nyquist = m_bins * bin_width_hz
    if f_max_hz > nyquist * (1 + 1e-12):
        raise ValueError(f"f_max={f_max_hz} Hz exceeds the Nyquist frequency {nyquist} Hz")
    return min(1 + int(np.floor(f_max_hz / bin_width_hz + 1e-9)), m_bins + 1)


def truncate_rows(v: TFRMatrix, f_max_hz: float) -> TFRMatrix:
    """Keep the rows at or below ``f_max_hz`` (always at least the DC row)."""
    n = rows_below(f_max_hz, v.bin_width_hz, v.m_bins)
    return v.with_values(v.values[:n], f_max_hz=f_max_hz)
