"""Cepstral de-shape baseline: short-time cepstral transform, its inversion and
the masked STFT built from it."""

import numpy as np

from .tfr import TFRMatrix, power_gamma


def stct(v_gamma: TFRMatrix, symmetric: bool = True) -> TFRMatrix:
    """Magnitude of the Fourier transform of each column along frequency.

    With ``symmetric`` (default) each column is mirrored to the full
    two-sided spectrum of a real signal before transforming, so the
    quefrency step equals ``1 / (2M * bin_width)``, which is one sample.
    Otherwise the one-sided rows are transformed as they are.
    """
    if v_gamma.kind != "power":
        raise ValueError(f"expected a power matrix, got {v_gamma.kind}")
    a = v_gamma.values
    R = a.shape[0]
    if symmetric and R > 2:
        a = np.concatenate([a, a[-2:0:-1]], axis=0)
    n = a.shape[0]
    c = np.abs(np.fft.fft(a, axis=0))[: n // 2 + 1]
    dq = 1.0 / (n * v_gamma.bin_width_hz)
    return TFRMatrix(
        c, "quefrency", dq, v_gamma.m_bins, v_gamma.sample_interval, v_gamma.hop, 0,
        {**v_gamma.params, "symmetric": bool(symmetric), "freq_bin_hz": v_gamma.bin_width_hz},
    )


def istct(c: TFRMatrix, freq_grid, q_min_bins: float = 2.0, interp: str = "linear") -> np.ndarray:
    """Sample ``|C(t, 1/xi)|`` on ``freq_grid`` (Hz); returns ``(len(freq_grid), T)``.

    Quefrencies below ``q_min_bins`` quefrency steps, or beyond the last
    computed quefrency, give 0.
    """
    if c.kind != "quefrency":
        raise ValueError(f"expected a quefrency matrix, got {c.kind}")
    xi = np.asarray(freq_grid, dtype=float)
    if xi.ndim != 1 or np.any(xi <= 0) or np.any(np.diff(xi) <= 0):
        raise ValueError("freq_grid must be strictly positive and increasing")
    dq = c.bin_width_hz
    pos = (1.0 / xi) / dq  # fractional quefrency index
    nq = c.values.shape[0]
    valid = (pos >= q_min_bins) & (pos <= nq - 1)
    out = np.zeros((xi.size, c.values.shape[1]))
    pv = pos[valid]
    if interp == "linear":
        lo = np.minimum(np.floor(pv).astype(np.int64), nq - 1)
        hi = np.minimum(lo + 1, nq - 1)
        w = (pv - lo)[:, None]
        out[valid] = (1 - w) * c.values[lo] + w * c.values[hi]
    elif interp == "nearest":
        out[valid] = c.values[np.rint(pv).astype(np.int64)]
    else:
        raise ValueError("interp must be 'linear' or 'nearest'")
    return out


def deshape_stft(v: TFRMatrix, gamma: float = 0.1, freq_grid=None, q_min_bins: float = 2.0,
                 interp: str = "linear") -> TFRMatrix:
    """``|V * U|**2`` where ``U`` is the inverted short-time cepstrum of ``|V|**gamma``.

    ``freq_grid`` must coincide with the rows of ``v`` when given; the DC
    row has no finite quefrency and is zeroed.
    """
    if v.kind != "stft":
        raise ValueError(f"expected an stft matrix, got {v.kind}")
    rows = v.freqs
    if freq_grid is not None:
        g = np.asarray(freq_grid, dtype=float)
        if g.shape != rows.shape or not np.allclose(g, rows, rtol=1e-12, atol=0):
            raise ValueError("freq_grid does not match the STFT rows")
    c = stct(power_gamma(v, gamma))
    U = np.zeros(v.values.shape)
    pos = rows > 0
    U[pos] = istct(c, rows[pos], q_min_bins, interp)
    W = v.values * U
    return v.with_values(np.abs(W) ** 2, "deshape", gamma=gamma, q_min_bins=q_min_bins)
