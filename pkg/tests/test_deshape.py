import numpy as np
import pytest

import rtfa.deshape as deshape_mod
from rtfa.deshape import deshape_stft, istct, stct
from rtfa.signals import anhm_scene, fetal_maternal_scene
from rtfa.tfr import TFRMatrix, bins_for_width, gaussian_window, power_gamma, spectrogram, stft


def power_matrix(cols, bw=0.5):
    cols = np.asarray(cols, dtype=float)
    if cols.ndim == 1:
        cols = cols[:, None]
    return TFRMatrix(cols, "power", bw, cols.shape[0] - 1, 0.01)


def interior_columns(n_samples, window, hop):
    centers = np.arange(0, n_samples, hop)
    K = window.half_width
    return np.flatnonzero((centers >= K) & (centers <= n_samples - 1 - K))


def test_constant_column_concentrates_at_zero():
    c = stct(power_matrix(np.ones(33)))
    assert c.values[0, 0] > 0
    assert np.allclose(c.values[1:, 0], 0, atol=1e-10)


def test_comb_spacing_peak():
    rows, d, bw = 49, 6, 0.25  # mirrored length 96 is a multiple of d
    col = np.where(np.arange(rows) % d == 0, 1.0, 0.0)
    c = stct(power_matrix(col, bw))
    assert np.isclose(c.bin_width_hz, 1 / (2 * (rows - 1) * bw))
    j = 1 + int(np.argmax(c.values[1:, 0]))
    assert np.isclose(j * c.bin_width_hz, 1 / (d * bw))


def test_istct_comb_peaks_at_fundamental_and_submultiples():
    rows, d, bw = 121, 12, 0.1  # xi0/2 and xi0/3 fall on the grid
    col = np.where(np.arange(rows) % d == 0, 1.0, 0.0)
    c = stct(power_matrix(col, bw))
    xi0 = d * bw
    grid = np.arange(1, rows) * bw
    U = istct(c, grid)[:, 0]
    for k in (1, 2, 3):
        r = int(round(xi0 / k / bw)) - 1
        assert U[r] == pytest.approx(U.max(), rel=1e-9)
    off = [i for i in range(grid.size) if not np.any(np.isclose(grid[i] * np.arange(1, 13), xi0))]
    assert U[off].max() < 0.5 * U.max()


def test_istct_constant_and_knots():
    c = TFRMatrix(np.full((50, 3), 2.5), "quefrency", 0.1, 49, 0.01)
    grid = 1 / (np.arange(2, 49)[::-1] * 0.1)
    assert np.allclose(istct(c, grid), 2.5)
    rng = np.random.default_rng(0)
    c = TFRMatrix(rng.uniform(size=(40, 2)), "quefrency", 0.05, 39, 0.01)
    knots = np.arange(3, 39)[::-1]
    U = istct(c, 1 / (knots * 0.05))
    assert np.allclose(U, c.values[knots], rtol=1e-12)
    assert np.array_equal(istct(c, 1 / (knots * 0.05), interp="nearest"), c.values[knots])


def test_istct_low_quefrency_zeroed_and_validation():
    c = TFRMatrix(np.ones((30, 1)), "quefrency", 0.1, 29, 0.01)
    U = istct(c, np.array([1.0, 5.0, 20.0]), q_min_bins=2.0)  # q = 1, 0.2, 0.05
    assert U[:, 0].tolist() == [1.0, 1.0, 0.0]
    with pytest.raises(ValueError):
        istct(c, np.array([2.0, 1.0]))
    with pytest.raises(ValueError):
        istct(c, np.array([0.0, 1.0]))


def test_flattened_harmonic_signal_cepstrum():
    fs, m = 100.0, bins_for_width(100.0, 0.04)
    sc = anhm_scene(lambda t: 1.2 * np.asarray(t), fs=fs)
    w = gaussian_window(fs, 8.0)
    v = stft(sc.signal, w, m, fs, hop=100)
    c = stct(power_gamma(v, 0.1))
    j = interior_columns(len(sc.signal), w, 100)[3]
    q = c.values[:, j]
    period_bin = 1 / 1.2 / c.bin_width_hz
    lo = int(0.5 * period_bin)
    top = lo + int(np.argmax(q[lo:]))
    assert abs(top / period_bin - round(top / period_bin)) < 0.05


def test_unit_mask_gives_spectrogram(monkeypatch):
    rng = np.random.default_rng(1)
    v = stft(rng.normal(size=80), gaussian_window(10.0, 2.0), 20, fs=10.0)
    monkeypatch.setattr(deshape_mod, "istct", lambda c, grid, *a, **k: np.ones((len(grid), c.values.shape[1])))
    W = deshape_stft(v)
    assert np.allclose(W.values[1:], spectrogram(v).values[1:])


def test_zero_mask_rows_are_zero():
    rng = np.random.default_rng(2)
    v = stft(rng.normal(size=120), gaussian_window(10.0, 3.0), 30, fs=10.0)
    W = deshape_stft(v, q_min_bins=5.0).values
    c = stct(power_gamma(v, 0.1))
    U = np.zeros(v.values.shape)
    U[1:] = istct(c, v.freqs[1:], 5.0)
    assert np.all(W[U == 0] == 0)
    assert np.all(W[0] == 0)


def test_gamma_two_single_sinusoid_matches_spectrogram_ridge():
    fs, m = 50.0, 250
    t = np.arange(1000) / fs
    f = np.cos(2 * np.pi * 3.0 * t)
    w = gaussian_window(fs, 6.0)
    v = stft(f, w, m, fs, hop=25)
    cols = interior_columns(1000, w, 25)
    W = deshape_stft(v, gamma=2.0).values
    S = spectrogram(v).values
    assert np.array_equal(np.argmax(W[:, cols], axis=0), np.argmax(S[:, cols], axis=0))


def test_chirp_fundamental_ridge_with_quefrency_cutoff():
    # a cutoff just below half the shortest fundamental period removes the
    # wave-shape envelope from the cepstrum; with the default cutoff the
    # dominant sixth harmonic survives (the weak-fundamental limitation)
    fs, bw = 100.0, 0.04
    m = bins_for_width(fs, bw)
    sc = anhm_scene()
    w = gaussian_window(fs, 8.0)
    v = stft(sc.signal, w, m, fs, hop=10)
    q_min = 0.4 / (1 / fs)  # 0.4 s in quefrency samples
    W = deshape_stft(v, 0.1, q_min_bins=q_min).values
    S = spectrogram(v).values
    cols = interior_columns(len(sc.signal), w, 10)
    f0 = np.rint(sc.true_if[::10] / bw).astype(int)
    for j in cols:
        r = f0[j]
        assert abs(int(np.argmax(W[:, j])) - r) <= 1
        h1_s, h1_w = S[r - 1 : r + 2, j].max(), W[r - 1 : r + 2, j].max()
        for h in range(2, 11):
            rs, rw = S[h * r - 1 : h * r + 2, j].max() / h1_s, W[h * r - 1 : h * r + 2, j].max() / h1_w
            assert 10 * np.log10(rs / max(rw, 1e-300)) >= 10.0


def test_two_component_scene_shows_two_ridges():
    fs = 100.0
    sc = fetal_maternal_scene(fs=fs)
    m = bins_for_width(fs, 0.04)
    w = gaussian_window(fs, 8.0)
    v = stft(sc.signal, w, m, fs, hop=10)
    W = deshape_stft(v, 0.1).values
    cols = interior_columns(len(sc.signal), w, 10)

    def peak_near(c, r):
        i = r - 2 + int(np.argmax(c[r - 2 : r + 3]))
        return c[i] >= c[i - 1] and c[i] >= c[i + 1] and c[i] > 10 * np.median(c[1:200])

    for j in cols:
        assert peak_near(W[:, j], 35) and peak_near(W[:, j], 52)


def test_kind_and_grid_checks():
    rng = np.random.default_rng(3)
    v = stft(rng.normal(size=40), gaussian_window(10.0, 1.0), 10, fs=10.0)
    with pytest.raises(ValueError):
        stct(v)
    with pytest.raises(ValueError):
        deshape_stft(spectrogram(v))
    with pytest.raises(ValueError):
        deshape_stft(v, freq_grid=v.freqs + 0.1)
    assert deshape_stft(v, freq_grid=v.freqs).kind == "deshape"
