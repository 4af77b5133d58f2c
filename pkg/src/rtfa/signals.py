"""Synthetic scenes with ground truth, and the perturbations used to stress them."""

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

# (harmonic, amplitude, phase) of a non-sinusoidal wave shape whose sixth
# harmonic dominates
SIXTH_HARMONIC_SHAPE = (
    (1, 1.0, 0.0), (2, 2.0, 2.0), (3, 3.0, 1.0), (4, 4.0, 0.0), (5, 7.0, 0.0),
    (6, -10.0, 0.0), (7, 8.0, 0.0), (8, 6.0, -1.5), (9, 3.0, 0.8), (10, 1.0, -0.2),
)

# spiky, heartbeat-like shape: slowly decaying harmonic amplitudes
PULSE_SHAPE = tuple((n, float(np.exp(-0.5 * (n / 5.0) ** 2)), 0.0) for n in range(1, 13))


@dataclass(frozen=True)
class SyntheticScene:
    signal: np.ndarray
    clean: np.ndarray
    true_periods: tuple = ()
    true_if: Optional[np.ndarray] = None
    noise_sigma: float = 0.0
    snr_db: Optional[float] = None
    seed: Optional[int] = None
    fs: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.shape(self.signal) != np.shape(self.clean):
            raise ValueError("signal and clean must have the same length")

    def __len__(self):
        return len(self.signal)


def snr_db(clean, noise) -> float:
    """20 log10(std(clean) / std(noise))."""
    return float(20.0 * np.log10(np.std(clean) / np.std(noise)))


def impulse_train_scene(seed: int = 0, n: int = 500, unit_amplitudes: bool = False, envelope: bool = True,
                        amplitude_offset: float = 0.0) -> SyntheticScene:
    """Spikes of height 5 every 15 samples plus height 8 every 21 samples.

    Each spike is scaled by its own uniform(-0.3, 0.3) draw (plus
    ``amplitude_offset``); the first spike of each train is removed and a
    Gaussian envelope ``exp(-n^2/250^2)`` (n from 1) is applied.
    """
    rng = np.random.default_rng(seed)
    idx = np.arange(1, n + 1)
    y1 = np.where(idx % 15 == 0, 5.0, 0.0)
    y2 = np.where(idx % 21 == 0, 8.0, 0.0)
    if unit_amplitudes:
        a1 = np.ones(n)
        a2 = np.ones(n)
    else:
        a1 = rng.uniform(-0.3, 0.3, n) + amplitude_offset
        a2 = rng.uniform(-0.3, 0.3, n) + amplitude_offset
    a1[14] = 0.0
    a2[20] = 0.0
    y = a1 * y1 + a2 * y2
    env = np.exp(-(idx**2) / 250.0**2) if envelope else np.ones(n)
    clean = env * y
    return SyntheticScene(clean.copy(), clean, (15, 21), None, 0.0, None, seed, 1.0, {"envelope": env})


def gaussian_bumps(n: int, period: int, width: float, peak: float) -> np.ndarray:
    """``peak*exp(-(i-c)^2/width^2)`` summed over centers c at multiples of ``period``."""
    idx = np.arange(1, n + 1, dtype=float)
    centers = np.arange(-1, n // period + 2) * period
    return peak * np.exp(-((idx[:, None] - centers[None, :]) ** 2) / width**2).sum(axis=1)


def gaussian_train_scene(seed: int = 0, n: int = 301, snr: Optional[float] = 5.21, sigma: Optional[float] = None,
                         unit_amplitudes: bool = False, amplitude_offset: float = 0.0,
                         envelope: bool = True) -> SyntheticScene:
    """Period-27 (width 9) plus period-17 (width 13) Gaussian bump trains in noise.

    Every sample carries its own uniform(-0.2, 0.2) amplitude (plus
    ``amplitude_offset``), an envelope ``exp(-n^2/(2*301)^2)`` is applied and
    white Gaussian noise is added.  The noise level is ``sigma`` when given,
    otherwise it is set from ``snr`` (dB) against this draw's clean part;
    ``snr=None`` with no ``sigma`` means no noise.
    """
    rng = np.random.default_rng(seed)
    y1 = gaussian_bumps(n, 27, 9.0, 3.0)
    y2 = gaussian_bumps(n, 17, 13.0, 3.0)
    if unit_amplitudes:
        a1 = np.ones(n)
        a2 = np.ones(n)
    else:
        a1 = rng.uniform(-0.2, 0.2, n) + amplitude_offset
        a2 = rng.uniform(-0.2, 0.2, n) + amplitude_offset
    idx = np.arange(1, n + 1)
    env = np.exp(-(idx**2) / (2.0 * 301.0) ** 2) if envelope else np.ones(n)
    clean = env * (a1 * y1 + a2 * y2)
    if sigma is None:
        sigma = 0.0 if snr is None else float(np.std(clean) / 10.0 ** (snr / 20.0))
    scene = SyntheticScene(clean.copy(), clean, (17, 27), None, 0.0, None, seed, 1.0, {"envelope": env})
    return add_noise(scene, sigma, rng) if sigma > 0 else scene


def linear_chirp(f0: float, f1: float, duration: float) -> Callable[[np.ndarray], np.ndarray]:
    """Phase (in cycles) whose derivative moves linearly from f0 to f1 Hz."""
    rate = (f1 - f0) / duration

    def phase(t):
        t = np.asarray(t, dtype=float)
        return f0 * t + 0.5 * rate * t * t

    phase.derivative = lambda t: f0 + rate * np.asarray(t, dtype=float)
    return phase


def anhm_scene(phase_fn=None, shape_coeffs: Sequence = SIXTH_HARMONIC_SHAPE, fs: float = 100.0, duration: float = 20.0,
               seed: Optional[int] = None, amplitude: float = 1.0) -> SyntheticScene:
    """``sum_n a_n cos(2 pi n phi(t) + alpha_n)`` sampled at ``fs`` for ``duration`` seconds.

    ``phase_fn`` maps seconds to cycles and must be strictly increasing; its
    derivative (the instantaneous frequency) is taken from a ``derivative``
    attribute when present and by finite differences otherwise.  The default
    is a chirp from 1.0 to 1.25 Hz.
    """
    if phase_fn is None:
        phase_fn = linear_chirp(1.0, 1.25, duration)
    t = np.arange(int(round(fs * duration))) / fs
    phi = np.asarray(phase_fn(t), dtype=float)
    if np.any(np.diff(phi) <= 0):
        raise ValueError("phase must be strictly increasing")
    if hasattr(phase_fn, "derivative"):
        inst = np.asarray(phase_fn.derivative(t), dtype=float)
    else:
        inst = np.gradient(phi, t)
    f = np.zeros_like(t)
    for n_h, a, alpha in shape_coeffs:
        if not (np.isfinite(a) and np.isfinite(alpha)):
            raise ValueError("shape coefficients must be finite")
        f += a * np.cos(2 * np.pi * n_h * phi + alpha)
    f *= amplitude
    return SyntheticScene(f.copy(), f, (), inst, 0.0, None, seed, float(fs), {"shape": tuple(shape_coeffs)})


def fetal_maternal_scene(fs: float = 100.0, duration: float = 20.0, f_strong: float = 1.4, f_weak: float = 2.08,
                         ratio: float = 5.0, shape_coeffs: Sequence = PULSE_SHAPE, wander: float = 0.0,
                         seed: Optional[int] = None) -> SyntheticScene:
    """Strong plus weak pulse trains (default 1.4 Hz and 2.08 Hz, amplitude ratio 5:1).

    ``wander`` adds a slow sinusoidal drift (Hz) to both rates.  The
    ``true_if`` field holds the strong component; the weak one is in
    ``meta['weak_if']``.
    """
    def drifting(f0, period):
        def phase(t):
            return f0 * t + wander * period / (2 * np.pi) * (1 - np.cos(2 * np.pi * t / period))
        phase.derivative = lambda t: f0 + wander * np.sin(2 * np.pi * np.asarray(t) / period)
        return phase

    strong = anhm_scene(drifting(f_strong, 17.0), shape_coeffs, fs, duration, seed, ratio)
    weak = anhm_scene(drifting(f_weak, 11.0), shape_coeffs, fs, duration, seed, 1.0)
    clean = strong.clean + weak.clean
    return SyntheticScene(
        clean.copy(), clean, (), strong.true_if, 0.0, None, seed, float(fs),
        {"weak_if": weak.true_if, "strong": strong.clean, "weak": weak.clean, "ratio": ratio},
    )


# ---------------------------------------------------------------------------
# perturbations
# ---------------------------------------------------------------------------

def apply_envelope(scene: SyntheticScene, e) -> SyntheticScene:
    """Multiply both the clean part and the observation by a positive envelope."""
    e = np.asarray(e, dtype=float)
    if e.shape != scene.clean.shape:
        raise ValueError("envelope length must match the signal")
    if np.any(~np.isfinite(e)) or np.any(e <= 0):
        raise ValueError("envelope must be strictly positive")
    noise = scene.signal - scene.clean
    clean = scene.clean * e
    meta = {**scene.meta, "envelope_dev": float(np.max(np.abs(e - 1.0))), "envelope_applied": e}
    return replace(scene, signal=clean + noise, clean=clean, meta=meta)


def adjacent_swap_permutation(n: int, blocks, rng, prob: float = 0.5) -> np.ndarray:
    """Index map that, inside each block, swaps one random adjacent pair with probability ``prob``."""
    perm = np.arange(n)
    for start, stop in blocks:
        if stop - start >= 2 and rng.random() < prob:
            i = int(rng.integers(start, stop - 1))
            perm[i], perm[i + 1] = perm[i + 1], perm[i]
    return perm


def _check_blocks(n, blocks):
    blocks = [(int(a), int(b)) for a, b in blocks]
    pos = 0
    for a, b in blocks:
        if a != pos or b <= a:
            raise ValueError("blocks must partition 0..N-1 into consecutive non-empty ranges")
        pos = b
    if pos != n:
        raise ValueError("blocks must cover the whole signal")
    return blocks


def apply_jitter(scene: SyntheticScene, blocks, seed=None, perm=None, prob: float = 0.5) -> SyntheticScene:
    """Permute samples of the clean part within each block ``[start, stop)``.

    ``perm`` (an index map) is validated against the blocks; when omitted a
    random adjacent swap per block is drawn from ``seed``.
    """
    n = len(scene.clean)
    blocks = _check_blocks(n, blocks)
    if perm is None:
        perm = adjacent_swap_permutation(n, blocks, np.random.default_rng(seed), prob)
    perm = np.asarray(perm, dtype=np.int64)
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
        raise ValueError("perm must be a permutation of 0..N-1")
    for a, b in blocks:
        if np.any((perm[a:b] < a) | (perm[a:b] >= b)):
            raise ValueError(f"perm moves samples across block [{a}, {b})")
    noise = scene.signal - scene.clean
    clean = scene.clean[perm]
    return replace(scene, signal=clean + noise, clean=clean, meta={**scene.meta, "jitter": perm, "blocks": blocks})


def add_noise(scene: SyntheticScene, sigma: float, seed=None) -> SyntheticScene:
    """Add white Gaussian noise of standard deviation ``sigma`` to the observation."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return scene
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    e = rng.normal(0.0, sigma, len(scene.clean))
    noise = scene.signal - scene.clean + e
    return replace(scene, signal=scene.clean + noise, noise_sigma=float(np.hypot(scene.noise_sigma, sigma)),
                   snr_db=snr_db(scene.clean, noise))


def sigma_for_snr(clean, snr: float) -> float:
    return float(np.std(clean) / 10.0 ** (snr / 20.0))
