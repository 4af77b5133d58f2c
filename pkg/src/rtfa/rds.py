"""Ramanujan de-shape: a periodicity transform along the frequency axis of
each STFT frame, turning a harmonic comb into energy at its spacing.

A comb of spacing ``p`` bins is a signal of period ``p`` along frequency, so
the fundamental frequency reads off as ``p * bin_width``.  The period map
stores period ``p`` on row ``p`` (the row of frequency ``p * bin_width``);
row 0 and rows above ``p_max`` are zero.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import os

import numpy as np

from .ramanujan import get_dictionary
from .rpt import clean_zeros, eop_matrix
from .solver import NotConverged, SolverOptions, solve_batch
from .tfr import TFRMatrix, Window, stft, rows_below

BATCH = 256  # frames per solver call; fixed so results do not depend on threads


@dataclass(frozen=True)
class RDSConfig:
    p_max: int
    f_max_hz: float
    lam: float
    gamma: float = 0.1
    gamma_prime: float = 1.0
    zeta: object = "quad"
    k_neighbors: int = 0
    mask_mode: str = "stft"  # "stft": |V|^gamma' * P ; "none": P alone
    warm_start: bool = False
    hop: int = 1
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if self.p_max < 1 or self.hop < 1 or self.k_neighbors < 0:
            raise ValueError("p_max and hop must be >= 1 and k_neighbors >= 0")
        for name in ("f_max_hz", "lam", "gamma", "gamma_prime"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.mask_mode not in ("stft", "none"):
            raise ValueError("mask_mode must be 'stft' or 'none'")


@dataclass
class RDSResult:
    stft: TFRMatrix
    energy: np.ndarray  # p_max x T, row p-1 is period p
    period_map: np.ndarray  # (M+1) x T, row p is period p
    tfr: TFRMatrix
    coeffs: np.ndarray  # Phi(p_max) x T
    boundary: np.ndarray  # True where the window overhangs the signal
    kkt_max: float

    @property
    def ridge_hz(self) -> np.ndarray:
        """Per-frame argmax row of the output, in Hz (NaN where the column is zero)."""
        v = self.tfr.values
        r = np.argmax(v, axis=0).astype(float)
        r[~np.any(v > 0, axis=0)] = np.nan
        return r * self.tfr.bin_width_hz


def _window_groups(T, k):
    """Map each frame to its clipped neighbour range; group frames by range size."""
    lo = np.maximum(np.arange(T) - k, 0)
    hi = np.minimum(np.arange(T) + k, T - 1)
    size = hi - lo + 1
    return lo, hi, size


def _solve_frames(d, Y, lam, opts, threads):
    T = Y.shape[1]
    X = np.zeros((d.n_cols, T))
    kkt = np.zeros(T)
    failed = []
    batches = [(a, min(a + BATCH, T)) for a in range(0, T, BATCH)]

    def run(ab):
        a, b = ab
        return a, b, solve_batch(d, Y[:, a:b], lam, opts, raise_on_failure=False)

    if threads > 1 and len(batches) > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(run, batches))
    else:
        results = [run(ab) for ab in batches]
    for a, b, sol in results:
        X[:, a:b] = sol.x
        kkt[a:b] = sol.kkt_residual
        failed.extend(a + np.flatnonzero(sol.kkt_residual > opts.kkt_tol))
    return X, kkt, failed


def _solve_warm(d, Y, lam, opts):
    T = Y.shape[1]
    X = np.zeros((d.n_cols, T))
    kkt = np.zeros(T)
    failed = []
    x0 = None
    for j in range(T):
        sol = solve_batch(d, Y[:, j : j + 1], lam, opts, x0=x0, raise_on_failure=False)
        X[:, j] = sol.x[:, 0]
        kkt[j] = sol.kkt_residual[0]
        if kkt[j] > opts.kkt_tol:
            failed.append(j)
        x0 = sol.x[:, 0]
    return X, kkt, failed


def default_threads():
    v = os.environ.get("RTFA_THREADS", "")
    return max(int(v), 1) if v.strip().isdigit() else 1


def rds_decompose(f, window: Window, m_bins: int, cfg: RDSConfig, fs: float = 1.0, threads=None) -> RDSResult:
    """Run the full pipeline and keep every intermediate.

    ``cfg.k_neighbors > 0`` selects the multi-frame variant: frame ``j`` is
    solved jointly with frames ``j-k..j+k`` (clipped to the computed frames).
    """
    threads = default_threads() if threads is None else max(int(threads), 1)
    v = stft(f, window, m_bins, fs, cfg.hop)
    n_rows = rows_below(cfg.f_max_hz, v.bin_width_hz, m_bins)
    if cfg.p_max > n_rows:
        raise ValueError(f"p_max={cfg.p_max} exceeds the {n_rows} rows below f_max")
    Y = np.abs(v.values[:n_rows]) ** cfg.gamma
    d = get_dictionary(n_rows, cfg.p_max, cfg.zeta)
    T = Y.shape[1]
    k = cfg.k_neighbors
    opts = cfg.solver

    if k == 0:
        groups = [(1, np.arange(T), Y)]
    else:
        # sum_j ||y_j - Bx||^2 = s ||mean_j y_j - Bx||^2 + const, so each
        # window of s frames is one problem on its mean with lam / s
        lo, hi, size = _window_groups(T, k)
        groups = []
        for s in np.unique(size):
            cols = np.flatnonzero(size == s)
            Ym = np.empty((n_rows, cols.size))
            for i, j in enumerate(cols):
                Ym[:, i] = Y[:, lo[j] : hi[j] + 1].mean(axis=1)
            groups.append((int(s), cols, Ym))

    X = np.zeros((d.n_cols, T))
    kkt = np.zeros(T)
    failed = []
    for s, cols, Yg in groups:
        lam = cfg.lam if s == 1 else cfg.lam / s
        o = opts if s == 1 else replace(opts, kkt_tol=opts.kkt_tol / s)
        if cfg.warm_start:
            Xg, kg, fg = _solve_warm(d, Yg, lam, o)
        else:
            Xg, kg, fg = _solve_frames(d, Yg, lam, o, threads)
        X[:, cols] = Xg
        kkt[cols] = kg * s  # residual of the multi-frame problem
        failed.extend(cols[np.asarray(fg, dtype=np.int64)])

    for j in range(T):
        X[:, j] = clean_zeros(X[:, j])
    E = eop_matrix(X, cfg.p_max, d.offsets)
    P = np.zeros((m_bins + 1, T))
    top = min(cfg.p_max, m_bins)
    P[1 : top + 1] = E[:top]
    if cfg.mask_mode == "stft":
        R = np.abs(v.values) ** cfg.gamma_prime * P
    else:
        R = P.copy()
    K = window.half_width
    centers = np.arange(T) * cfg.hop
    boundary = (centers < K) | (centers > len(f) - 1 - K)
    params = {
        "p_max": cfg.p_max, "f_max_hz": cfg.f_max_hz, "lambda": cfg.lam, "gamma": cfg.gamma,
        "gamma_prime": cfg.gamma_prime, "zeta": d.zeta_id, "k": k, "mask": cfg.mask_mode,
    }
    tfr = TFRMatrix(R, "rds", v.bin_width_hz, m_bins, v.sample_interval, cfg.hop, 0, params)
    result = RDSResult(v, E, P, tfr, X, boundary, float(kkt.max(initial=0.0)))
    if failed:
        failed = sorted(int(j) for j in failed)
        raise NotConverged(f"solver did not certify frames {failed[:10]}{'...' if len(failed) > 10 else ''}",
                           result, failed)
    return result


def rds(f, window: Window, m_bins: int, cfg: RDSConfig, fs: float = 1.0, threads=None) -> TFRMatrix:
    """De-shaped time-frequency matrix (one frame at a time)."""
    if cfg.k_neighbors != 0:
        cfg = replace(cfg, k_neighbors=0)
    return rds_decompose(f, window, m_bins, cfg, fs, threads).tfr


def vrds(f, window: Window, m_bins: int, cfg: RDSConfig, fs: float = 1.0, threads=None) -> TFRMatrix:
    """Multi-frame variant: neighbouring frames share one coefficient vector."""
    return rds_decompose(f, window, m_bins, cfg, fs, threads).tfr
